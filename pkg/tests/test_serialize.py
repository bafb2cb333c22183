"""Canonical document schema round-trips."""

import numpy as np
import pytest

from specpert import serialize
from specpert.geometry import Box, PackingConfig, SupportFamily, SupportSet, interval_set
from specpert.lattice import CouplingSeq, Grid, build_laplacian
from specpert.potentials import GaussianBump, PotentialFamily, PotentialTerm
from specpert.serialize import SchemaError


class TestGridRoundTrip:
    def test_roundtrip(self):
        g = Grid(extent=((0.0, 1.0), (0.0, 2.0)), points=(4, 5))
        assert serialize.grid_from_dict(serialize.grid_to_dict(g)) == g

    def test_version_check(self):
        doc = serialize.grid_to_dict(Grid(extent=((0, 1),), points=(4,)))
        doc["schema"] = 99
        with pytest.raises(SchemaError):
            serialize.grid_from_dict(doc)


class TestOperatorText:
    def test_roundtrip(self):
        h0 = build_laplacian(Grid(extent=((0.0, 1.0),), points=(6,)))
        text = serialize.operator_to_coo_text(h0)
        back = serialize.operator_from_coo_text(text)
        assert back.hermitian
        assert (back.matrix != h0.matrix).nnz == 0

    def test_missing_header(self):
        with pytest.raises(SchemaError):
            serialize.operator_from_coo_text("0 0 1.0 0.0\n")


class TestGeometryDocs:
    def test_family_roundtrip(self):
        fam = SupportFamily((interval_set(0, 2), interval_set(1, 3)))
        back = serialize.family_from_dict(serialize.family_to_dict(fam))
        assert back == fam

    def test_packing_roundtrip(self):
        cfg = PackingConfig(centers=np.array([[0.0], [3.0]]), A=1.0)
        back = serialize.packing_from_dict(serialize.packing_to_dict(cfg))
        np.testing.assert_array_equal(back.centers, cfg.centers)
        assert back.A == cfg.A


class TestPotentialDocs:
    def test_term_roundtrip_via_dict(self):
        doc = {
            "profile": {"kind": "gaussian", "center": [1.0], "width": 0.5},
            "support": [[[0.0, 2.0]]],
        }
        term = serialize.term_from_dict(doc)
        assert isinstance(term.profile, GaussianBump)
        assert term.support == SupportSet((Box((0.0,), (2.0,)),))

    def test_unknown_profile_kind(self):
        with pytest.raises(SchemaError):
            serialize.profile_from_dict({"kind": "mystery"})


class TestCouplingDocs:
    def test_roundtrip_complex(self):
        beta = CouplingSeq((1.0, 1j), p=2)
        back = serialize.coupling_from_dict(serialize.coupling_to_dict(beta))
        assert back.values == beta.values
        assert back.p == beta.p

    def test_inf_p_spelled_out(self):
        doc = serialize.coupling_to_dict(CouplingSeq((1.0,), p=np.inf))
        assert doc["p"] == "inf"


class TestCanonicalYaml:
    def test_sorted_and_native(self):
        doc = {"b": np.float64(1.5), "a": np.int64(2), "c": [np.bool_(True)]}
        text = serialize.dump_canonical(doc)
        assert text.index("a:") < text.index("b:") < text.index("c:")
        assert "np." not in text

    def test_malformed_yaml(self):
        with pytest.raises(SchemaError):
            serialize.load_document("a: [unclosed")
