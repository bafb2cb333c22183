"""Lattice: grids, Laplacian, Hamiltonian assembly, coupling sequences."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specpert.geometry import interval_set
from specpert.lattice import (
    CouplingSeq,
    DiscreteOperator,
    Grid,
    LatticeError,
    assemble_hamiltonian,
    build_laplacian,
    graph_norm,
    laplacian_eigenvalues_1d,
)
from specpert.potentials import ConstantProfile, PotentialFamily, PotentialTerm


def grid_1d(n=32, a=0.0, b=1.0):
    return Grid(extent=((a, b),), points=(n,))


class TestGrid:
    def test_spacing(self):
        g = grid_1d(11, 0.0, 1.0)
        assert g.spacing == (0.1,)
        assert g.size == 11

    def test_budget(self):
        with pytest.raises(LatticeError):
            Grid(extent=((0, 1), (0, 1), (0, 1)), points=(200, 200, 200))

    def test_rejects_tiny_axes(self):
        with pytest.raises(LatticeError):
            Grid(extent=((0, 1),), points=(2,))

    def test_nodes_row_major(self):
        g = Grid(extent=((0, 1), (0, 2)), points=(3, 3))
        nodes = g.nodes()
        assert nodes.shape == (9, 2)
        np.testing.assert_allclose(nodes[0], [0, 0])
        np.testing.assert_allclose(nodes[1], [0, 1])
        np.testing.assert_allclose(nodes[3], [0.5, 0])


class TestLaplacian:
    def test_affine_function_interior(self):
        g = grid_1d(50)
        h0 = build_laplacian(g)
        f = g.nodes()[:, 0]
        out = h0.matvec(f)
        # Second difference of an affine function vanishes away from the
        # Dirichlet boundary rows.
        np.testing.assert_allclose(out[1:-1], 0.0, atol=1e-10)

    def test_zero_vector(self):
        h0 = build_laplacian(grid_1d())
        np.testing.assert_array_equal(h0.matvec(np.zeros(h0.dim)), 0.0)

    @pytest.mark.parametrize("n", [8, 33, 100])
    def test_eigenvalues_closed_form(self, n):
        g = grid_1d(n, 0.0, 2.0)
        h0 = build_laplacian(g)
        computed = np.sort(np.linalg.eigvalsh(h0.to_dense()))
        oracle = np.sort(laplacian_eigenvalues_1d(n, g.spacing[0]))
        scale = np.abs(oracle).max()
        np.testing.assert_allclose(computed, oracle, atol=1e-10 * scale)

    def test_3d_kron_sum_spectrum(self):
        g = Grid(extent=((0, 1), (0, 1), (0, 1)), points=(4, 4, 4))
        h0 = build_laplacian(g)
        e1 = laplacian_eigenvalues_1d(4, g.spacing[0])
        oracle = np.sort((e1[:, None, None] + e1[None, :, None] + e1[None, None, :]).ravel())
        computed = np.sort(np.linalg.eigvalsh(h0.to_dense()))
        np.testing.assert_allclose(computed, oracle, atol=1e-9 * oracle.max())

    def test_hermitian_flag_enforced(self):
        import scipy.sparse as sp

        with pytest.raises(LatticeError):
            DiscreteOperator(sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]])),
                             hermitian=True)


def constant_family(values, supports):
    terms = [
        PotentialTerm(profile=ConstantProfile(v), support=s)
        for v, s in zip(values, supports)
    ]
    return PotentialFamily(terms)


class TestAssembly:
    def test_zero_beta_returns_h0(self):
        g = grid_1d()
        h0 = build_laplacian(g)
        fam = constant_family([1.0], [interval_set(0.0, 1.0)])
        h = assemble_hamiltonian(h0, fam, CouplingSeq((0.0,)))
        assert (h.matrix != h0.matrix).nnz == 0

    def test_constant_shift(self):
        g = grid_1d()
        h0 = build_laplacian(g)
        c = 2.5
        fam = constant_family([c], [interval_set(-1.0, 2.0)])
        h = assemble_hamiltonian(h0, fam, CouplingSeq((1.0,)))
        oracle = h0.to_dense() + c * np.eye(h0.dim)
        np.testing.assert_allclose(h.to_dense(), oracle, atol=0)

    def test_disjoint_terms_dense_oracle(self):
        g = grid_1d(40, 0.0, 4.0)
        h0 = build_laplacian(g)
        fam = constant_family([1.0, 1.0], [interval_set(0.0, 1.0),
                                           interval_set(2.0, 3.0)])
        beta = CouplingSeq((1.0, -1.0))
        h = assemble_hamiltonian(h0, fam, beta)
        # Dense brute-force assembly oracle.
        nodes = g.nodes()
        v1 = fam.terms[0].evaluate(nodes)
        v2 = fam.terms[1].evaluate(nodes)
        oracle = h0.to_dense() + np.diag(v1 - v2)
        np.testing.assert_allclose(h.to_dense(), oracle.astype(complex), atol=0)
        np.testing.assert_allclose(np.real(h.diagonal() - h0.diagonal()),
                                   np.real(v1 - v2))

    def test_beta_longer_than_family_rejected(self):
        g = grid_1d()
        h0 = build_laplacian(g)
        fam = constant_family([1.0], [interval_set(0.0, 1.0)])
        with pytest.raises(LatticeError):
            assemble_hamiltonian(h0, fam, CouplingSeq((1.0, 2.0)))

    def test_complex_coupling_clears_hermitian_flag(self):
        g = grid_1d()
        h0 = build_laplacian(g)
        fam = constant_family([1.0], [interval_set(0.0, 1.0)])
        h = assemble_hamiltonian(h0, fam, CouplingSeq((1j,)))
        assert not h.hermitian


class TestGraphNorm:
    def test_zero(self):
        h0 = build_laplacian(grid_1d())
        assert graph_norm(h0, np.zeros(h0.dim)) == 0.0

    def test_eigenvector(self):
        h0 = build_laplacian(grid_1d(20))
        vals, vecs = np.linalg.eigh(h0.to_dense())
        psi = vecs[:, 0]
        assert graph_norm(h0, psi) == pytest.approx(1 + abs(vals[0]), rel=1e-12)

    def test_random_vector_dense_oracle(self):
        rng = np.random.default_rng(0)
        h0 = build_laplacian(grid_1d(15))
        psi = rng.standard_normal(h0.dim) + 1j * rng.standard_normal(h0.dim)
        oracle = np.linalg.norm(psi) + np.linalg.norm(h0.to_dense() @ psi)
        assert graph_norm(h0, psi) == pytest.approx(oracle, rel=1e-12)


class TestCouplingSeq:
    def test_computed_norm_inf(self):
        beta = CouplingSeq((1.0, -2.0, 0.5))
        assert beta.norm() == 2.0
        assert beta.declared_norm == 2.0

    def test_declared_must_dominate(self):
        CouplingSeq((1.0, 1.0), p=2, declared_norm=2.0)  # fine, truncation
        with pytest.raises(LatticeError):
            CouplingSeq((1.0, 1.0), p=2, declared_norm=1.0)

    def test_invalid_p(self):
        with pytest.raises(LatticeError):
            CouplingSeq((1.0,), p=0.5)

    @given(
        st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=6),
        st.sampled_from([1.0, 2.0, np.inf]),
    )
    @settings(max_examples=50, deadline=None)
    def test_norm_matches_numpy(self, values, p):
        beta = CouplingSeq(tuple(values), p=p)
        oracle = np.linalg.norm(np.asarray(values), ord=p if np.isfinite(p) else np.inf)
        assert beta.norm() == pytest.approx(float(oracle), abs=1e-12)
