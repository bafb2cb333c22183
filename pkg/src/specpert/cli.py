"""Scenario-driven experiment runner.

A single YAML scenario declares the grid, the potential family, the coupling
sequence and a task list; `run` executes the tasks deterministically for a
fixed seed and writes a structured report plus CSV tables.

Exit codes: 0 all requested checks pass, 1 invariant failure, 2 usage or
schema error, 3 numerical failure.
"""

from __future__ import annotations

import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np

from . import __version__, analytic, bounds, geometry, lattice, potentials, serialize
from .serialize import SchemaError

OUT_ENV_VAR = "SPECPERT_OUT"

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

_TASKS = ("geometry", "stummel", "bounds", "track", "taylor", "sweep", "verify")

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["schema", "seed", "family", "beta", "tasks"],
    "properties": {
        "schema": {"const": 1},
        "seed": {"type": "integer", "minimum": 0},
        "grid": {
            "type": "object",
            "required": ["extent", "points"],
            "properties": {
                "extent": {"type": "array", "minItems": 1, "maxItems": 3},
                "points": {"type": "array", "minItems": 1, "maxItems": 3},
            },
        },
        "family": {"type": "object", "required": ["kind"]},
        "beta": {"type": "object", "required": ["values"]},
        "tolerances": {"type": "object"},
        "tasks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["task"],
                "properties": {"task": {"enum": list(_TASKS)}},
            },
        },
    },
}

DEFAULT_TOLERANCES = {
    "track_residual": 1e-8,
    "projector_defect": 1e-8,
    "stummel": 1e-6,
    "reconstruction": 1e-6,
}


@dataclass
class RunReport:
    """Per-task results plus an invariant pass/fail table."""

    provenance: dict
    tasks: list[dict] = field(default_factory=list)
    invariants: list[dict] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(inv["pass"] for inv in self.invariants)

    def add_invariant(self, name: str, ok: bool, detail: str = ""):
        self.invariants.append({"name": name, "pass": bool(ok), "detail": detail})

    def to_document(self) -> dict:
        # Wall-clock timings are intentionally excluded: outputs must be
        # byte-identical across runs with the same scenario and seed.
        return {
            "schema": serialize.SCHEMA_VERSION,
            "provenance": self.provenance,
            "tasks": self.tasks,
            "invariants": self.invariants,
        }


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: Path, header_comment: str, columns: list[str], rows: list[list]):
    lines = [f"# {line}" for line in header_comment.splitlines()]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (complex, np.complexfloating)):
        v = complex(v)
        return f"{v.real!r}{'+' if v.imag >= 0 else '-'}{abs(v.imag)!r}j"
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


# ---------------------------------------------------------------------------
# Scenario loading


class ScenarioError(Exception):
    pass


def load_scenario(path: Path, overrides: tuple[str, ...] = ()) -> dict:
    import jsonschema

    try:
        doc = serialize.load_document(path.read_text())
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from exc
    except SchemaError as exc:
        raise ScenarioError(str(exc)) from exc
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a mapping")
    for ov in overrides:
        if "=" not in ov:
            raise ScenarioError(f"override must look like key=value, got {ov!r}")
        key, _, raw = ov.partition("=")
        _apply_override(doc, key.strip(), serialize.load_document(raw))
    try:
        jsonschema.validate(doc, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        loc = ".".join(str(p) for p in exc.absolute_path) or "(root)"
        raise ScenarioError(f"scenario field {loc}: {exc.message}") from exc
    return doc


def _apply_override(doc: dict, dotted: str, value):
    parts = dotted.split(".")
    node = doc
    for part in parts[:-1]:
        key = int(part) if isinstance(node, list) else part
        node = node[key]
    last = parts[-1]
    key = int(last) if isinstance(node, list) else last
    node[key] = value


@dataclass
class MatrixSystem:
    """Closed-form system: explicit H0 and perturbation matrices instead of
    a grid-sampled potential family."""

    h0: np.ndarray
    terms: list[np.ndarray]

    def __len__(self) -> int:
        return len(self.terms)


def build_family(spec: dict, rng: np.random.Generator):
    kind = spec["kind"]
    if kind == "matrix":
        h0 = np.asarray(spec["h0"], dtype=complex)
        terms = [np.asarray(t, dtype=complex) for t in spec.get("terms", [])]
        if h0.ndim != 2 or h0.shape[0] != h0.shape[1]:
            raise ScenarioError("family.h0 must be a square matrix")
        for i, t in enumerate(terms):
            if t.shape != h0.shape:
                raise ScenarioError(f"family.terms[{i}] shape differs from h0")
        return MatrixSystem(h0=h0, terms=terms)
    if kind == "explicit":
        return potentials.PotentialFamily(
            [serialize.term_from_dict(t, f"family.terms[{i}]")
             for i, t in enumerate(spec.get("terms", []))]
        )
    if kind == "bump_lattice":
        count = int(spec.get("count", 3))
        spacing = float(spec.get("spacing", 3.0))
        origin = np.asarray(spec.get("origin", [0.0]), dtype=float)
        width = float(spec.get("width", 0.4))
        height = float(spec.get("height", 1.0))
        half = float(spec.get("support_halfwidth", max(3 * width, 1.0)))
        m = origin.size
        terms = []
        for i in range(count):
            center = origin.copy()
            center[0] += i * spacing
            support = geometry.SupportSet((geometry.Box(
                tuple(center - half), tuple(center + half)),))
            terms.append(potentials.PotentialTerm(
                profile=potentials.GaussianBump(tuple(center), width, height),
                support=support,
                center=tuple(center),
            ))
        return potentials.PotentialFamily(terms)
    if kind == "disordered":
        count = int(spec.get("count", 8))
        A = float(spec.get("A", 1.0))
        C = float(spec.get("C", 1.0))
        k = float(spec.get("k", 3.0))
        box = np.asarray(spec.get("box", [[0.0, 4.0 * A * count]]), dtype=float)
        m = len(box)
        centers = _separated_centers(rng, count, box, A)
        terms = [
            potentials.PotentialTerm(
                profile=potentials.DecayTail(tuple(c), C, k),
                center=tuple(c),
                decay=(C, k),
            )
            for c in centers
        ]
        return potentials.PotentialFamily(terms)
    raise ScenarioError(f"unknown family kind {kind!r}")


def _separated_centers(rng: np.random.Generator, count: int, box: np.ndarray,
                       A: float) -> np.ndarray:
    """Jittered-lattice placement guaranteeing min separation > 2A."""
    m = len(box)
    spacing = 2.0 * A * 1.25
    per_axis = max(1, int(math.ceil(count ** (1.0 / m))))
    jitter = 0.2 * A
    pts = []
    idx = np.indices([per_axis + 1] * m).reshape(m, -1).T
    for multi in idx[: count]:
        base = box[:, 0] + spacing * (multi + 0.5)
        pts.append(base + rng.uniform(-jitter, jitter, size=m))
    return np.asarray(pts[:count])


# ---------------------------------------------------------------------------
# Task execution


@dataclass
class RunContext:
    scenario: dict
    grid: lattice.Grid | None
    family: "potentials.PotentialFamily | MatrixSystem"
    beta: lattice.CouplingSeq
    rng: np.random.Generator
    tol: dict
    out: Path
    report: RunReport

    _h0: lattice.DiscreteOperator | None = None
    _term_ops: list | None = None

    def potential_family(self, task: str) -> potentials.PotentialFamily:
        if not isinstance(self.family, potentials.PotentialFamily):
            raise ScenarioError(f"task {task!r} needs a grid-sampled family")
        return self.family

    @property
    def h0(self) -> lattice.DiscreteOperator:
        if self._h0 is None:
            if isinstance(self.family, MatrixSystem):
                import scipy.sparse as sp

                mat = sp.csr_matrix(self.family.h0)
                herm = not (abs(mat - mat.getH())).nnz
                self._h0 = lattice.DiscreteOperator(mat, hermitian=herm)
            else:
                if self.grid is None:
                    raise ScenarioError("scenario needs a grid for this family")
                self._h0 = lattice.build_laplacian(self.grid)
        return self._h0

    @property
    def term_ops(self) -> list:
        """One sparse perturbation matrix per coupling index."""
        import scipy.sparse as sp

        if self._term_ops is None:
            if isinstance(self.family, MatrixSystem):
                self._term_ops = [sp.csr_matrix(t) for t in self.family.terms]
            else:
                self._term_ops = [
                    sp.diags(np.asarray(d, dtype=complex), format="csr")
                    for d in self.family.sample_on(self.grid)
                ]
        return self._term_ops

    def hamiltonian(self, beta_vec: np.ndarray) -> lattice.DiscreteOperator:
        mat = self.h0.matrix.copy()
        for b, op in zip(beta_vec, self.term_ops):
            if b != 0:
                mat = mat + complex(b) * op
        return lattice.DiscreteOperator(mat, hermitian=False, grid=self.grid)

    def beta_vector(self) -> np.ndarray:
        vec = np.zeros(len(self.family), dtype=complex)
        vals = np.asarray(self.beta.values, dtype=complex)
        vec[: len(vals)] = vals
        return vec


def _low_spectrum(op: lattice.DiscreteOperator, k: int) -> np.ndarray:
    """Lowest k+2 eigenvalues (dense for desk-scale operators)."""
    dense = op.to_dense()
    if not op.hermitian:
        vals = np.sort(np.linalg.eigvals(dense).real)
    else:
        vals = np.linalg.eigvalsh(dense)
    return vals[: k + 2]


def _place_contour(op: lattice.DiscreteOperator, eig_index: int,
                   q: int = 64) -> analytic.Contour:
    """Circle around the eig_index-th lowest eigenvalue with radius half the
    gap to its nearest neighbor."""
    dense = op.to_dense()
    vals = np.sort(np.linalg.eigvalsh(dense)) if op.hermitian else np.sort(
        np.linalg.eigvals(dense).real)
    E = vals[eig_index]
    gaps = [abs(E - v) for i, v in enumerate(vals) if i != eig_index]
    gap = min(gaps) if gaps else 1.0
    if gap <= 0:
        raise analytic.TrackingError(f"eigenvalue {eig_index} is degenerate")
    return analytic.Contour(center=complex(E), radius=gap / 2, q=q)


def task_geometry(ctx: RunContext, spec: dict) -> dict:
    sf = ctx.potential_family("geometry").support_family()
    adjacency, n0 = geometry.intersection_stats(sf)
    n1 = geometry.check_fip_variant(sf, radius=float(spec.get("radius", 1.0)))
    partition = geometry.disjoint_refinement(sf)
    per_set = [len(partition.cells_containing(i)) for i in range(1, len(sf) + 1)]
    bound = 2 ** n0
    ok = all(c <= bound for c in per_set)
    ctx.report.add_invariant("geometry.cells_within_2^n0", ok,
                             f"max per-set cells {max(per_set)} vs bound {bound}")
    rows = [
        [j, ";".join(str(i) for i in sorted(c.index_set)), len(c.region.boxes)]
        for j, c in enumerate(partition.cells)
    ]
    _write_csv(
        ctx.out / "geometry_cells.csv",
        "disjoint refinement cells\n"
        "cell: cell id; index_set: 1-based original set indices (';' joined); "
        "boxes: number of boxes in the cell region",
        ["cell", "index_set", "boxes"],
        rows,
    )
    return {
        "n0": n0,
        "n1": n1,
        "cells": len(partition.cells),
        "max_cells_per_set": max(per_set),
        "adjacency_sizes": [len(a) for a in adjacency],
        "pass": ok,
    }


def task_stummel(ctx: RunContext, spec: dict) -> dict:
    family = ctx.potential_family("stummel")
    rho = float(spec.get("rho", 1.5))
    m = family.dim
    union = geometry.SupportSet(tuple(
        b for t in family.terms for b in t.support.boxes))
    probes = potentials.make_probe_grid(union, margin=1.0,
                                        density=int(spec.get("probe_density", 7)))
    params = potentials.StummelParams(rho=rho, m=m,
                                      quad_order=int(spec.get("quad_order", 32)),
                                      probe_points=probes)
    norms = [potentials.stummel_class_norm(t.evaluate, params)
             for t in family.terms]
    bound = potentials.weighted_sum_stummel_bound(family, ctx.beta, params)
    direct = potentials.direct_sum_stummel_norm(family, ctx.beta, params)
    ok = direct <= bound + ctx.tol["stummel"]
    ctx.report.add_invariant("stummel.sum_bound_dominates", ok,
                             f"direct {direct:.6g} vs bound {bound:.6g}")
    _write_csv(
        ctx.out / "stummel_norms.csv",
        f"per-term Stummel norms, rho={rho}, m={m}\n"
        "term: 1-based index; M: probe-grid estimate of sup_x M_(v,rho)(x)",
        ["term", "M"],
        [[i + 1, float(Mi)] for i, Mi in enumerate(norms)],
    )
    return {"rho": rho, "per_term_max": max(norms), "bound": bound,
            "direct": direct, "pass": ok}


def task_bounds(ctx: RunContext, spec: dict) -> dict:
    import scipy.sparse as sp

    beta_vec = ctx.beta_vector()
    vmat = sp.csr_matrix(ctx.h0.matrix.shape, dtype=complex)
    for b, op in zip(beta_vec, ctx.term_ops):
        vmat = vmat + complex(b) * op
    herm = not (abs(vmat - vmat.getH())).nnz
    V = lattice.DiscreteOperator(vmat, hermitian=herm, grid=ctx.grid)
    rb = bounds.estimate_relative_bound(
        V, ctx.h0, probes=int(spec.get("probes", 48)),
        seed=int(ctx.scenario["seed"]))
    stable = bounds.kato_stability_check(rb)
    spectrum = np.linalg.eigvalsh(ctx.h0.to_dense())
    box = bounds.SpectrumBox(float(spectrum[0]), float(spectrum[-1]))
    result = {"a": rb.a, "b": rb.b, "kato_stable": stable,
              "E_min": box.E_min, "E_max": box.E_max}
    try:
        lam = bounds.find_resolvent_point(rb, box)
        margin = bounds.resolvent_margin(rb, box, lam)
        member, smin = analytic.gamma_membership(ctx.hamiltonian, beta_vec, lam)
        ok = member
        result.update({"lambda": [lam.real, lam.imag], "margin": margin,
                       "sigma_min": smin})
        ctx.report.add_invariant("bounds.certified_point_resolvent", ok,
                                 f"margin {margin:.4g}, sigma_min {smin:.4g}")
    except bounds.CertificationError as exc:
        result["certification"] = str(exc)
        ctx.report.add_invariant("bounds.certified_point_resolvent", False, str(exc))
        ok = False
    result["pass"] = ok and stable
    return result


def task_track(ctx: RunContext, spec: dict) -> dict:
    eig_index = int(spec.get("eig_index", 0))
    beta_vec = ctx.beta_vector()
    base = np.zeros_like(beta_vec)
    contour = _place_contour(ctx.h0, eig_index,
                             q=int(spec.get("contour_nodes", 64)))
    psi0 = analytic._reference_vector(ctx.hamiltonian, base, contour)
    res = analytic.track_eigenvalue(ctx.hamiltonian, beta_vec, contour, psi0,
                                    residual_tol=ctx.tol["track_residual"],
                                    defect_tol=ctx.tol["projector_defect"])
    resid = float(np.linalg.norm(
        ctx.hamiltonian(beta_vec).matvec(res.psi) - res.E * res.psi)
        / np.linalg.norm(res.psi))
    ok = (resid <= ctx.tol["track_residual"]
          and res.projector.defect <= ctx.tol["projector_defect"])
    ctx.report.add_invariant("track.residual_and_defect", ok,
                             f"residual {resid:.3g}, defect {res.projector.defect:.3g}")
    _write_csv(
        ctx.out / "track.csv",
        "tracked eigenvalue at the scenario coupling\n"
        "re_e/im_e: eigenvalue (energy units); residual: ||H psi - E psi||/||psi||; "
        "trace_defect: |trace(P) - 1|",
        ["re_e", "im_e", "residual", "trace_defect"],
        [[res.E.real, res.E.imag, resid, abs(res.projector.trace - 1.0)]],
    )
    return {"E": [res.E.real, res.E.imag], "residual": resid,
            "trace_defect": abs(res.projector.trace - 1.0),
            "contour": {"center": [contour.center.real, contour.center.imag],
                        "radius": contour.radius, "q": contour.q},
            "pass": ok}


def task_sweep(ctx: RunContext, spec: dict) -> dict:
    eig_index = int(spec.get("eig_index", 0))
    steps = int(spec.get("steps", 11))
    lo, hi = (float(x) for x in spec.get("range", [0.0, 1.0]))
    if "direction" in spec:
        direction = np.asarray(spec["direction"], dtype=complex)
    else:
        axis = int(spec.get("axis", 1))
        direction = np.zeros(len(ctx.family), dtype=complex)
        direction[axis - 1] = 1.0
    targets = [lo] if steps <= 1 else list(np.linspace(lo, hi, steps))

    base = targets[0] * direction
    h_start = ctx.hamiltonian(base)
    herm = not (abs(h_start.matrix - h_start.matrix.getH())).nnz
    h_start = lattice.DiscreteOperator(h_start.matrix, hermitian=herm,
                                       grid=ctx.grid)
    contour = _place_contour(h_start, eig_index,
                             q=int(spec.get("contour_nodes", 64)))
    psi0 = analytic._reference_vector(ctx.hamiltonian, base, contour)

    rows: list[list] = []
    halvings = 0
    failure: str | None = None
    current = targets[0]
    radius = contour.radius
    for target in targets:
        ok_step = False
        sub_from = current
        pending = [target]
        attempts = 0
        while pending and attempts < 64:
            nxt = pending[-1]
            beta_vec = nxt * direction
            try:
                res = analytic.track_eigenvalue(
                    ctx.hamiltonian, beta_vec, contour, psi0,
                    residual_tol=ctx.tol["track_residual"],
                    defect_tol=ctx.tol["projector_defect"])
            except analytic.AnalyticError:
                attempts += 1
                halvings += 1
                mid = 0.5 * (sub_from + nxt)
                if abs(mid - nxt) < 1e-12:
                    failure = f"step to {nxt:.6g} failed after halving"
                    break
                pending.append(mid)
                continue
            contour = analytic.Contour(center=complex(res.E), radius=radius,
                                       q=contour.q)
            psi0 = res.psi / np.linalg.norm(res.psi)
            sub_from = nxt
            pending.pop()
            if not pending:
                resid = float(np.linalg.norm(
                    ctx.hamiltonian(beta_vec).matvec(res.psi)
                    - res.E * res.psi) / np.linalg.norm(res.psi))
                rows.append([target, res.E.real, res.E.imag, resid,
                             abs(res.projector.trace - 1.0)])
                ok_step = True
        if failure or not ok_step:
            failure = failure or f"step to {target:.6g} failed"
            rows.append([target, math.nan, math.nan, math.nan, math.nan])
            break
        current = target

    _write_csv(
        ctx.out / "sweep.csv",
        "eigenvalue sweep along the coupling direction\n"
        "s: sweep parameter (beta = s * direction); re_e/im_e: tracked "
        "eigenvalue (energy units); residual: ||H psi - E psi||/||psi||; "
        "trace_defect: |trace(P) - 1|",
        ["s", "re_e", "im_e", "residual", "trace_defect"],
        rows,
    )
    ok = failure is None
    ctx.report.add_invariant("sweep.completed", ok, failure or f"{len(rows)} rows")
    return {"rows": len(rows), "halvings": halvings, "failure": failure,
            "pass": ok}


def task_taylor(ctx: RunContext, spec: dict) -> dict:
    eig_index = int(spec.get("eig_index", 0))
    M = int(spec.get("M", 12))
    r = float(spec.get("r", 0.2))
    if "direction" in spec:
        tvec = np.asarray(spec["direction"], dtype=complex)
    else:
        tvec = np.zeros(len(ctx.family), dtype=complex)
        tvec[0] = 1.0
    direction = analytic.Direction(tvec, p=ctx.beta.p)
    base = ctx.beta_vector() * 0.0
    contour = _place_contour(ctx.h0, eig_index,
                             q=int(spec.get("contour_nodes", 64)))
    path = analytic.taylor_eigenpath(
        ctx.hamiltonian, base, direction, contour, r=r, M=max(M, 8),
        q=int(spec.get("q", 128)), residual_tol=ctx.tol["track_residual"],
        defect_tol=ctx.tol["projector_defect"])
    _write_csv(
        ctx.out / "taylor.csv",
        "directional Taylor coefficients of the tracked eigenvalue\n"
        "m: order; re_a/im_a: coefficient A_m (energy units / zeta^m)",
        ["m", "re_a", "im_a"],
        [[m, c.real, c.imag] for m, c in enumerate(path.coefficients)],
    )
    ok = path.rank_one_maintained and not path.contour_crossed
    ctx.report.add_invariant("taylor.path_valid", ok,
                             f"radius estimate {path.radius:.6g}")
    return {"M": M, "radius": None if math.isinf(path.radius) else path.radius,
            "entire_to_tolerance": math.isinf(path.radius), "pass": ok}


def task_verify(ctx: RunContext, spec: dict) -> dict:
    n = len(ctx.family)
    rng = np.random.default_rng(int(ctx.scenario["seed"]) + 1)
    dirs = [analytic.Direction(np.eye(n, dtype=complex)[0])]
    dense_dir = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    dirs.append(analytic.Direction(dense_dir / np.abs(dense_dir).max()))
    d = ctx.h0.dim
    psis = [rng.standard_normal(d) + 1j * rng.standard_normal(d) for _ in range(2)]
    psis = [p / np.linalg.norm(p) for p in psis]
    base_points = [np.zeros(n, dtype=complex), 0.5 * ctx.beta_vector()]
    report = analytic.verify_analytic_family(
        ctx.hamiltonian, base_points, dirs, psis,
        r=float(spec.get("r", 0.2)), M=int(spec.get("M", 8)),
        recon_tol=ctx.tol["reconstruction"])
    ctx.report.add_invariant("verify.analytic_family", report.passed,
                             f"{len(report.failures())} failed of {len(report.records)}")
    return {"checks": len(report.records), "failures": len(report.failures()),
            "pass": report.passed}


_TASK_FUNCS = {
    "geometry": task_geometry,
    "stummel": task_stummel,
    "bounds": task_bounds,
    "track": task_track,
    "taylor": task_taylor,
    "sweep": task_sweep,
    "verify": task_verify,
}


def execute_scenario(doc: dict, out_dir: Path) -> RunReport:
    seed = int(doc["seed"])
    rng = np.random.default_rng(seed)
    grid = None
    if "grid" in doc:
        grid = lattice.Grid(
            extent=tuple((float(a), float(b)) for a, b in doc["grid"]["extent"]),
            points=tuple(int(n) for n in doc["grid"]["points"]),
        )
    family = build_family(doc["family"], rng)
    if grid is None and not isinstance(family, MatrixSystem):
        raise ScenarioError("scenario needs a grid for this family kind")
    beta = serialize.coupling_from_dict({"schema": 1, **doc["beta"]})
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(doc.get("tolerances", {}))

    report = RunReport(provenance={
        "schema_version": serialize.SCHEMA_VERSION,
        "seed": seed,
        "tool_version": __version__,
    })
    ctx = RunContext(scenario=doc, grid=grid, family=family, beta=beta,
                     rng=rng, tol=tol, out=out_dir, report=report)
    for i, task_spec in enumerate(doc["tasks"]):
        name = task_spec["task"]
        t0 = time.perf_counter()
        result = _TASK_FUNCS[name](ctx, task_spec)
        report.timings[f"{i}:{name}"] = time.perf_counter() - t0
        report.tasks.append({"task": name, "index": i, "result": result})
    _atomic_write(out_dir / "report.yaml",
                  serialize.dump_canonical(report.to_document()))
    return report


# ---------------------------------------------------------------------------
# Click interface


def _resolve_out(out: str | None) -> Path:
    if out:
        return Path(out)
    env = os.environ.get(OUT_ENV_VAR)
    return Path(env) if env else Path("specpert-out")


def _run_entry(scenario: str, out: str | None, seed: int | None,
               tol: float | None, threads: int | None,
               overrides: tuple[str, ...], only_tasks: tuple[str, ...] = ()):
    if threads:
        os.environ.setdefault("OMP_NUM_THREADS", str(threads))
    all_overrides = list(overrides)
    if seed is not None:
        all_overrides.append(f"seed={seed}")
    try:
        doc = load_scenario(Path(scenario), tuple(all_overrides))
    except ScenarioError as exc:
        click.echo(f"scenario error: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    if tol is not None:
        tols = doc.setdefault("tolerances", {})
        for key in DEFAULT_TOLERANCES:
            tols[key] = tol
    if only_tasks:
        doc["tasks"] = [t for t in doc["tasks"] if t["task"] in only_tasks]
    out_dir = _resolve_out(out)
    try:
        report = execute_scenario(doc, out_dir)
    except (analytic.AnalyticError, bounds.CertificationError,
            potentials.StummelError, potentials.TailDivergenceError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    except (ScenarioError, SchemaError, lattice.LatticeError,
            geometry.GeometryError, ValueError) as exc:
        click.echo(f"scenario error: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    for name, dt in report.timings.items():
        click.echo(f"  [{name}] {dt:.3f}s", err=True)
    for inv in report.invariants:
        status = "PASS" if inv["pass"] else "FAIL"
        click.echo(f"{status} {inv['name']}: {inv['detail']}")
    click.echo(f"report written to {out_dir / 'report.yaml'}")
    sys.exit(EXIT_OK if report.passed else EXIT_INVARIANT)


_common_options = [
    click.option("--scenario", required=True, type=click.Path(), help="Scenario YAML path."),
    click.option("--out", default=None, help=f"Output directory (or ${OUT_ENV_VAR})."),
    click.option("--seed", default=None, type=int, help="Override the scenario seed."),
    click.option("--tol", default=None, type=float, help="Override all tolerances."),
    click.option("--threads", default=None, type=int, help="Worker thread hint."),
    click.option("--override", "overrides", multiple=True, metavar="KEY=VALUE",
                 help="Dotted-path scenario override, repeatable."),
]


def _with_common(f):
    for opt in reversed(_common_options):
        f = opt(f)
    return f


@click.group()
@click.version_option(__version__)
def main():
    """Scenario-driven spectral perturbation experiments."""


@main.command()
@_with_common
def run(scenario, out, seed, tol, threads, overrides):
    """Execute every task in the scenario."""
    _run_entry(scenario, out, seed, tol, threads, overrides)


@main.command()
@_with_common
def sweep(scenario, out, seed, tol, threads, overrides):
    """Execute only the sweep tasks of the scenario."""
    _run_entry(scenario, out, seed, tol, threads, overrides, only_tasks=("sweep",))


@main.command()
@_with_common
def verify(scenario, out, seed, tol, threads, overrides):
    """Execute only the verify tasks of the scenario."""
    _run_entry(scenario, out, seed, tol, threads, overrides, only_tasks=("verify",))


@main.command("show-schema")
def show_schema():
    """Print the scenario schema (JSON Schema as YAML)."""
    click.echo(serialize.dump_canonical(SCENARIO_SCHEMA))


if __name__ == "__main__":
    main()
