"""Finite-difference discretization: grids, sparse Hermitian operators,
the Dirichlet Laplacian, and assembly of H(beta) = H0 + sum_i beta_i V_i.

Grid nodes are the unknowns; Dirichlet boundary conditions are imposed by
zero ghost nodes one spacing outside each axis.  With N nodes and spacing h
on one axis the 1D Laplacian is tridiag(-1, 2, -1)/h^2 with eigenvalues
(2/h^2)(1 - cos(k pi/(N+1))), k = 1..N.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Grid",
    "DiscreteOperator",
    "CouplingSeq",
    "LatticeError",
    "GridMismatchError",
    "build_laplacian",
    "assemble_hamiltonian",
    "graph_norm",
]

DEFAULT_POINT_BUDGET = 2_000_000


class LatticeError(ValueError):
    """Invalid lattice input."""


class GridMismatchError(LatticeError):
    """Operands sampled on different grids."""


@dataclass(frozen=True)
class Grid:
    """Regular grid on a product of closed intervals, Dirichlet boundary.

    extent[k] = (a_k, b_k); points[k] = N_k nodes placed at
    a_k + j h_k, j = 0..N_k-1 with h_k = (b_k - a_k)/(N_k - 1).
    """

    extent: tuple[tuple[float, float], ...]
    points: tuple[int, ...]
    point_budget: int = DEFAULT_POINT_BUDGET

    def __post_init__(self):
        m = len(self.extent)
        if m not in (1, 2, 3):
            raise LatticeError(f"dimension must be 1, 2 or 3, got {m}")
        if len(self.points) != m:
            raise LatticeError("points/extent dimension mismatch")
        for (a, b), n in zip(self.extent, self.points):
            if n < 3:
                raise LatticeError(f"need at least 3 points per axis, got {n}")
            if b <= a:
                raise LatticeError(f"empty extent [{a}, {b}]")
        if self.size > self.point_budget:
            raise LatticeError(
                f"grid has {self.size} points, budget is {self.point_budget}"
            )

    @property
    def dim(self) -> int:
        return len(self.extent)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((b - a) / (n - 1) for (a, b), n in zip(self.extent, self.points))

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    def axes(self) -> list[np.ndarray]:
        return [
            np.linspace(a, b, n) for (a, b), n in zip(self.extent, self.points)
        ]

    def nodes(self) -> np.ndarray:
        """All grid nodes as a (size, dim) array in C (row-major) order."""
        grids = np.meshgrid(*self.axes(), indexing="ij")
        return np.column_stack([g.ravel() for g in grids])


@dataclass(frozen=True)
class DiscreteOperator:
    """Sparse complex operator with an exactness-enforced hermitian flag."""

    matrix: sp.csr_matrix
    hermitian: bool
    grid: Grid | None = None

    def __post_init__(self):
        mat = sp.csr_matrix(self.matrix, dtype=complex)
        mat.sum_duplicates()
        object.__setattr__(self, "matrix", mat)
        if mat.shape[0] != mat.shape[1]:
            raise LatticeError(f"operator must be square, got {mat.shape}")
        if self.hermitian:
            defect = abs(mat - mat.getH())
            if defect.nnz and defect.max() != 0.0:
                raise LatticeError("hermitian flag set but matrix is not Hermitian")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def matvec(self, psi: np.ndarray) -> np.ndarray:
        psi = np.asarray(psi)
        if psi.shape[0] != self.dim:
            raise LatticeError(f"dimension mismatch: {psi.shape[0]} vs {self.dim}")
        return self.matrix @ psi

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def norm_bound(self) -> float:
        """Cheap upper bound on the operator 2-norm (sqrt(norm1*norminf))."""
        a = abs(self.matrix)
        n1 = a.sum(axis=0).max()
        ninf = a.sum(axis=1).max()
        return float(np.sqrt(n1 * ninf))

    def __add__(self, other: "DiscreteOperator") -> "DiscreteOperator":
        if other.dim != self.dim:
            raise LatticeError("dimension mismatch in operator sum")
        return DiscreteOperator(
            self.matrix + other.matrix,
            hermitian=self.hermitian and other.hermitian,
            grid=self.grid or other.grid,
        )


@dataclass(frozen=True)
class CouplingSeq:
    """Truncation of a coupling sequence beta in l^p(C).

    `declared_norm` defaults to the computed norm of the stored values; an
    explicitly declared norm must dominate the computed one (the stored
    values are a truncation of the full sequence).
    """

    values: tuple[complex, ...]
    p: float = np.inf
    declared_norm: float | None = None

    def __post_init__(self):
        if len(self.values) < 1:
            raise LatticeError("CouplingSeq needs at least one value")
        if not (1 <= self.p):
            raise LatticeError(f"p must be in [1, inf], got {self.p}")
        computed = self.norm()
        if self.declared_norm is None:
            object.__setattr__(self, "declared_norm", computed)
        elif computed > self.declared_norm + 1e-12:
            raise LatticeError(
                f"computed l^{self.p} norm {computed:.12g} exceeds declared "
                f"norm {self.declared_norm:.12g}"
            )

    def norm(self) -> float:
        v = np.abs(np.asarray(self.values, dtype=complex))
        if np.isinf(self.p):
            return float(v.max())
        return float((v**self.p).sum() ** (1.0 / self.p))

    @property
    def is_real(self) -> bool:
        return all(complex(b).imag == 0.0 for b in self.values)

    def __len__(self) -> int:
        return len(self.values)


def _laplacian_1d(n: int, h: float) -> sp.csr_matrix:
    main = np.full(n, 2.0 / h**2)
    off = np.full(n - 1, -1.0 / h**2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def build_laplacian(grid: Grid) -> DiscreteOperator:
    """Standard (2m+1)-point second-order stencil for -Laplace with
    Dirichlet boundary, as a sparse Hermitian operator."""
    parts = [_laplacian_1d(n, h) for n, h in zip(grid.points, grid.spacing)]
    op = parts[0]
    for part in parts[1:]:
        op = sp.kron(op, sp.identity(part.shape[0], format="csr"), format="csr") + sp.kron(
            sp.identity(op.shape[0], format="csr"), part, format="csr"
        )
    return DiscreteOperator(op, hermitian=True, grid=grid)


def laplacian_eigenvalues_1d(n: int, h: float) -> np.ndarray:
    """Closed-form Dirichlet spectrum (2/h^2)(1 - cos(k pi/(n+1))), k=1..n."""
    k = np.arange(1, n + 1)
    return (2.0 / h**2) * (1.0 - np.cos(k * np.pi / (n + 1)))


def assemble_hamiltonian(h0: DiscreteOperator, family, beta: CouplingSeq) -> DiscreteOperator:
    """H(beta) = H0 + sum_i beta_i V_i with diagonal multiplication
    operators V_i sampled on H0's grid.

    `family` must provide `sample_on(grid) -> list of real/complex arrays`
    (one diagonal per term).  Trailing couplings beyond len(beta) are
    treated as zero; beta may not be longer than the family.
    """
    if h0.grid is None:
        raise GridMismatchError("h0 carries no grid; cannot sample potentials")
    diagonals = family.sample_on(h0.grid)
    if len(beta) > len(diagonals):
        raise LatticeError(
            f"beta has {len(beta)} entries but family has only {len(diagonals)} terms"
        )
    acc = np.zeros(h0.dim, dtype=complex)
    profiles_real = True
    for b, d in zip(beta.values, diagonals):
        d = np.asarray(d)
        if d.shape[0] != h0.dim:
            raise GridMismatchError(
                f"potential sampled with {d.shape[0]} values on a {h0.dim}-point grid"
            )
        if not np.all(np.isfinite(d)):
            raise LatticeError("non-finite potential sample")
        if np.iscomplexobj(d) and np.any(d.imag != 0):
            profiles_real = False
        acc += complex(b) * d
    hermitian = h0.hermitian and beta.is_real and profiles_real
    mat = h0.matrix + sp.diags(acc, format="csr")
    if hermitian:
        # Real couplings and profiles: force the diagonal exactly real so
        # the Hermitian check passes at machine-exact level.
        mat = h0.matrix + sp.diags(acc.real, format="csr")
    return DiscreteOperator(mat, hermitian=hermitian, grid=h0.grid)


def graph_norm(h0: DiscreteOperator, psi: np.ndarray) -> float:
    """||psi|| + ||H0 psi|| in the Euclidean discrete norm."""
    psi = np.asarray(psi)
    if psi.shape[0] != h0.dim:
        raise LatticeError(f"dimension mismatch: {psi.shape[0]} vs {h0.dim}")
    return float(np.linalg.norm(psi) + np.linalg.norm(h0.matvec(psi)))
