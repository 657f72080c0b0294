"""Laplacian assembly, structured matrices, cutting matrices and projectors."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.io
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from .graphs import GridGraph
from .grid import MultiIndex
from .symbols import MatrixSymbol

DENSE_CAP = 5000


# ------------------------------------------------------------ matrix types


@dataclass(eq=False)
class StructuredMatrix:
    """Sparse core plus symbolic low-rank terms ``alpha u v^T``.

    Parameters
    ----------
    core : scipy sparse matrix (stored as CSR with sorted indices)
    structure : str
        Free-form tag, e.g. ``"laplacian"``, ``"toeplitz"``.
    meta : dict
        Provenance, e.g. the generating symbol or grid size.
    low_rank : list of (alpha, u, v)
    """

    core: sp.csr_matrix
    structure: str = "sparse"
    meta: dict = field(default_factory=dict)
    low_rank: list = field(default_factory=list)

    def __post_init__(self):
        core = sp.csr_matrix(self.core)
        core.sum_duplicates()
        core.sort_indices()
        self.core = core

    @property
    def shape(self) -> tuple[int, int]:
        return self.core.shape

    @property
    def dtype(self):
        return self.core.dtype

    def __matmul__(self, x):
        return matvec(self, x)

    def toarray(self) -> np.ndarray:
        out = self.core.toarray()
        for alpha, u, v in self.low_rank:
            out += alpha * np.outer(u, v)
        return out

    def diagonal(self) -> np.ndarray:
        out = self.core.diagonal().copy()
        for alpha, u, v in self.low_rank:
            out += alpha * u * v
        return out

    def as_operator(self) -> LinearOperator:
        return LinearOperator(self.shape, matvec=lambda x: matvec(self, x), dtype=float)


@dataclass
class LaplacianSystem:
    """Graph Laplacian, right-hand side and bookkeeping for one problem size."""

    A: StructuredMatrix
    b: np.ndarray
    scale: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.A.shape[0] != len(self.b):
            raise ValueError("right-hand side length differs from matrix dimension")


def as_csr(A) -> sp.csr_matrix:
    if isinstance(A, StructuredMatrix):
        if A.low_rank:
            raise ValueError("matrix has low-rank terms; use matvec")
        return A.core
    if sp.issparse(A):
        return sp.csr_matrix(A)
    return sp.csr_matrix(np.asarray(A))


def matvec(A, x: np.ndarray) -> np.ndarray:
    """``A x`` with low-rank terms applied as ``alpha (v . x) u``."""
    x = np.asarray(x)
    if isinstance(A, StructuredMatrix):
        if x.shape[0] != A.shape[1]:
            raise ValueError(f"dimension mismatch: {A.shape} vs {x.shape}")
        y = A.core @ x
        for alpha, u, v in A.low_rank:
            y = y + alpha * (v @ x) * u if x.ndim == 1 else y + alpha * np.outer(u, v @ x)
        return y
    if callable(A) and not hasattr(A, "shape"):
        return A(x)
    if x.shape[0] != A.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape} vs {x.shape}")
    return A @ x


def add_low_rank(A, u: np.ndarray, v: np.ndarray | None = None, alpha: float = 1.0) -> StructuredMatrix:
    """``A + alpha u v^T`` without forming the dense outer product."""
    A = A if isinstance(A, StructuredMatrix) else StructuredMatrix(as_csr(A))
    u = np.asarray(u, dtype=float)
    v = u if v is None else np.asarray(v, dtype=float)
    if u.shape != (A.shape[0],) or v.shape != (A.shape[1],):
        raise ValueError("low-rank factor dimension mismatch")
    return StructuredMatrix(A.core, A.structure, dict(A.meta), A.low_rank + [(float(alpha), u, v)])


# --------------------------------------------------------------- assembly


def assemble_laplacian(graph: GridGraph) -> StructuredMatrix:
    """``D + K - W``: degree plus potential on the diagonal, minus the weights off it."""
    W = graph.adjacency()
    deg = np.asarray(W.sum(axis=1)).ravel()
    L = (sp.diags(deg + graph.kappa) - W).tocsr()
    return StructuredMatrix(L, "laplacian", {"n": tuple(graph.n), "nu": graph.nu})


def _shift(n: int, k: int) -> sp.spmatrix:
    """Ones at ``(i, j)`` with ``i - j = k``."""
    return sp.eye(n, n, -k, format="csr")


def toeplitz_from_symbol(n: Sequence[int] | int, symbol: MatrixSymbol) -> StructuredMatrix:
    """d-level block Toeplitz matrix ``T_n(f)`` with block ``(i, j) = c_{i-j}``."""
    n = MultiIndex(n)
    if len(n) != symbol.d:
        raise ValueError("grid and symbol dimensions differ")
    coeffs = symbol.real_coeffs()
    for k in coeffs:
        if any(abs(kr) >= nr for kr, nr in zip(k, n)):
            raise ValueError(f"coefficient {k} does not fit in size {tuple(n)}")
    total = None
    for k, c in coeffs.items():
        term = sp.csr_matrix(np.ones((1, 1)))
        for kr, nr in zip(k, n):
            term = sp.kron(term, _shift(nr, kr), format="csr")
        term = sp.kron(term, sp.csr_matrix(c), format="csr")
        total = term if total is None else total + term
    return StructuredMatrix(total.tocsr(), "toeplitz", {"n": tuple(n), "symbol": symbol})


# ------------------------------------------------------------- circulants


class CirculantMatrix:
    """Multilevel block circulant matrix diagonalised by the FFT.

    ``column`` has shape ``(n_1, ..., n_d, nu, nu)``: block ``(i, j)`` of the
    matrix is ``column[(i - j) mod n]``. A constant rank-one term
    ``alpha e e^T`` (``e`` the all-ones vector) can be added exactly, since
    ``e`` lives in the zero-frequency block.
    """

    def __init__(self, column: np.ndarray, ones_shift: float = 0.0):
        column = np.asarray(column, dtype=float)
        if column.ndim < 3 or column.shape[-1] != column.shape[-2]:
            raise ValueError("column must have shape (n_1, ..., n_d, nu, nu)")
        self.column = column
        self.grid = column.shape[:-2]
        self.nu = column.shape[-1]
        self.ones_shift = float(ones_shift)
        axes = tuple(range(len(self.grid)))
        self.eigblocks = np.fft.fftn(column, axes=axes)
        if self.ones_shift:
            zero = (0,) * len(self.grid)
            self.eigblocks[zero] += self.ones_shift * np.prod(self.grid) * np.ones((self.nu, self.nu))
        self._inv = None

    @property
    def shape(self) -> tuple[int, int]:
        N = int(np.prod(self.grid)) * self.nu
        return (N, N)

    def plus_ones(self, alpha: float) -> "CirculantMatrix":
        return CirculantMatrix(self.column, self.ones_shift + alpha)

    def _apply_blocks(self, blocks: np.ndarray, x: np.ndarray) -> np.ndarray:
        axes = tuple(range(len(self.grid)))
        X = np.fft.fftn(x.reshape(*self.grid, self.nu), axes=axes)
        Y = np.einsum("...ij,...j->...i", blocks, X)
        y = np.fft.ifftn(Y, axes=axes)
        return y.real.reshape(-1)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self._apply_blocks(self.eigblocks, np.asarray(x, dtype=float))

    def __matmul__(self, x):
        return self.matvec(x)

    def solve(self, r: np.ndarray) -> np.ndarray:
        if self._inv is None:
            self._inv = np.linalg.inv(self.eigblocks)
        return self._apply_blocks(self._inv, np.asarray(r, dtype=float))

    def eigenvalues(self) -> np.ndarray:
        herm = 0.5 * (self.eigblocks + np.conj(np.swapaxes(self.eigblocks, -1, -2)))
        return np.sort(np.linalg.eigvalsh(herm).ravel())

    def entries(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """Dense submatrix at the given global row/column positions."""
        rows, cols = np.asarray(rows), np.asarray(cols)
        rg, rs = np.divmod(rows, self.nu)
        cg, cs = np.divmod(cols, self.nu)
        ri = np.stack(np.unravel_index(rg, self.grid), axis=1)
        ci = np.stack(np.unravel_index(cg, self.grid), axis=1)
        diff = np.mod(ri[:, None, :] - ci[None, :, :], np.array(self.grid))
        out = self.column[tuple(diff[..., r] for r in range(len(self.grid))) + (rs[:, None], cs[None, :])]
        return out + self.ones_shift

    def toarray(self) -> np.ndarray:
        idx = np.arange(self.shape[0])
        return self.entries(idx, idx)


def strang_circulant(source, n: Sequence[int] | int | None = None) -> CirculantMatrix:
    """Strang circulant of a symbol (``source`` a MatrixSymbol, size ``n``) or of a banded
    symmetric 1-level matrix (dense or sparse).

    The central band is copied and wrapped: ``c_j = t_j`` for ``j <= n/2`` and
    ``c_j = t_{j-n}`` otherwise.
    """
    if isinstance(source, MatrixSymbol):
        if n is None:
            raise ValueError("size needed for a symbol")
        n = MultiIndex(n)
        coeffs = source.real_coeffs()
        nu = source.nu
    else:
        T = source.toarray() if sp.issparse(source) else np.asarray(source, dtype=float)
        if T.ndim != 2 or T.shape[0] != T.shape[1]:
            raise ValueError("matrix must be square")
        m = T.shape[0]
        n = MultiIndex(m) if n is None else MultiIndex(n)
        if n != MultiIndex(m):
            raise ValueError("size does not match the matrix")
        nz = np.flatnonzero(T[:, 0])
        band = int(nz.max()) if len(nz) else 0
        if band > m // 2:
            raise ValueError(f"bandwidth {band} exceeds n/2")
        if not np.allclose(T, T.T):
            raise ValueError("Strang circulant needs a symmetric matrix")
        coeffs = {(k,): np.array([[T[k, 0]]]) for k in range(band + 1)}
        coeffs.update({(-k,): np.array([[T[k, 0]]]) for k in range(1, band + 1)})
        nu = 1
    for k in coeffs:
        if any(abs(kr) > nr // 2 for kr, nr in zip(k, n)):
            raise ValueError(f"coefficient {k} exceeds half the size {tuple(n)}")
    column = np.zeros(tuple(n) + (nu, nu))
    for k, c in coeffs.items():
        pos = tuple(kr % nr for kr, nr in zip(k, n))
        if any(2 * kr == -nr for kr, nr in zip(k, n)):
            # position n/2 keeps t_{n/2} only
            continue
        column[pos] += c
    return CirculantMatrix(column)


# ------------------------------------------------------- cutting/projector


@dataclass(frozen=True)
class CuttingMatrix:
    """Selector ``K_n`` picking every ``g``-th fine index.

    Entry ``(i, j)`` is one iff ``i = offset + g j`` (0-based).
    """

    n: int
    g: int
    k: int
    offset: int

    @property
    def rows(self) -> np.ndarray:
        return self.offset + self.g * np.arange(self.k)

    def matrix(self) -> sp.csr_matrix:
        return sp.csr_matrix((np.ones(self.k), (self.rows, np.arange(self.k))), shape=(self.n, self.k))


def cutting_matrix(n: int, g: int, align: str | int = "first") -> CuttingMatrix:
    """Cutting matrix for fine size ``n`` and coarsening factor ``g``.

    ``align`` chooses the first selected index:

    * ``"first"``: ``i = g j``; ``g`` must divide ``n``, except for odd ``n``
      with ``g = 2`` where ``i = 2 j + 1`` and ``k = (n - 1)/2``.
    * ``"center"``: ``k = n // g`` indices placed symmetrically,
      offset ``(n - g (k - 1) - 1) // 2``.
    * ``"last"``: ``i = g j + g - 1``, i.e. ``delta_{i - g j}`` with 1-based indices.
    * an int: explicit offset.
    """
    if g < 2:
        raise ValueError("coarsening factor must be >= 2")
    k = n // g
    if align == "first":
        if n % g == 0:
            off = 0
        elif g == 2:
            off = 1
        else:
            raise ValueError(f"{g} does not divide {n}")
    elif align == "center":
        off = (n - g * (k - 1) - 1) // 2
    elif align == "last":
        off = g - 1
    elif isinstance(align, (int, np.integer)):
        off = int(align)
    else:
        raise ValueError(f"unknown alignment {align!r}")
    if k < 1 or off < 0 or off + g * (k - 1) > n - 1:
        raise ValueError(f"cannot cut size {n} by {g} with offset {off}")
    return CuttingMatrix(n, g, k, off)


def cutting_matrix_nd(n: Sequence[int], g: int, align: str | int = "first"):
    """Kronecker product ``K_{n_1} x ... x K_{n_d}`` and the coarse size."""
    cuts = [cutting_matrix(int(nr), g, align) for nr in n]
    K = sp.csr_matrix(np.ones((1, 1)))
    for c in cuts:
        K = sp.kron(K, c.matrix(), format="csr")
    return K, MultiIndex(c.k for c in cuts), cuts


@dataclass(eq=False)
class Projector:
    """Prolongation ``P = T_n(p) K_n`` with eliminated rows and columns."""

    P: sp.csr_matrix
    p: MatrixSymbol
    g: int
    n: MultiIndex
    k: MultiIndex
    rows: np.ndarray
    cols: np.ndarray
    cuts: list

    @property
    def shape(self):
        return self.P.shape


def build_projector(n: Sequence[int] | int, g: int, p: MatrixSymbol,
                    keep_fine: np.ndarray | None = None, keep_coarse: np.ndarray | None = None,
                    align: str | int = "first") -> Projector:
    """``T_n(p) K_n`` restricted to the kept fine rows and coarse columns.

    For a ``nu x nu`` symbol the cutting acts on the grid index only (the
    columns are ``K_n x I_nu``). Masks are over grid points, lexicographic,
    and are expanded to all slots of a kept grid point.
    """
    n = MultiIndex(n)
    nu = p.nu
    T = toeplitz_from_symbol(n, p).core
    K, k, cuts = cutting_matrix_nd(n, g, align)
    if nu > 1:
        K = sp.kron(K, sp.identity(nu), format="csr")
    P = (T @ K).tocsr()
    rows = np.arange(P.shape[0]) if keep_fine is None else np.flatnonzero(np.repeat(np.asarray(keep_fine, bool), nu))
    cols = np.arange(P.shape[1]) if keep_coarse is None else np.flatnonzero(np.repeat(np.asarray(keep_coarse, bool), nu))
    if len(cols) == 0:
        raise ValueError("empty coarse mask")
    P = P[rows][:, cols].tocsr()
    P.eliminate_zeros()
    return Projector(P, p, g, n, k, rows, cols, cuts)


def galerkin(A, P) -> sp.csr_matrix:
    """Coarse operator ``P^T A P``."""
    P = P.P if isinstance(P, Projector) else P
    Ac = (P.T @ as_csr(A) @ P).tocsr()
    return Ac


# ----------------------------------------------------------- dense helpers


def dense_eigenvalues(A, cap: int = DENSE_CAP, tol: float = 1e-10) -> np.ndarray:
    """All eigenvalues of a symmetric matrix, ascending (dense solver)."""
    if A.shape[0] > cap:
        raise ValueError(f"dimension {A.shape[0]} exceeds the dense cap {cap}")
    M = A.toarray() if hasattr(A, "toarray") else np.asarray(A, dtype=float)
    if not np.allclose(M, M.T, atol=tol * max(1.0, np.abs(M).max()), rtol=0):
        raise ValueError("matrix is not symmetric")
    return sla.eigvalsh(M)


def is_symmetric(A, tol: float = 0.0) -> bool:
    M = as_csr(A)
    D = (M - M.T).tocsr()
    return D.nnz == 0 or np.abs(D.data).max() <= tol


def is_hpd(A, cap: int = DENSE_CAP) -> bool:
    """Cholesky test (dense, small sizes)."""
    if A.shape[0] > cap:
        raise ValueError("dimension exceeds the dense cap")
    M = A.toarray() if hasattr(A, "toarray") else np.asarray(A)
    try:
        sla.cholesky(M)
    except sla.LinAlgError:
        return False
    return True


def loewner_leq(A, B, tol: float = 1e-12) -> bool:
    """``A <= B`` in the positive-semidefinite order."""
    C = (B.toarray() if hasattr(B, "toarray") else np.asarray(B)) - (A.toarray() if hasattr(A, "toarray") else np.asarray(A))
    return bool(sla.eigvalsh(0.5 * (C + C.T))[0] >= -tol)


# ------------------------------------------------------------------ export


def write_matrix_market(A, path, comment: str = "") -> None:
    """Coordinate Matrix Market file (``symmetric`` when the matrix is)."""
    if isinstance(A, StructuredMatrix) and A.low_rank:
        if A.shape[0] > DENSE_CAP:
            raise ValueError("low-rank terms would densify a large matrix")
        M = sp.coo_matrix(A.toarray())
    else:
        M = sp.coo_matrix(as_csr(A))
    sym = "symmetric" if is_symmetric(sp.csr_matrix(M)) else "general"
    scipy.io.mmwrite(str(path), M, comment=comment, symmetry=sym)


def write_vector_csv(x: np.ndarray, path, header: str = "value") -> None:
    np.savetxt(path, np.asarray(x).reshape(-1, 1), header=header, comments="", fmt="%.17g")
