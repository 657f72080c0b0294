"""Krylov solvers, smoothers and geometric multigrid on structured grids.

All iterations start from the zero vector. Convergence is measured by the
relative residual ``||b - A x|| / ||b||`` unless a reference solution is
supplied, in which case the relative error ``||x - x*|| / ||x*||`` is used.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels
from .graphs import DomainPredicate, domain_mask
from .grid import MultiIndex
from .operators import DENSE_CAP, as_csr, build_projector, cutting_matrix, add_low_rank, matvec
from .symbols import MatrixSymbol


class SolverError(RuntimeError):
    """Raised for invalid solver input (e.g. right-hand side outside the range)."""


# ------------------------------------------------------------------ reports


@dataclass(frozen=True)
class StoppingRule:
    """Relative tolerance, iteration cap and optional reference solution."""

    tol: float = 1e-6
    maxiter: int = 100
    reference: np.ndarray | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.maxiter < 1:
            raise ValueError("maxiter must be >= 1")

    def measure(self, x: np.ndarray, r: np.ndarray, nb: float) -> float:
        if self.reference is not None:
            ref = self.reference
            return float(np.linalg.norm(x - ref) / np.linalg.norm(ref))
        return float(np.linalg.norm(r) / nb)


@dataclass
class SolveReport:
    """Outcome of one iterative solve.

    ``residuals`` holds the monitored quantity (relative residual or relative
    error) before the first iteration and after each one, so its length is
    ``iterations + 1``.
    """

    iterations: int
    residuals: list[float]
    converged: bool
    seconds: float
    x: np.ndarray
    method: str = ""
    maxiter: int = 100
    breakdown: bool = False
    preconditioner_calls: int = 0

    @property
    def final_residual(self) -> float:
        return self.residuals[-1]

    @property
    def label(self) -> str:
        """Iteration count as printed in tables (``">100"`` past the cap)."""
        if self.converged:
            return str(self.iterations)
        return "breakdown" if self.breakdown else f">{self.maxiter}"

    def csv_row(self, experiment: str = "", t: int | None = None, dn: int | None = None) -> dict:
        return {
            "experiment": experiment,
            "t": "" if t is None else t,
            "d_n": "" if dn is None else dn,
            "method": self.method,
            "iterations": self.label,
            "final_residual": f"{self.final_residual:.3e}",
            "seconds": f"{self.seconds:.3f}",
        }

    def table_block(self) -> str:
        lines = [
            f"method      : {self.method}",
            f"iterations  : {self.label}",
            f"converged   : {self.converged}",
            f"residual    : {self.final_residual:.3e}",
            f"seconds     : {self.seconds:.3f}",
        ]
        if self.preconditioner_calls:
            lines.append(f"prec. calls : {self.preconditioner_calls}")
        return "\n".join(lines)


# --------------------------------------------------------------------- CG


def _as_preconditioner(M) -> Callable[[np.ndarray], np.ndarray] | None:
    if M is None:
        return None
    if hasattr(M, "solve"):
        return M.solve
    if isinstance(M, spla.LinearOperator):
        return M.matvec
    if callable(M):
        return M
    raise TypeError("preconditioner must be callable or provide solve()")


def pcg(A, b: np.ndarray, preconditioner=None, stop: StoppingRule = StoppingRule(),
        method: str = "pcg") -> SolveReport:
    """Preconditioned conjugate gradients.

    ``preconditioner`` is ``None``, a callable ``r -> z`` approximating
    ``A^{-1} r``, or an object with ``solve``. A non-positive curvature
    ``p^T A p`` stops the iteration with ``breakdown=True``.
    """
    t0 = time.perf_counter()
    b = np.asarray(b, dtype=float)
    Msolve = _as_preconditioner(preconditioner)
    x = np.zeros_like(b)
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return SolveReport(0, [0.0], True, 0.0, x, method, stop.maxiter)
    r = b.copy()
    hist = [stop.measure(x, r, nb)]
    calls = 0
    z = r.copy() if Msolve is None else np.asarray(Msolve(r), dtype=float)
    calls += Msolve is not None
    p = z.copy()
    rz = r @ z
    converged = breakdown = False
    it = 0
    while it < stop.maxiter:
        Ap = matvec(A, p)
        curv = p @ Ap
        if not curv > 0:
            breakdown = True
            break
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        it += 1
        hist.append(stop.measure(x, r, nb))
        if hist[-1] <= stop.tol:
            converged = True
            break
        if Msolve is None:
            z = r.copy()
        else:
            z = np.asarray(Msolve(r), dtype=float)
            calls += 1
        rz_new = r @ z
        if rz_new <= 0 and Msolve is not None:
            breakdown = True
            break
        p = z + (rz_new / rz) * p
        rz = rz_new
    return SolveReport(it, hist, converged, time.perf_counter() - t0, x, method,
                       stop.maxiter, breakdown, calls)


def cg(A, b: np.ndarray, stop: StoppingRule = StoppingRule()) -> SolveReport:
    """Unpreconditioned conjugate gradients."""
    return pcg(A, b, None, stop, method="cg")


# ---------------------------------------------------------------- smoothers


@dataclass(frozen=True)
class SmootherSpec:
    """Pre/post smoother.

    Parameters
    ----------
    kind : {"gauss_seidel", "richardson"}
    omega_pre, omega_post : float
        Richardson relaxation parameters (ignored by Gauss-Seidel).
    nu_pre, nu_post : int
        Sweep counts.
    sweep : {"forward", "symmetric"}
        Gauss-Seidel ordering. ``symmetric`` runs forward sweeps before the
        coarse correction and backward sweeps after it, which keeps the cycle
        symmetric.
    """

    kind: str = "gauss_seidel"
    omega_pre: float = 1.0
    omega_post: float | None = None
    nu_pre: int = 1
    nu_post: int = 1
    sweep: str = "forward"

    def __post_init__(self):
        if self.kind not in ("gauss_seidel", "richardson"):
            raise ValueError(f"unknown smoother {self.kind!r}")
        if self.sweep not in ("forward", "symmetric"):
            raise ValueError(f"unknown sweep {self.sweep!r}")
        if self.omega_post is None:
            object.__setattr__(self, "omega_post", self.omega_pre)
        if self.omega_pre <= 0 or self.omega_post <= 0:
            raise ValueError("relaxation parameters must be positive")
        if self.nu_pre < 0 or self.nu_post < 0:
            raise ValueError("sweep counts must be nonnegative")


def smoother_apply(spec: SmootherSpec, A, b: np.ndarray, x: np.ndarray, stage: str = "pre") -> np.ndarray:
    """One smoothing step; returns a new vector.

    Richardson: ``x + omega (b - A x)``. Gauss-Seidel: one sweep over the
    lexicographic node order (backward for the post stage of a symmetric
    smoother).
    """
    if stage not in ("pre", "post"):
        raise ValueError("stage is 'pre' or 'post'")
    if spec.kind == "richardson":
        omega = spec.omega_pre if stage == "pre" else spec.omega_post
        return x + omega * (b - matvec(A, x))
    A = as_csr(A)
    _kernels.check_diagonal(A)
    xs = np.array(x, dtype=float, copy=True)
    sweep = _kernels.gs_backward if (stage == "post" and spec.sweep == "symmetric") else _kernels.gs_forward
    return sweep(A.indptr, A.indices, A.data, np.asarray(b, dtype=float), xs)


# ----------------------------------------------------------------- cycles


@dataclass(frozen=True)
class GridGeometry:
    """Grid layout of the unknowns of the finest level.

    Parameters
    ----------
    n : grid size per dimension.
    nu : unknowns per grid point (diamond size).
    mask : bool array over the lexicographic grid ``1..n`` marking the grid
        points that carry unknowns; ``None`` for the full grid.
    domain : if given, coarse masks are recomputed from it on every level
        (a coarse point survives iff its immersed coordinate lies inside).
        Otherwise coarse masks are obtained by injecting the fine mask.
    """

    n: MultiIndex
    nu: int = 1
    mask: np.ndarray | None = None
    domain: DomainPredicate | None = None

    def __post_init__(self):
        object.__setattr__(self, "n", MultiIndex(self.n))
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=bool)
            if mask.shape != (int(np.prod(self.n)),):
                raise ValueError("mask length differs from the grid size")
            object.__setattr__(self, "mask", mask)

    @property
    def size(self) -> int:
        pts = int(np.prod(self.n)) if self.mask is None else int(self.mask.sum())
        return pts * self.nu


@dataclass(frozen=True)
class CycleSpec:
    """Multigrid layout.

    Parameters
    ----------
    kind : {"two_grid", "v_cycle"}
    g : coarsening factor.
    p : projector symbol, or one symbol per level (the last is reused).
    threshold : a level of dimension ``<= threshold`` is solved directly
        (V-cycle only; at least one coarsening always happens).
    align : cutting alignment passed to :func:`gridlap.operators.cutting_matrix`.
    """

    kind: str
    g: int
    p: MatrixSymbol | Sequence[MatrixSymbol]
    threshold: int = 64
    align: str | int = "first"

    def __post_init__(self):
        if self.kind not in ("two_grid", "v_cycle"):
            raise ValueError(f"unknown cycle {self.kind!r}")
        if self.g < 2:
            raise ValueError("coarsening factor must be >= 2")
        if self.threshold < 1:
            raise ValueError("threshold must be >= 1")

    def symbol(self, level: int) -> MatrixSymbol:
        if isinstance(self.p, MatrixSymbol):
            return self.p
        return self.p[min(level, len(self.p) - 1)]


@dataclass(eq=False)
class Level:
    A: sp.csr_matrix
    n: MultiIndex
    mask: np.ndarray | None
    P: sp.csr_matrix | None = None


class CoarseSolver:
    """Direct solve on the coarsest level.

    Dense Cholesky up to :data:`DENSE_CAP`, sparse LU above it. A singular
    (semidefinite) dense matrix falls back to the pseudo-inverse.
    """

    def __init__(self, A: sp.csr_matrix):
        self.n = A.shape[0]
        self.kind = "cholesky"
        if self.n <= DENSE_CAP:
            M = A.toarray()
            try:
                self._fac = sla.cho_factor(M)
                if not np.all(np.isfinite(self._fac[0])):
                    raise sla.LinAlgError("non-finite factor")
                # near-singular matrices pass Cholesky with a tiny pivot
                piv = np.abs(np.diag(self._fac[0]))
                if piv.min() < 1e-7 * piv.max():
                    raise sla.LinAlgError("numerically singular")
            except sla.LinAlgError:
                self.kind = "pinv"
                self._pinv = np.linalg.pinv(M, hermitian=True)
        else:
            self.kind = "splu"
            self._lu = spla.splu(A.tocsc())

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self.kind == "cholesky":
            return sla.cho_solve(self._fac, b)
        if self.kind == "pinv":
            return self._pinv @ b
        return self._lu.solve(b)


def _coarse_mask(geom_domain, level: Level, k: MultiIndex, cuts) -> np.ndarray | None:
    if geom_domain is not None:
        return domain_mask(k, geom_domain)
    if level.mask is None:
        return None
    sel = np.ix_(*(c.rows for c in cuts))
    return level.mask.reshape(tuple(level.n))[sel].ravel()


class Hierarchy:
    """Galerkin multigrid hierarchy ``A_{l+1} = P_l^T A_l P_l``."""

    def __init__(self, A, geometry: GridGeometry, cycle: CycleSpec):
        A = as_csr(A)
        if A.shape[0] != geometry.size:
            raise ValueError(f"matrix dimension {A.shape[0]} differs from the grid ({geometry.size})")
        self.geometry = geometry
        self.cycle = cycle
        self.levels: list[Level] = [Level(A, geometry.n, geometry.mask)]
        while True:
            lev = self.levels[-1]
            depth = len(self.levels) - 1
            if depth >= 1 and (cycle.kind == "two_grid" or lev.A.shape[0] <= cycle.threshold):
                break
            try:
                cuts = [cutting_matrix(int(nr), cycle.g, cycle.align) for nr in lev.n]
            except ValueError:
                if depth == 0:
                    raise
                break
            k = MultiIndex(c.k for c in cuts)
            cmask = _coarse_mask(geometry.domain, lev, k, cuts)
            if cmask is not None and not cmask.any():
                if depth == 0:
                    raise ValueError("coarse grid has no unknowns")
                break
            proj = build_projector(lev.n, cycle.g, cycle.symbol(depth), lev.mask, cmask, cycle.align)
            lev.P = proj.P
            Ac = (proj.P.T @ lev.A @ proj.P).tocsr()
            self.levels.append(Level(Ac, k, cmask))
        self.coarse = CoarseSolver(self.levels[-1].A)

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def dims(self) -> list[int]:
        return [lev.A.shape[0] for lev in self.levels]

    def cycle_once(self, b: np.ndarray, x: np.ndarray, smoother: SmootherSpec, level: int = 0) -> np.ndarray:
        """One two-grid / V-cycle step at ``level``."""
        if level == self.depth - 1:
            return self.coarse.solve(b)
        lev = self.levels[level]
        A = lev.A
        for _ in range(smoother.nu_pre):
            x = smoother_apply(smoother, A, b, x, "pre")
        rc = lev.P.T @ (b - A @ x)
        ec = self.cycle_once(rc, np.zeros(len(rc)), smoother, level + 1)
        x = x + lev.P @ ec
        for _ in range(smoother.nu_post):
            x = smoother_apply(smoother, A, b, x, "post")
        return x

    def iteration_matrix(self, smoother: SmootherSpec) -> np.ndarray:
        """Dense error-propagation matrix of one cycle (small problems only)."""
        N = self.levels[0].A.shape[0]
        if N > DENSE_CAP:
            raise ValueError("dimension exceeds the dense cap")
        zero = np.zeros(N)
        cols = [self.cycle_once(zero, e, smoother) for e in np.eye(N)]
        return np.array(cols).T


def multigrid_solve(hierarchy: Hierarchy, b: np.ndarray, smoother: SmootherSpec,
                    stop: StoppingRule = StoppingRule(), method: str | None = None) -> SolveReport:
    """Iterate cycles from the zero vector until the stopping rule holds."""
    t0 = time.perf_counter()
    A = hierarchy.levels[0].A
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b)
    nb = np.linalg.norm(b)
    method = method or hierarchy.cycle.kind
    if nb == 0.0:
        return SolveReport(0, [0.0], True, 0.0, x, method, stop.maxiter)
    hist = [stop.measure(x, b, nb)]
    converged = False
    it = 0
    while it < stop.maxiter:
        x = hierarchy.cycle_once(b, x, smoother)
        it += 1
        hist.append(stop.measure(x, b - A @ x, nb))
        if hist[-1] <= stop.tol:
            converged = True
            break
        if not np.isfinite(hist[-1]):
            break
    return SolveReport(it, hist, converged, time.perf_counter() - t0, x, method, stop.maxiter)


def two_grid(A, b, geometry: GridGeometry, cycle: CycleSpec, smoother: SmootherSpec,
             stop: StoppingRule = StoppingRule()) -> SolveReport:
    """Two-grid method with a direct coarse solve."""
    if cycle.kind != "two_grid":
        cycle = CycleSpec("two_grid", cycle.g, cycle.p, cycle.threshold, cycle.align)
    return multigrid_solve(Hierarchy(A, geometry, cycle), b, smoother, stop)


def v_cycle(A, b, geometry: GridGeometry, cycle: CycleSpec, smoother: SmootherSpec,
            stop: StoppingRule = StoppingRule()) -> SolveReport:
    """V-cycle: the coarse solve is replaced by a recursive call down to the threshold."""
    if cycle.kind != "v_cycle":
        cycle = CycleSpec("v_cycle", cycle.g, cycle.p, cycle.threshold, cycle.align)
    return multigrid_solve(Hierarchy(A, geometry, cycle), b, smoother, stop)


# ------------------------------------------------- multigrid preconditioning


def mgm_preconditioner(hierarchy: Hierarchy, smoother: SmootherSpec, inner_tol: float = 0.1,
                       inner_maxiter: int = 50, constant_nullspace: bool = False) -> Callable:
    """Preconditioner ``r -> z`` running cycles until ``||r - A z|| <= inner_tol ||r||``.

    With ``constant_nullspace`` the hierarchy operator ``L`` is taken to be
    singular with kernel spanned by ``e``, and ``z`` approximates the
    inverse of ``L + e e^T / d``: the mean-free part of ``r`` goes through
    the cycle and the mean is added back unchanged.
    """
    A = hierarchy.levels[0].A

    def apply(r: np.ndarray) -> np.ndarray:
        mu = r.mean() if constant_nullspace else 0.0
        rp = r - mu
        nr = np.linalg.norm(rp)
        x = np.zeros_like(r)
        if nr == 0.0:
            return x + mu
        for _ in range(inner_maxiter):
            x = hierarchy.cycle_once(rp, x, smoother)
            res = np.linalg.norm(rp - A @ x)
            if not np.isfinite(res):
                raise SolverError("inner cycle diverged")
            if res <= inner_tol * nr:
                break
        if constant_nullspace:
            x = x - x.mean() + mu
        return x

    return apply


def mgm_preconditioned_pcg(A, b, hierarchy: Hierarchy, smoother: SmootherSpec, inner_tol: float = 0.1,
                           stop: StoppingRule = StoppingRule(), constant_nullspace: bool = False) -> SolveReport:
    """PCG on ``A`` preconditioned by inner multigrid cycles on ``hierarchy``."""
    M = mgm_preconditioner(hierarchy, smoother, inner_tol, constant_nullspace=constant_nullspace)
    return pcg(A, b, M, stop, method="mgm-pcg")


def neumann_rank_one_solve(laplacian, b: np.ndarray, preconditioner=None,
                           stop: StoppingRule = StoppingRule(), range_tol: float = 1e-10) -> SolveReport:
    """Solve ``Delta y = b`` with ``e^T y = 0`` through ``(Delta + e e^T / d) y = b``.

    ``b`` must be orthogonal to the constant vector; the rank-one term is
    applied as ``Delta y + e (e^T y) / d`` without forming it.
    """
    b = np.asarray(b, dtype=float)
    d = b.shape[0]
    if abs(b.sum()) / np.sqrt(d) > range_tol * np.linalg.norm(b):
        raise SolverError("right-hand side is not orthogonal to the constant vector")
    A = add_low_rank(laplacian, np.ones(d), alpha=1.0 / d)
    rep = pcg(A, b, preconditioner, stop, method="neumann-cg" if preconditioner is None else "neumann-pcg")
    return rep


def richardson_bound(A) -> float:
    """``2 / lambda_max`` for a symmetric matrix (sparse eigensolver)."""
    A = as_csr(A)
    if A.shape[0] <= 200:
        lam = sla.eigvalsh(A.toarray())[-1]
    else:
        lam = spla.eigsh(A, k=1, which="LA", return_eigenvectors=False)[0]
    return 2.0 / lam
