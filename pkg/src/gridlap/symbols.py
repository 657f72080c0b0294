"""Matrix-valued trigonometric polynomials and spectral checks.

A symbol is ``f(theta) = sum_k c_k exp(i k . theta)`` with ``nu x nu``
coefficients ``c_k`` indexed by integer d-tuples. The multilevel Toeplitz
matrix it generates has block ``(i, j)`` equal to ``c_{i - j}``.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True, eq=False)
class MatrixSymbol:
    """Finite Fourier series with ``nu x nu`` coefficients.

    Parameters
    ----------
    coeffs : mapping from d-tuples of ints to (nu, nu) arrays (or scalars)
    a : callable, optional
        Space-dependent factor ``a(x)`` multiplying the symbol, for
        symbols of the form ``a(x) f(theta)``.
    """

    coeffs: Mapping[tuple[int, ...], np.ndarray]
    a: Callable[..., np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        parsed = {}
        for k, c in self.coeffs.items():
            k = (int(k),) if np.isscalar(k) else tuple(int(v) for v in k)
            c = np.atleast_2d(np.asarray(c, dtype=complex))
            if np.any(c != 0):
                parsed[k] = c
        if not parsed:
            if not self.coeffs:
                raise ValueError("symbol needs at least one coefficient")
            # the zero symbol keeps a zero constant term
            k, c = next(iter(self.coeffs.items()))
            k = (int(k),) if np.isscalar(k) else tuple(int(v) for v in k)
            parsed[(0,) * len(k)] = np.zeros_like(np.atleast_2d(np.asarray(c, dtype=complex)))
        shapes = {c.shape for c in parsed.values()}
        dims = {len(k) for k in parsed}
        if len(shapes) != 1 or len(dims) != 1:
            raise ValueError("coefficients must share block shape and index dimension")
        (shape,) = shapes
        if shape[0] != shape[1]:
            raise ValueError("coefficient blocks must be square")
        for k, c in parsed.items():
            mk = tuple(-v for v in k)
            if mk not in parsed or not np.allclose(parsed[mk], c.conj().T, atol=1e-14, rtol=0):
                raise ValueError(f"coefficients at {k} and {mk} are not Hermitian-paired")
        object.__setattr__(self, "coeffs", parsed)

    @property
    def d(self) -> int:
        return len(next(iter(self.coeffs)))

    @property
    def nu(self) -> int:
        return next(iter(self.coeffs.values())).shape[0]

    @property
    def is_real(self) -> bool:
        return all(np.all(c.imag == 0) for c in self.coeffs.values())

    def degree(self) -> tuple[int, ...]:
        """Largest ``|k_r|`` per direction."""
        ks = np.array(list(self.coeffs))
        return tuple(int(v) for v in np.abs(ks).max(axis=0))

    def real_coeffs(self) -> dict[tuple[int, ...], np.ndarray]:
        if not self.is_real:
            raise ValueError("symbol has complex Fourier coefficients")
        return {k: c.real for k, c in self.coeffs.items()}

    def __call__(self, theta, x=None) -> np.ndarray:
        return eval_symbol(self, theta, x)

    def __add__(self, other: "MatrixSymbol") -> "MatrixSymbol":
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, 0) + c
        return MatrixSymbol(out)

    def scale(self, s: float) -> "MatrixSymbol":
        return MatrixSymbol({k: s * c for k, c in self.coeffs.items()}, a=self.a)

    def with_space_factor(self, a: Callable[..., np.ndarray]) -> "MatrixSymbol":
        return MatrixSymbol(self.coeffs, a=a)


def cosine_polynomial(a0: float, cos_coeffs: Sequence[float] = ()) -> MatrixSymbol:
    """Scalar ``a0 + sum_k a_k cos(k theta)`` in one variable."""
    coeffs = {(0,): a0}
    for k, ak in enumerate(cos_coeffs, start=1):
        if ak:
            coeffs[(k,)] = ak / 2.0
            coeffs[(-k,)] = ak / 2.0
    return MatrixSymbol(coeffs)


def tensor_symbol(*factors: MatrixSymbol) -> MatrixSymbol:
    """Product ``f1(theta_1) f2(theta_2) ...`` of symbols in separate variables.

    Blocks are combined with the Kronecker product, so a scalar factor
    followed by a matrix-valued one gives ``f1(theta) * F2``.
    """
    out = {(): np.ones((1, 1), dtype=complex)}
    for f in factors:
        nxt = {}
        for (k1, c1), (k2, c2) in itertools.product(out.items(), f.coeffs.items()):
            nxt[k1 + k2] = nxt.get(k1 + k2, 0) + np.kron(c1, c2)
        out = nxt
    return MatrixSymbol(out)


def kron_symbol(f: MatrixSymbol, M: np.ndarray) -> MatrixSymbol:
    """``f(theta)`` Kronecker a constant matrix ``M`` (same variables as ``f``)."""
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    return MatrixSymbol({k: np.kron(c, M) for k, c in f.coeffs.items()}, f.a)


def block_symbol(blocks: Mapping[int, np.ndarray]) -> MatrixSymbol:
    """One-variable symbol from blocks ``{k: c_k}`` (missing conjugate partners are filled in)."""
    out = {}
    for k, c in blocks.items():
        c = np.asarray(c, dtype=complex)
        out[(k,)] = c
        if (-k,) not in out and -k not in blocks:
            out[(-k,)] = c.conj().T
    return MatrixSymbol(out)


def constant_symbol(value: float | np.ndarray, d: int = 1) -> MatrixSymbol:
    return MatrixSymbol({(0,) * d: np.atleast_2d(value)})


# --------------------------------------------------------------- evaluation


def _angles(theta, d: int) -> np.ndarray:
    th = np.asarray(theta, dtype=float)
    if th.ndim == 0:
        th = th.reshape(1, 1)
    elif th.ndim == 1:
        th = th.reshape(1, -1) if d > 1 or th.shape[0] == 1 else th.reshape(-1, 1)
    if th.shape[-1] != d:
        raise ValueError(f"expected {d} angle(s) per point")
    return th


def eval_symbol_many(f: MatrixSymbol, theta: np.ndarray, x: np.ndarray | None = None,
                     check_range: bool = True) -> np.ndarray:
    """Evaluate at every row of ``theta`` (shape ``(m, d)``); returns ``(m, nu, nu)``."""
    th = _angles(theta, f.d)
    if check_range and np.any(np.abs(th) > np.pi + 1e-12):
        raise ValueError("angles must lie in [-pi, pi]")
    ks = np.array(list(f.coeffs), dtype=float)
    cs = np.stack(list(f.coeffs.values()))
    phase = np.exp(1j * th @ ks.T)
    out = np.einsum("mk,kij->mij", phase, cs)
    # enforce exact Hermitian symmetry lost to rounding
    out = 0.5 * (out + np.conj(np.swapaxes(out, 1, 2)))
    if f.a is not None:
        if x is None:
            raise ValueError("symbol has a space factor: pass x")
        xs = np.atleast_2d(np.asarray(x, dtype=float))
        ax = np.asarray(f.a(*xs.T), dtype=float).reshape(-1)
        out = out * (ax[:, None, None] if len(ax) == len(out) else ax[0])
    return out


def eval_symbol(f: MatrixSymbol, theta, x=None) -> np.ndarray:
    """``f(theta)`` as a ``nu x nu`` Hermitian matrix (times ``a(x)`` if present)."""
    th = _angles(theta, f.d)
    if th.shape[0] != 1:
        raise ValueError("eval_symbol takes a single angle tuple; use eval_symbol_many")
    return eval_symbol_many(f, th, x)[0]


def uniform_angles(m: int, d: int, full: bool = False) -> np.ndarray:
    """Tensor grid of ``m**d`` midpoint angles on ``[0, pi]^d`` (or ``[-pi, pi]^d``)."""
    if full:
        t = -np.pi + TWO_PI * (np.arange(m) + 0.5) / m
    else:
        t = np.pi * (np.arange(m) + 0.5) / m
    grids = np.meshgrid(*([t] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


@dataclass
class SymbolSample:
    """Eigenvalue samples of a symbol on an angle grid (optionally times a space grid).

    Attributes
    ----------
    theta : (m, d) angles
    curves : (m, nu) sorted eigenvalues at each angle (times ``a(x)`` samples
        when the symbol has a space factor, in which case ``m`` counts
        angle/space pairs)
    values : sorted flat array of all samples
    curve_min : minimum of each eigenvalue curve
    """

    theta: np.ndarray
    curves: np.ndarray
    values: np.ndarray = field(init=False)
    curve_min: np.ndarray = field(init=False)

    def __post_init__(self):
        self.values = np.sort(self.curves.ravel())
        self.curve_min = self.curves.min(axis=0)

    def write_csv(self, path) -> None:
        d = self.theta.shape[1]
        nu = self.curves.shape[1]
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow([f"theta{r + 1}" for r in range(d)] + [f"lambda{j + 1}" for j in range(nu)])
            for th, lam in zip(self.theta, self.curves):
                out.writerow([f"{v:.12g}" for v in th] + [f"{v:.12g}" for v in lam])


def symbol_eigencurves(f: MatrixSymbol, resolution: int, full: bool = False,
                       x_points: np.ndarray | None = None) -> SymbolSample:
    """Sorted eigenvalues of ``f`` on a uniform grid with ``resolution`` points per angle.

    With a space factor, ``x_points`` (``(p, d_x)``) are combined with every
    angle and the eigenvalues scaled by ``a(x)``.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    th = uniform_angles(resolution, f.d, full)
    lam = np.linalg.eigvalsh(eval_symbol_many(f.with_space_factor(None) if f.a else f, th))
    if f.a is not None:
        if x_points is None:
            raise ValueError("symbol has a space factor: pass x_points")
        ax = np.asarray(f.a(*np.atleast_2d(x_points).T), dtype=float)
        lam = (ax[:, None, None] * lam[None]).reshape(-1, f.nu)
        th = np.tile(th, (len(ax), 1))
    return SymbolSample(th, lam)


# ------------------------------------------------------------- distribution


def weyl_test_family(lo: float, hi: float) -> list[tuple[str, Callable[[np.ndarray], np.ndarray]]]:
    """Identity, square and five clamped minima ``min(x, c)`` with ``c`` spread over ``[lo, hi]``."""
    fam = [("x", lambda v: v), ("x^2", lambda v: v * v)]
    for c in lo + (hi - lo) * np.arange(1, 6) / 6.0:
        fam.append((f"min(x,{c:.4g})", lambda v, c=c: np.minimum(v, c)))
    return fam


def weyl_distance(A, f: MatrixSymbol, x_points: np.ndarray | None = None,
                  cap: int = 5000, return_terms: bool = False):
    """Largest gap between matrix and symbol averages over the test family.

    The symbol is sampled on a uniform midpoint grid of ``[0, pi]^d`` with at
    least as many points as the matrix dimension.
    """
    from .operators import dense_eigenvalues

    lam = dense_eigenvalues(A, cap=cap)
    dn = len(lam)
    m = int(np.ceil(dn ** (1.0 / f.d)))
    if f.a is not None:
        if x_points is None:
            raise ValueError("symbol has a space factor: pass x_points")
        # fewer angles per space point keeps the product grid moderate
        m = max(2, int(np.ceil((dn / max(1, len(x_points))) ** (1.0 / f.d))) + 1)
    samples = symbol_eigencurves(f, max(m, 2), x_points=x_points).values
    lo = min(lam[0], samples[0])
    hi = max(lam[-1], samples[-1])
    terms = {}
    for name, F in weyl_test_family(lo, hi):
        terms[name] = abs(F(lam).mean() - F(samples).mean())
    dist = max(terms.values())
    return (dist, terms) if return_terms else dist


# -------------------------------------------------------------- projectors


def corner_mirror_points(theta, g: int, d: int | None = None):
    """Corner set ``Omega_g(theta)`` and mirror set ``M_g(theta) = Omega \\ {theta}``.

    Angles are reduced to ``[0, 2 pi)``; the first element of ``Omega`` is
    ``theta`` itself.
    """
    if g < 2:
        raise ValueError("coarsening factor must be >= 2")
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    if d is not None and th.size == 1 and d > 1:
        th = np.full(d, th[0])
    base = np.mod(th, TWO_PI)
    shifts = TWO_PI * np.arange(g) / g
    omega = []
    for combo in itertools.product(range(g), repeat=len(base)):
        eta = np.mod(base + shifts[list(combo)], TWO_PI)
        eta[np.isclose(eta, TWO_PI)] = 0.0
        omega.append(tuple(float(v) for v in eta))
    return omega, omega[1:]


def _wrap(th: np.ndarray) -> np.ndarray:
    return np.mod(th + np.pi, TWO_PI) - np.pi


@dataclass
class ProjectorReport:
    """Outcome of :func:`check_projector_conditions`.

    ``ring_sup[j]`` is the largest ``|p(eta)|^2 / f(theta)`` over mirror
    points ``eta`` of angles ``theta`` at distance ``radii[j]`` from the zero.
    """

    radii: np.ndarray
    ring_sup: np.ndarray
    min_corner_sum: float
    bounded: bool
    positive: bool

    @property
    def passed(self) -> bool:
        return self.bounded and self.positive

    @property
    def limsup_estimate(self) -> float:
        return float(self.ring_sup[-1])


def check_projector_conditions(f: MatrixSymbol, p: MatrixSymbol, theta0, g: int,
                               rings: int = 12, grid: int = 257, tol: float = 1e-8,
                               growth: float = 1.05) -> ProjectorReport:
    """Numerical check of the two grid-transfer conditions for scalar symbols.

    (i) ``|p(eta)|^2 / f(theta)`` stays bounded for mirror points ``eta`` of
    ``theta`` as ``theta -> theta0``: sampled on rings of radius ``2**-j``;
    the sup is accepted as bounded when it does not grow by more than
    ``growth`` between the last two rings (a ratio that blows up doubles or
    quadruples per ring).
    (ii) ``sum_{eta in Omega_g(theta)} |p(eta)|^2 > tol`` everywhere on a
    uniform grid.
    """
    if f.nu != 1 or p.nu != 1:
        raise ValueError("projector conditions are checked for scalar symbols")
    d = f.d
    th0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    grid_pts = uniform_angles(grid, d, full=True)
    fvals = eval_symbol_many(f, grid_pts).real[:, 0, 0]
    if fvals.min() < -1e-12:
        raise ValueError("f is negative on the sampling grid")

    def p2(points):
        return np.abs(eval_symbol_many(p, _wrap(points), check_range=False)[:, 0, 0]) ** 2

    radii = 2.0 ** -np.arange(1, rings + 1)
    if d == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        ang = np.linspace(0, TWO_PI, 16, endpoint=False)
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1) if d == 2 else \
            np.vstack([np.eye(d), -np.eye(d)])
    sups = []
    shifts = [np.array(s) for s in itertools.product(TWO_PI * np.arange(g) / g, repeat=d)][1:]
    for r in radii:
        pts = th0 + r * dirs
        fv = eval_symbol_many(f, _wrap(pts), check_range=False).real[:, 0, 0]
        worst = 0.0
        for s in shifts:
            worst = max(worst, float(np.max(p2(pts + s) / fv)))
        sups.append(worst)
    sups = np.array(sups)
    bounded = bool(np.isfinite(sups[-1]) and sups[-1] <= growth * sups[-2] + 1e-12)
    corner = np.zeros(len(grid_pts))
    for s in itertools.product(TWO_PI * np.arange(g) / g, repeat=d):
        corner += p2(grid_pts + np.array(s))
    return ProjectorReport(radii, sups, float(corner.min()), bounded, bool(corner.min() > tol))


def symbol_ratio_range(f: MatrixSymbol, p: MatrixSymbol, m: int = 4097) -> tuple[np.ndarray, np.ndarray]:
    """Angles in ``(0, pi]`` and the ratio ``f/p`` there (scalar, one variable)."""
    th = np.linspace(0, np.pi, m)[1:].reshape(-1, 1)
    fv = eval_symbol_many(f, th).real[:, 0, 0]
    pv = eval_symbol_many(p, th).real[:, 0, 0]
    return th[:, 0], fv / pv


# -------------------------------------------------------------- named ones


def laplacian_1d_symbol() -> MatrixSymbol:
    """``2 - 2 cos(theta)``."""
    return cosine_polynomial(2.0, [-2.0])


def linear_interpolation_symbol() -> MatrixSymbol:
    """``2 + 2 cos(theta)``: linear interpolation for coarsening factor 2."""
    return cosine_polynomial(2.0, [2.0])


def q_symbol() -> MatrixSymbol:
    """``4 + 6 cos(theta) + 4 cos(2 theta) + 2 cos(3 theta)``."""
    return cosine_polynomial(4.0, [6.0, 4.0, 2.0])


def five_point_symbol() -> MatrixSymbol:
    """``4 - 2 cos(theta_1) - 2 cos(theta_2)``."""
    return MatrixSymbol({(0, 0): 4.0, (1, 0): -1.0, (-1, 0): -1.0, (0, 1): -1.0, (0, -1): -1.0})


def disk_diffusion(x, y):
    return 1.0 + (x - 0.5) ** 2 + (y - 0.5) ** 2


def disk_symbol() -> MatrixSymbol:
    """``p(x, y) (4 - 2 cos(theta_1) - 2 cos(theta_2))`` with ``p = 1 + (x-1/2)^2 + (y-1/2)^2``."""
    return five_point_symbol().with_space_factor(disk_diffusion)


def theta_squared_symbol(order: int, d: int = 2) -> MatrixSymbol:
    """Fourier series of ``theta_1^2 + ... + theta_d^2`` truncated at ``|k| <= order``.

    The series of ``theta^2`` on ``[-pi, pi]`` is ``pi^2/3 + sum_k 4 (-1)^k cos(k theta)/k^2``;
    the truncation error is at most ``4 d / order`` in the sup norm.
    """
    coeffs = {(0,) * d: d * np.pi**2 / 3.0}
    for r in range(d):
        for k in range(1, order + 1):
            c = 2.0 * (-1.0) ** k / k**2
            for s in (k, -k):
                idx = [0] * d
                idx[r] = s
                coeffs[tuple(idx)] = c
    return MatrixSymbol(coeffs)


def iga_symbol() -> MatrixSymbol:
    """``(160 - 60 cos(theta) - 96 cos(2 theta) - 4 cos(3 theta)) / 240``."""
    return cosine_polynomial(160 / 240, [-60 / 240, -96 / 240, -4 / 240])


def fem_symbol() -> MatrixSymbol:
    """2x2 symbol ``(1/3){[[4,-2],[-2,8]] + [[0,-2],[-2,-4]] cos + [[0,-2],[2,0]] i sin}``."""
    c0 = np.array([[4.0, -2.0], [-2.0, 8.0]]) / 3
    ccos = np.array([[0.0, -2.0], [-2.0, -4.0]]) / 3
    csin = np.array([[0.0, -2.0], [2.0, 0.0]]) / 3
    # a cos + i b sin = (a + b)/2 e^{i th} + (a - b)/2 e^{-i th}
    return MatrixSymbol({(0,): c0, (1,): (ccos + csin) / 2, (-1,): (ccos - csin) / 2})


DIAMOND_W = np.array([[0, 1, 2, 3], [1, 0, 0, 0], [2, 0, 0, 0], [3, 0, 0, 0]], dtype=float)
DIAMOND_L = np.array([[10, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0], [0, 1, 0, 0]], dtype=float)


def diamond_symbol(W: np.ndarray = DIAMOND_W, L: np.ndarray = DIAMOND_L) -> MatrixSymbol:
    """``D - [W + (L + L^T) cos(theta) + (L - L^T) i sin(theta)]`` with ``D`` the full degrees."""
    D = np.diag(W.sum(axis=1) + L.sum(axis=1) + L.sum(axis=0))
    return MatrixSymbol({(0,): D - W, (1,): -L, (-1,): -L.T})


def diamond_projector_symbol() -> MatrixSymbol:
    """``q(theta)`` times the 4x4 matrix with 2 on the diagonal and 1 elsewhere."""
    return kron_symbol(q_symbol(), np.ones((4, 4)) + np.eye(4))
