"""Model problems assembled from grid graphs.

Each builder returns a :class:`ProblemInstance` holding the linear system,
the grid geometry used by the multigrid hierarchy and, when available, the
exact solution at the nodes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
from scipy.interpolate import BSpline

from .graphs import (
    DISK,
    SQRT3,
    TRIANGLE,
    GridGraph,
    MoldGraph,
    attach_potential,
    build_diamond_graph,
    five_point_stencil,
    immersed_grid_graph,
    triangle_stencil,
)
from .operators import LaplacianSystem, StructuredMatrix, add_low_rank, assemble_laplacian
from .solvers import GridGeometry
from .symbols import DIAMOND_L, DIAMOND_W, disk_diffusion

DEFAULT_SEED = 0


@dataclass
class ProblemInstance:
    """Assembled system plus the data needed to solve and check it."""

    name: str
    system: LaplacianSystem
    geometry: GridGeometry | None = None
    graph: GridGraph | None = None
    exact: np.ndarray | None = None
    notes: dict = field(default_factory=dict)

    @property
    def A(self):
        return self.system.A

    @property
    def b(self) -> np.ndarray:
        return self.system.b

    @property
    def dim(self) -> int:
        return len(self.system.b)


def uniform_rhs(d: int, seed: int = DEFAULT_SEED) -> np.ndarray:
    """Reproducible right-hand side with entries uniform in ``[0, 1)``."""
    return np.random.default_rng(seed).uniform(size=d)


# --------------------------------------------------------------- triangle


def triangle_exact(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``u = y (y - sqrt3 x)(y + sqrt3 x - sqrt3)``, zero on the triangle boundary, ``-Delta u = 2 sqrt3``."""
    return y * (y - SQRT3 * x) * (y + SQRT3 * x - SQRT3)


# total weight at a node of the unbounded host lattice: 4 * sum 2(-1)^{k+1}/k^2
TRIANGLE_HOST_TOTAL = 2.0 * np.pi**2 / 3.0


def triangle_graph(n: int, kind: str = "dirichlet") -> GridGraph:
    """Equilateral-triangle graph on the ``n x n`` grid.

    The stencil joins points on the same grid line at distance ``k`` with
    weight ``2(-1)^{k+1}/k^2``. The Dirichlet potential is the weight lost
    with respect to the unbounded lattice.
    """
    g = immersed_grid_graph((n, n), triangle_stencil(n), TRIANGLE)
    if kind == "dirichlet":
        return attach_potential(g, "dirichlet", host_total=TRIANGLE_HOST_TOTAL)
    if kind == "neumann":
        return attach_potential(g, "neumann")
    raise ValueError(f"unknown boundary kind {kind!r}")


def triangle_dirichlet(n: int) -> ProblemInstance:
    """``Delta u = 2 sqrt3 h^2 e`` on the triangle graph (Dirichlet potential)."""
    graph = triangle_graph(n, "dirichlet")
    A = assemble_laplacian(graph)
    h = 1.0 / (n + 1)
    b = np.full(graph.num_nodes, 2.0 * SQRT3 * h * h)
    exact = triangle_exact(graph.coords[:, 0], graph.coords[:, 1])
    geom = GridGeometry((n, n), 1, _grid_mask(graph), TRIANGLE)
    return ProblemInstance("triangle-dirichlet", LaplacianSystem(A, b, h * h), geom, graph, exact, {"n": n})


def triangle_neumann(n: int, seed: int = DEFAULT_SEED) -> ProblemInstance:
    """``(Delta + e e^T / d) y = b`` on the triangle graph with zero potential.

    ``notes["laplacian"]`` keeps the singular ``Delta`` for multigrid.
    """
    graph = triangle_graph(n, "neumann")
    L = assemble_laplacian(graph)
    d = graph.num_nodes
    A = add_low_rank(L, np.ones(d), alpha=1.0 / d)
    b = uniform_rhs(d, seed)
    geom = GridGeometry((n, n), 1, _grid_mask(graph), TRIANGLE)
    return ProblemInstance("triangle-neumann", LaplacianSystem(A, b), geom, graph, None,
                           {"n": n, "laplacian": L})


def _grid_mask(graph: GridGraph) -> np.ndarray:
    n = tuple(graph.n)
    mask = np.zeros(int(np.prod(n)), dtype=bool)
    mask[np.ravel_multi_index(tuple((graph.index - 1).T), n)] = True
    return mask


# ------------------------------------------------------------------- disk

DISK_HOST_WEIGHT = 2.5


def disk_problem(n: int, seed: int = DEFAULT_SEED) -> ProblemInstance:
    """Variable-coefficient 5-point graph on the disk of radius 1/2 centred at (1/2, 1/2).

    Inner edges carry ``p`` at their midpoint. Every missing neighbour
    (outside the disk or outside the grid) is a host edge of weight 5/2, and
    the sampled reaction term ``h^2 exp(x y)`` is added to the potential.
    """
    graph = immersed_grid_graph((n, n), five_point_stencil(), DISK, disk_diffusion)
    count = np.zeros(graph.num_nodes)
    np.add.at(count, graph.edges.ravel(), 1.0)
    h = 1.0 / (n + 1)
    x, y = graph.coords.T
    graph = attach_potential(graph, "custom", values=DISK_HOST_WEIGHT * (4.0 - count), extra=h * h * np.exp(x * y))
    A = assemble_laplacian(graph)
    b = uniform_rhs(graph.num_nodes, seed)
    geom = GridGeometry((n, n), 1, _grid_mask(graph), DISK)
    return ProblemInstance("disk", LaplacianSystem(A, b), geom, graph, None, {"n": n})


# ---------------------------------------------------------------- diamond


def nhdp_reduce(graph: GridGraph, boundary: np.ndarray, h: np.ndarray, f: np.ndarray | None = None):
    """Reduce a nonhomogeneous Dirichlet problem to its interior nodes.

    Parameters
    ----------
    graph : GridGraph with zero potential.
    boundary : bool mask of the boundary nodes.
    h : boundary values, either one per node of ``graph`` or one per boundary node.
    f : forcing on the interior nodes (zeros if omitted).

    Returns
    -------
    interior : GridGraph
        Interior subgraph; its potential is the total weight to the boundary.
    rhs : ndarray
        ``g + f`` with ``g(v) = sum over boundary neighbours w(v, u) h(u)``.
    kept : ndarray
        Positions of the interior nodes in ``graph``.
    """
    boundary = np.asarray(boundary, dtype=bool)
    if not boundary.any():
        raise ValueError("boundary set is empty")
    if np.any(graph.kappa != 0):
        raise ValueError("graph must have zero potential")
    h = np.asarray(h, dtype=float)
    if h.shape == (int(boundary.sum()),):
        full = np.zeros(graph.num_nodes)
        full[boundary] = h
        h = full
    elif h.shape != (graph.num_nodes,):
        raise ValueError("h must have one value per node or per boundary node")
    interior, kept, _ = graph.subgraph(~boundary)
    W = graph.adjacency()
    Wib = W[kept][:, np.flatnonzero(boundary)]
    kappa = np.asarray(Wib.sum(axis=1)).ravel()
    g = Wib @ h[boundary]
    ncomp = csgraph.connected_components(interior.adjacency(), directed=False)[0]
    if ncomp > 1:
        warnings.warn(f"interior graph has {ncomp} connected components", RuntimeWarning, stacklevel=2)
    rhs = g if f is None else g + np.asarray(f, dtype=float)
    return interior.with_potential(kappa), rhs, kept


def diamond_graph(n: int, W: np.ndarray = DIAMOND_W, L: np.ndarray = DIAMOND_L) -> GridGraph:
    """1-level diamond Toeplitz graph with one linking operator at offset 1."""
    return build_diamond_graph(n, MoldGraph(W), [(1, [L])])


def diamond_problem(t: int) -> ProblemInstance:
    """NHDP on the diamond graph with ``n = 4^t`` diamonds; the first and last diamonds are boundary."""
    n = 4**t
    graph = diamond_graph(n)
    k = graph.index[:, 0]
    boundary = (k == 1) | (k == n)
    h = np.zeros(graph.num_nodes)
    hvals = np.array([0.5, 0.25, 0.0, 0.0])
    h[boundary] = hvals[graph.slot[boundary] - 1]
    kin = k[~boundary]
    f = np.sin(kin * graph.slot[~boundary])
    interior, rhs, _ = nhdp_reduce(graph, boundary, h, f)
    A = assemble_laplacian(interior)
    geom = GridGeometry((n - 2,), 4)
    return ProblemInstance("diamond", LaplacianSystem(A, rhs), geom, interior, None, {"n": n})


# -------------------------------------------------------------------- FEM

FEM_W = np.array([[0.0, 2.0], [2.0, 0.0]])
FEM_L = np.array([[0.0, 2.0], [0.0, 2.0]])
FEM_HOST_TOTAL = np.array([4.0, 8.0])


def fem_problem(n: int, seed: int = DEFAULT_SEED) -> ProblemInstance:
    """Block system of size ``2n`` from a 2-node diamond graph, scaled by 1/3.

    Node 2 of diamond ``k`` is joined to both nodes of diamond ``k+1``;
    the Dirichlet potential is taken with respect to the unbounded chain.
    """
    graph = build_diamond_graph(n, MoldGraph(FEM_W), [(1, [FEM_L])])
    graph = attach_potential(graph, "dirichlet", host_total=FEM_HOST_TOTAL)
    L = assemble_laplacian(graph)
    A = StructuredMatrix(L.core / 3.0, "fem", {"n": n})
    b = uniform_rhs(2 * n, seed)
    return ProblemInstance("fem", LaplacianSystem(A, b), GridGeometry((2 * n,), 1), graph, None, {"n": n})


# -------------------------------------------------------------------- IgA


def iga_stiffness(ndof: int, degree: int = 3) -> sp.csr_matrix:
    """``h`` times the B-spline stiffness matrix on ``[0, 1]`` with zero Dirichlet conditions.

    Open uniform knots with ``ndof + 2 - degree`` elements; the two boundary
    functions are removed, leaving ``ndof`` unknowns. Integration is exact
    (Gauss-Legendre with ``degree + 1`` points per element).
    """
    p = degree
    m = ndof + 2 - p
    if m < 1:
        raise ValueError("too few degrees of freedom")
    knots = np.concatenate([np.zeros(p), np.linspace(0.0, 1.0, m + 1), np.ones(p)])
    nb = len(knots) - p - 1
    gx, gw = np.polynomial.legendre.leggauss(p + 1)
    a, b = knots[p:p + m], knots[p + 1:p + m + 1]
    x = ((a + b)[:, None] + (b - a)[:, None] * gx[None]).ravel() / 2.0
    w = ((b - a)[:, None] * gw[None]).ravel() / 2.0
    # B'_{i,p} = p (B_{i,p-1}/(t_{i+p}-t_i) - B_{i+1,p-1}/(t_{i+p+1}-t_{i+1}))
    low = BSpline.design_matrix(x, knots[1:-1], p - 1).tocsc()
    i = np.arange(nb)
    den_l = knots[i + p] - knots[i]
    den_r = knots[i + p + 1] - knots[i + 1]
    cl = np.divide(p, den_l, out=np.zeros(nb), where=den_l > 0)
    cr = np.divide(p, den_r, out=np.zeros(nb), where=den_r > 0)
    # column j of `low` is B_{j+1,p-1} on the original knot vector
    C = sp.lil_matrix((nb - 1, nb))
    for col in range(nb):
        if col >= 1:
            C[col - 1, col] += cl[col]
        if col <= nb - 2:
            C[col, col] -= cr[col]
    D = (low @ C.tocsr()).tocsr()
    K = (D.T @ sp.diags(w) @ D).tocsr()
    return (K[1:-1][:, 1:-1] / m).tocsr()


def iga_problem(ndof: int, seed: int = DEFAULT_SEED) -> ProblemInstance:
    A = StructuredMatrix(iga_stiffness(ndof), "iga", {"ndof": ndof})
    return ProblemInstance("iga", LaplacianSystem(A, uniform_rhs(ndof, seed)), GridGeometry((ndof,), 1),
                           None, None, {"ndof": ndof})


# -------------------------------------------------------- eigen oracles


def equilateral_eigenvalues(kind: str, count: int) -> np.ndarray:
    """Smallest ``count`` eigenvalues of ``-Delta`` on the unit equilateral triangle.

    ``(16 pi^2 / 9)(m^2 + m l + l^2)`` over ordered pairs with
    ``m, l >= 1`` (Dirichlet) or ``m, l >= 0`` (Neumann).
    """
    lo = {"dirichlet": 1, "neumann": 0}.get(kind)
    if lo is None:
        raise ValueError(f"unknown boundary kind {kind!r}")
    M = int(np.sqrt(count)) + 10
    while True:
        m, l = np.meshgrid(np.arange(lo, lo + M), np.arange(lo, lo + M))
        lam = np.sort(((16.0 * np.pi**2 / 9.0) * (m * m + m * l + l * l)).ravel())
        # all pairs below the cut-off bound lam[count] are enumerated once
        bound = (16.0 * np.pi**2 / 9.0) * (lo + M - 1) ** 2
        if len(lam) > count and lam[count] < bound:
            return lam[:count]
        M *= 2


def scaled_graph_eigenvalues(n: int, kind: str) -> np.ndarray:
    """Eigenvalues of ``(n+1)^2 Delta`` for the ``n x n`` triangle graph, ascending."""
    from .operators import dense_eigenvalues

    A = assemble_laplacian(triangle_graph(n, kind))
    return dense_eigenvalues(A) * (n + 1) ** 2


def reference_discretization_oracle(n_ref: int = 128):
    """Oracle returning Richardson-extrapolated graph eigenvalues.

    Uses the sizes ``n_ref`` and ``n_ref/2`` assuming first-order
    convergence, so only the first ``d(n_ref/2)`` eigenvalues are available.
    The fine level exceeds the dense cap; only its lowest ``d(n_ref/2)``
    eigenvalues are computed (``subset_by_index``), once per boundary type.
    """
    cache: dict[str, np.ndarray] = {}

    def extrapolated(kind: str) -> np.ndarray:
        if kind not in cache:
            coarse = scaled_graph_eigenvalues(n_ref // 2, kind)
            A = assemble_laplacian(triangle_graph(n_ref, kind)).toarray()
            fine = sla.eigh(A, eigvals_only=True, subset_by_index=[0, len(coarse) - 1]) * (n_ref + 1) ** 2
            r = (n_ref + 1) / (n_ref // 2 + 1)
            cache[kind] = (r * fine - coarse) / (r - 1.0)
        return cache[kind]

    def oracle(kind: str, count: int) -> np.ndarray:
        mu = extrapolated(kind)
        if count > len(mu):
            raise ValueError(f"oracle provides at most {len(mu)} eigenvalues")
        return mu[:count]
    return oracle
