"""Toeplitz, d-level Toeplitz and diamond Toeplitz graphs.

Graphs are stored as flat numpy arrays: one row per node (grid index,
diamond slot, immersed coordinates, potential) and one row per unordered
edge ``(i, j, w)`` with ``i < j``. Symmetry is materialised when the
Laplacian is assembled.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .grid import DirectionClass, IndexRange, MultiIndex, directions_of, lex_compare

SQRT3 = np.sqrt(3.0)


# ---------------------------------------------------------------- stencils


@dataclass(frozen=True)
class StencilTerm:
    """One offset ``t`` with a weight per direction class of ``t``."""

    offset: MultiIndex
    weights: tuple[float, ...]

    @property
    def classes(self) -> list[DirectionClass]:
        return directions_of(self.offset)


class Stencil:
    """Ordered list of offsets ``0 < t_1 < ... < t_m`` (lexicographically).

    Parameters
    ----------
    terms : iterable of (offset, weight)
        ``weight`` is either a scalar (shared by every direction class of the
        offset) or a sequence with one entry per class, ordered as returned by
        :func:`gridlap.grid.directions_of`.
    """

    def __init__(self, terms: Iterable[tuple[Sequence[int] | int, float | Sequence[float]]]):
        parsed = []
        for offset, w in terms:
            t = MultiIndex(offset)
            ncls = len(directions_of(t))
            ws = (float(w),) * ncls if np.isscalar(w) else tuple(float(v) for v in w)
            if len(ws) != ncls:
                raise ValueError(f"offset {tuple(t)} has {ncls} direction classes, got {len(ws)} weights")
            if any(v == 0.0 for v in ws):
                raise ValueError(f"zero weight at offset {tuple(t)}")
            parsed.append(StencilTerm(t, ws))
        if not parsed:
            raise ValueError("empty stencil")
        d = parsed[0].offset.d
        for a, b in zip(parsed, parsed[1:]):
            if b.offset.d != d:
                raise ValueError("offsets of mixed dimension")
            if lex_compare(a.offset, b.offset) >= 0:
                raise ValueError("offsets must be strictly increasing lexicographically")
        self.terms: tuple[StencilTerm, ...] = tuple(parsed)
        self.d = d

    def __iter__(self):
        return iter(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def signed_offsets(self) -> list[tuple[MultiIndex, float]]:
        """Every signed offset ``delta`` (both elements of each class) with its weight."""
        out = []
        for term in self.terms:
            for cls, w in zip(term.classes, term.weights):
                out.append((cls.plus, w))
                out.append((cls.minus, w))
        return out

    def total_weight(self) -> float:
        """Row sum of the infinite adjacency (degree of a node with all neighbours)."""
        return float(sum(w for _, w in self.signed_offsets()))


def five_point_stencil() -> Stencil:
    """Nearest-neighbour stencil in two dimensions with unit weights."""
    return Stencil([((0, 1), 1.0), ((1, 0), 1.0)])


def triangle_weights(m: int) -> np.ndarray:
    """Axis weights ``w_k = (-1)**(k+1) 2/k**2`` for ``k = 1..m``."""
    k = np.arange(1, m + 1, dtype=float)
    return (-1.0) ** (k + 1) * 2.0 / k**2


def triangle_stencil(n: int) -> Stencil:
    """Axis-aligned stencil whose Laplacian has symbol ``th1**2 + th2**2``.

    Offsets ``(0, k)`` and ``(k, 0)`` for ``k = 1..n-1`` (every offset that
    fits in an ``n x n`` grid).
    """
    w = triangle_weights(n - 1)
    terms = [((0, k), w[k - 1]) for k in range(1, n)]
    terms += [((k, 0), w[k - 1]) for k in range(1, n)]
    return Stencil(terms)


# ----------------------------------------------------------------- domains


@dataclass(frozen=True)
class DomainPredicate:
    """Open region of ``(0, 1)^d`` given by a vectorised membership test.

    ``contains`` receives one array per coordinate and returns a boolean
    array. Points on the boundary are excluded.
    """

    name: str
    d: int
    contains: Callable[..., np.ndarray] = field(repr=False)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.asarray(self.contains(*points.T), dtype=bool)


def _square(*xs):
    inside = np.ones(np.shape(xs[0]), dtype=bool)
    for x in xs:
        inside &= (x > 0) & (x < 1)
    return inside


def _triangle(x, y):
    return (y > 0) & (y < SQRT3 * x) & (y < SQRT3 * (1 - x))


def _disk(x, y):
    return 4 * (x - 0.5) ** 2 + 4 * (y - 0.5) ** 2 < 1


UNIT_SQUARE = DomainPredicate("square", 2, _square)
TRIANGLE = DomainPredicate("triangle", 2, _triangle)
DISK = DomainPredicate("disk", 2, _disk)
UNIT_INTERVAL = DomainPredicate("interval", 1, _square)

DOMAINS = {"square": UNIT_SQUARE, "triangle": TRIANGLE, "disk": DISK, "interval": UNIT_INTERVAL}


def grid_coordinates(n: Sequence[int], index: np.ndarray) -> np.ndarray:
    """Immersion ``k -> k * h`` with ``h_r = 1/(n_r + 1)``."""
    h = 1.0 / (np.asarray(n, dtype=float) + 1.0)
    return np.asarray(index, dtype=float) * h


def domain_mask(n: Sequence[int], domain: DomainPredicate) -> np.ndarray:
    """Boolean mask over the lexicographically ordered grid ``1..n``."""
    idx = IndexRange(MultiIndex(n)).all_indices()
    return domain(grid_coordinates(n, idx))


# ------------------------------------------------------------------ graphs


@dataclass(frozen=True)
class MoldGraph:
    """Small undirected graph replicated at every grid point."""

    W: np.ndarray

    def __post_init__(self):
        W = np.array(self.W, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError("mold adjacency must be square")
        if not np.array_equal(W, W.T):
            raise ValueError("mold adjacency must be symmetric")
        if np.any(np.diag(W) != 0):
            raise ValueError("mold graph must not have self-loops")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @property
    def nu(self) -> int:
        return self.W.shape[0]


@dataclass(frozen=True)
class LinkingOperator:
    """Weights ``L[r, s]`` between slot ``r`` of diamond ``i`` and slot ``s`` of ``j``,
    for ``i - j`` equal to the "+" element of a direction class."""

    L: np.ndarray

    def __post_init__(self):
        L = np.array(self.L, dtype=float)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise ValueError("linking operator must be square")
        if not np.any(L):
            raise ValueError("linking operator must be nonzero")
        L.setflags(write=False)
        object.__setattr__(self, "L", L)


@dataclass(frozen=True, eq=False)
class GridGraph:
    """Weighted undirected graph whose nodes sit on a (possibly immersed) grid.

    Attributes
    ----------
    n : MultiIndex
        Ambient grid size.
    nu : int
        Diamond size (1 for plain grid graphs).
    index : (N, d) int array
        1-based grid index of every node, lexicographic with slot as the
        fastest-varying key.
    slot : (N,) int array
        Diamond slot of every node, 1-based.
    edges : (E, 2) int array
        Unordered edges, ``edges[:, 0] < edges[:, 1]``, canonical order.
    weights : (E,) float array
    kappa : (N,) float array
        Potential term.
    coords : (N, d) float array or None
        Immersed coordinates, if the graph was immersed.
    stencil : Stencil or None
        Generating stencil of plain grid graphs (needed for ghost neighbours).
    """

    n: MultiIndex
    nu: int
    index: np.ndarray
    slot: np.ndarray
    edges: np.ndarray
    weights: np.ndarray
    kappa: np.ndarray
    coords: np.ndarray | None = None
    stencil: Stencil | None = None
    domain: DomainPredicate | None = None

    @property
    def num_nodes(self) -> int:
        return len(self.slot)

    @property
    def num_edges(self) -> int:
        return len(self.weights)

    @property
    def d(self) -> int:
        return len(self.n)

    def degree(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes)
        np.add.at(deg, self.edges[:, 0], self.weights)
        np.add.at(deg, self.edges[:, 1], self.weights)
        return deg

    def adjacency(self):
        """Symmetric sparse adjacency ``W`` in CSR format."""
        import scipy.sparse as sp

        i, j = self.edges[:, 0], self.edges[:, 1]
        N = self.num_nodes
        W = sp.coo_matrix(
            (np.concatenate([self.weights, self.weights]), (np.concatenate([i, j]), np.concatenate([j, i]))),
            shape=(N, N),
        ).tocsr()
        W.sum_duplicates()
        W.sort_indices()
        return W

    def with_potential(self, kappa: np.ndarray) -> "GridGraph":
        kappa = np.asarray(kappa, dtype=float)
        if kappa.shape != (self.num_nodes,):
            raise ValueError("potential must have one value per node")
        return replace(self, kappa=kappa)

    def subgraph(self, keep: np.ndarray) -> tuple["GridGraph", np.ndarray, np.ndarray]:
        """Restrict to the nodes flagged in ``keep`` (potential copied, not updated).

        Returns the subgraph, the old positions of the kept nodes and a
        boolean flag per original edge telling whether it crosses the cut.
        """
        keep = np.asarray(keep, dtype=bool)
        if not keep.any():
            raise ValueError("empty restricted node set")
        new_pos = np.full(self.num_nodes, -1, dtype=np.int64)
        kept = np.flatnonzero(keep)
        new_pos[kept] = np.arange(len(kept))
        ends = keep[self.edges]
        inner = ends.all(axis=1)
        crossing = ends.any(axis=1) & ~inner
        sub = GridGraph(
            n=self.n,
            nu=self.nu,
            index=self.index[kept],
            slot=self.slot[kept],
            edges=new_pos[self.edges[inner]],
            weights=self.weights[inner],
            kappa=self.kappa[kept],
            coords=None if self.coords is None else self.coords[kept],
            stencil=self.stencil,
            domain=self.domain,
        )
        return sub, kept, crossing


def _canonical(i: np.ndarray, j: np.ndarray, w: np.ndarray):
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    order = np.lexsort((hi, lo))
    return np.stack([lo[order], hi[order]], axis=1).astype(np.int64), np.asarray(w, dtype=float)[order]


def _shift_pairs(n: Sequence[int], delta: Sequence[int], mask: np.ndarray | None = None):
    """Linear positions ``(a, b)`` with ``index(b) = index(a) + delta``, both inside the grid
    (and inside ``mask`` when given)."""
    n = tuple(int(a) for a in n)
    src = [slice(max(0, -dl), min(nl, nl - dl)) for nl, dl in zip(n, delta)]
    if any(s.start >= s.stop for s in src):
        return np.empty(0, np.int64), np.empty(0, np.int64)
    lin = np.arange(int(np.prod(n)), dtype=np.int64).reshape(n)
    a = lin[tuple(src)]
    b = lin[tuple(slice(s.start + dl, s.stop + dl) for s, dl in zip(src, delta))]
    a, b = a.ravel(), b.ravel()
    if mask is not None:
        ok = mask[a] & mask[b]
        a, b = a[ok], b[ok]
    return a, b


def _plain_graph(n: MultiIndex, stencil: Stencil, mask: np.ndarray | None, domain=None) -> GridGraph:
    rng = IndexRange(n)
    if stencil.d != rng.d:
        raise ValueError("stencil and grid dimensions differ")
    for term in stencil:
        if any(t >= nr for t, nr in zip(term.offset, n)):
            raise ValueError(f"offset {tuple(term.offset)} does not fit in grid {tuple(n)}")
    full = rng.all_indices()
    keep = np.ones(rng.size, dtype=bool) if mask is None else mask
    pos = np.full(rng.size, -1, dtype=np.int64)
    pos[keep] = np.arange(int(keep.sum()))
    ii, jj, ww = [], [], []
    for term in stencil:
        for cls, w in zip(term.classes, term.weights):
            a, b = _shift_pairs(n, cls.plus, keep)
            ii.append(pos[a])
            jj.append(pos[b])
            ww.append(np.full(len(a), w))
    edges, weights = _canonical(np.concatenate(ii), np.concatenate(jj), np.concatenate(ww))
    N = int(keep.sum())
    return GridGraph(
        n=n,
        nu=1,
        index=full[keep],
        slot=np.ones(N, dtype=np.int64),
        edges=edges,
        weights=weights,
        kappa=np.zeros(N),
        stencil=stencil,
        domain=domain,
    )


def build_toeplitz_graph(n: int, stencil: Stencil | Iterable[tuple[int, float]]) -> GridGraph:
    """Toeplitz graph on ``n`` nodes: ``w(v_i, v_j) = w_t`` iff ``|i - j| = t``."""
    if not isinstance(stencil, Stencil):
        stencil = Stencil(stencil)
    if stencil.d != 1:
        raise ValueError("Toeplitz graphs need scalar offsets")
    return _plain_graph(MultiIndex(n), stencil, None)


def build_dlevel_toeplitz_graph(n: Sequence[int], stencil: Stencil) -> GridGraph:
    """d-level Toeplitz graph on the grid ``1 <= k <= n``."""
    return _plain_graph(MultiIndex(n), stencil, None)


def build_diamond_graph(
    n: Sequence[int] | int,
    mold: MoldGraph,
    links: Sequence[tuple[Sequence[int] | int, Sequence[LinkingOperator | np.ndarray]]],
) -> GridGraph:
    """d-level diamond Toeplitz graph.

    Parameters
    ----------
    n : grid size
    mold : MoldGraph
        Graph copied at every grid point ("diamond").
    links : list of (offset, operators)
        One linking operator per direction class of the offset. For
        ``i - j`` equal to the "+" element, node ``(i, r)`` is joined to
        ``(j, s)`` with weight ``L[r, s]``.
    """
    n = MultiIndex(n)
    rng = IndexRange(n)
    nu = mold.nu
    ii, jj, ww = [], [], []
    # intra-diamond edges
    r, s = np.nonzero(np.triu(mold.W, 1))
    base = np.arange(rng.size, dtype=np.int64) * nu
    for a, b in zip(r, s):
        ii.append(base + a)
        jj.append(base + b)
        ww.append(np.full(rng.size, mold.W[a, b]))
    offsets = []
    for offset, ops in links:
        t = MultiIndex(offset)
        classes = directions_of(t)
        if len(ops) != len(classes):
            raise ValueError(f"offset {tuple(t)}: {len(classes)} direction classes, {len(ops)} operators")
        offsets.append(t)
        for cls, op in zip(classes, ops):
            L = op.L if isinstance(op, LinkingOperator) else LinkingOperator(op).L
            if L.shape != (nu, nu):
                raise ValueError(f"linking operator shape {L.shape} != ({nu}, {nu})")
            # node (k + plus, r) -- (k, s) carries L[r, s]
            lo, hi = _shift_pairs(n, cls.plus)
            for a, b in zip(*np.nonzero(L)):
                ii.append(hi * nu + a)
                jj.append(lo * nu + b)
                ww.append(np.full(len(lo), L[a, b]))
    for a, b in zip(offsets, offsets[1:]):
        if lex_compare(a, b) >= 0:
            raise ValueError("offsets must be strictly increasing lexicographically")
    edges, weights = _canonical(np.concatenate(ii), np.concatenate(jj), np.concatenate(ww))
    N = rng.size * nu
    return GridGraph(
        n=n,
        nu=nu,
        index=np.repeat(rng.all_indices(), nu, axis=0),
        slot=np.tile(np.arange(1, nu + 1), rng.size),
        edges=edges,
        weights=weights,
        kappa=np.zeros(N),
    )


def immerse(
    graph: GridGraph,
    domain: DomainPredicate,
    p: Callable[..., np.ndarray] | None = None,
) -> GridGraph:
    """Restrict a plain grid graph to the nodes whose image ``k * h`` lies in ``domain``.

    Surviving edge weights are multiplied by ``p`` at the edge midpoint.
    """
    if graph.nu != 1:
        raise ValueError("immersion is defined for plain (nu = 1) grid graphs")
    coords = grid_coordinates(graph.n, graph.index)
    inside = domain(coords)
    sub, kept, _ = graph.subgraph(inside)
    sub = replace(sub, coords=coords[kept], domain=domain)
    if p is not None:
        mid = 0.5 * (sub.coords[sub.edges[:, 0]] + sub.coords[sub.edges[:, 1]])
        sub = replace(sub, weights=sub.weights * np.asarray(p(*mid.T), dtype=float))
    return sub


def immersed_grid_graph(
    n: Sequence[int],
    stencil: Stencil,
    domain: DomainPredicate,
    p: Callable[..., np.ndarray] | None = None,
) -> GridGraph:
    """Same result as ``immerse(build_dlevel_toeplitz_graph(n, stencil), domain, p)``
    without materialising the edges of the full grid."""
    n = MultiIndex(n)
    mask = domain_mask(n, domain)
    if not mask.any():
        raise ValueError("empty restricted node set")
    g = _plain_graph(n, stencil, mask, domain)
    coords = grid_coordinates(n, g.index)
    g = replace(g, coords=coords)
    if p is not None:
        mid = 0.5 * (coords[g.edges[:, 0]] + coords[g.edges[:, 1]])
        g = replace(g, weights=g.weights * np.asarray(p(*mid.T), dtype=float))
    return g


# --------------------------------------------------------------- potentials


def ghost_neighbours(graph: GridGraph):
    """Host-graph neighbours of each node that lie in the ambient grid but not in the graph.

    Yields ``(node positions, ghost coordinates, stencil weights)`` per
    signed stencil offset.
    """
    if graph.stencil is None or graph.nu != 1:
        raise ValueError("ghost neighbours need a plain graph with its stencil")
    n = np.asarray(graph.n)
    rng = IndexRange(graph.n)
    present = np.zeros(rng.size, dtype=bool)
    lin = np.ravel_multi_index(tuple((graph.index - 1).T), tuple(n))
    present[lin] = True
    for delta, w in graph.stencil.signed_offsets():
        nb = graph.index + np.asarray(delta)
        in_grid = np.all((nb >= 1) & (nb <= n), axis=1)
        nodes = np.flatnonzero(in_grid)
        nb_lin = np.ravel_multi_index(tuple((nb[nodes] - 1).T), tuple(n))
        ghost = ~present[nb_lin]
        nodes = nodes[ghost]
        yield nodes, grid_coordinates(graph.n, nb[nodes]), np.full(len(nodes), w)


def attach_potential(
    graph: GridGraph,
    kind: str,
    host_weight: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray] | None = None,
    host_total: float | np.ndarray | None = None,
    values: np.ndarray | None = None,
    extra: np.ndarray | None = None,
) -> GridGraph:
    """Attach a potential term ``kappa`` to ``graph``.

    Parameters
    ----------
    kind : {"neumann", "dirichlet", "custom"}
        ``neumann`` gives ``kappa = 0``. ``dirichlet`` gives the edge
        deficiency with respect to a host graph, described either by
        ``host_weight`` or by ``host_total``. ``custom`` uses ``values``.
    host_weight : callable, optional
        ``host_weight(x_node, x_ghost, w)`` returns the host weight of the
        edges from nodes to their ghost neighbours (host nodes of the
        ambient grid that are not in the graph); ``w`` is the stencil
        weight. Used with plain immersed graphs.
    host_total : float or array, optional
        Total host-graph weight at each node (scalar, per node, or per
        diamond slot). Then ``kappa = host_total - degree``. This is how an
        unbounded host graph is described.
    extra : array, optional
        Added to the potential in every case (e.g. a sampled reaction term).
    """
    N = graph.num_nodes
    if kind == "neumann":
        kappa = np.zeros(N)
    elif kind == "dirichlet":
        if host_total is not None:
            total = np.asarray(host_total, dtype=float)
            if total.ndim == 1 and total.shape[0] == graph.nu and graph.nu != N:
                total = total[graph.slot - 1]
            kappa = np.broadcast_to(total, (N,)) - graph.degree()
        elif host_weight is not None:
            kappa = np.zeros(N)
            if graph.coords is None:
                raise ValueError("host_weight needs an immersed graph with coordinates")
            for nodes, xg, w in ghost_neighbours(graph):
                np.add.at(kappa, nodes, host_weight(graph.coords[nodes], xg, w))
        else:
            raise ValueError("dirichlet potential needs host_weight or host_total")
    elif kind == "custom":
        if values is None:
            raise ValueError("custom potential needs values")
        kappa = np.asarray(values, dtype=float).copy()
    else:
        raise ValueError(f"unknown potential kind {kind!r}")
    kappa = np.array(kappa, dtype=float)
    if extra is not None:
        kappa = kappa + np.asarray(extra, dtype=float)
    return graph.with_potential(kappa)


# ------------------------------------------------------------------ export


def write_edge_list(graph: GridGraph, path) -> None:
    """One line ``i j weight`` per unordered edge (0-based node positions)."""
    with open(path, "w") as fh:
        for (i, j), w in zip(graph.edges, graph.weights):
            fh.write(f"{i} {j} {w:.17g}\n")


def write_node_csv(graph: GridGraph, path) -> None:
    """Node table: position, grid index, slot, coordinates (if any), potential."""
    d = graph.d
    header = ["node"] + [f"k{r + 1}" for r in range(d)] + ["slot"]
    if graph.coords is not None:
        header += [f"x{r + 1}" for r in range(d)]
    header.append("kappa")
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for v in range(graph.num_nodes):
            row = [v, *graph.index[v].tolist(), int(graph.slot[v])]
            if graph.coords is not None:
                row += [f"{x:.17g}" for x in graph.coords[v]]
            row.append(f"{graph.kappa[v]:.17g}")
            out.writerow(row)
