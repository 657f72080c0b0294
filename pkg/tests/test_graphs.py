import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import toeplitz

from gridlap.graphs import (
    DISK,
    TRIANGLE,
    UNIT_SQUARE,
    LinkingOperator,
    MoldGraph,
    Stencil,
    attach_potential,
    build_diamond_graph,
    build_dlevel_toeplitz_graph,
    build_toeplitz_graph,
    domain_mask,
    five_point_stencil,
    immerse,
    immersed_grid_graph,
    triangle_stencil,
    write_edge_list,
    write_node_csv,
)
from gridlap.operators import assemble_laplacian, toeplitz_from_symbol
from gridlap.problems import DISK_HOST_WEIGHT, FEM_L, FEM_W, TRIANGLE_HOST_TOTAL, disk_problem, triangle_graph
from gridlap.symbols import DIAMOND_L, DIAMOND_W, disk_diffusion, theta_squared_symbol


def dense_adjacency(graph):
    return graph.adjacency().toarray()


def test_stencil_validation():
    with pytest.raises(ValueError):
        Stencil([((0, 1), 1.0), ((0, 1), 2.0)])  # not strictly increasing
    with pytest.raises(ValueError):
        Stencil([((1, 0), 1.0), ((0, 1), 1.0)])
    with pytest.raises(ValueError):
        Stencil([((1, 1), [1.0])])  # two classes, one weight
    with pytest.raises(ValueError):
        Stencil([(1, 0.0)])
    s = Stencil([((1, 1), [3.0, 5.0])])
    assert sorted(w for _, w in s.signed_offsets()) == [3.0, 3.0, 5.0, 5.0]


def test_toeplitz_graph_path():
    W = dense_adjacency(build_toeplitz_graph(4, [(1, 1.0)]))
    np.testing.assert_array_equal(W, toeplitz([0, 1, 0, 0]))


def test_toeplitz_graph_iga_bands():
    W = dense_adjacency(build_toeplitz_graph(5, [(1, 30 / 240), (2, 48 / 240), (3, 2 / 240)]))
    np.testing.assert_allclose(W, toeplitz([0, 30 / 240, 48 / 240, 2 / 240, 0]), rtol=0, atol=0)


def test_toeplitz_graph_single_band():
    g = build_toeplitz_graph(3, [(2, 5.0)])
    assert g.edges.tolist() == [[0, 2]]
    assert g.weights.tolist() == [5.0]


def test_toeplitz_graph_rejects_long_offset():
    with pytest.raises(ValueError):
        build_toeplitz_graph(3, [(3, 1.0)])


def test_dlevel_square_cycle():
    W = dense_adjacency(build_dlevel_toeplitz_graph((2, 2), five_point_stencil()))
    # nodes (1,1),(1,2),(2,1),(2,2): a 4-cycle
    expected = np.array([[0, 1, 1, 0], [1, 0, 0, 1], [1, 0, 0, 1], [0, 1, 1, 0]])
    np.testing.assert_array_equal(W, expected)


def test_dlevel_direction_classes_brute_force():
    a, b = 2.0, 7.0
    g = build_dlevel_toeplitz_graph((3, 3), Stencil([((1, 1), [a, b])]))
    W = dense_adjacency(g)
    idx = list(itertools.product(range(1, 4), repeat=2))
    ref = np.zeros((9, 9))
    for p, i in enumerate(idx):
        for q, j in enumerate(idx):
            diff = (i[0] - j[0], i[1] - j[1])
            if diff in ((1, 1), (-1, -1)):
                ref[p, q] = a
            elif diff in ((1, -1), (-1, 1)):
                ref[p, q] = b
    np.testing.assert_array_equal(W, ref)


def test_dlevel_five_point_matches_two_level_toeplitz():
    W = dense_adjacency(build_dlevel_toeplitz_graph((3, 3), five_point_stencil()))
    T1 = toeplitz([0, 1, 0])
    I = np.eye(3)
    np.testing.assert_array_equal(W, np.kron(T1, I) + np.kron(I, T1))


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 7), st.integers(3, 7), st.data())
def test_dlevel_weights_depend_only_on_difference(n1, n2, data):
    g = build_dlevel_toeplitz_graph((n1, n2), Stencil([((0, 1), 1.5), ((1, 1), [2.5, 0.5]), ((2, 0), -1.0)]))
    W = dense_adjacency(g)
    assert np.array_equal(W, W.T)
    idx = g.index
    p, q = data.draw(st.integers(0, g.num_nodes - 1)), data.draw(st.integers(0, g.num_nodes - 1))
    diff = idx[p] - idx[q]
    # any other pair with the same difference carries the same weight
    for r in range(g.num_nodes):
        s_idx = idx[r] - diff
        if np.all(s_idx >= 1) and np.all(s_idx <= (n1, n2)):
            s = (s_idx[0] - 1) * n2 + (s_idx[1] - 1)
            assert W[r, s] == W[p, q]


def test_diamond_graph_example():
    g = build_diamond_graph(3, MoldGraph(DIAMOND_W), [(1, [LinkingOperator(DIAMOND_L)])])
    assert g.num_nodes == 12
    W = dense_adjacency(g)
    assert np.array_equal(W, W.T)
    cross = {}
    for (i, j), w in zip(g.edges, g.weights):
        if g.index[i, 0] != g.index[j, 0]:
            cross[(i, j)] = w
    assert sorted(set(cross.values())) == [1.0, 10.0]
    # two cross links per consecutive pair of diamonds
    assert len(cross) == 4
    L = assemble_laplacian(g).toarray()
    # node (2, 1): mold weights 1+2+3 plus the weight-10 links on both sides
    assert L[4, 4] == 26.0


def test_fem_diamond_graph():
    g = build_diamond_graph(2, MoldGraph(FEM_W), [(1, [FEM_L])])
    W = dense_adjacency(g)
    # nodes (1,1),(1,2),(2,1),(2,2)
    assert W[0, 1] == W[2, 3] == 2.0
    assert W[1, 2] == 2.0 and W[1, 3] == 2.0
    assert W[0, 2] == W[0, 3] == 0.0


def test_diamond_graph_errors():
    with pytest.raises(ValueError):
        build_diamond_graph(3, MoldGraph(DIAMOND_W), [(1, [np.zeros((4, 4))])])
    with pytest.raises(ValueError):
        build_diamond_graph(3, MoldGraph(DIAMOND_W), [(1, [np.eye(3)])])
    with pytest.raises(ValueError):
        MoldGraph(np.array([[1.0, 0.0], [0.0, 0.0]]))


def test_immerse_square_identity():
    g = build_dlevel_toeplitz_graph((5, 5), five_point_stencil())
    sq = immerse(g, UNIT_SQUARE)
    assert sq.num_nodes == g.num_nodes
    np.testing.assert_array_equal(sq.edges, g.edges)
    np.testing.assert_array_equal(sq.weights, g.weights)


def test_immerse_disk_weights_at_midpoints():
    n = 16
    g = immerse(build_dlevel_toeplitz_graph((n, n), five_point_stencil()), DISK, disk_diffusion)
    h = 1.0 / (n + 1)
    np.testing.assert_allclose(g.coords, g.index * h)
    assert DISK(g.coords).all()
    mid = 0.5 * (g.coords[g.edges[:, 0]] + g.coords[g.edges[:, 1]])
    np.testing.assert_allclose(g.weights, disk_diffusion(mid[:, 0], mid[:, 1]), rtol=1e-15)
    direct = immersed_grid_graph((n, n), five_point_stencil(), DISK, disk_diffusion)
    np.testing.assert_array_equal(direct.edges, g.edges)
    np.testing.assert_allclose(direct.weights, g.weights, rtol=1e-15)


def test_triangle_node_count():
    g = immersed_grid_graph((8, 8), five_point_stencil(), TRIANGLE)
    assert g.num_nodes == 30


@pytest.mark.parametrize("n", [4, 9, 16])
def test_immersion_monotone(n):
    tri = domain_mask((n, n), TRIANGLE)
    sq = domain_mask((n, n), UNIT_SQUARE)
    assert np.all(sq[tri])
    assert sq.all()


def test_immerse_empty_rejected():
    with pytest.raises(ValueError):
        immersed_grid_graph((1, 1), Stencil([((0, 1), 1.0)]), TRIANGLE)


def test_dirichlet_interior_node_has_zero_potential():
    n = 16
    g = immersed_grid_graph((n, n), five_point_stencil(), TRIANGLE)
    g = attach_potential(g, "dirichlet", host_weight=lambda x, xg, w: w)
    count = np.zeros(g.num_nodes)
    np.add.at(count, g.edges.ravel(), 1)
    interior = count == 4
    assert interior.any()
    np.testing.assert_array_equal(g.kappa[interior], 0.0)
    # brute force: neighbours inside the ambient grid but outside the triangle
    present = {tuple(k) for k in g.index}
    ghosts = [sum(1 for dk in ((0, 1), (0, -1), (1, 0), (-1, 0))
                  if (k[0] + dk[0], k[1] + dk[1]) not in present
                  and 1 <= k[0] + dk[0] <= n and 1 <= k[1] + dk[1] <= n) for k in g.index]
    np.testing.assert_array_equal(g.kappa, ghosts)


@pytest.mark.parametrize("n", [6, 14, 30])
def test_triangle_full_square_dirichlet_equals_toeplitz(n):
    sq = immersed_grid_graph((n, n), triangle_stencil(n), UNIT_SQUARE)
    sq = attach_potential(sq, "dirichlet", host_total=TRIANGLE_HOST_TOTAL)
    np.testing.assert_allclose(sq.degree() + sq.kappa, TRIANGLE_HOST_TOTAL, rtol=0, atol=1e-12)
    A = assemble_laplacian(sq).toarray()
    T = toeplitz_from_symbol((n, n), theta_squared_symbol(n - 1)).toarray()
    np.testing.assert_allclose(A, T, rtol=0, atol=1e-13)


@pytest.mark.parametrize("n", [8, 32, 64])
def test_triangle_partial_sum_within_tail_bound(n):
    # the row sum of the truncated stencil differs from 2 pi^2 / 3 by at most 8/n
    partial = triangle_stencil(n).total_weight()
    assert abs(partial - TRIANGLE_HOST_TOTAL) <= 8.0 / n


def test_triangle_dirichlet_diagonal_constant():
    g = triangle_graph(16, "dirichlet")
    np.testing.assert_allclose(g.degree() + g.kappa, TRIANGLE_HOST_TOTAL, atol=1e-12)
    assert np.all(triangle_graph(16, "neumann").kappa == 0)


def test_disk_potential_one_outside_neighbour():
    n = 16
    prob = disk_problem(n)
    g = prob.graph
    count = np.zeros(g.num_nodes)
    np.add.at(count, g.edges.ravel(), 1)
    h = 1.0 / (n + 1)
    x, y = g.coords.T
    one = count == 3
    assert one.any()
    np.testing.assert_allclose(g.kappa[one], h * h * np.exp(x[one] * y[one]) + DISK_HOST_WEIGHT, rtol=1e-14)


def test_attach_potential_errors():
    g = build_dlevel_toeplitz_graph((3, 3), five_point_stencil())
    with pytest.raises(ValueError):
        attach_potential(g, "dirichlet")
    with pytest.raises(ValueError):
        attach_potential(g, "custom")
    with pytest.raises(ValueError):
        attach_potential(g, "robin")
    assert np.all(attach_potential(g, "custom", values=np.arange(9.0)).kappa == np.arange(9.0))


def test_exports(tmp_path):
    g = immersed_grid_graph((6, 6), five_point_stencil(), TRIANGLE)
    write_edge_list(g, tmp_path / "e.txt")
    rows = (tmp_path / "e.txt").read_text().splitlines()
    assert len(rows) == g.num_edges
    i, j, w = rows[0].split()
    assert int(i) < int(j) and float(w) == 1.0
    write_node_csv(g, tmp_path / "n.csv")
    lines = (tmp_path / "n.csv").read_text().splitlines()
    assert lines[0] == "node,k1,k2,slot,x1,x2,kappa"
    assert len(lines) == g.num_nodes + 1
