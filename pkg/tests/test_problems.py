import warnings

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from scipy.interpolate import BSpline

from gridlap.graphs import GridGraph, build_toeplitz_graph
from gridlap.grid import MultiIndex
from gridlap.operators import assemble_laplacian, toeplitz_from_symbol
from gridlap.problems import (
    diamond_problem,
    disk_problem,
    equilateral_eigenvalues,
    fem_problem,
    iga_problem,
    iga_stiffness,
    nhdp_reduce,
    reference_discretization_oracle,
    scaled_graph_eigenvalues,
    triangle_dirichlet,
    triangle_exact,
    triangle_neumann,
    uniform_rhs,
)
from gridlap.symbols import iga_symbol

SQRT3 = np.sqrt(3.0)


def random_graph(n_nodes, seed, p=0.3):
    rng = np.random.default_rng(seed)
    i, j = np.triu_indices(n_nodes, 1)
    keep = rng.random(len(i)) < p
    # a path keeps the graph connected
    path = j == i + 1
    keep |= path
    edges = np.stack([i[keep], j[keep]], axis=1)
    w = rng.uniform(0.5, 2.0, size=len(edges))
    return GridGraph(n=MultiIndex(n_nodes), nu=1, index=np.arange(1, n_nodes + 1)[:, None],
                     slot=np.ones(n_nodes, dtype=np.int64), edges=edges, weights=w, kappa=np.zeros(n_nodes))


@settings(max_examples=30, deadline=None)
@given(st.integers(5, 30), st.integers(0, 2**32 - 1))
def test_nhdp_reduce_equals_full_system(n_nodes, seed):
    rng = np.random.default_rng(seed)
    g = random_graph(n_nodes, seed)
    boundary = np.zeros(n_nodes, bool)
    boundary[rng.choice(n_nodes, size=max(1, n_nodes // 4), replace=False)] = True
    if boundary.all():
        boundary[0] = False
    h = rng.standard_normal(n_nodes) * boundary
    f = rng.standard_normal(int((~boundary).sum()))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        interior, rhs, kept = nhdp_reduce(g, boundary, h, f)
    u_red = np.linalg.solve(assemble_laplacian(interior).toarray(), rhs)
    # full constrained system: Laplacian rows inside, identity rows on the boundary
    A = assemble_laplacian(g).toarray()
    A[boundary] = 0.0
    A[boundary, boundary] = 1.0
    b = np.zeros(n_nodes)
    b[~boundary] = f
    b[boundary] = h[boundary]
    u_full = np.linalg.solve(A, b)
    np.testing.assert_allclose(u_red, u_full[kept], rtol=0, atol=1e-10 * max(1.0, np.abs(u_full).max()))


def test_nhdp_homogeneous():
    g = random_graph(12, 1)
    boundary = np.zeros(12, bool)
    boundary[[0, 11]] = True
    _, rhs, _ = nhdp_reduce(g, boundary, np.zeros(12))
    np.testing.assert_array_equal(rhs, 0.0)


def test_nhdp_single_interior_node():
    path = build_toeplitz_graph(3, [(1, 1.0)])
    interior, rhs, kept = nhdp_reduce(path, np.array([True, False, True]), np.array([0.3, 0.9]))
    assert kept.tolist() == [1]
    assert interior.kappa.tolist() == [2.0]
    assert rhs.tolist() == [pytest.approx(1.2)]


def test_nhdp_errors_and_warning():
    path = build_toeplitz_graph(4, [(1, 1.0)])
    with pytest.raises(ValueError):
        nhdp_reduce(path, np.zeros(4, bool), np.zeros(4))
    with pytest.raises(ValueError):
        nhdp_reduce(path, np.array([True, False, False, True]), np.zeros(3))
    with pytest.warns(RuntimeWarning):
        nhdp_reduce(build_toeplitz_graph(5, [(1, 1.0)]), np.array([False, False, True, False, False]), np.zeros(5))


def test_diamond_potential_only_next_to_boundary():
    prob = diamond_problem(2)
    n = prob.notes["n"]
    g = prob.graph
    k = g.index[:, 0]
    assert set(k.tolist()) == set(range(2, n))
    assert np.all(g.kappa[(k != 2) & (k != n - 1)] == 0.0)
    assert np.any(g.kappa[k == 2] > 0) and np.any(g.kappa[k == n - 1] > 0)
    # brute force: weight of links from diamond 2 to diamond 1 is L[:, :] summed over slot pairs
    from gridlap.symbols import DIAMOND_L
    np.testing.assert_array_equal(g.kappa[k == 2], DIAMOND_L.sum(axis=1))
    np.testing.assert_array_equal(g.kappa[k == n - 1], DIAMOND_L.sum(axis=0))


def test_diamond_rhs():
    prob = diamond_problem(2)
    g = prob.graph
    f = np.sin(g.index[:, 0] * g.slot)
    k = g.index[:, 0]
    from gridlap.symbols import DIAMOND_L
    n = prob.notes["n"]
    hb = np.array([0.5, 0.25, 0.0, 0.0])
    g_part = prob.b - f
    # (k+1, r) -- (k, s) carries L[r, s], so diamond 2 sees L h and diamond n-1 sees L^T h
    np.testing.assert_allclose(g_part[k == 2], DIAMOND_L @ hb, atol=1e-14)
    np.testing.assert_allclose(g_part[k == n - 1], DIAMOND_L.T @ hb, atol=1e-14)
    np.testing.assert_allclose(g_part[(k > 2) & (k < n - 1)], 0.0, atol=1e-15)


@pytest.mark.parametrize("t, dn", [(2, 56), (4, 1016)])
def test_diamond_dimension(t, dn):
    assert diamond_problem(t).dim == dn


@pytest.mark.parametrize("t, dn", [(3, 60), (4, 216), (5, 848), (6, 3300)])
def test_disk_dimension(t, dn):
    assert disk_problem(2**t).dim == dn


def test_triangle_dimensions():
    assert triangle_dirichlet(8).dim == 30
    assert [triangle_dirichlet(2**t - 2).dim for t in (3, 4, 5)] == [18, 90, 400]
    assert triangle_neumann(16).dim == 116


def test_triangle_exact_solution():
    # zero on the three sides
    s = np.linspace(0, 1, 11)
    np.testing.assert_allclose(triangle_exact(s, 0 * s), 0.0, atol=1e-15)
    np.testing.assert_allclose(triangle_exact(s / 2, SQRT3 * s / 2), 0.0, atol=1e-15)
    np.testing.assert_allclose(triangle_exact(1 - s / 2, SQRT3 * s / 2), 0.0, atol=1e-15)
    # -Laplace u = 2 sqrt3 (second differences are exact for a cubic up to round-off)
    x, y, e = 0.4, 0.3, 1e-3
    lap = (triangle_exact(x + e, y) + triangle_exact(x - e, y) + triangle_exact(x, y + e) + triangle_exact(x, y - e)
           - 4 * triangle_exact(x, y)) / e**2
    assert -lap == pytest.approx(2 * SQRT3, rel=1e-6)


def test_triangle_rhs():
    prob = triangle_dirichlet(14)
    np.testing.assert_allclose(prob.b, 2 * SQRT3 / 15**2)
    assert prob.exact.shape == (prob.dim,)
    assert np.all(prob.exact > 0)


def test_uniform_rhs_reproducible():
    np.testing.assert_array_equal(uniform_rhs(5, 3), uniform_rhs(5, 3))
    assert not np.array_equal(uniform_rhs(5, 3), uniform_rhs(5, 4))


def _stiffness_oracle(ndof, p=3):
    """Independent assembly: B-spline derivatives from scipy, 8-point Gauss per element."""
    m = ndof + 2 - p
    knots = np.concatenate([np.zeros(p), np.linspace(0, 1, m + 1), np.ones(p)])
    nb = len(knots) - p - 1
    gx, gw = np.polynomial.legendre.leggauss(8)
    brk = np.linspace(0, 1, m + 1)
    x = ((brk[:-1] + brk[1:])[:, None] + (brk[1:] - brk[:-1])[:, None] * gx).ravel() / 2
    w = ((brk[1:] - brk[:-1])[:, None] * gw).ravel() / 2
    D = np.array([BSpline(knots, np.eye(nb)[i], p).derivative()(x) for i in range(nb)])
    K = (D * w) @ D.T
    return K[1:-1, 1:-1] / m


@pytest.mark.parametrize("ndof", [8, 15, 32])
def test_iga_stiffness_against_oracle(ndof):
    np.testing.assert_allclose(iga_stiffness(ndof).toarray(), _stiffness_oracle(ndof), atol=1e-12)


def test_iga_interior_is_toeplitz():
    n = 20
    A = iga_stiffness(n).toarray()
    T = toeplitz_from_symbol(n, iga_symbol()).toarray()
    R = A - T
    # the correction lives in the two 4x4 corners
    assert np.abs(R[4:-4, :]).max() < 1e-13
    assert np.abs(R[:, 4:-4]).max() < 1e-13
    np.testing.assert_allclose(R[:4, :4], R[-4:, -4:][::-1, ::-1], atol=1e-13)
    assert np.linalg.matrix_rank(R, tol=1e-10) <= 8


def test_fem_and_iga_problem_shapes():
    assert fem_problem(16).dim == 32
    assert iga_problem(31).dim == 31
    assert sp.issparse(iga_problem(31).A.core)


def test_equilateral_eigenvalues():
    d = equilateral_eigenvalues("dirichlet", 4)
    assert d[0] == pytest.approx(16 * np.pi**2 / 3)
    assert d[1] == pytest.approx(d[2])
    nm = equilateral_eigenvalues("neumann", 4)
    assert nm[0] == 0.0 and nm[3] == pytest.approx(d[0])
    with pytest.raises(ValueError):
        equilateral_eigenvalues("robin", 3)


def test_scaled_eigenvalues_approach_continuous():
    mu = equilateral_eigenvalues("dirichlet", 5)
    e16 = scaled_graph_eigenvalues(16, "dirichlet")[:5]
    e32 = scaled_graph_eigenvalues(32, "dirichlet")[:5]
    assert np.all(np.abs(e32 - mu) < np.abs(e16 - mu))


def test_reference_oracle_small():
    oracle = reference_discretization_oracle(16)
    mu = oracle("dirichlet", 10)
    exact = equilateral_eigenvalues("dirichlet", 10)
    raw = scaled_graph_eigenvalues(16, "dirichlet")[:10]
    # the extrapolated values are closer to the continuous ones than the raw fine level
    assert np.abs(mu - exact).sum() < np.abs(raw - exact).sum()
    with pytest.raises(ValueError):
        oracle("dirichlet", 10_000)
