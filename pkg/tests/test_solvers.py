import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from hypothesis import given, settings, strategies as st

from gridlap.operators import is_symmetric, toeplitz_from_symbol
from gridlap.problems import diamond_problem, disk_problem, fem_problem, triangle_dirichlet, triangle_neumann
from gridlap.solvers import (
    CoarseSolver,
    CycleSpec,
    GridGeometry,
    Hierarchy,
    SmootherSpec,
    SolverError,
    SolveReport,
    StoppingRule,
    cg,
    mgm_preconditioned_pcg,
    multigrid_solve,
    neumann_rank_one_solve,
    pcg,
    richardson_bound,
    smoother_apply,
    two_grid,
    v_cycle,
)
from gridlap.symbols import (
    diamond_projector_symbol,
    laplacian_1d_symbol,
    linear_interpolation_symbol,
    q_symbol,
    tensor_symbol,
)

GS = SmootherSpec("gauss_seidel")
LIN2 = tensor_symbol(linear_interpolation_symbol(), linear_interpolation_symbol())
Q2 = tensor_symbol(q_symbol(), q_symbol())


def tridiag(n):
    return toeplitz_from_symbol(n, laplacian_1d_symbol()).core


def test_stopping_rule_validation():
    with pytest.raises(ValueError):
        StoppingRule(tol=0.0)
    with pytest.raises(ValueError):
        StoppingRule(maxiter=0)
    rule = StoppingRule(reference=np.array([1.0, 0.0]))
    assert rule.measure(np.array([1.0, 1.0]), np.zeros(2), 1.0) == pytest.approx(1.0)


@given(st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_cg_identity_one_iteration(n, seed):
    b = np.random.default_rng(seed).standard_normal(n) + 1.0
    rep = cg(sp.identity(n, format="csr"), b)
    assert rep.converged and rep.iterations == 1
    np.testing.assert_allclose(rep.x, b)
    assert len(rep.residuals) == rep.iterations + 1


def test_cg_zero_rhs():
    rep = cg(tridiag(5), np.zeros(5))
    assert rep.converged and rep.iterations == 0


def test_cg_breakdown_on_indefinite():
    A = sp.diags([1.0, -1.0]).tocsr()
    rep = cg(A, np.array([1.0, 1.0]))
    assert rep.breakdown and not rep.converged
    assert rep.label == "breakdown"


def test_report_label_and_rows():
    rep = cg(tridiag(200), np.ones(200), StoppingRule(1e-12, 5))
    assert not rep.converged and rep.label == ">5"
    row = rep.csv_row("x", 3, 200)
    assert row["iterations"] == ">5" and row["d_n"] == 200 and row["method"] == "cg"
    assert "iterations  : >5" in rep.table_block()
    assert isinstance(rep, SolveReport)


def test_pcg_counts_preconditioner_calls():
    A = tridiag(50)
    lu = spla.splu(A.tocsc())
    rep = pcg(A, np.ones(50), lu)
    assert rep.iterations == 1
    assert rep.preconditioner_calls >= 1
    with pytest.raises(TypeError):
        pcg(A, np.ones(50), preconditioner=3)


def test_cg_a_norm_error_monotone():
    prob = fem_problem(64)
    A = prob.A.core
    x_star = spla.spsolve(A.tocsc(), prob.b)

    def anorm(e):
        return float(np.sqrt(e @ (A @ e)))

    errs = [anorm(x_star)]
    for k in range(1, 60):
        rep = cg(A, prob.b, StoppingRule(1e-14, k))
        errs.append(anorm(rep.x - x_star))
    assert all(b <= a * (1 + 1e-10) for a, b in zip(errs, errs[1:]))


def test_pcg_a_norm_error_monotone():
    prob = triangle_dirichlet(14)
    A = prob.A.core
    x_star = spla.spsolve(A.tocsc(), prob.b)
    diag = A.diagonal()
    errs = []
    for k in range(1, 25):
        rep = pcg(A, prob.b, lambda r: r / diag, StoppingRule(1e-14, k))
        e = rep.x - x_star
        errs.append(float(np.sqrt(e @ (A @ e))))
    assert all(b <= a * (1 + 1e-10) for a, b in zip(errs, errs[1:]))


def test_smoother_validation():
    with pytest.raises(ValueError):
        SmootherSpec("jacobi")
    with pytest.raises(ValueError):
        SmootherSpec("richardson", -1.0)
    with pytest.raises(ValueError):
        SmootherSpec(nu_pre=-1)
    with pytest.raises(ValueError):
        SmootherSpec(sweep="red-black")
    assert SmootherSpec("richardson", 0.3).omega_post == 0.3


def test_richardson_identity_exact():
    b = np.arange(4.0)
    x = smoother_apply(SmootherSpec("richardson", 1.0), sp.identity(4), b, np.ones(4))
    np.testing.assert_array_equal(x, b)


def test_gauss_seidel_decreases_error():
    n = 20
    A = tridiag(n)
    # oracle: dense iteration matrix of forward GS has spectral radius < 1
    D = A.toarray()
    G = np.eye(n) - np.linalg.solve(np.tril(D), D)
    assert max(abs(np.linalg.eigvals(G))) < 1
    x = np.random.default_rng(0).standard_normal(n)
    prev = np.linalg.norm(x)
    for _ in range(10):
        x = smoother_apply(GS, A, np.zeros(n), x)
        now = np.linalg.norm(x)
        assert now < prev
        prev = now


def test_gauss_seidel_matches_dense_sweep():
    A = tridiag(7)
    b, x0 = np.arange(7.0), np.ones(7)
    D = A.toarray()
    L, U = np.tril(D), np.triu(D, 1)
    np.testing.assert_allclose(smoother_apply(GS, A, b, x0), np.linalg.solve(L, b - U @ x0))
    sym = SmootherSpec("gauss_seidel", sweep="symmetric")
    Lb, Ub = np.triu(D), np.tril(D, -1)
    np.testing.assert_allclose(smoother_apply(sym, A, b, x0, "post"), np.linalg.solve(Lb, b - Ub @ x0))
    with pytest.raises(ValueError):
        smoother_apply(GS, A, b, x0, "middle")


def test_gauss_seidel_zero_diagonal():
    A = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 2.0]]))
    with pytest.raises(ZeroDivisionError):
        smoother_apply(GS, A, np.ones(2), np.zeros(2))


def test_richardson_disk_residual_non_increasing():
    prob = disk_problem(8)
    A = prob.A.core
    assert richardson_bound(A) >= 0.2
    rng = np.random.default_rng(7)
    for _ in range(50):
        b = rng.standard_normal(prob.dim)
        x = np.zeros(prob.dim)
        prev = np.linalg.norm(b)
        for omega in (1 / 5, 2 / 15, 1 / 5, 2 / 15):
            x = smoother_apply(SmootherSpec("richardson", omega), A, b, x)
            now = np.linalg.norm(b - A @ x)
            assert now <= prev * (1 + 1e-12)
            prev = now


def test_cycle_spec_validation():
    with pytest.raises(ValueError):
        CycleSpec("w_cycle", 2, LIN2)
    with pytest.raises(ValueError):
        CycleSpec("v_cycle", 1, LIN2)
    with pytest.raises(ValueError):
        CycleSpec("v_cycle", 2, LIN2, threshold=0)
    c = CycleSpec("v_cycle", 2, [LIN2, Q2])
    assert c.symbol(0) is LIN2 and c.symbol(5) is Q2


def test_geometry_validation():
    with pytest.raises(ValueError):
        GridGeometry((4, 4), mask=np.ones(15, bool))
    assert GridGeometry((4,), nu=3).size == 12


def test_two_grid_spectral_radius_triangle():
    prob = triangle_dirichlet(8)
    hier = Hierarchy(prob.A.core, prob.geometry, CycleSpec("two_grid", 2, Q2, align="center"))
    M = hier.iteration_matrix(GS)
    rho = max(abs(np.linalg.eigvals(M)))
    assert rho < 1


@pytest.mark.parametrize("g", [2, 4])
def test_galerkin_levels_symmetric(g):
    prob = triangle_dirichlet(62 if g == 2 else 64)
    hier = Hierarchy(prob.A.core, prob.geometry, CycleSpec("v_cycle", g, Q2 if g == 4 else LIN2, align="center"))
    assert hier.depth >= 2
    assert hier.dims[-1] <= 64
    for lev in hier.levels:
        scale = abs(lev.A).max()
        assert is_symmetric(lev.A, 1e-14 * scale)


def test_galerkin_symmetric_diamond_and_disk():
    prob = diamond_problem(3)
    hier = Hierarchy(prob.A.core, prob.geometry, CycleSpec("v_cycle", 2, diamond_projector_symbol(), align="center"))
    for lev in hier.levels:
        assert is_symmetric(lev.A, 1e-14 * abs(lev.A).max())
    prob = disk_problem(32)
    hier = Hierarchy(prob.A.core, prob.geometry, CycleSpec("v_cycle", 2, LIN2, align="center"))
    for lev in hier.levels:
        assert is_symmetric(lev.A, 1e-14 * abs(lev.A).max())


def test_hierarchy_dimension_mismatch():
    prob = triangle_dirichlet(8)
    with pytest.raises(ValueError):
        Hierarchy(prob.A.core, GridGeometry((9, 9)), CycleSpec("two_grid", 2, LIN2))


def test_two_grid_and_v_cycle_converge():
    prob = triangle_dirichlet(16)
    x_star = spla.spsolve(prob.A.core.tocsc(), prob.b)
    for run in (two_grid, v_cycle):
        rep = run(prob.A.core, prob.b, prob.geometry, CycleSpec("two_grid", 2, Q2, align="center"), GS)
        assert rep.converged and rep.iterations < 20
        assert rep.final_residual <= 1e-6
        assert np.linalg.norm(rep.x - x_star) / np.linalg.norm(x_star) < 1e-5


def test_multigrid_relative_error_rule():
    prob = diamond_problem(3)
    ref = spla.spsolve(prob.A.core.tocsc(), prob.b)
    hier = Hierarchy(prob.A.core, prob.geometry, CycleSpec("two_grid", 2, diamond_projector_symbol(), align="center"))
    rep = multigrid_solve(hier, prob.b, GS, StoppingRule(1e-6, 100, reference=ref))
    assert rep.converged
    assert np.linalg.norm(rep.x - ref) / np.linalg.norm(ref) <= 1e-6


def test_mgm_pcg_identity():
    n = 8
    A = sp.identity(n * n, format="csr")
    hier = Hierarchy(A, GridGeometry((n, n)), CycleSpec("v_cycle", 2, LIN2, threshold=4))
    rep = mgm_preconditioned_pcg(A, np.ones(n * n), hier, GS)
    assert rep.converged and rep.iterations == 1


def test_mgm_pcg_beats_cg_on_triangle():
    prob = triangle_dirichlet(16)
    hier = Hierarchy(prob.A.core, prob.geometry, CycleSpec("v_cycle", 2, LIN2, align="center"))
    mg = mgm_preconditioned_pcg(prob.A.core, prob.b, hier, GS)
    plain = cg(prob.A.core, prob.b)
    assert mg.converged
    assert mg.iterations <= plain.iterations


def test_neumann_rank_one_solve():
    prob = triangle_neumann(16)
    L = prob.notes["laplacian"]
    x0 = np.random.default_rng(3).standard_normal(prob.dim)
    b = L @ x0
    b -= b.mean()  # remove round-off along e
    rep = neumann_rank_one_solve(L, b, stop=StoppingRule(1e-10, 500))
    assert rep.converged
    assert np.linalg.norm(L @ rep.x - b) / np.linalg.norm(b) <= 1e-6
    assert abs(rep.x.sum()) <= 1e-8 * np.linalg.norm(rep.x) * np.sqrt(prob.dim)
    with pytest.raises(SolverError):
        neumann_rank_one_solve(L, np.ones(prob.dim))


def test_coarse_solver_singular_fallback():
    A = toeplitz_from_symbol(6, laplacian_1d_symbol()).toarray()
    A[0, 0] = A[-1, -1] = 1.0  # path Laplacian, kernel = constants
    cs = CoarseSolver(sp.csr_matrix(A))
    b = np.array([1.0, -1.0, 0.0, 2.0, -2.0, 0.0])
    np.testing.assert_allclose(A @ cs.solve(b), b, atol=1e-10)


@settings(max_examples=10, deadline=None)
@given(st.integers(8, 40))
def test_richardson_bound_matches_dense(n):
    A = tridiag(n)
    assert richardson_bound(A) == pytest.approx(2.0 / np.linalg.eigvalsh(A.toarray())[-1])
