from __future__ import annotations

import warnings

import numpy as np
import pytest
from gmpy2 import mpfr

from manufactured import polynomial_problem, sample_polynomial
from vtd.cases import CASES
from vtd.diagnostics import compute_diagnostics
from vtd.errors import NewtonDiverged, OutOfDomain
from vtd.nodes import make_rule
from vtd.operators import make_cascade
from vtd.problems import OdeProblem, paper_test_problem
from vtd.solver import (
    LocalProblem,
    MethodConfig,
    TimeMesh,
    assemble_residual,
    eval_solution,
    locate,
    run_vtd,
    solve_local,
)
from vtd.study import error_norms
from vtd.precision import big, zero_tol


def _case_method(name):
    cfg = CASES[name]
    return MethodConfig(cfg.r, cfg.k, make_rule(cfg.integrator), make_cascade(list(cfg.cascade)))


def _study_problem():
    prob = paper_test_problem()
    return OdeProblem(prob.name, prob.dim, prob.t0, mpfr(16), prob.u0, prob.partial, prob.max_order, prob.exact)


@pytest.mark.parametrize("r", range(0, 11))
def test_condition_count_is_r_plus_one(r):
    for k in range(r + 1):
        cfg = MethodConfig(r, k, make_rule(f"gauss:{r + 1}"))
        assert cfg.n_conditions == r + 1
        assert cfg.linear_rows.shape == (r + 1, r + 1)


def test_config_validation():
    with pytest.raises(ValueError):
        MethodConfig(2, 3, make_rule("gauss:3"))
    assert len(MethodConfig(2, 1, "lobatto:3").rule) == 3


def _zero_problem(dim=2):
    def partial(t, u, a, beta):
        return np.array([mpfr(0)] * dim, dtype=object)

    return OdeProblem("zero", dim, mpfr(0), mpfr(1), (mpfr(1) / 3, mpfr(-2)), partial, 8, lambda t, order=0: np.array([mpfr(1) / 3, mpfr(-2)] if order == 0 else [mpfr(0)] * dim, dtype=object))


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_constant_solution_of_zero_rhs(k):
    cfg = MethodConfig(4, k, make_rule("gauss:5"))
    prob = _zero_problem()
    coeffs = np.array([[mpfr(1) / 3, mpfr(-2)]] + [[mpfr(0), mpfr(0)]] * 4, dtype=object)
    res = assemble_residual(cfg, prob, 0, mpfr(1) / 2, prob.u0, coeffs)
    assert max(abs(x) for x in res) == 0
    piece, it, _ = solve_local(cfg, prob, prob.u0, 0, mpfr(1) / 2)
    assert it <= 1
    assert (piece - type(piece)(coeffs)).max_abs_coeff() <= zero_tol(10)
    with pytest.raises(ValueError):
        assemble_residual(cfg, prob, 0, 1, prob.u0, coeffs[:3])


@pytest.mark.parametrize("name", list(CASES))
def test_polynomial_solution_inside_preservation_range_is_exact(name):
    method = _case_method(name)
    d = compute_diagnostics(method.rule, method.cascade, method.r, method.k)
    m = min(method.r, d.r_I_I + 1)
    prob = polynomial_problem(sample_polynomial(m), sample_polynomial(m, shift=1))
    sol, _ = run_vtd(method, prob, TimeMesh.uniform(0, 2, 4))
    rep = error_norms(sol, prob, samples=9, refine=False)
    assert rep.linf <= mpfr(2) ** (-512 + 80)


@pytest.mark.parametrize("k", range(0, 5))
def test_polynomial_of_degree_r_with_exact_rule(k):
    r = 4
    method = MethodConfig(r, k, make_rule(f"gauss:{r + 1}"))
    prob = polynomial_problem(sample_polynomial(r), sample_polynomial(r - 1, shift=2))
    sol, _ = run_vtd(method, prob, TimeMesh.uniform(0, 2, 3))
    assert error_norms(sol, prob, samples=9, refine=False).linf <= mpfr(2) ** (-512 + 80)


def test_degree_beyond_preservation_is_not_exact():
    method = _case_method("case1")
    prob = polynomial_problem(sample_polynomial(5), sample_polynomial(4, shift=1))
    sol, _ = run_vtd(method, prob, TimeMesh.uniform(0, 2, 4))
    assert error_norms(sol, prob, samples=9, refine=False).linf > mpfr(2) ** -100


def test_analytic_jacobian_matches_central_differences():
    method = _case_method("case3c")
    prob = _study_problem()
    local = LocalProblem(method, prob, mpfr(1), mpfr(1) / 2, prob.exact(mpfr(1), 0))
    c = local.start_from(lambda t: prob.exact(t, 0)).reshape(-1)
    jac = local.jacobian(c)
    h = mpfr(2) ** -160
    for col in range(len(c)):
        plus, minus = c.copy(), c.copy()
        plus[col] += h
        minus[col] -= h
        fd = (local.residual(plus) - local.residual(minus)) / (2 * h)
        assert max(abs(a - b) for a, b in zip(jac[:, col], fd)) <= mpfr(2) ** -200


@pytest.fixture(scope="module")
def case3c_solution():
    method = _case_method("case3c")
    prob = _study_problem()
    sol, report = run_vtd(method, prob, TimeMesh.uniform(0, 16, 32))
    return method, prob, sol, report


def test_newton_converges_quickly(case3c_solution):
    _, _, _, report = case3c_solution
    assert report.all_converged and report.max_iterations <= 8
    assert len(report.iterations) == 32
    assert max(report.residuals) <= mpfr(2) ** -384


def test_c1_coupling_at_mesh_points(case3c_solution):
    method, prob, sol, _ = case3c_solution
    mesh = sol.mesh
    # derivative conditions hold up to the Newton residual tolerance
    tol = 64 * method.tol
    for n in range(1, mesh.N):
        h = mesh.taus[n - 1] / 2
        left_val = sol.piece(n)(mpfr(1))
        right_val = sol.piece(n + 1)(mpfr(-1))
        assert max(abs(a - b) for a, b in zip(left_val, right_val)) <= zero_tol(10**6)
        left_d = sol.piece(n)(mpfr(1), 1) / h
        right_d = sol.piece(n + 1)(mpfr(-1), 1) / h
        assert max(abs(a - b) for a, b in zip(left_d, right_d)) <= tol
        # collocation at the right endpoint
        f_end = prob.f(mesh.points[n - 1], left_val)
        assert max(abs(a - b) for a, b in zip(left_d, f_end)) <= tol


def test_dg_solution_has_jumps():
    method = MethodConfig(2, 0, make_rule("gauss:3"))
    sol, _ = run_vtd(method, _study_problem(), TimeMesh.uniform(0, 16, 16))
    jumps = [max(abs(a - b) for a, b in zip(sol.piece(n)(mpfr(1)), sol.piece(n + 1)(mpfr(-1)))) for n in range(1, 16)]
    assert max(jumps) > mpfr(2) ** -40


def test_halving_step_reduces_error():
    method = _case_method("case2b")
    prob = _study_problem()
    errs = []
    for N in (16, 32, 64):
        sol, _ = run_vtd(method, prob, TimeMesh.uniform(0, 16, N))
        errs.append(error_norms(sol, prob, samples=9, refine=False).linf)
    assert errs[0] > errs[1] > errs[2]


def test_eval_solution_right_closed_convention(case3c_solution):
    _, prob, sol, _ = case3c_solution
    mesh = sol.mesh
    t3 = mesh.points[2]
    assert locate(mesh, t3) == 3
    assert locate(mesh, t3 + mpfr(2) ** -100) == 4
    assert locate(mesh, mesh.t_end) == mesh.N
    assert all(a == b for a, b in zip(eval_solution(sol, t3), sol.mesh_value(3)))
    assert all(a == b for a, b in zip(sol(0 + mesh.tau * 0 + mesh.points[0]), sol.mesh_value(1)))
    t = mpfr("5.3")
    deriv = sol(t, 1)
    assert max(abs(a - b) for a, b in zip(deriv, prob.exact(t, 1))) < 1e-4
    for bad in (mesh.t0, mesh.t_end + 1, mpfr(-1)):
        with pytest.raises(OutOfDomain):
            eval_solution(sol, bad)
    with pytest.raises(ValueError):
        eval_solution(sol, t, -1)
    assert all(a == b for a, b in zip(sol.mesh_value(0), (big("1/2"), 0)))


def test_newton_failure_is_reported():
    method = MethodConfig(6, 3, make_rule("gauss:6"), max_iter=0)
    with pytest.raises(NewtonDiverged) as info:
        run_vtd(method, _study_problem(), TimeMesh.uniform(0, 16, 8))
    assert info.value.interval == 1


def test_blowup_problem_diverges():
    # u' = u^2 blows up at t = 1; one huge step cannot be solved
    def partial(t, u, a, beta):
        if a:
            return np.array([mpfr(0)], dtype=object)
        return np.array([[u[0] ** 2, 2 * u[0], mpfr(2)][beta[0]] if beta[0] <= 2 else mpfr(0)], dtype=object)

    prob = OdeProblem("blowup", 1, mpfr(0), mpfr(40), (mpfr(1),), partial, 6)
    with pytest.raises(NewtonDiverged):
        run_vtd(MethodConfig(3, 1, make_rule("gauss:3"), max_iter=12), prob, TimeMesh.uniform(0, 40, 1))


def test_time_mesh_validation():
    mesh = TimeMesh.uniform(0, 2, 4)
    assert mesh.N == 4 and mesh.tau == mpfr(1) / 2 and mesh.left(1) == 0 and mesh.left(2) == mpfr(1) / 2
    with pytest.raises(ValueError):
        TimeMesh(0, (1, 1))
    with pytest.raises(ValueError):
        TimeMesh(0, ())
    with pytest.warns(UserWarning):
        TimeMesh(0, (1, mpfr(3) / 2))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        TimeMesh(0, (1, 2, 4))
