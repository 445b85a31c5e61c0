from __future__ import annotations

import random
from fractions import Fraction

import gmpy2
import numpy as np
import pytest
from gmpy2 import mpfr

from vtd.errors import ExactSolutionMissing, TotalDerivativeUnavailable
from vtd.problems import (
    Jet,
    OdeProblem,
    check_exact_consistency,
    faa_di_bruno_terms,
    get_problem,
    initial_jet,
    paper_test_problem,
    register_problem,
    total_derivative,
)
from vtd.precision import big, working_precision, zero_tol


def _jet_at(problem, t, order):
    return Jet(t, [problem.exact(t, m) for m in range(order + 1)])


@pytest.mark.parametrize("i", range(0, 6))
def test_total_derivative_matches_exact_solution(i):
    prob = paper_test_problem()
    rng = random.Random(i)
    for _ in range(16):
        t = big(rng.uniform(0, 32))
        got = total_derivative(prob, i, _jet_at(prob, t, i))
        want = prob.exact(t, i + 1)
        assert max(abs(a - b) for a, b in zip(got, want)) <= zero_tol(10**4)


@pytest.mark.parametrize("i", range(1, 4))
def test_total_derivative_against_nested_differences(i):
    """Central differences of ``t -> f(t, u(t))`` at raised width."""
    prob = paper_test_problem()
    t0 = mpfr("2.3")
    with working_precision(2048):
        h = mpfr(2) ** -200

        def g(t):
            return prob.f(t, prob.exact(t, 0))

        def diff(fun, n):
            if n == 0:
                return fun
            inner = diff(fun, n - 1)
            return lambda t: (inner(t + h) - inner(t - h)) / (2 * h)

        ref = diff(g, i)(big(t0))
    got = total_derivative(prob, i, _jet_at(prob, t0, i))
    rel = max(abs(a - b) for a, b in zip(got, ref)) / max(abs(b) for b in ref)
    assert rel < mpfr(2) ** (-512 // 4)


def _scalar(partial, u0, exact=None, max_order=8):
    return OdeProblem("scalar", 1, mpfr(0), mpfr(1), (u0,), partial, max_order, exact)


def test_exp_problem_total_derivatives_are_one():
    def partial(t, u, a, beta):
        # f(t, u) = u
        if a:
            return np.array([mpfr(0)], dtype=object)
        return np.array([u[0] if beta[0] == 0 else mpfr(beta[0] == 1)], dtype=object)

    prob = _scalar(partial, mpfr(1))
    jet = initial_jet(prob, 4)
    assert all(v[0] == 1 for v in jet.values)
    assert total_derivative(prob, 3, jet)[0] == 1


def _gauss_bell_partial(t, u, a, beta):
    # f(t, u) = t u
    b = beta[0]
    if a == 0 and b == 0:
        return np.array([t * u[0]], dtype=object)
    if a == 1 and b == 0:
        return np.array([u[0]], dtype=object)
    if a == 0 and b == 1:
        return np.array([t], dtype=object)
    if a == 1 and b == 1:
        return np.array([mpfr(1)], dtype=object)
    return np.array([mpfr(0)], dtype=object)


def _bell_poly(n):
    """u^{(n)} = p_n(t) exp(t^2/2) with p_{n+1} = p_n' + t p_n."""
    p = [Fraction(1)]
    for _ in range(n):
        d = [j * c for j, c in enumerate(p)][1:] + [Fraction(0), Fraction(0)]
        s = [Fraction(0)] + p
        p = [x + y for x, y in zip(d, s)]
    return p


@pytest.mark.parametrize("i", range(0, 6))
def test_time_dependent_rhs_uses_the_time_slot(i):
    prob = _scalar(_gauss_bell_partial, mpfr(1))
    t = mpfr(3) / 7
    e = gmpy2.exp(t * t / 2)
    jet = Jet(t, [np.array([sum(big(c) * t**j for j, c in enumerate(_bell_poly(m))) * e], dtype=object) for m in range(i + 1)])
    want = sum(big(c) * t**j for j, c in enumerate(_bell_poly(i + 1))) * e
    assert abs(total_derivative(prob, i, jet)[0] - want) <= zero_tol(100)


def test_faa_di_bruno_term_counts():
    # j = 1: f_t + f_u u'
    assert len(faa_di_bruno_terms(1, 1)) == 2
    # scalar u, autonomous part: Bell numbers appear once t is dropped
    no_t = [t for t in faa_di_bruno_terms(4, 1) if t[1] == 0]
    assert sum(c for c, *_ in no_t) == 15
    assert faa_di_bruno_terms(0, 2) == ()


def test_rhs_and_exact_solution_values():
    prob = paper_test_problem()
    f0 = prob.f(prob.t0, np.array(prob.u0, dtype=object))
    assert f0[0] == mpfr(-1) / 4 and f0[1] == mpfr(1) / 2
    u = prob.exact(gmpy2.const_pi() / 2, 0)
    assert abs(u[0]) <= zero_tol() and abs(u[1] - mpfr(1) / 3) <= zero_tol()
    assert prob.t_span == (0, 32)
    jac = prob.jacobian(mpfr(0), np.array(prob.u0, dtype=object))
    assert jac.tolist() == [[-1, -1], [1, mpfr(-1) / 2]]


@pytest.mark.parametrize("m", [0, 1, 2, 5])
def test_initial_jet_matches_exact_derivatives(m):
    prob = paper_test_problem()
    jet = initial_jet(prob, m)
    assert jet.order == m
    for j, v in enumerate(jet.values):
        assert max(abs(a - b) for a, b in zip(v, prob.exact(prob.t0, j))) <= zero_tol(10**4)


def test_order_limits_are_enforced():
    prob = paper_test_problem(max_order=2)
    jet = _jet_at(prob, mpfr(1), 3)
    with pytest.raises(TotalDerivativeUnavailable):
        total_derivative(prob, 3, jet)
    with pytest.raises(TotalDerivativeUnavailable):
        initial_jet(prob, 4)
    with pytest.raises(ValueError):
        total_derivative(prob, 2, _jet_at(prob, mpfr(1), 1))


def test_registry_and_exact_consistency():
    assert get_problem("paper-nonlinear").dim == 2
    with pytest.raises(KeyError):
        get_problem("nope")
    register_problem("decay", lambda: _scalar(lambda t, u, a, beta: np.array([-u[0] if a == 0 else mpfr(0)], dtype=object), mpfr(1)))
    try:
        assert get_problem("decay").dim == 1
        with pytest.raises(ExactSolutionMissing):
            get_problem("decay").require_exact()
    finally:
        from vtd.problems import PROBLEMS

        PROBLEMS.pop("decay")
    assert check_exact_consistency(paper_test_problem()) <= zero_tol(10)


def test_inconsistent_exact_solution_is_rejected():
    prob = _scalar(lambda t, u, a, beta: np.array([u[0]], dtype=object), mpfr(1), exact=lambda t, order=0: np.array([t + 1 if order == 0 else mpfr(1)], dtype=object))
    with pytest.raises(ValueError):
        check_exact_consistency(prob)
