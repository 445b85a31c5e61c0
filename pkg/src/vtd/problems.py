"""ODE problems ``u' = f(t, u)`` and total derivatives of ``f(t, u(t))``.

A problem supplies analytic partial derivatives of ``f`` up to a declared
total order ``max_order``; the library only composes them.  Total derivatives
use the multivariate Faa di Bruno expansion with the time variable treated
as the 0-th argument.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from functools import lru_cache
from math import factorial
from typing import Callable

import gmpy2
import numpy as np
from gmpy2 import mpfr

from .errors import ExactSolutionMissing, TotalDerivativeUnavailable
from .precision import big, precise, zero_tol


@dataclass(frozen=True, eq=False)
class OdeProblem:
    """Right-hand side, partial derivatives and (optionally) the exact solution.

    ``partial(t, u, a, beta)`` returns ``d^{a+|beta|} f / dt^a du^beta`` as a
    length-d array; ``exact(t, order)`` returns ``u^{(order)}(t)``.
    """

    name: str
    dim: int
    t0: object
    T: object
    u0: tuple
    partial: Callable
    max_order: int
    exact: Callable | None = None

    @property
    def t_end(self):
        return self.t0 + self.T

    @property
    def t_span(self) -> tuple:
        return (self.t0, self.t_end)

    def f(self, t, u) -> np.ndarray:
        return self.partial(t, u, 0, (0,) * self.dim)

    def jacobian(self, t, u) -> np.ndarray:
        """``J[i, j] = df_i / du_j``."""
        cols = []
        for j in range(self.dim):
            beta = tuple(1 if m == j else 0 for m in range(self.dim))
            cols.append(self.partial(t, u, 0, beta))
        return np.array(cols, dtype=object).T

    def require_exact(self) -> Callable:
        if self.exact is None:
            raise ExactSolutionMissing(f"problem {self.name!r} has no exact solution")
        return self.exact


@dataclass(frozen=True)
class Jet:
    """Derivatives ``u^{(0)}(t), ..., u^{(m)}(t)`` at one point."""

    t: object
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(np.asarray(v, dtype=object) for v in self.values))

    @property
    def order(self) -> int:
        return len(self.values) - 1


@lru_cache(maxsize=None)
def faa_di_bruno_terms(j: int, d: int) -> tuple:
    """Terms of the j-th total derivative of ``f(t, u_1(t), ..., u_d(t))``.

    Each term is ``(coeff, a, beta, factors)`` with ``factors`` a tuple of
    ``(order, component, power)``: the term equals ``coeff * d^{a+|beta|}f``
    times the product of ``(u_component^{(order)})**power``.  The integer
    solutions of ``sum_i i * sum_m q_im = j`` are enumerated recursively;
    slots ``(i, 0)`` with ``i >= 2`` are skipped because ``d^i t / dt^i = 0``.
    """
    slots = [(1, 0)] + [(i, m) for i in range(1, j + 1) for m in range(1, d + 1)]
    terms = []

    def rec(pos: int, budget: int, chosen: list):
        if budget == 0:
            terms.append(_term(j, d, chosen))
            return
        if pos == len(slots):
            return
        i, m = slots[pos]
        for q in range(budget // i + 1):
            if q:
                chosen.append((i, m, q))
            rec(pos + 1, budget - q * i, chosen)
            if q:
                chosen.pop()

    if j >= 1:
        rec(0, j, [])
    return tuple(terms)


def _term(j: int, d: int, chosen: list) -> tuple:
    denom = 1
    a = 0
    beta = [0] * d
    factors = []
    for i, m, q in chosen:
        denom *= factorial(i) ** q * factorial(q)
        if m == 0:
            a += q
        else:
            beta[m - 1] += q
            factors.append((i, m - 1, q))
    return (factorial(j) // denom, a, tuple(beta), tuple(factors))


def total_derivative(problem: OdeProblem, i: int, jet: Jet) -> np.ndarray:
    """``d^i/dt^i f(t, u(t))`` from the jet ``u^{(0..i)}(t)``."""
    if i > problem.max_order:
        raise TotalDerivativeUnavailable(
            f"order-{i} total derivative requested but {problem.name!r} supplies partials up to order {problem.max_order}"
        )
    if jet.order < i:
        raise ValueError(f"jet of order {jet.order} cannot feed an order-{i} total derivative")
    t, u = jet.t, jet.values[0]
    if i == 0:
        return problem.f(t, u)
    total = np.full(problem.dim, mpfr(0), dtype=object)
    for coeff, a, beta, factors in faa_di_bruno_terms(i, problem.dim):
        prod = mpfr(coeff)
        for order, comp, power in factors:
            prod = prod * jet.values[order][comp] ** power
        if prod:
            total = total + prod * problem.partial(t, u, a, beta)
    return total


@precise
def initial_jet(problem: OdeProblem, m: int) -> Jet:
    """``u^{(0..m)}(t0)`` by differentiating the ODE: ``u^{(j)} = D^{j-1} f``."""
    if m - 1 > problem.max_order:
        raise TotalDerivativeUnavailable(f"initial jet of order {m} needs partials of order {m - 1}")
    values = [np.array([big(v) for v in problem.u0], dtype=object)]
    for j in range(1, m + 1):
        values.append(total_derivative(problem, j - 1, Jet(problem.t0, values)))
    return Jet(problem.t0, values)


# ---------------------------------------------------------------------------
# the two-component nonlinear test problem


def _paper_partial(t, u, a, beta):
    z = mpfr(0)
    if a:
        return np.array([z, z], dtype=object)
    u1, u2 = u[0], u[1]
    b1, b2 = beta
    if b1 == 0 and b2 == 0:
        return np.array([-u1 * u1 - u2, u1 - u1 * u2], dtype=object)
    if b1 == 1 and b2 == 0:
        return np.array([-2 * u1, 1 - u2], dtype=object)
    if b1 == 0 and b2 == 1:
        return np.array([mpfr(-1), -u1], dtype=object)
    if b1 == 2 and b2 == 0:
        return np.array([mpfr(-2), z], dtype=object)
    if b1 == 1 and b2 == 1:
        return np.array([z, mpfr(-1)], dtype=object)
    return np.array([z, z], dtype=object)


def _quotient_series(num: list, den: list) -> list:
    q = []
    for n in range(len(num)):
        acc = num[n]
        for i in range(1, n + 1):
            acc -= den[i] * q[n - i]
        q.append(acc / den[0])
    return q


@precise
def paper_exact_jet(t, order: int) -> list:
    """``[u^{(0)}(t), ..., u^{(order)}(t)]`` for ``u = (cos, sin) / (2 + sin)``.

    Uses truncated Taylor-series division, exact to working precision.
    """
    t = big(t)
    s, c = gmpy2.sin(t), gmpy2.cos(t)
    sin_d = (s, c, -s, -c)
    cos_d = (c, -s, -c, s)
    fact = [mpfr(factorial(n)) for n in range(order + 1)]
    sin_s = [sin_d[n % 4] / fact[n] for n in range(order + 1)]
    cos_s = [cos_d[n % 4] / fact[n] for n in range(order + 1)]
    den = [sin_s[0] + 2] + sin_s[1:]
    q1 = _quotient_series(cos_s, den)
    q2 = _quotient_series(sin_s, den)
    return [np.array([q1[n] * fact[n], q2[n] * fact[n]], dtype=object) for n in range(order + 1)]


def _paper_exact(t, order=0):
    return paper_exact_jet(t, order)[order]


@precise
def paper_test_problem(max_order: int = 6) -> OdeProblem:
    """u1' = -u1^2 - u2, u2' = u1 - u1 u2 on (0, 32), u(0) = (1/2, 0)."""
    return OdeProblem(
        name="paper-nonlinear",
        dim=2,
        t0=mpfr(0),
        T=mpfr(32),
        u0=(mpfr(1) / 2, mpfr(0)),
        partial=_paper_partial,
        max_order=max_order,
        exact=_paper_exact,
    )


PROBLEMS: dict[str, Callable[[], OdeProblem]] = {"paper-nonlinear": paper_test_problem}


def register_problem(name: str, factory: Callable[[], OdeProblem]) -> None:
    PROBLEMS[name] = factory


def get_problem(name: str) -> OdeProblem:
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; registered: {', '.join(PROBLEMS)}") from None


@precise
def check_exact_consistency(problem: OdeProblem, samples: int = 32, seed: int = 0) -> mpfr:
    """Largest ``|u'(t) - f(t, u(t))|`` over random points; raises if above width precision."""
    exact = problem.require_exact()
    rng = random.Random(seed)
    worst = mpfr(0)
    for _ in range(samples):
        t = problem.t0 + problem.T * big(rng.random())
        u, du = exact(t, 0), exact(t, 1)
        defect = max(abs(x) for x in du - problem.f(t, u))
        worst = max(worst, defect)
    if worst > zero_tol(1 + max(abs(x) for x in problem.u0)):
        raise ValueError(f"exact solution of {problem.name!r} does not satisfy the ODE (defect {float(worst):.3e})")
    return worst
