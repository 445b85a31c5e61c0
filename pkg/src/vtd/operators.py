"""Interpolation cascades and the approximation operators J and P.

Everything lives on the reference interval (-1, 1].  Functions handed to the
operators are callables ``v(x, order)`` returning the ``order``-th derivative
at reference point ``x`` (a scalar or a length-d array).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from gmpy2 import mpfr

from .errors import AssumptionViolated, LengthMismatch, SingularMatrix
from .legendre import RefPolynomial, endpoint_derivative, legendre_table, vandermonde
from .linalg import lu_factor
from .nodes import NodeSet, QuadRule, parse_nodes
from .precision import big, precise

INF = math.inf

RefFunction = Callable[[object, int], object]


def lagrange_matrix(nodes: Sequence, points: Sequence) -> np.ndarray:
    """``E[p, m] = l_m(points[p])`` for the Lagrange basis of ``nodes``."""
    nodes = list(nodes)
    out = np.empty((len(points), len(nodes)), dtype=object)
    for p, x in enumerate(points):
        for m, xm in enumerate(nodes):
            val = mpfr(1)
            for j, xj in enumerate(nodes):
                if j != m:
                    val = val * (x - xj) / (xm - xj)
            out[p, m] = val
    return out


@dataclass(frozen=True)
class InterpCascade:
    """Composition I^1 o I^2 o ... o I^l of Lagrange interpolation operators.

    ``stages[0]`` is I^1 (applied last).  An empty cascade is the identity.
    """

    stages: tuple = ()

    @property
    def is_identity(self) -> bool:
        return not self.stages

    @property
    def preservation_degree(self):
        """Largest degree reproduced exactly (``inf`` for the identity)."""
        if self.is_identity:
            return INF
        return min(len(s) for s in self.stages) - 1

    @property
    def label(self) -> str:
        return "identity" if self.is_identity else " o ".join(s.label for s in self.stages)

    def input_nodes(self, rule: QuadRule | None = None) -> tuple:
        """Points at which the cascade samples its argument."""
        if self.is_identity:
            if rule is None:
                raise ValueError("the identity cascade samples at the rule nodes; pass the rule")
            return tuple(rule.points)
        return tuple(self.stages[-1].nodes)

    def matrix(self, points: Sequence, rule: QuadRule | None = None) -> np.ndarray:
        """Linear map from samples at :meth:`input_nodes` to cascade values at ``points``."""
        if self.is_identity:
            src = self.input_nodes(rule)
            if len(points) != len(src) or any(a != b for a, b in zip(points, src)):
                raise ValueError("identity cascade can only be evaluated at its own sample nodes")
            return np.array([[mpfr(1) if i == j else mpfr(0) for j in range(len(src))] for i in range(len(src))], dtype=object)
        mat = None
        for j in range(len(self.stages) - 1, 0, -1):
            step = lagrange_matrix(self.stages[j].nodes, self.stages[j - 1].nodes)
            mat = step if mat is None else step @ mat
        final = lagrange_matrix(self.stages[0].nodes, points)
        return final if mat is None else final @ mat

    def covers(self, rule: QuadRule) -> bool:
        """True when every stage interpolates at all rule nodes (cascade invisible to the rule)."""
        return all(stage.contains(rule.nodes) for stage in self.stages)


IDENTITY = InterpCascade()


@precise
def make_cascade(specs) -> InterpCascade:
    """Build a cascade from node-set strings (``[]``, ``"identity"`` or a list)."""
    if specs is None or specs == "identity" or specs == ["identity"]:
        return IDENTITY
    if isinstance(specs, (str, NodeSet)):
        specs = [specs]
    stages = tuple(s if isinstance(s, NodeSet) else parse_nodes(s) for s in specs)
    return InterpCascade(stages)


def _as_values(v) -> np.ndarray:
    arr = np.asarray(v, dtype=object)
    return arr.reshape(-1) if arr.ndim else arr.reshape(1)


def sample(func: Callable, points: Sequence) -> np.ndarray:
    """Stack ``func(x)`` for all points into an ``(n, d)`` array."""
    return np.array([_as_values(func(x)) for x in points], dtype=object)


def cascade_apply(c: InterpCascade, f_eval: Callable) -> RefPolynomial:
    """Interpolate ``f_eval`` through every stage, innermost (last) stage first."""
    if c.is_identity:
        raise ValueError("the identity cascade has no polynomial representation; use f directly")
    vals = sample(f_eval, c.stages[-1].nodes)
    for j in range(len(c.stages) - 1, 0, -1):
        vals = lagrange_matrix(c.stages[j].nodes, c.stages[j - 1].nodes) @ vals
    return RefPolynomial.from_values(c.stages[0].nodes, vals)


def integrate_interpolant(rule: QuadRule, c: InterpCascade, f_eval: Callable, test: RefPolynomial) -> np.ndarray:
    """``I[(cascade f) * test]`` evaluated with the rule on the reference interval."""
    xs = rule.points
    samples = sample(f_eval, c.input_nodes(rule))
    cvals = c.matrix(xs, rule) @ samples
    tvals = test.values(xs)
    if tvals.shape[1] != 1:
        raise LengthMismatch("test function must be scalar-valued")
    weights = np.array(rule.weights, dtype=object)
    return (weights * tvals[:, 0]) @ cvals


def polynomial_function(p: RefPolynomial) -> RefFunction:
    """Adapt a RefPolynomial to the ``v(x, order)`` protocol."""

    def v(x, order=0):
        return p(x, order)

    return v


def scaled_function(g: Callable, left, tau) -> RefFunction:
    """Pull ``g(t, order)`` back to the reference interval of ``(left, left + tau]``.

    Derivatives pick up the chain-rule factor ``(tau/2)**order``.
    """
    left, half = big(left), big(tau) / 2

    def v(x, order=0):
        return _as_values(g(left + half * (x + 1), order)) * half**order

    return v


def _solve_or_violate(matrix: np.ndarray, what: str):
    try:
        return lu_factor(matrix)
    except SingularMatrix as exc:
        raise AssumptionViolated(f"{what} defining system is singular: {exc}") from exc


@dataclass(frozen=True, eq=False)
class _OperatorBase:
    r: int
    k: int
    rule: QuadRule
    cascade: InterpCascade = IDENTITY
    _lu: object = field(init=False, repr=False)
    _var_rhs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not 0 <= self.k <= self.r:
            raise ValueError(f"need 0 <= k <= r, got r={self.r}, k={self.k}")

    @property
    def cond(self):
        return self._lu.cond

    @property
    def matrix(self) -> np.ndarray:
        return self._lu.matrix

    def _test_rows(self, tests: np.ndarray) -> np.ndarray:
        """``Phi[q, s]`` so that ``Phi @ v(input_nodes)`` = I[(cascade v) phi_q]."""
        weights = np.array(self.rule.weights, dtype=object)
        cmat = self.cascade.matrix(self.rule.points, self.rule)
        return (tests * weights[None, :]) @ cmat


class JOperator(_OperatorBase):
    """Degree-r approximation defined by endpoint jets plus integrator-tested derivative."""

    def __post_init__(self):
        super().__post_init__()
        r, k = self.r, self.k
        xs = self.rule.points
        weights = np.array(self.rule.weights, dtype=object)
        rows = []
        for i in self.left_orders:
            rows.append([endpoint_derivative(p, i, -1) for p in range(r + 1)])
        for i in self.right_orders:
            rows.append([endpoint_derivative(p, i, +1) for p in range(r + 1)])
        nq = r - k + 1
        tests = vandermonde(xs, r - k).T  # (nq, n_x)
        dbasis = vandermonde(xs, r, deriv=1)  # (n_x, r+1)
        var = (tests * weights[None, :]) @ dbasis
        if k == 0:
            for q in range(nq):
                for p in range(r + 1):
                    var[q, p] += endpoint_derivative(q, 0, -1) * endpoint_derivative(p, 0, -1)
        rows.extend(list(var))
        matrix = np.array(rows, dtype=object).reshape(r + 1, r + 1)
        object.__setattr__(self, "_lu", _solve_or_violate(matrix, f"J(r={r}, k={k}, {self.rule.label})"))
        object.__setattr__(self, "_var_rhs", self._test_rows(tests))

    @property
    def left_orders(self) -> range:
        return range(0, (self.k - 1) // 2 + 1) if self.k >= 1 else range(0)

    @property
    def right_orders(self) -> range:
        return range(1, self.k // 2 + 1) if self.k >= 2 else range(0)

    @property
    def preservation_bound(self):
        return min(self.cascade.preservation_degree + 1, self.r)

    def apply(self, v: RefFunction) -> RefPolynomial:
        rhs = [_as_values(v(mpfr(-1), i)) for i in self.left_orders]
        rhs += [_as_values(v(mpfr(1), i)) for i in self.right_orders]
        dvals = np.array([_as_values(v(y, 1)) for y in self.cascade.input_nodes(self.rule)], dtype=object)
        var = self._var_rhs @ dvals
        if self.k == 0:
            v_left = _as_values(v(mpfr(-1), 0))
            var = var + np.array([endpoint_derivative(q, 0, -1) * v_left for q in range(self.r + 1)], dtype=object)
        rhs.extend(list(var))
        return RefPolynomial(self._lu.solve(np.array(rhs, dtype=object)))


class POperator(_OperatorBase):
    """Degree-(r-1) approximation whose action on v' equals the derivative of J v."""

    def __post_init__(self):
        super().__post_init__()
        r, k = self.r, self.k
        if r == 0:
            object.__setattr__(self, "_lu", None)
            object.__setattr__(self, "_var_rhs", None)
            return
        xs = self.rule.points
        weights = np.array(self.rule.weights, dtype=object)
        rows = []
        for i in self.left_orders:
            rows.append([endpoint_derivative(p, i, -1) for p in range(r)])
        for i in self.right_orders:
            rows.append([endpoint_derivative(p, i, +1) for p in range(r)])
        tests = self._tests(xs)
        basis = vandermonde(xs, r - 1)
        rows.extend(list((tests * weights[None, :]) @ basis))
        matrix = np.array(rows, dtype=object).reshape(r, r)
        object.__setattr__(self, "_lu", _solve_or_violate(matrix, f"P(r={r}, k={k}, {self.rule.label})"))
        object.__setattr__(self, "_var_rhs", self._test_rows(tests))

    def _tests(self, xs) -> np.ndarray:
        if self.k >= 1:
            return vandermonde(xs, self.r - self.k).T
        # k = 0: test space {phi in P_r : phi(-1) = 0}, basis L_q + L_{q+1}
        full = vandermonde(xs, self.r).T
        return full[:-1] + full[1:]

    @property
    def left_orders(self) -> range:
        return range(0, (self.k - 1) // 2) if self.k >= 3 else range(0)

    @property
    def right_orders(self) -> range:
        return range(0, self.k // 2) if self.k >= 2 else range(0)

    @property
    def preservation_bound(self):
        return min(self.cascade.preservation_degree, self.r - 1)

    @property
    def cond(self):
        return mpfr(1) if self._lu is None else self._lu.cond

    def apply(self, v: RefFunction) -> RefPolynomial:
        if self.r == 0:
            return RefPolynomial.zero(_as_values(v(mpfr(-1), 0)).shape[0])
        rhs = [_as_values(v(mpfr(-1), i)) for i in self.left_orders]
        rhs += [_as_values(v(mpfr(1), i)) for i in self.right_orders]
        vals = np.array([_as_values(v(y, 0)) for y in self.cascade.input_nodes(self.rule)], dtype=object)
        rhs.extend(list(self._var_rhs @ vals))
        return RefPolynomial(self._lu.solve(np.array(rhs, dtype=object)))


@precise
def j_apply(J: JOperator, v: RefFunction) -> RefPolynomial:
    return J.apply(v)


@precise
def p_apply(P: POperator, v: RefFunction) -> RefPolynomial:
    return P.apply(v)


def derivative_of(v: RefFunction) -> RefFunction:
    """``v'`` in the ``v(x, order)`` protocol."""

    def dv(x, order=0):
        return v(x, order + 1)

    return dv
