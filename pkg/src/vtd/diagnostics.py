"""Approximation-order integers of an (integrator, cascade) pair and predicted rates.

Each integer is found by a monomial scan: ``t**j`` for ``j = 0, 1, ...`` is
tested against the defining identity and the scan stops at the first failure.
``math.inf`` is reported only with a structural certificate (identity cascade,
or a cascade whose every stage interpolates at all rule nodes); a scan that
reaches the cutoff without one reports the cutoff and names the quantity in
``saturated``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import gmpy2
import numpy as np
from gmpy2 import mpfr

from .legendre import RefPolynomial, vandermonde
from .operators import IDENTITY, INF, InterpCascade, JOperator, cascade_apply, scaled_function
from .nodes import QuadRule
from .precision import precise, zero_tol


@dataclass(frozen=True)
class OrderDiagnostics:
    r: int
    k: int
    r_ex_I: float  # integrator exactness degree
    r_ex_If: float  # mean preservation of the interpolant
    r_If: float  # reproduction degree of the cascade
    r_If_I: dict  # i -> commutation degree, i = 0..r-k
    cutoff: int
    saturated: frozenset = field(default_factory=frozenset)

    @property
    def r_I_I(self):
        return self.r_If_I[self.r - self.k]

    @property
    def r_var(self):
        return min(v + i for i, v in self.r_If_I.items())


@dataclass(frozen=True)
class PredictedOrders:
    linf_basic: float
    linf_improved: float | None
    w1inf: float
    linf_mesh: float
    gate_ok: bool
    bounded_U_ok: bool

    @property
    def linf(self):
        """Best guaranteed L-infinity order."""
        return self.linf_improved if self.gate_ok else self.linf_basic

    def theo(self) -> dict:
        return {"linf": self.linf, "w1inf": self.w1inf, "mesh": self.linf_mesh}


@dataclass(frozen=True)
class StageOrders:
    """Reproduction degree and mean-exactness degree of one Lagrange stage."""

    r_interp: float
    r_mean_exact: float


def _exact_moment(j: int) -> mpfr:
    return mpfr(0) if j % 2 else mpfr(2) / (j + 1)


def _first_failure(passes: Sequence[bool]) -> int | None:
    for j, ok in enumerate(passes):
        if not ok:
            return j
    return None


def _scan_value(passes: Sequence[bool], cutoff: int, certified: bool, name: str, saturated: set):
    j = _first_failure(passes)
    if j is not None:
        return j - 1
    if certified:
        return INF
    saturated.add(name)
    return cutoff


def _monomial(j: int) -> Callable:
    return lambda x: x**j


@precise
def compute_diagnostics(rule: QuadRule, cascade: InterpCascade = IDENTITY, r: int = 6, k: int = 3, cutoff: int | None = None) -> OrderDiagnostics:
    """Definition-based order integers by monomial scan up to ``cutoff`` (default 2r+5)."""
    if not 0 <= k <= r:
        raise ValueError(f"need 0 <= k <= r, got r={r}, k={k}")
    if cutoff is None:
        cutoff = max(2 * r + 5, 2 * len(rule) + 1)
    xs = rule.points
    weights = np.array(rule.weights, dtype=object)
    wnorm = rule.weight_l1()
    tol_rule = zero_tol(wnorm)
    degrees = range(cutoff + 1)
    saturated: set = set()

    ex_pass = [abs(sum(w * x**j for w, x in zip(weights, xs)) - _exact_moment(j)) <= tol_rule for j in degrees]
    r_ex_I = _scan_value(ex_pass, cutoff, False, "r_ex_I", saturated)

    n_tests = r - k + 1
    if cascade.is_identity:
        return OrderDiagnostics(r, k, r_ex_I, INF, INF, {i: INF for i in range(n_tests)}, cutoff, frozenset(saturated))

    cmat = cascade.matrix(xs, rule)
    ys = cascade.input_nodes(rule)
    tests = vandermonde(xs, n_tests - 1).T * weights[None, :]  # (n_tests, n_x)
    covers = cascade.covers(rule)
    repro, mean, comm = [], [], [[] for _ in range(n_tests)]
    for j in degrees:
        interp = cascade_apply(cascade, _monomial(j))
        mono = RefPolynomial.from_monomial([0] * j + [1])
        diff = (interp - mono).max_abs_coeff()
        scale = 1 + max(interp.max_abs_coeff(), mono.max_abs_coeff())
        repro.append(diff <= zero_tol(scale))
        mean.append(abs(interp.integral()[0] - _exact_moment(j)) <= zero_tol(scale))
        defect = np.array([x**j for x in xs], dtype=object) - cmat @ np.array([y**j for y in ys], dtype=object)
        moments = tests @ defect
        dscale = wnorm * (1 + max(abs(v) for v in cmat.flat))
        ok_so_far = True
        for i in range(n_tests):
            ok_so_far = ok_so_far and abs(moments[i]) <= zero_tol(dscale)
            comm[i].append(ok_so_far)

    r_If = _scan_value(repro, cutoff, False, "r_If", saturated)
    r_ex_If = _scan_value(mean, cutoff, False, "r_ex_If", saturated)
    r_If_I = {i: _scan_value(comm[i], cutoff, covers, f"r_If_I[{i}]", saturated) for i in range(n_tests)}
    return OrderDiagnostics(r, k, r_ex_I, r_ex_If, r_If, r_If_I, cutoff, frozenset(saturated))


@precise
def stage_orders(cascade: InterpCascade, cutoff: int | None = None) -> list[StageOrders]:
    """Per-stage reproduction and mean-exactness degrees (stage 1 first)."""
    out = []
    for stage in cascade.stages:
        n = len(stage)
        top = cutoff if cutoff is not None else 2 * n + 1
        single = InterpCascade((stage,))
        r_mean = None
        for j in range(top + 1):
            interp = cascade_apply(single, _monomial(j))
            scale = 1 + interp.max_abs_coeff()
            if abs(interp.integral()[0] - _exact_moment(j)) > zero_tol(scale):
                r_mean = j - 1
                break
        out.append(StageOrders(n - 1, top if r_mean is None else r_mean))
    return out


def cascade_lower_bounds(d: OrderDiagnostics, stages: Sequence[StageOrders]) -> dict:
    """Lower bounds for the commutation degrees from per-stage data.

    For a cascade I^1 o ... o I^l of Lagrange stages the mean-preservation
    degree tested against P_i is at least the minimum of
    ``max(r_I^j, r_ex^{I^j} - i)`` over the last stage and every stage whose
    own value falls below the reproduction degree of all later stages; the
    commutation degree is then at least ``max(r_I, min(r_ex^S - i, that))``.
    """
    if not stages:
        return {i: INF for i in d.r_If_I}
    l = len(stages)
    r_interp = min(s.r_interp for s in stages)
    bounds = {}
    for i in d.r_If_I:
        own = [max(s.r_interp, s.r_mean_exact - i) for s in stages]
        members = [j for j in range(l - 1) if own[j] < min(s.r_interp for s in stages[j + 1 :])]
        mean_bound = min(own[j] for j in members + [l - 1])
        bounds[i] = max(r_interp, min(d.r_ex_I - i, mean_bound))
    return bounds


def predict_orders(d: OrderDiagnostics, r: int | None = None, k: int | None = None) -> PredictedOrders:
    """Guaranteed convergence orders in L-inf, the W^{1,inf} seminorm and at mesh points."""
    r = d.r if r is None else r
    k = d.k if k is None else k
    rII, r0, rex = d.r_I_I, d.r_If_I[0], d.r_ex_I
    basic = min(r, rII + 1)
    gate = max(rex, rII + 1) >= r - 1
    lim = max(rex + 1, min(r, rII + 1))
    improved = min(r + 1, rII + 2, r0 + 1, lim) if gate else None
    bounded = rII >= r - 2
    linf = improved if gate else basic
    if bounded:
        mesh = min(2 * r - k + 1, d.r_var + 1, lim)
        if k == 0:
            # the dG bound carries an extra tau^(2 r_I_I + 4) term
            mesh = min(mesh, 2 * rII + 4)
    else:
        mesh = linf
    return PredictedOrders(basic, improved, basic, mesh, gate, bounded)


def predicted_j_orders(d: OrderDiagnostics) -> tuple:
    """Exponents for sup|v - J v| and |(v - J v)(t_n^-)| on shrinking intervals."""
    r = d.r
    sup = min(r + 1, d.r_I_I + 2)
    if max(d.r_ex_I, d.r_I_I + 1) >= r - 1:
        end = min(max(d.r_ex_I + 1, min(r, d.r_I_I + 1)) + 1, d.r_If_I[0] + 2)
        end = max(end, sup)
    else:
        end = sup
    return sup, end


@dataclass(frozen=True)
class SlopeFit:
    widths: tuple
    sup_errors: tuple
    end_errors: tuple
    sup_order: float
    end_order: float


def _lsq_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    return float(np.polyfit(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float), 1)[0])


@precise
def j_error_orders(J: JOperator, g: Callable, center=mpfr(3) / 10, levels: Sequence[int] = range(2, 10), samples: int = 33) -> SlopeFit:
    """Empirical orders of the local J-approximation error on intervals of width 2**-j.

    ``g(t, order)`` supplies derivatives of a smooth scalar function.  Each
    interval is ``(center - tau/2, center + tau/2]``; the sup error is sampled
    at Chebyshev points plus both endpoints.
    """
    pts = [mpfr(-1), mpfr(1)] + [-mpfr(math.cos((2 * m + 1) * math.pi / (2 * samples))) for m in range(samples)]
    widths, sups, ends = [], [], []
    for j in levels:
        tau = mpfr(2) ** (-j)
        left = center - tau / 2
        v = scaled_function(g, left, tau)
        approx = J.apply(v)
        errs = [abs(v(x, 0)[0] - approx(x)[0]) for x in pts]
        widths.append(tau)
        sups.append(max(errs))
        ends.append(errs[1])
    logw = [float(gmpy2.log2(t)) for t in widths]
    return SlopeFit(
        tuple(widths),
        tuple(sups),
        tuple(ends),
        _lsq_slope(logw, [float(gmpy2.log2(e)) for e in sups]),
        _lsq_slope(logw, [float(gmpy2.log2(e)) for e in ends]),
    )
