"""Time stepping for the variational time discretization VTD(r, k).

On each interval ``I_n = (t_{n-1}, t_n]`` the unknown is a degree-r
polynomial stored by Legendre coefficients on the reference interval.
The local conditions are, in row order:

* continuity with the incoming value (k >= 1),
* ``U^{(i+1)}(t_n^-) = D^i f`` for ``i < k // 2`` (k >= 2),
* ``U^{(i+1)}(t_{n-1}^+) = D^i f`` for ``i < (k - 1) // 2`` (k >= 3),
* ``r - k + 1`` variational conditions tested against ``L_0 .. L_{r-k}``,
  with the right-hand side replaced by the quadrature of the interpolated f.

Derivative conditions are written for ``(tau/2)^{i+1} U^{(i+1)}`` so the
local system stays uniformly scaled as the mesh is refined.
"""

from __future__ import annotations

import bisect
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import gmpy2
import numpy as np
from gmpy2 import mpfr

from .errors import NewtonDiverged, OutOfDomain, SingularJacobian, SingularMatrix
from .legendre import RefPolynomial, endpoint_derivative, vandermonde
from .linalg import lu_factor, norm_inf
from .nodes import QuadRule, make_rule
from .operators import IDENTITY, InterpCascade
from .precision import big, current_bits, default_bits, precise, working_precision
from .problems import Jet, OdeProblem, initial_jet, total_derivative


@dataclass(frozen=True, eq=False)
class MethodConfig:
    r: int
    k: int
    rule: QuadRule
    cascade: InterpCascade = IDENTITY
    newton_tol: object = None
    max_iter: int = 30
    precision_bits: int = field(default_factory=default_bits)

    def __post_init__(self):
        if not 0 <= self.k <= self.r:
            raise ValueError(f"need 0 <= k <= r, got r={self.r}, k={self.k}")
        if isinstance(self.rule, str):
            with working_precision(self.precision_bits):
                object.__setattr__(self, "rule", make_rule(self.rule))

    @property
    def k_J(self) -> int:
        return max(self.k // 2 - 1, 0)

    @property
    def tol(self) -> mpfr:
        if self.newton_tol is not None:
            return big(self.newton_tol)
        return gmpy2.exp2(mpfr(-(3 * self.precision_bits) // 4))

    @property
    def right_orders(self) -> range:
        return range(self.k // 2) if self.k >= 2 else range(0)

    @property
    def left_orders(self) -> range:
        return range((self.k - 1) // 2) if self.k >= 3 else range(0)

    @property
    def n_test(self) -> int:
        return self.r - self.k + 1

    @property
    def n_conditions(self) -> int:
        return (1 if self.k >= 1 else 0) + len(self.right_orders) + len(self.left_orders) + self.n_test

    # cached reference-interval data -------------------------------------------------

    @cached_property
    def sample_nodes(self) -> tuple:
        return self.cascade.input_nodes(self.rule)

    @cached_property
    def sample_basis(self) -> np.ndarray:
        """``L_p`` at the sample nodes, shape (n_y, r+1)."""
        return vandermonde(self.sample_nodes, self.r)

    @cached_property
    def load_matrix(self) -> np.ndarray:
        """``M[q, y]``: weights mapping f-samples to ``I[(cascade f) L_q]``."""
        xs = self.rule.points
        weights = np.array(self.rule.weights, dtype=object)
        tests = vandermonde(xs, self.r - self.k).T
        return (tests * weights[None, :]) @ self.cascade.matrix(xs, self.rule)

    @cached_property
    def endpoint_table(self) -> dict:
        """``{side: E}`` with ``E[i, p] = L_p^{(i)}(side)`` for ``i <= k // 2 + 1``."""
        top = self.k // 2 + 1
        return {
            side: np.array([[endpoint_derivative(p, i, side) for p in range(self.r + 1)] for i in range(top + 1)], dtype=object)
            for side in (-1, 1)
        }

    @cached_property
    def linear_rows(self) -> np.ndarray:
        """Coefficient-linear part of every condition, shape (r+1, r+1)."""
        E = self.endpoint_table
        rows = []
        if self.k >= 1:
            rows.append(E[-1][0])
        rows += [E[1][i + 1] for i in self.right_orders]
        rows += [E[-1][i + 1] for i in self.left_orders]
        xs = self.rule.points
        weights = np.array(self.rule.weights, dtype=object)
        tests = vandermonde(xs, self.r - self.k).T
        var = (tests * weights[None, :]) @ vandermonde(xs, self.r, deriv=1)
        if self.k == 0:
            var = var + np.outer(E[-1][0][: self.n_test], E[-1][0])
        rows += list(var)
        return np.array(rows, dtype=object).reshape(self.r + 1, self.r + 1)

    @cached_property
    def start_nodes(self) -> tuple:
        """Chebyshev points used to re-expand start values in the Legendre basis."""
        m = self.r + 1
        return tuple(-gmpy2.cos(gmpy2.const_pi() * (2 * j + 1) / (2 * m)) for j in range(m))

    @cached_property
    def start_solver(self):
        return lu_factor(vandermonde(self.start_nodes, self.r))


@dataclass(frozen=True)
class TimeMesh:
    t0: object
    points: tuple

    def __post_init__(self):
        pts = tuple(big(p) for p in self.points)
        object.__setattr__(self, "t0", big(self.t0))
        object.__setattr__(self, "points", pts)
        if not pts:
            raise ValueError("a mesh needs at least one interval")
        prev = self.t0
        for p in pts:
            if p <= prev:
                raise ValueError("mesh points must be strictly increasing")
            prev = p
        taus = self.taus
        if any(b < a * (1 - mpfr(2) ** -40) for a, b in zip(taus, taus[1:])):
            warnings.warn("step sizes decrease somewhere; error bounds assume non-decreasing steps", stacklevel=2)

    @classmethod
    def uniform(cls, t0, T, N: int) -> "TimeMesh":
        t0, T = big(t0), big(T)
        return cls(t0, tuple(t0 + T * n / N for n in range(1, N + 1)))

    @property
    def N(self) -> int:
        return len(self.points)

    @property
    def t_end(self):
        return self.points[-1]

    def left(self, n: int):
        """``t_{n-1}`` for 1-based interval index ``n``."""
        return self.t0 if n == 1 else self.points[n - 2]

    @property
    def taus(self) -> tuple:
        return tuple(b - a for a, b in zip((self.t0,) + self.points[:-1], self.points))

    @property
    def tau(self):
        return max(self.taus)


@dataclass(frozen=True)
class NewtonReport:
    iterations: tuple
    residuals: tuple
    converged: tuple

    @property
    def max_iterations(self) -> int:
        return max(self.iterations, default=0)

    @property
    def all_converged(self) -> bool:
        return all(self.converged)


@dataclass(frozen=True)
class DiscreteSolution:
    mesh: TimeMesh
    pieces: tuple
    u0: tuple

    def piece(self, n: int) -> RefPolynomial:
        return self.pieces[n - 1]

    def mesh_value(self, n: int) -> np.ndarray:
        """``U(t_n^-)``; ``n = 0`` gives the initial value."""
        if n == 0:
            return np.array(self.u0, dtype=object)
        return self.pieces[n - 1](mpfr(1))

    def __call__(self, t, deriv: int = 0) -> np.ndarray:
        return eval_solution(self, t, deriv)


class LocalProblem:
    """Residual and Jacobian of the local conditions on one interval."""

    def __init__(self, cfg: MethodConfig, problem: OdeProblem, t_left, tau, u_in):
        self.cfg, self.problem = cfg, problem
        self.t_left, self.tau = big(t_left), big(tau)
        self.h = self.tau / 2
        self.mid = self.t_left + self.h
        self.u_in = np.asarray(u_in, dtype=object)
        self.d = problem.dim
        self.t_samples = [self.mid + self.h * y for y in cfg.sample_nodes]

    def _jet(self, c: np.ndarray, side: int, order: int) -> Jet:
        E = self.cfg.endpoint_table[side]
        vals = [(E[j] @ c) / self.h**j for j in range(order + 1)]
        return Jet(self.mid + self.h * side, vals)

    def _endpoint_rows(self, c: np.ndarray) -> list:
        cfg, out = self.cfg, []
        E = cfg.endpoint_table
        for side, orders in ((1, cfg.right_orders), (-1, cfg.left_orders)):
            for i in orders:
                jet = self._jet(c, side, i)
                out.append(E[side][i + 1] @ c - self.h ** (i + 1) * total_derivative(self.problem, i, jet))
        return out

    def residual(self, c: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        c = np.asarray(c, dtype=object).reshape(cfg.r + 1, self.d)
        lin = cfg.linear_rows @ c
        rows = []
        pos = 0
        if cfg.k >= 1:
            rows.append(lin[0] - self.u_in)
            pos = 1
        for row in self._endpoint_rows(c):
            rows.append(row)
            pos += 1
        u_y = cfg.sample_basis @ c
        F = np.array([self.problem.f(t, u) for t, u in zip(self.t_samples, u_y)], dtype=object)
        var = lin[pos:] - self.h * (cfg.load_matrix @ F)
        if cfg.k == 0:
            var = var - np.outer(cfg.endpoint_table[-1][0][: cfg.n_test], self.u_in)
        rows.extend(var)
        return np.array(rows, dtype=object).reshape(-1)

    def jacobian(self, c: np.ndarray, base: np.ndarray | None = None) -> np.ndarray:
        cfg, d, h = self.cfg, self.d, self.h
        c = np.asarray(c, dtype=object).reshape(cfg.r + 1, d)
        n = (cfg.r + 1) * d
        jac = np.empty((n, n), dtype=object)
        zero = mpfr(0)
        for row in range(cfg.r + 1):
            for p in range(cfg.r + 1):
                lp = cfg.linear_rows[row, p]
                for a in range(d):
                    for b in range(d):
                        jac[row * d + a, p * d + b] = lp if a == b else zero
        row0 = 1 if cfg.k >= 1 else 0
        E = cfg.endpoint_table
        # i = 0 endpoint rows: -h f_u(U(t_end)) L_p(side)
        pos = row0
        for side, orders in ((1, cfg.right_orders), (-1, cfg.left_orders)):
            for i in orders:
                if i == 0:
                    u_end = E[side][0] @ c
                    fu = self.problem.jacobian(self.mid + h * side, u_end)
                    self._add_block(jac, [pos], E[side][0][None, :], fu, -h)
                pos += 1
        var0 = pos
        # variational rows: -h sum_y M[q, y] f_u(y) L_p(y)
        u_y = cfg.sample_basis @ c
        rows = list(range(var0, cfg.r + 1))
        for y, (t, u) in enumerate(zip(self.t_samples, u_y)):
            fu = self.problem.jacobian(t, u)
            self._add_block(jac, rows, np.outer(cfg.load_matrix[:, y], cfg.sample_basis[y]), fu, -h)
        # higher total-derivative rows by forward differences
        fd_rows = self._fd_rows()
        if fd_rows:
            step = gmpy2.exp2(mpfr(-(current_bits() // 2)))
            ref = self.residual(c) if base is None else base
            flat = c.reshape(-1)
            for col in range(n):
                pert = flat.copy()
                pert[col] = pert[col] + step
                res = self.residual(pert)
                for row in fd_rows:
                    for a in range(d):
                        idx = row * d + a
                        jac[idx, col] = (res[idx] - ref[idx]) / step
        return jac

    def _fd_rows(self) -> list:
        cfg, rows = self.cfg, []
        pos = 1 if cfg.k >= 1 else 0
        for orders in (cfg.right_orders, cfg.left_orders):
            for i in orders:
                if i >= 1:
                    rows.append(pos)
                pos += 1
        return rows

    def _add_block(self, jac, rows, coef: np.ndarray, fu: np.ndarray, scale) -> None:
        d = self.d
        for a in range(d):
            for b in range(d):
                g = scale * fu[a, b]
                if not g:
                    continue
                for qi, row in enumerate(rows):
                    cols = slice(b, None, d)
                    jac[row * d + a, cols] = jac[row * d + a, cols] + g * coef[qi]

    def start_from(self, func) -> np.ndarray:
        """Coefficients of the degree-r interpolant of ``func(t)`` at Chebyshev points."""
        cfg = self.cfg
        vals = np.array([np.asarray(func(self.mid + self.h * x), dtype=object) for x in cfg.start_nodes], dtype=object)
        return cfg.start_solver.solve(vals)


def assemble_residual(cfg: MethodConfig, problem: OdeProblem, t_left, tau, u_in, coeffs) -> np.ndarray:
    """Local residual (length d(r+1)) of the coefficient array ``coeffs`` (r+1, d)."""
    coeffs = np.asarray(getattr(coeffs, "coeffs", coeffs), dtype=object)
    if coeffs.shape != (cfg.r + 1, problem.dim):
        raise ValueError(f"coefficients must have shape {(cfg.r + 1, problem.dim)}, got {coeffs.shape}")
    return LocalProblem(cfg, problem, t_left, tau, u_in).residual(coeffs)


def newton(local: LocalProblem, c0: np.ndarray, tol, max_iter: int, interval: int | None = None):
    """Full Newton iteration; returns ``(coeffs, iterations, residual_norm)``."""
    c = np.asarray(c0, dtype=object).reshape(-1)
    res = local.residual(c)
    rnorm = norm_inf(res)
    it = 0
    while rnorm > tol:
        if it >= max_iter:
            raise NewtonDiverged(
                f"Newton did not converge on interval {interval} after {it} iterations (residual {float(rnorm):.3e})",
                interval=interval,
                iterations=it,
                residual=rnorm,
            )
        try:
            lu = lu_factor(local.jacobian(c, res))
        except SingularMatrix as exc:
            raise SingularJacobian(f"singular Newton matrix on interval {interval}: {exc}") from exc
        c = c - lu.solve(res)
        res = local.residual(c)
        new_norm = norm_inf(res)
        it += 1
        if not gmpy2.is_finite(new_norm):
            raise NewtonDiverged(f"Newton iterate blew up on interval {interval}", interval=interval, iterations=it, residual=new_norm)
        rnorm = new_norm
    return c.reshape(local.cfg.r + 1, local.d), it, rnorm


def _taylor_start(cfg: MethodConfig, problem: OdeProblem):
    order = min(cfg.r, problem.max_order + 1)
    jet = initial_jet(problem, order)
    facts = [mpfr(math.factorial(j)) for j in range(order + 1)]
    t0 = jet.t

    def taylor(t):
        s = t - t0
        return sum((jet.values[j] * (s**j / facts[j]) for j in range(1, order + 1)), jet.values[0])

    return taylor


def _extrapolate(piece: RefPolynomial, mid, h):
    def ext(t):
        return piece((t - mid) / h)

    return ext


def solve_local(cfg: MethodConfig, problem: OdeProblem, u_in, t_left, tau, guess=None, interval: int | None = None):
    """Solve the local problem on ``(t_left, t_left + tau]``; returns ``(piece, iterations, residual)``."""
    local = LocalProblem(cfg, problem, t_left, tau, u_in)
    if guess is None:
        u_const = np.asarray(u_in, dtype=object)
        c0 = local.start_from(lambda t: u_const)
    else:
        c0 = local.start_from(guess)
    c, it, rnorm = newton(local, c0, cfg.tol, cfg.max_iter, interval)
    return RefPolynomial(c), it, rnorm


def run_vtd(cfg: MethodConfig, problem: OdeProblem, mesh: TimeMesh) -> tuple[DiscreteSolution, NewtonReport]:
    """Sweep the mesh interval by interval, passing ``U(t_n^-)`` forward."""
    with working_precision(cfg.precision_bits):
        u_in = np.array([big(v) for v in problem.u0], dtype=object)
        guess = _taylor_start(cfg, problem)
        pieces, iters, resids = [], [], []
        taus = mesh.taus
        for n in range(1, mesh.N + 1):
            t_left, tau = mesh.left(n), taus[n - 1]
            piece, it, rnorm = solve_local(cfg, problem, u_in, t_left, tau, guess, interval=n)
            pieces.append(piece)
            iters.append(it)
            resids.append(rnorm)
            u_in = piece(mpfr(1))
            guess = _extrapolate(piece, t_left + tau / 2, tau / 2)
        report = NewtonReport(tuple(iters), tuple(resids), tuple(True for _ in iters))
        return DiscreteSolution(mesh, tuple(pieces), tuple(big(v) for v in problem.u0)), report


def locate(mesh: TimeMesh, t) -> int:
    """1-based index of the interval ``(t_{n-1}, t_n]`` containing ``t``."""
    t = big(t)
    if t <= mesh.t0 or t > mesh.t_end:
        raise OutOfDomain(f"t = {float(t)} outside ({float(mesh.t0)}, {float(mesh.t_end)}]")
    return bisect.bisect_left(mesh.points, t) + 1


@precise
def eval_solution(sol: DiscreteSolution, t, deriv: int = 0) -> np.ndarray:
    """``U^{(deriv)}(t)`` with the right-closed interval convention."""
    if deriv < 0:
        raise ValueError("deriv must be non-negative")
    mesh = sol.mesh
    n = locate(mesh, t)
    left, right = mesh.left(n), mesh.points[n - 1]
    h = (right - left) / 2
    x = (big(t) - left - h) / h
    return sol.pieces[n - 1](x, deriv) / h**deriv
