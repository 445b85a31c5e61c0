"""Polynomial algebra on the reference interval (-1, 1] in the Legendre basis.

Coefficient arrays are numpy ``object`` arrays of mpfr.  A vector-valued
polynomial of degree ``n`` with values in R^d stores an ``(n + 1, d)`` array;
row ``j`` multiplies ``L_j``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from gmpy2 import mpfr

from .linalg import lu_factor
from .precision import big

ZERO = mpfr(0)


def legendre_eval(degree: int, x) -> mpfr:
    """Value of the Legendre polynomial ``L_degree`` at ``x`` (three-term recurrence)."""
    if degree < 0:
        raise ValueError("degree must be non-negative")
    x = big(x)
    p_prev, p = mpfr(1), x
    if degree == 0:
        return p_prev
    for n in range(1, degree):
        p_prev, p = p, ((2 * n + 1) * x * p - n * p_prev) / (n + 1)
    return p


def legendre_table(degree: int, x, deriv: int = 0) -> list[list[mpfr]]:
    """``table[i][n]`` = i-th derivative of ``L_n`` at ``x`` for i <= deriv, n <= degree.

    Uses ``L^{(i)}_{n+1} = L^{(i)}_{n-1} + (2n + 1) L^{(i-1)}_n``, which stays
    valid at the endpoints.
    """
    x = big(x)
    table = [[ZERO] * (degree + 1) for _ in range(deriv + 1)]
    row = table[0]
    row[0] = mpfr(1)
    if degree >= 1:
        row[1] = x
    for n in range(1, degree):
        row[n + 1] = ((2 * n + 1) * x * row[n] - n * row[n - 1]) / (n + 1)
    for i in range(1, deriv + 1):
        prev, row = table[i - 1], table[i]
        if degree >= 1:
            row[1] = prev[0] if i == 1 else ZERO
        for n in range(1, degree):
            row[n + 1] = row[n - 1] + (2 * n + 1) * prev[n]
    return table


def endpoint_derivative(n: int, i: int, side: int) -> mpfr:
    """Exact ``L_n^{(i)}(side)`` for ``side`` in {-1, +1}."""
    if i > n:
        return ZERO
    value = factorial(n + i) // (2**i * factorial(i) * factorial(n - i))
    sign = 1 if side > 0 or (n + i) % 2 == 0 else -1
    return mpfr(sign * value)


def vandermonde(points, degree: int, deriv: int = 0) -> np.ndarray:
    """Matrix ``V[m, n] = L_n^{(deriv)}(points[m])``."""
    rows = [legendre_table(degree, x, deriv)[deriv] for x in points]
    return np.array(rows, dtype=object).reshape(len(rows), degree + 1)


def interpolate(nodes, values) -> np.ndarray:
    """Legendre coefficients of the interpolant of ``values`` at distinct ``nodes``."""
    nodes = list(nodes)
    values = np.asarray(values, dtype=object)
    lu = lu_factor(vandermonde(nodes, len(nodes) - 1))
    return lu.solve(values)


def as_coeff_array(coeffs) -> np.ndarray:
    arr = np.array(coeffs, dtype=object)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("coefficients must form a non-empty (degree+1, d) array")
    return np.vectorize(big, otypes=[object])(arr)


@dataclass(frozen=True, eq=False)
class RefPolynomial:
    """R^d-valued polynomial on (-1, 1] stored by Legendre coefficients."""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", as_coeff_array(self.coeffs))

    @classmethod
    def zero(cls, dim: int = 1, degree: int = 0) -> "RefPolynomial":
        return cls(np.full((degree + 1, dim), ZERO, dtype=object))

    @classmethod
    def from_values(cls, nodes, values) -> "RefPolynomial":
        return cls(interpolate(nodes, values))

    @classmethod
    def from_monomial(cls, mono) -> "RefPolynomial":
        """Scalar polynomial from monomial coefficients ``mono[j]`` of ``x**j``."""
        mono = [big(c) for c in mono]
        n = len(mono)
        # interpolating at Chebyshev-like points is exact for degree n - 1
        nodes = [mpfr(2 * m + 1 - n) / n for m in range(n)] if n > 1 else [ZERO]
        values = [sum((c * x**j for j, c in enumerate(mono)), ZERO) for x in nodes]
        return cls.from_values(nodes, values)

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    def __call__(self, x, deriv: int = 0) -> np.ndarray:
        """Value (or derivative of order ``deriv``) at reference point ``x``; shape (d,)."""
        basis = legendre_table(self.degree, x, deriv)[deriv]
        return np.array(basis, dtype=object) @ self.coeffs

    def values(self, points, deriv: int = 0) -> np.ndarray:
        return vandermonde(points, self.degree, deriv) @ self.coeffs

    def derivative(self) -> "RefPolynomial":
        return RefPolynomial(derivative_coeffs(self.coeffs))

    def antiderivative(self) -> "RefPolynomial":
        """Antiderivative vanishing at -1."""
        return RefPolynomial(antiderivative_coeffs(self.coeffs))

    def integral(self) -> np.ndarray:
        """Integral over [-1, 1] (only ``L_0`` contributes)."""
        return 2 * self.coeffs[0]

    def __add__(self, other: "RefPolynomial") -> "RefPolynomial":
        n = max(self.degree, other.degree) + 1
        return RefPolynomial(_pad(self.coeffs, n) + _pad(other.coeffs, n))

    def __sub__(self, other: "RefPolynomial") -> "RefPolynomial":
        return self + (-1) * other

    def __mul__(self, alpha) -> "RefPolynomial":
        return RefPolynomial(self.coeffs * big(alpha))

    __rmul__ = __mul__

    def max_abs_coeff(self) -> mpfr:
        return max((abs(c) for c in self.coeffs.flat), default=ZERO)


def _pad(coeffs: np.ndarray, n: int) -> np.ndarray:
    if coeffs.shape[0] == n:
        return coeffs
    out = np.full((n, coeffs.shape[1]), ZERO, dtype=object)
    out[: coeffs.shape[0]] = coeffs
    return out


def derivative_coeffs(a: np.ndarray) -> np.ndarray:
    """Legendre coefficients of the derivative; the result has one row fewer."""
    n = a.shape[0] - 1
    if n == 0:
        return np.full((1, a.shape[1]), ZERO, dtype=object)
    b = np.full((n, a.shape[1]), ZERO, dtype=object)
    # b_{j-1} = (2j - 1) (a_j + b_{j+1} / (2j + 3))
    for j in range(n, 0, -1):
        acc = a[j].copy()
        if j + 1 <= n - 1:
            acc = acc + b[j + 1] / (2 * j + 3)
        b[j - 1] = (2 * j - 1) * acc
    return b


def antiderivative_coeffs(a: np.ndarray) -> np.ndarray:
    """Coefficients of the antiderivative that vanishes at -1."""
    n = a.shape[0] - 1
    c = np.full((n + 2, a.shape[1]), ZERO, dtype=object)
    # int L_0 = L_1 + L_0 ; int L_j = (L_{j+1} - L_{j-1}) / (2j + 1)
    c[1] = c[1] + a[0]
    for j in range(1, n + 1):
        c[j + 1] = c[j + 1] + a[j] / (2 * j + 1)
        c[j - 1] = c[j - 1] - a[j] / (2 * j + 1)
    # fix the constant so the value at -1 is zero: L_j(-1) = (-1)^j
    at_left = sum((c[j] * (1 if j % 2 == 0 else -1) for j in range(n + 2)), np.full(a.shape[1], ZERO, dtype=object))
    c[0] = c[0] - at_left
    return c
