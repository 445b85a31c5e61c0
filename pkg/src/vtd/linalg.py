"""Small dense LU with partial pivoting over mpfr object arrays."""

from __future__ import annotations

import numpy as np
from gmpy2 import mpfr

from .errors import SingularMatrix
from .precision import current_bits

import gmpy2


def norm_inf(a: np.ndarray) -> mpfr:
    """Infinity norm of a vector or matrix (max absolute row sum)."""
    a = np.asarray(a, dtype=object)
    if a.size == 0:
        return mpfr(0)
    if a.ndim == 1:
        return max(abs(x) for x in a)
    return max(sum((abs(x) for x in row), mpfr(0)) for row in a)


class LUFactor:
    """LU factorization ``P A = L U`` of a square mpfr matrix.

    Raises :class:`SingularMatrix` when a pivot magnitude drops below
    ``2**(-bits/2) * ||A||_inf``.
    """

    def __init__(self, a):
        a = np.array(a, dtype=object)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"matrix must be square, got shape {a.shape}")
        self.n = n = a.shape[0]
        self.matrix = a.copy()
        self.anorm = norm_inf(a)
        threshold = gmpy2.exp2(mpfr(-current_bits() // 2)) * self.anorm
        lu = a.copy()
        perm = list(range(n))
        for col in range(n):
            pivot_row = max(range(col, n), key=lambda i: abs(lu[i, col]))
            if abs(lu[pivot_row, col]) <= threshold:
                raise SingularMatrix(
                    f"pivot {float(abs(lu[pivot_row, col])):.3e} in column {col} "
                    f"below threshold {float(threshold):.3e}"
                )
            if pivot_row != col:
                lu[[col, pivot_row]] = lu[[pivot_row, col]]
                perm[col], perm[pivot_row] = perm[pivot_row], perm[col]
            inv = 1 / lu[col, col]
            for i in range(col + 1, n):
                factor = lu[i, col] * inv
                lu[i, col] = factor
                if factor:
                    lu[i, col + 1 :] = lu[i, col + 1 :] - factor * lu[col, col + 1 :]
        self.lu = lu
        self.perm = perm
        self._cond = None

    def solve(self, b) -> np.ndarray:
        """Solve ``A x = b`` for a vector or a matrix of right-hand sides."""
        b = np.array(b, dtype=object)
        if b.shape[0] != self.n:
            raise ValueError(f"right-hand side has {b.shape[0]} rows, expected {self.n}")
        x = b[self.perm].copy()
        lu = self.lu
        for i in range(1, self.n):
            x[i] = x[i] - lu[i, :i] @ x[:i]
        for i in range(self.n - 1, -1, -1):
            if i + 1 < self.n:
                x[i] = x[i] - lu[i, i + 1 :] @ x[i + 1 :]
            x[i] = x[i] / lu[i, i]
        return x

    def inverse(self) -> np.ndarray:
        eye = np.array([[mpfr(1) if i == j else mpfr(0) for j in range(self.n)] for i in range(self.n)], dtype=object)
        return self.solve(eye)

    @property
    def cond(self) -> mpfr:
        """Infinity-norm condition number (exact for these small systems)."""
        if self._cond is None:
            self._cond = self.anorm * norm_inf(self.inverse())
        return self._cond


def lu_factor(a) -> LUFactor:
    return LUFactor(a)


def dense_solve(a, b) -> tuple[np.ndarray, mpfr]:
    """Solve ``A x = b``; returns ``(x, cond_inf(A))``."""
    lu = LUFactor(a)
    return lu.solve(b), lu.cond


def residual_bound(a, x, b) -> mpfr:
    """Backward-error bound ``m * eps * (||A|| ||x|| + ||b||)`` for a computed solution."""
    m = np.asarray(a).shape[0]
    eps = gmpy2.exp2(mpfr(1 - current_bits()))
    return m * eps * (norm_inf(a) * norm_inf(x) + norm_inf(b))
