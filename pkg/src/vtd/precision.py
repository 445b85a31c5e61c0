"""Extended-precision scalar contract.

All arithmetic runs on :class:`gmpy2.mpfr` values.  The mantissa width is a
property of the active gmpy2 context; :func:`working_precision` installs a
context with a fixed width and round-to-nearest-even, and :func:`precise`
guarantees that library entry points never silently run at double precision.
"""

from __future__ import annotations

import functools
import os
from contextlib import contextmanager
from fractions import Fraction

import gmpy2
from gmpy2 import mpfr, mpq

from .errors import PrecisionError

DEFAULT_BITS = 512
MIN_BITS = 128
#: guard bits kept between rounding noise and the "exact zero" threshold
ZERO_GUARD_BITS = 64


def default_bits() -> int:
    """Default width, overridable through the ``VTD_BITS`` environment variable."""
    raw = os.environ.get("VTD_BITS")
    if raw is None or raw.strip() == "":
        return DEFAULT_BITS
    try:
        bits = int(raw)
    except ValueError as exc:
        raise PrecisionError(f"VTD_BITS must be an integer, got {raw!r}") from exc
    _check_bits(bits)
    return bits


def _check_bits(bits: int) -> None:
    if bits < MIN_BITS:
        raise PrecisionError(f"precision must be at least {MIN_BITS} bits, got {bits}")


def current_bits() -> int:
    return gmpy2.get_context().precision


@contextmanager
def working_precision(bits: int | None = None):
    """Run the enclosed block with a ``bits``-wide mantissa (nearest-even rounding)."""
    if bits is None:
        bits = default_bits()
    _check_bits(bits)
    ctx = gmpy2.context(gmpy2.get_context(), precision=bits, round=gmpy2.RoundToNearest)
    with ctx:
        yield ctx


def precise(func):
    """Decorator: run ``func`` at the default width unless a wide context is active."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        if current_bits() >= MIN_BITS:
            return func(*args, **kwargs)
        with working_precision():
            return func(*args, **kwargs)

    return wrapper


def eps(bits: int | None = None) -> mpfr:
    """Unit roundoff ``2**(1 - bits)``."""
    bits = current_bits() if bits is None else bits
    return gmpy2.exp2(mpfr(1 - bits))


def zero_tol(scale=1, bits: int | None = None) -> mpfr:
    """Threshold below which a quantity of size ``scale`` counts as exactly zero."""
    bits = current_bits() if bits is None else bits
    return gmpy2.exp2(mpfr(ZERO_GUARD_BITS - bits)) * scale


def big(value) -> mpfr:
    """Convert ints, fractions, floats, decimal strings or ``"p/q"`` strings to mpfr."""
    if isinstance(value, type(mpfr(0))):
        return mpfr(value)
    if isinstance(value, Fraction):
        return mpfr(mpq(value.numerator, value.denominator))
    if isinstance(value, str):
        text = value.strip().replace("−", "-")
        if "/" in text:
            num, den = text.split("/", 1)
            return mpfr(mpq(int(num), int(den)))
        try:
            return mpfr(mpq(Fraction(text)))
        except ValueError:
            return mpfr(text)
    return mpfr(value)


def is_big(value) -> bool:
    return isinstance(value, type(mpfr(0)))
