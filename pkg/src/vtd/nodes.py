"""Node sets on [-1, 1] and interpolatory quadrature rules.

Named node sets are roots of Legendre-type polynomials: a double-precision
seed from numpy is polished by Newton's method at the working precision.
Explicit node sets may be given as exact rationals (``"-13/23"``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import gmpy2
import numpy as np
from gmpy2 import mpfr
from numpy.polynomial import legendre as npleg

from .errors import InvalidNodeSet, LengthMismatch
from .legendre import legendre_table, vandermonde
from .linalg import lu_factor
from .precision import big, current_bits, precise, zero_tol

KINDS = ("gauss", "radau_left", "lobatto", "explicit")
_ALIASES = {
    "gauss": "gauss",
    "gauss_legendre": "gauss",
    "radau_left": "radau_left",
    "left_radau": "radau_left",
    "radau": "radau_left",
    "lobatto": "lobatto",
    "gauss_lobatto": "lobatto",
    "explicit": "explicit",
}
_NEWTON_MAX = 200


@dataclass(frozen=True)
class NodeSet:
    kind: str
    nodes: tuple
    label: str

    @property
    def n(self) -> int:
        return len(self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)

    def contains(self, other: "NodeSet") -> bool:
        """True when every node of ``other`` coincides with one of ours."""
        tol = zero_tol()
        return all(any(abs(x - y) <= tol for y in self.nodes) for x in other.nodes)


@dataclass(frozen=True)
class QuadRule:
    nodes: NodeSet
    weights: tuple

    @property
    def points(self) -> tuple:
        return self.nodes.nodes

    @property
    def label(self) -> str:
        return self.nodes.label

    def __len__(self) -> int:
        return len(self.weights)

    def weight_l1(self) -> mpfr:
        return sum((abs(w) for w in self.weights), mpfr(0))


def _poly_value(kind: str, n: int, x, deriv: int):
    """Value of the defining polynomial's ``deriv``-th derivative at x."""
    if kind == "gauss":
        return legendre_table(n, x, deriv)[deriv][n]
    if kind == "radau_left":
        t = legendre_table(n, x, deriv)[deriv]
        return t[n - 1] + t[n]
    t = legendre_table(n - 1, x, deriv + 1)[deriv + 1]
    return t[n - 1]


def _seeds(kind: str, n: int) -> list[float]:
    if kind == "gauss":
        c = np.zeros(n + 1)
        c[n] = 1.0
        roots = npleg.legroots(c)
    elif kind == "radau_left":
        c = np.zeros(n + 1)
        c[n - 1] = c[n] = 1.0
        roots = [x for x in npleg.legroots(c) if x > -1 + 1e-10]
    else:
        c = np.zeros(n)
        c[n - 1] = 1.0
        roots = npleg.legroots(npleg.legder(c)) if n > 2 else []
    return sorted(float(np.real(x)) for x in roots)


def _polish(kind: str, n: int, seed: float) -> mpfr:
    x = mpfr(seed)
    stop = gmpy2.exp2(mpfr(-current_bits() + 8))
    for _ in range(_NEWTON_MAX):
        step = _poly_value(kind, n, x, 0) / _poly_value(kind, n, x, 1)
        x -= step
        if abs(step) <= stop:
            break
    # one more step after the stopping test removes the last rounding defect
    x -= _poly_value(kind, n, x, 0) / _poly_value(kind, n, x, 1)
    residual = abs(_poly_value(kind, n, x, 0))
    if residual >= gmpy2.exp2(mpfr(-current_bits() + 16)):
        raise InvalidNodeSet(f"Newton polish of {kind}:{n} node did not converge (residual {float(residual):.3e})")
    return x


def _named_nodes(kind: str, n: int) -> list:
    if kind == "lobatto" and n < 2:
        raise InvalidNodeSet("Lobatto node sets need n >= 2")
    if n < 1:
        raise InvalidNodeSet("node sets need n >= 1")
    if kind == "gauss" and n == 1:
        return [mpfr(0)]
    interior = [_polish(kind, n, s) for s in _seeds(kind, n)]
    if kind == "radau_left":
        return [mpfr(-1)] + interior
    if kind == "lobatto":
        return [mpfr(-1)] + interior + [mpfr(1)]
    return interior


def _validated(values) -> list:
    pts = sorted(values)
    for x in pts:
        if x < -1 or x > 1:
            raise InvalidNodeSet(f"node {float(x)} lies outside [-1, 1]")
    for a, b in zip(pts, pts[1:]):
        if a == b:
            raise InvalidNodeSet(f"duplicate node {float(a)}")
    if not pts:
        raise InvalidNodeSet("empty node set")
    return pts


@precise
def make_nodes(kind: str, n_or_values=None) -> NodeSet:
    """Build a node set.

    ``make_nodes("gauss", 5)``, ``make_nodes("explicit", ["-3/4", "1/4"])`` or
    a single config string ``make_nodes("lobatto:5")``.
    """
    if n_or_values is None:
        return parse_nodes(kind)
    key = _ALIASES.get(kind.lower().replace("-", "_"))
    if key is None:
        raise InvalidNodeSet(f"unknown node kind {kind!r}; expected one of {KINDS}")
    if key == "explicit":
        raw = list(n_or_values)
        pts = _validated([big(v) for v in raw])
        label = "explicit:[" + ",".join(str(v) for v in raw) + "]"
        return NodeSet("explicit", tuple(pts), label)
    n = int(n_or_values)
    return NodeSet(key, tuple(_named_nodes(key, n)), f"{key}:{n}")


_SPEC_RE = re.compile(r"^\s*([A-Za-z_\-]+)\s*:\s*(.+?)\s*$")


@precise
def parse_nodes(spec: str) -> NodeSet:
    """Parse ``"gauss:5"``, ``"radau_left:3"``, ``"lobatto:5"``, ``"explicit:[-3/4,1/4]"``."""
    m = _SPEC_RE.match(spec)
    if not m:
        raise InvalidNodeSet(f"cannot parse node set {spec!r}")
    kind, arg = m.group(1), m.group(2)
    if _ALIASES.get(kind.lower().replace("-", "_")) == "explicit":
        body = arg.strip()
        if not (body.startswith("[") and body.endswith("]")):
            raise InvalidNodeSet(f"explicit node list must be bracketed: {spec!r}")
        items = [s.strip() for s in body[1:-1].split(",") if s.strip()]
        return make_nodes("explicit", items)
    try:
        n = int(arg)
    except ValueError as exc:
        raise InvalidNodeSet(f"node count must be an integer in {spec!r}") from exc
    return make_nodes(kind, n)


@precise
def make_rule(nodes: NodeSet | str) -> QuadRule:
    """Interpolatory quadrature rule: w_m is the integral of the m-th Lagrange basis.

    The Lagrange basis is expanded in Legendre polynomials; only the ``L_0``
    coefficient survives integration, so ``w = 2 * first row of V^{-1}``.
    """
    if isinstance(nodes, str):
        nodes = parse_nodes(nodes)
    pts = nodes.nodes
    v = vandermonde(pts, len(pts) - 1)
    e0 = np.array([mpfr(2)] + [mpfr(0)] * (len(pts) - 1), dtype=object)
    weights = lu_factor(v.T).solve(e0)
    return QuadRule(nodes, tuple(weights))


def apply_rule(rule: QuadRule, samples) -> np.ndarray | mpfr:
    """Weighted sum of samples at the rule nodes (reference interval, no scaling)."""
    samples = np.asarray(samples, dtype=object)
    if samples.shape[0] != len(rule.weights):
        raise LengthMismatch(f"rule has {len(rule.weights)} nodes, got {samples.shape[0]} samples")
    return np.array(rule.weights, dtype=object) @ samples
