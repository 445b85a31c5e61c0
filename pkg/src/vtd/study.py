"""Convergence studies: error norms, experimental orders and table output."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import gmpy2
from gmpy2 import mpfr

from .cases import CaseConfig
from .diagnostics import OrderDiagnostics, PredictedOrders, compute_diagnostics, predict_orders
from .errors import ExactSolutionMissing, ZeroError
from .nodes import make_rule
from .operators import make_cascade
from .precision import big, default_bits, precise, working_precision, zero_tol
from .problems import OdeProblem, get_problem
from .solver import DiscreteSolution, MethodConfig, TimeMesh, run_vtd

NORMS = ("linf", "w1inf", "mesh")
NORM_TITLES = {"linf": "‖e‖_L∞", "w1inf": "‖e′‖_L∞", "mesh": "‖e‖_ℓ∞"}
SAMPLES = 33


@dataclass(frozen=True)
class ErrorReport:
    N: int
    linf: object
    w1inf: object
    mesh_linf: object
    samples: int = SAMPLES

    def get(self, norm: str):
        return {"linf": self.linf, "w1inf": self.w1inf, "mesh": self.mesh_linf}[norm]


def _sample_points(samples: int) -> tuple:
    pi = gmpy2.const_pi()
    cheb = [-gmpy2.cos(pi * (2 * m + 1) / (2 * samples)) for m in range(samples)]
    return tuple([mpfr(-1)] + cheb + [mpfr(1)])


def _euclid(v) -> mpfr:
    return gmpy2.sqrt(sum((x * x for x in v), mpfr(0)))


def _golden_max(g: Callable, a: mpfr, b: mpfr, iterations: int = 40) -> mpfr:
    """Largest value of ``g`` on ``[a, b]`` found by golden-section search."""
    ratio = (gmpy2.sqrt(mpfr(5)) - 1) / 2
    c, d = b - ratio * (b - a), a + ratio * (b - a)
    gc, gd = g(c), g(d)
    best = max(g(a), g(b), gc, gd)
    for _ in range(iterations):
        if gc >= gd:
            b, d, gd = d, c, gc
            c = b - ratio * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + ratio * (b - a)
            gd = g(d)
        best = max(best, gc, gd)
    return best


# sampled maxima within this factor of the global one get refined
REFINE_BAND = mpfr("0.9")


@precise
def error_norms(sol: DiscreteSolution, exact, samples: int = SAMPLES, refine: bool = True) -> ErrorReport:
    """Sampled ``L^inf`` norms of ``e`` and ``e'`` plus the exact mesh-point norm.

    Each interval is sampled at ``samples`` Chebyshev points and both
    endpoints (one-sided limits from inside the interval).  With ``refine``
    the candidate maxima are polished by golden-section search between the
    neighbouring samples, which removes the sampling defect of about 1%.
    """
    if isinstance(exact, OdeProblem):
        exact = exact.require_exact()
    if exact is None:
        raise ExactSolutionMissing("error norms need the exact solution")
    mesh = sol.mesh
    xs = _sample_points(samples)
    taus = mesh.taus
    mesh_err = mpfr(0)
    best = {0: [], 1: []}
    for n in range(1, mesh.N + 1):
        piece = sol.pieces[n - 1]
        h = taus[n - 1] / 2
        mid = mesh.left(n) + h
        vals = {0: [], 1: []}
        for x in xs:
            t = mid + h * x
            vals[0].append(_euclid(piece(x, 0) - exact(t, 0)))
            vals[1].append(_euclid(piece(x, 1) / h - exact(t, 1)))
        mesh_err = max(mesh_err, vals[0][-1])
        for d in (0, 1):
            v = vals[d]
            for j in range(len(xs)):
                if v[j] >= v[max(j - 1, 0)] and v[j] >= v[min(j + 1, len(xs) - 1)]:
                    best[d].append((v[j], n, j))
    norms = {}
    for d in (0, 1):
        top = max(v for v, _, _ in best[d])
        norms[d] = top
        if not refine or top == 0:
            continue
        for v, n, j in best[d]:
            if v < REFINE_BAND * top:
                continue
            piece = sol.pieces[n - 1]
            h = taus[n - 1] / 2
            mid = mesh.left(n) + h

            def g(x, piece=piece, h=h, mid=mid, d=d):
                scale = h**d
                return _euclid(piece(x, d) / scale - exact(mid + h * x, d))

            lo, hi = xs[max(j - 1, 0)], xs[min(j + 1, len(xs) - 1)]
            norms[d] = max(norms[d], _golden_max(g, lo, hi))
    return ErrorReport(mesh.N, norms[0], norms[1], mesh_err, samples)


@precise
def eoc(e_coarse, e_fine, floor=None) -> mpfr:
    """``log2(e_coarse / e_fine)`` for errors on meshes of ratio two."""
    e_coarse, e_fine = big(e_coarse), big(e_fine)
    floor = zero_tol() if floor is None else big(floor)
    if e_coarse <= floor or e_fine <= floor:
        raise ZeroError(f"error at or below {float(floor):.3e}; order estimate is meaningless")
    return gmpy2.log2(e_coarse / e_fine)


@dataclass(frozen=True)
class ConvergenceTable:
    """Errors and orders per norm; ``eocs[norm][0]`` is ``None``."""

    case: str
    steps: tuple
    errors: dict
    eocs: dict
    theo: dict = field(default_factory=dict)
    notes: tuple = ()

    @property
    def norms(self) -> tuple:
        return tuple(n for n in NORMS if n in self.errors and self.errors[n])

    @classmethod
    def from_reports(cls, case: str, reports: Sequence[ErrorReport], theo: dict | None = None, norms: Sequence[str] = NORMS) -> "ConvergenceTable":
        steps = tuple(r.N for r in reports)
        errors = {n: tuple(r.get(n) for r in reports) for n in norms}
        eocs = {}
        for n in norms:
            col = [None]
            for a, b, na, nb in zip(errors[n], errors[n][1:], steps, steps[1:]):
                if nb != 2 * na:
                    col.append(None)
                    continue
                try:
                    col.append(eoc(a, b))
                except ZeroError:
                    col.append(None)
            eocs[n] = tuple(col)
        theo = dict(theo or {})
        notes = _order_notes(steps, eocs, theo)
        return cls(case, steps, errors, eocs, {n: theo[n] for n in norms if n in theo}, notes)

    def eoc_at(self, norm: str, N: int):
        return self.eocs[norm][self.steps.index(N)]

    def error_at(self, norm: str, N: int):
        return self.errors[norm][self.steps.index(N)]

    def rounded(self, digits: int = 4, order_digits: int = 2) -> "ConvergenceTable":
        """Copy with every entry rounded as it would be printed."""
        err = {n: tuple(_round_sig(v, digits) for v in col) for n, col in self.errors.items()}
        eo = {n: tuple(None if v is None else round(float(v), order_digits) for v in col) for n, col in self.eocs.items()}
        return replace(self, errors=err, eocs=eo, notes=())


def _order_notes(steps, eocs, theo) -> tuple:
    notes = []
    for norm, col in eocs.items():
        if norm not in theo or col[-1] is None:
            continue
        last = float(col[-1])
        if last > theo[norm] + 0.5:
            notes.append(f"{norm}: observed order {last:.2f} exceeds the guaranteed order {theo[norm]} (bound not sharp here)")
        elif last < theo[norm] - 0.15:
            notes.append(f"{norm}: observed order {last:.2f} below the predicted order {theo[norm]} at N={steps[-1]}")
    return tuple(notes)


# --- formatting -----------------------------------------------------------------------


def _round_sig(value, digits: int) -> mpfr:
    return mpfr(format_error(value, digits))


def format_error(value, digits: int = 4, paper_style: bool = False) -> str:
    """``2.415e-08``, or the compact ``2.415-08`` with ``paper_style``."""
    if value is None:
        return ""
    value = big(value)
    if value == 0:
        return "0"
    mant, exp, _ = value.digits(10, digits)
    sign = "-" if mant.startswith("-") else ""
    mant = mant.lstrip("-")
    exp -= 1
    body = f"{sign}{mant[0]}.{mant[1:]}" if digits > 1 else f"{sign}{mant}"
    esign = "-" if exp < 0 else "+"
    if paper_style:
        return f"{body}{esign}{abs(exp):02d}"
    return f"{body}e{esign}{abs(exp):02d}"


def format_order(value, digits: int = 2) -> str:
    return "" if value is None else f"{float(value):.{digits}f}"


def emit_table(t: ConvergenceTable, fmt: str = "markdown", paper_style: bool = False, digits: int = 4) -> str:
    """Render a table as ``csv`` or ``markdown``; norms without data are omitted."""
    norms = t.norms
    if not t.steps:
        raise ValueError("empty table")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N"] + [c for n in norms for c in (n, f"{n}_eoc")])
        for i, N in enumerate(t.steps):
            w.writerow([N] + [c for n in norms for c in (format_error(t.errors[n][i], digits, paper_style), format_order(t.eocs[n][i]))])
        if t.theo:
            w.writerow(["theo"] + [c for n in norms for c in ("", _fmt_theo(t.theo.get(n)))])
        return buf.getvalue()
    if fmt == "markdown":
        head = ["N"] + [c for n in norms for c in (NORM_TITLES[n], "ord")]
        lines = [f"**{t.case}**", "", "| " + " | ".join(head) + " |", "|" + "|".join("---:" for _ in head) + "|"]
        for i, N in enumerate(t.steps):
            cells = [str(N)] + [c for n in norms for c in (format_error(t.errors[n][i], digits, paper_style), format_order(t.eocs[n][i]))]
            lines.append("| " + " | ".join(cells) + " |")
        if t.theo:
            cells = ["theo"] + [c for n in norms for c in ("", _fmt_theo(t.theo.get(n)))]
            lines.append("| " + " | ".join(cells) + " |")
        for note in t.notes:
            lines.append(f"\n> {note}")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}; expected csv or markdown")


def _fmt_theo(v) -> str:
    if v is None:
        return ""
    return "inf" if v == math.inf else str(int(v))


def _parse_error(text: str):
    text = text.strip()
    if not text:
        return None
    if "e" not in text.lower():
        # compact form: mantissa followed by signed exponent
        for pos in range(len(text) - 1, 0, -1):
            if text[pos] in "+-":
                text = text[:pos] + "e" + text[pos:]
                break
    return mpfr(text)


def parse_csv(text: str, case: str = "") -> ConvergenceTable:
    """Inverse of ``emit_table(..., "csv")`` up to printed rounding."""
    rows = list(csv.reader(io.StringIO(text)))
    header = rows[0]
    norms = [h for h in header[1::2]]
    steps, theo = [], {}
    errors = {n: [] for n in norms}
    eocs = {n: [] for n in norms}
    for row in rows[1:]:
        if not row:
            continue
        if row[0] == "theo":
            for j, n in enumerate(norms):
                cell = row[2 + 2 * j].strip()
                if cell:
                    theo[n] = math.inf if cell == "inf" else int(cell)
            continue
        steps.append(int(row[0]))
        for j, n in enumerate(norms):
            errors[n].append(_parse_error(row[1 + 2 * j]))
            cell = row[2 + 2 * j].strip()
            eocs[n].append(float(cell) if cell else None)
    return ConvergenceTable(case, tuple(steps), {n: tuple(v) for n, v in errors.items()}, {n: tuple(v) for n, v in eocs.items()}, theo)


# --- running cases -----------------------------------------------------------------------


@dataclass(frozen=True)
class CaseSetup:
    method: MethodConfig
    problem: OdeProblem
    diagnostics: OrderDiagnostics
    predicted: PredictedOrders


def setup_case(cfg: CaseConfig) -> CaseSetup:
    """Operators, problem and predicted orders of a case (call inside working_precision)."""
    bits = cfg.bits or default_bits()
    rule = make_rule(cfg.integrator)
    cascade = make_cascade(list(cfg.cascade))
    method = MethodConfig(cfg.r, cfg.k, rule, cascade, precision_bits=bits)
    problem = get_problem(cfg.problem)
    if cfg.t_end is not None:
        problem = replace(problem, T=big(cfg.t_end) - problem.t0)
    diag = compute_diagnostics(rule, cascade, cfg.r, cfg.k)
    return CaseSetup(method, problem, diag, predict_orders(diag))


def run_point(cfg: CaseConfig, N: int) -> ErrorReport:
    """One mesh size of a case; self-contained so it can run in a worker process."""
    with working_precision(cfg.bits or default_bits()):
        setup = setup_case(cfg)
        mesh = TimeMesh.uniform(setup.problem.t0, setup.problem.T, N)
        sol, _ = run_vtd(setup.method, setup.problem, mesh)
        return error_norms(sol, setup.problem)


class CaseAborted(RuntimeError):
    """Wraps a solver failure; ``partial`` holds the rows computed so far."""

    def __init__(self, message, partial: ConvergenceTable | None, cause: BaseException):
        super().__init__(message)
        self.partial = partial
        self.cause = cause


def run_case(cfg: CaseConfig, jobs: int = 1, on_row: Callable[[ErrorReport], None] | None = None) -> ConvergenceTable:
    """Sweep the case's mesh sizes and assemble its convergence table."""
    with working_precision(cfg.bits or default_bits()):
        theo = setup_case(cfg).predicted.theo()
    reports: list[ErrorReport] = []
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = [pool.submit(run_point, cfg, N) for N in cfg.steps]
                for fut in futures:
                    reports.append(fut.result())
                    if on_row:
                        on_row(reports[-1])
        else:
            for N in cfg.steps:
                reports.append(run_point(cfg, N))
                if on_row:
                    on_row(reports[-1])
    except Exception as exc:
        partial = ConvergenceTable.from_reports(cfg.name, reports, theo) if reports else None
        raise CaseAborted(f"{cfg.name}: {exc}", partial, exc) from exc
    return ConvergenceTable.from_reports(cfg.name, reports, theo)
