from __future__ import annotations

import math

import numpy as np
import pytest
from gmpy2 import mpfr

from manufactured import polynomial_problem, sample_polynomial
from vtd.cases import CASES
from vtd.errors import ExactSolutionMissing, ZeroError
from vtd.nodes import make_rule
from vtd.problems import OdeProblem
from vtd.solver import DiscreteSolution, MethodConfig, TimeMesh, run_vtd
from vtd.legendre import RefPolynomial
from vtd.study import (
    CaseAborted,
    ConvergenceTable,
    ErrorReport,
    emit_table,
    eoc,
    error_norms,
    format_error,
    format_order,
    parse_csv,
    run_case,
    setup_case,
)


def test_eoc_values():
    assert eoc(mpfr(2) ** -10, mpfr(2) ** -16) == 6
    assert abs(float(eoc("1.6e-3", "1e-4")) - 4) < 1e-12
    assert eoc(1, 2) == -1


def test_eoc_refuses_vanishing_errors():
    with pytest.raises(ZeroError):
        eoc(0, 1)
    with pytest.raises(ZeroError):
        eoc(1, mpfr(2) ** -600)
    with pytest.raises(ZeroError):
        eoc(1, mpfr("1e-20"), floor="1e-10")


@pytest.mark.parametrize(
    "value,plain,compact",
    [
        (mpfr("2.41538e-8"), "2.415e-08", "2.415-08"),
        (mpfr("6.4e-25"), "6.400e-25", "6.400-25"),
        (mpfr("123.456"), "1.235e+02", "1.235+02"),
        (mpfr("1e-400"), "1.000e-400", "1.000-400"),
        (mpfr(0), "0", "0"),
    ],
)
def test_format_error(value, plain, compact):
    assert format_error(value) == plain
    assert format_error(value, paper_style=True) == compact


def test_format_order_and_none():
    assert format_order(mpfr("6.996")) == "7.00"
    assert format_order(None) == ""
    assert format_error(None) == ""


def _reports(errs):
    return [ErrorReport(N, mpfr(e), mpfr(e) * 10, mpfr(e) / 10) for N, e in errs]


def test_table_from_reports_and_notes():
    reps = _reports([(32, 2.0**-10), (64, 2.0**-17), (128, 2.0**-24)])
    t = ConvergenceTable.from_reports("demo", reps, {"linf": 7, "w1inf": 5, "mesh": 8})
    assert t.eocs["linf"][0] is None and float(t.eoc_at("linf", 128)) == 7
    assert t.error_at("mesh", 64) == mpfr(2.0**-17) / 10
    assert any(n.startswith("w1inf") and "exceeds" in n for n in t.notes)
    assert any(n.startswith("mesh") and "below" in n for n in t.notes)
    assert not any(n.startswith("linf") for n in t.notes)


def test_non_doubling_steps_have_no_order():
    t = ConvergenceTable.from_reports("demo", _reports([(32, 1e-3), (48, 1e-4), (96, 1e-5)]))
    assert t.eocs["linf"][1] is None and t.eocs["linf"][2] is not None


def test_csv_round_trip_and_paper_style():
    reps = _reports([(32, 1.6483e-3), (64, 2.6e-5), (128, 4.1e-7)])
    t = ConvergenceTable.from_reports("demo", reps, {"linf": 6, "w1inf": math.inf, "mesh": 6})
    for style in (False, True):
        text = emit_table(t, "csv", paper_style=style)
        back = parse_csv(text, "demo")
        ref = t.rounded()
        assert back.steps == ref.steps and back.errors == ref.errors and back.eocs == ref.eocs
        assert back.theo == {"linf": 6, "w1inf": math.inf, "mesh": 6}
    lines = emit_table(t, "csv").splitlines()
    assert lines[0] == "N,linf,linf_eoc,w1inf,w1inf_eoc,mesh,mesh_eoc"
    assert lines[1].startswith("32,1.648e-03,,")
    assert lines[-1] == "theo,,6,,inf,,6"


def test_empty_norm_columns_are_omitted():
    t = ConvergenceTable("demo", (32, 64), {"linf": (mpfr(1), mpfr("0.5")), "mesh": ()}, {"linf": (None, mpfr(1)), "mesh": ()})
    assert t.norms == ("linf",)
    assert "mesh" not in emit_table(t, "csv")


def test_markdown_layout():
    t = ConvergenceTable.from_reports("case-x", _reports([(32, 1e-3), (64, 1.25e-4)]), {"linf": 3, "w1inf": 3, "mesh": 3})
    md = emit_table(t, "markdown", paper_style=True)
    lines = md.splitlines()
    assert lines[0] == "**case-x**"
    assert lines[2].count("|") == 8
    assert lines[4].startswith("| 32 | 1.000-03 |")
    assert "| 3.00 |" in lines[5]
    assert lines[6].startswith("| theo |")
    with pytest.raises(ValueError):
        emit_table(t, "html")
    with pytest.raises(ValueError):
        emit_table(ConvergenceTable("e", (), {}, {}), "csv")


def test_error_norms_of_a_known_defect():
    # U = 0 on (0, 2] against u = (t^2, 0): sup |e| = 4, sup |e'| = 4, mesh value 4
    mesh = TimeMesh.uniform(0, 2, 2)
    zero = RefPolynomial(np.array([[mpfr(0), mpfr(0)]] * 3, dtype=object))
    sol = DiscreteSolution(mesh, (zero, zero), (mpfr(0), mpfr(0)))

    def exact(t, order=0):
        return np.array([[t * t, 2 * t, mpfr(2)][order], mpfr(0)], dtype=object)

    rep = error_norms(sol, exact)
    assert rep.linf == 4 and rep.w1inf == 4 and rep.mesh_linf == 4
    assert rep.get("mesh") == 4
    with pytest.raises(ExactSolutionMissing):
        error_norms(sol, None)


def test_refinement_finds_interior_maximum():
    # e(t) = sin-like bump peaking between samples
    mesh = TimeMesh.uniform(0, 1, 1)
    zero = RefPolynomial(np.array([[mpfr(0)]] * 2, dtype=object))
    sol = DiscreteSolution(mesh, (zero,), (mpfr(0),))
    peak = mpfr("0.5037")

    def exact(t, order=0):
        return np.array([[1 - (t - peak) ** 2, -2 * (t - peak)][order]], dtype=object)

    coarse = error_norms(sol, exact, samples=5, refine=False).linf
    fine = error_norms(sol, exact, samples=5).linf
    assert coarse < 1 - mpfr(2) ** -20
    assert abs(fine - 1) < mpfr(2) ** -40


def test_setup_case_uses_study_window():
    setup = setup_case(CASES["case3c"])
    assert setup.problem.t_end == 16
    assert setup.predicted.theo() == {"linf": 7, "w1inf": 6, "mesh": 10}


def test_small_run_is_deterministic_and_parallel_safe():
    cfg = CASES["case4b"].with_overrides(steps=(16, 32), bits=256)
    a = run_case(cfg)
    b = run_case(cfg, jobs=2)
    assert a.errors == b.errors
    assert a.theo == {"linf": 7, "w1inf": 6, "mesh": 10}
    rows = []
    run_case(cfg, on_row=rows.append)
    assert [r.N for r in rows] == [16, 32]


def test_case_abort_keeps_partial_table(monkeypatch):
    import vtd.study as study

    real = study.run_point

    def flaky(cfg, N):
        if N == 32:
            raise RuntimeError("boom")
        return real(cfg, N)

    monkeypatch.setattr(study, "run_point", flaky)
    cfg = CASES["case4b"].with_overrides(steps=(16, 32), bits=256)
    with pytest.raises(CaseAborted) as info:
        run_case(cfg)
    assert info.value.partial.steps == (16,)
    assert isinstance(info.value.cause, RuntimeError)


def test_study_on_manufactured_problem_is_exact():
    prob = polynomial_problem(sample_polynomial(3), sample_polynomial(2))
    sol, _ = run_vtd(MethodConfig(3, 1, make_rule("gauss:4")), prob, TimeMesh.uniform(0, 2, 2))
    assert error_norms(sol, prob, samples=9).linf <= mpfr(2) ** -400
    assert isinstance(prob, OdeProblem)
