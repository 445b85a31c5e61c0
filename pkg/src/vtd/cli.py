"""Command line entry point: ``vtd list-cases | diagnose | run``."""

from __future__ import annotations

import argparse
import math
import sys

from .cases import CASES, get_case, load_config
from .errors import AssumptionViolated, NewtonDiverged, UnknownCase, VTDError
from .precision import default_bits, working_precision
from .study import CaseAborted, emit_table, format_error, run_case, setup_case


def _steps(text: str) -> tuple:
    try:
        steps = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad step list {text!r}") from exc
    if not steps:
        raise argparse.ArgumentTypeError("empty step list")
    return steps


def _fmt_int(v) -> str:
    return "inf" if v == math.inf else str(v)


def cmd_list(args) -> int:
    for name, cfg in CASES.items():
        cascade = " o ".join(cfg.cascade) or "identity"
        print(f"{name:8}  rule={cfg.integrator}  cascade={cascade}")
    return 0


def _describe(cfg) -> str:
    with working_precision(cfg.bits or default_bits()):
        setup = setup_case(cfg)
    d, p = setup.diagnostics, setup.predicted
    comm = ", ".join(f"{i}:{_fmt_int(v)}" for i, v in d.r_If_I.items())
    lines = [
        f"case {cfg.name}: VTD({cfg.r},{cfg.k}), rule {cfg.integrator}, cascade {' o '.join(cfg.cascade) or 'identity'}",
        f"  r_ex (integrator exactness)     = {_fmt_int(d.r_ex_I)}",
        f"  r_ex of the interpolant         = {_fmt_int(d.r_ex_If)}",
        f"  r_I (reproduction degree)       = {_fmt_int(d.r_If)}",
        f"  commutation degrees r(i)        = {{{comm}}}",
        f"  r_I^S = r(r-k)                  = {_fmt_int(d.r_I_I)}",
        f"  r_var                           = {_fmt_int(d.r_var)}",
        f"  improved-bound gate             = {'holds' if p.gate_ok else 'fails'}",
        f"  bounded-U gate                  = {'holds' if p.bounded_U_ok else 'fails'}",
        f"  predicted orders L-inf / W1-inf / mesh = {_fmt_int(p.linf)} / {_fmt_int(p.w1inf)} / {_fmt_int(p.linf_mesh)}",
    ]
    if d.saturated:
        lines.append(f"  scan cutoff {d.cutoff} reached for: {', '.join(sorted(d.saturated))}")
    return "\n".join(lines)


def cmd_diagnose(args) -> int:
    for cfg in _configs(args):
        print(_describe(cfg))
    return 0


def _configs(args) -> list:
    if getattr(args, "config", None):
        cfgs = load_config(args.config)
    else:
        names = list(CASES) if args.case == "all" else [args.case]
        cfgs = [get_case(n) for n in names]
    return [c.with_overrides(getattr(args, "steps", None), args.bits) for c in cfgs]


def cmd_run(args) -> int:
    for cfg in _configs(args):
        print(_describe(cfg), file=sys.stderr)

        def progress(rep, name=cfg.name):
            print(
                f"  {name} N={rep.N}: L-inf {format_error(rep.linf)}, W1-inf {format_error(rep.w1inf)}, mesh {format_error(rep.mesh_linf)}",
                file=sys.stderr,
                flush=True,
            )

        try:
            table = run_case(cfg, jobs=args.jobs, on_row=progress)
        except CaseAborted as exc:
            if exc.partial is not None:
                print(emit_table(exc.partial, args.format, args.paper_style))
            raise exc.cause
        print(emit_table(table, args.format, args.paper_style))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vtd", description="VTD(r,k) convergence studies in extended precision")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list-cases", help="list the built-in cases")
    p.set_defaults(func=cmd_list)

    for name, func, helptext in (
        ("diagnose", cmd_diagnose, "print order integers and predicted rates"),
        ("run", cmd_run, "run a convergence sweep and print its table"),
    ):
        p = sub.add_parser(name, help=helptext)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--case", help="built-in case name, or 'all'")
        src.add_argument("--config", help="YAML file with one document per case")
        p.add_argument("--bits", type=int, default=None, help="mantissa width (default: $VTD_BITS or 512)")
        if name == "run":
            p.add_argument("--steps", type=_steps, default=None, help="comma-separated N list, e.g. 32,64,128")
            p.add_argument("--format", choices=("markdown", "csv"), default="markdown")
            p.add_argument("--paper-style", action="store_true", help="print errors as 2.415-08")
            p.add_argument("--jobs", type=int, default=1, help="worker processes for independent N")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (NewtonDiverged, AssumptionViolated) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except UnknownCase as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    except VTDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
