"""Command-line front end.

    fraccn weights --alpha 0.5 --n 5
    fraccn certify --alpha 0.5 --tau 1e-3
    fraccn run --problem ex1b --alpha 0.1,0.5,0.9 --n-list 10..320 --variant corrected2
    fraccn decay --problem sq_a,sq_b --alpha 0.5 --n 10 --t-list 1e-3,1e-4,1e-5
    fraccn table --preset tab3 --out tab3.csv

Every subcommand also takes ``--config FILE`` holding ``key = value`` lines
(keys are the long flag names); flags given on the command line win.
"""
from __future__ import annotations

import argparse
import math
import sys
from typing import Optional, Sequence

import numpy as np

from .cq_symbols import DEFAULT_THETA, SymbolError, be_cq_weights, certify_sector_mapping, certify_symbol_bounds
from .harness import (ErrorTable, StudySpec, emit_csv, run_convergence_study, run_time_decay_study)
from .oracles import PROBLEMS
from .stepper import VARIANTS

DESK_MESH = {1: 1000, 2: 64}
PAPER_MESH = {1: 10000, 2: 500}

# each preset is the argument set of one run/decay invocation
PRESETS = {
    "tab1": ("run", dict(problem="ex1a", alpha="0.1,0.5,0.9", n_list="10..320", t="1",
                         variant="uncorrected")),
    "tab2": ("run", dict(problem="ex1b", alpha="0.1,0.5,0.9", n_list="40..1280", t="1",
                         variant="uncorrected")),
    "tab3": ("run", dict(problem="ex1b", alpha="0.1,0.5,0.9", n_list="10..320", t="1",
                         variant="corrected2")),
    "tab4": ("run", dict(problem="sq_a", alpha="0.2,0.5,0.8", n_list="10..160", t="1",
                         variant="corrected2")),
    "tab5": ("run", dict(problem="sq_b", alpha="0.5", n_list="10..160", t="1,0.01,0.001",
                         variant="corrected2")),
    "tab6": ("decay", dict(problem="sq_a,sq_b", alpha="0.5", n="10",
                           t_list="1e-3,1e-4,1e-5,1e-6,1e-7,1e-8", variant="corrected2")),
    "tab7": ("run", dict(problem="sq_c", alpha="0.2,0.5,0.8", n_list="10..160", t="1",
                         variant="corrected2")),
    "tab8": ("run", dict(problem="sq_d", alpha="0.5", beta="0.2,0.5,0.8", n_list="10..160", t="1",
                         variant="corrected2")),
    "tab9": ("run", dict(problem="sq_b,sq_c", alpha="0.2,0.5,0.8", n_list="10..160", t="0.1",
                         variant="corrected3")),
}


class UsageError(Exception):
    pass


def _floats(text: str) -> list:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"expected a list of numbers, got {text!r}") from None


def _ints(text: str) -> list:
    """'10,20,40' or the doubling ladder '10..320'."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        try:
            lo, hi = int(lo), int(hi)
        except ValueError:
            raise UsageError(f"bad ladder {text!r}") from None
        if lo < 1 or hi < lo:
            raise UsageError(f"bad ladder {text!r}")
        out = [lo]
        while out[-1] * 2 <= hi:
            out.append(out[-1] * 2)
        if out[-1] != hi:
            raise UsageError(f"{hi} is not {lo} times a power of two")
        return out
    try:
        return [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"expected a list of integers, got {text!r}") from None


def _names(text: str) -> list:
    names = [x for x in text.replace(",", " ").split()]
    bad = [n for n in names if n not in PROBLEMS]
    if bad or not names:
        raise UsageError(f"unknown problem(s) {bad or text!r}; choose from {', '.join(PROBLEMS)}")
    return names


def _add_common(p, study=False):
    p.add_argument("--config", help="file of 'key = value' lines; flags override it")
    if study:
        p.add_argument("--mesh", type=int, help="subdivisions M (default 1000 in 1D, 64 in 2D)")
        p.add_argument("--paper-scale", action="store_true", default=None,
                       help="default mesh M=10000 in 1D and M=500 in 2D")
        p.add_argument("--variant", choices=VARIANTS, help="scheme variant (default corrected2)")
        p.add_argument("--refinement", type=int, help="fine-step reference uses tau = t/refinement (1000)")
        p.add_argument("--out", help="write the CSV here instead of stdout")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fraccn", description="Fractional Crank-Nicolson studies.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("weights", help="print the BE-CQ weights b_0..b_n")
    p.add_argument("--alpha", type=float)
    p.add_argument("--n", type=int)
    _add_common(p)

    p = sub.add_parser("certify", help="contour checks of the scheme symbols")
    p.add_argument("--alpha", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--theta", type=float, help=f"ray angle (default {DEFAULT_THETA:.6g})")
    p.add_argument("--delta", type=float, help="arc radius (default 0.05)")
    p.add_argument("--phi", type=float, help="sector half-angle (default midpoint of (alpha pi/2, pi))")
    p.add_argument("--samples", type=int, help="points per contour piece (default 1000)")
    _add_common(p)

    p = sub.add_parser("run", help="convergence study at fixed t")
    p.add_argument("--problem", help=f"one or more of {', '.join(PROBLEMS)}")
    p.add_argument("--alpha", help="list, e.g. 0.1,0.5,0.9")
    p.add_argument("--n-list", help="list or doubling ladder, e.g. 10..320")
    p.add_argument("--t", help="evaluation time(s) (default 1)")
    p.add_argument("--beta", help="source exponent(s) for sq_d")
    p.add_argument("--reference", choices=("fine-step", "exact"), help="default fine-step")
    _add_common(p, study=True)

    p = sub.add_parser("decay", help="error at fixed N as t -> 0")
    p.add_argument("--problem", help=f"one or more of {', '.join(PROBLEMS)}")
    p.add_argument("--alpha", type=float)
    p.add_argument("--n", type=int, help="fixed step count (default 10)")
    p.add_argument("--t-list", help="strictly decreasing times")
    p.add_argument("--beta", help="source exponent(s) for sq_d")
    _add_common(p, study=True)

    p = sub.add_parser("table", help="reproduce a table end to end")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--mesh", type=int, help="override the default mesh")
    p.add_argument("--paper-scale", action="store_true", default=None)
    p.add_argument("--out")
    _add_common(p)
    return parser


def _subparser(parser, name):
    for action in parser._subparsers._group_actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def read_config(path: str) -> dict:
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path!r}: {exc}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _merge_config(parser, args):
    if not getattr(args, "config", None):
        return args
    sub = _subparser(parser, args.command)
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    for key, text in read_config(args.config).items():
        if key not in actions:
            raise UsageError(f"unknown config key {key!r} for '{args.command}'")
        if getattr(args, key) is not None:
            continue  # flag wins
        action = actions[key]
        if isinstance(action, argparse._StoreTrueAction):
            value = text.lower() in ("1", "true", "yes", "on")
        else:
            try:
                value = action.type(text) if action.type else text
            except ValueError:
                raise UsageError(f"config key {key!r}: bad value {text!r}") from None
            if action.choices and value not in action.choices:
                raise UsageError(f"config key {key!r}: {value!r} not in {list(action.choices)}")
        setattr(args, key, value)
    return args


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


def _mesh_for(dimension, args):
    if args.mesh is not None:
        return args.mesh
    return (PAPER_MESH if args.paper_scale else DESK_MESH)[dimension]


def _dimension(problem):
    return 1 if problem.startswith("ex1") else 2


def _betas(problem, args):
    if problem != "sq_d":
        return [None]
    if args.beta is None:
        raise UsageError("sq_d needs --beta")
    return _floats(args.beta)


def plan_run(args) -> list:
    """StudySpecs for a run invocation, validated before anything is computed."""
    _require(args, "problem", "alpha", "n_list")
    specs = []
    for problem in _names(args.problem):
        for beta in _betas(problem, args):
            for t in _floats(args.t or "1"):
                try:
                    specs.append(StudySpec(problem, tuple(_floats(args.alpha)), tuple(_ints(args.n_list)),
                                           t, _mesh_for(_dimension(problem), args),
                                           args.variant or "corrected2", args.reference or "fine-step",
                                           args.refinement or 1000, beta))
                except ValueError as exc:
                    raise UsageError(str(exc)) from None
    return specs


def plan_decay(args) -> list:
    _require(args, "problem", "alpha", "t_list")
    ts = _floats(args.t_list)
    if len(ts) < 2 or any(b >= a for a, b in zip(ts, ts[1:])):
        raise UsageError("--t-list must hold at least two strictly decreasing times")
    jobs = []
    for problem in _names(args.problem):
        for beta in _betas(problem, args):
            job = dict(problem=problem, alpha=args.alpha, n_fixed=args.n or 10, t_list=ts,
                       space_M=_mesh_for(_dimension(problem), args),
                       variant=args.variant or "corrected2", refinement=args.refinement or 1000, beta=beta)
            try:  # same validation as the study itself
                StudySpec(problem, (job["alpha"],), (job["n_fixed"],), ts[0], job["space_M"],
                          job["variant"], refinement=job["refinement"], beta=beta)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
            jobs.append(job)
    return jobs


def _write(table: ErrorTable, out: Optional[str]):
    if out:
        try:
            emit_csv(table, out)
        except OSError as exc:
            raise UsageError(f"cannot write {out!r}: {exc}") from None
    else:
        emit_csv(table, sys.stdout)


def _finish(table: ErrorTable) -> int:
    failed = [r for r in table.rows if r.failure]
    for r in failed:
        print(f"numerical failure: alpha={r.alpha:g} N={r.N}: {r.failure}", file=sys.stderr)
    return 1 if failed else 0


def _cmd_weights(args):
    _require(args, "alpha", "n")
    try:
        w = be_cq_weights(args.alpha, args.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    for b in w.weights:
        print(format(float(b), ".17g"))
    return 0


def _cmd_certify(args):
    _require(args, "alpha", "tau")
    theta = DEFAULT_THETA if args.theta is None else args.theta
    delta = 0.05 if args.delta is None else args.delta
    samples = args.samples or 1000
    try:
        report = certify_symbol_bounds(args.alpha, args.tau, theta, delta, samples)
        sector = certify_sector_mapping(args.alpha, args.tau, theta, delta, args.phi, samples)
    except SymbolError as exc:
        raise UsageError(str(exc)) from None
    for line in report.lines() + sector.lines():
        print(line)
    return 0 if report.all_finite() and sector.ok else 1


def _cmd_run(args):
    specs = plan_run(args)
    table = ErrorTable.concat([run_convergence_study(s) for s in specs])
    _write(table, args.out)
    return _finish(table)


def _cmd_decay(args):
    jobs = plan_decay(args)
    table = ErrorTable.concat([run_time_decay_study(**job) for job in jobs])
    _write(table, args.out)
    return _finish(table)


def preset_argv(name: str, mesh: Optional[int] = None, paper_scale: bool = False,
                out: Optional[str] = None) -> list:
    """The explicit run/decay command line a preset stands for."""
    command, opts = PRESETS[name]
    argv = [command]
    for key, value in opts.items():
        argv += ["--" + key.replace("_", "-"), value]
    if mesh is not None:
        argv += ["--mesh", str(mesh)]
    if paper_scale:
        argv.append("--paper-scale")
    if out:
        argv += ["--out", out]
    return argv


def _cmd_table(args):
    _require(args, "preset")
    return main(preset_argv(args.preset, args.mesh, bool(args.paper_scale), args.out))


COMMANDS = {"weights": _cmd_weights, "certify": _cmd_certify, "run": _cmd_run,
            "decay": _cmd_decay, "table": _cmd_table}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the message
        return int(exc.code or 0)
    try:
        args = _merge_config(parser, args)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"fraccn {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
