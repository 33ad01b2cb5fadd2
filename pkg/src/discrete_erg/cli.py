"""Command-line front end: single runs, the Monte Carlo table and model comparisons."""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from typing import Optional, Sequence

from .core import DYNAMIC, ErgError, KappaPolicy
from .experiments import CHECKS, COMPARISONS, MonteCarloSpec, run_table1
from .models import BUNDLES, get_bundle
from .sim import NonFiniteStateError, SimConfig, simulate


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on errors already; keep it from killing the caller
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


class _UsageError(Exception):
    pass


def _policy(text: str) -> KappaPolicy:
    try:
        return KappaPolicy.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _model(text: str) -> str:
    if text not in BUNDLES:
        raise argparse.ArgumentTypeError(f"unknown model {text!r}; choose from {', '.join(BUNDLES)}")
    return text


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="discrete-erg", description="Explicit reference governor simulations.",
                epilog="Vector values starting with a minus sign need the '=' form, e.g. --x0=-1,0.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="simulate one model and write its trajectory CSV")
    run.add_argument("--model", type=_model, default="double-integrator", help="benchmark model")
    run.add_argument("--kappa", type=_policy, default=DYNAMIC,
                     help="gain policy: dynamic, invariance or fixed:<value> (default dynamic)")
    run.add_argument("--r", type=_floats, help="desired reference (default: model default)")
    run.add_argument("--x0", type=_floats, help="initial state (default: model default)")
    run.add_argument("--v0", type=_floats, help="initial applied reference (default: model default)")
    run.add_argument("--dt", type=float, help="governor sample time in s (default: model default)")
    run.add_argument("--tmax", type=float, help="horizon in s (default: model default)")
    run.add_argument("--substeps", type=int, default=10, help="RK4 sub-steps per sample (default 10)")
    run.add_argument("--lyapunov", choices=("consistent", "printed"), default="consistent",
                     help="quadratic form variant for the linear models (default consistent)")
    run.add_argument("--out", help="trajectory CSV path (default: standard output)")

    mc = sub.add_parser("montecarlo", help="violation rates over random double-integrator starts")
    mc.add_argument("--runs", type=int, default=2000, help="number of initial conditions (default 2000)")
    mc.add_argument("--seed", type=int, default=0, help="64-bit seed (default 0)")
    mc.add_argument("--tmax", type=float, default=30.0, help="per-run horizon in s (default 30)")
    mc.add_argument("--lyapunov", choices=("consistent", "printed"), default="consistent",
                    help="quadratic form variant (default consistent)")
    mc.add_argument("--out", help="report CSV path (default: standard output)")

    cmp_ = sub.add_parser("compare", help="gain-policy comparison on one model")
    cmp_.add_argument("--model", type=_model, default="double-integrator", help="benchmark model")
    cmp_.add_argument("--tmax", type=float, help="horizon in s (default: study default)")
    cmp_.add_argument("--out", help="directory for the report and trajectory CSVs")
    return p


def _check_len(name: str, vals, n: int):
    if vals is not None and len(vals) != n:
        raise _UsageError(f"--{name} needs {n} values, got {len(vals)}")
    return vals


def _bundle(args):
    if args.model in ("double-integrator", "bebop"):
        return BUNDLES[args.model](args.lyapunov)
    return get_bundle(args.model)


def _cmd_run(args) -> int:
    b = _bundle(args)
    x0 = _check_len("x0", args.x0, b.plant.n)
    v0 = _check_len("v0", args.v0, b.plant.m)
    r = _check_len("r", args.r, b.plant.m)
    params = b.params
    if args.dt is not None:
        if args.dt <= 0:
            raise _UsageError("--dt must be positive")
        params = dataclasses.replace(params, dt=args.dt)
    t_max = b.t_max if args.tmax is None else args.tmax
    try:
        sim = SimConfig(t_max=t_max, substeps=args.substeps)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    try:
        log = simulate(b.plant, b.lyap, b.cons, params, sim,
                       b.x0 if x0 is None else x0, b.v0 if v0 is None else v0,
                       b.r if r is None else r, args.kappa)
    except NonFiniteStateError as exc:
        log = exc.log
    _emit(log.to_csv(), args.out)
    print(log.summary(), file=sys.stdout if args.out else sys.stderr)
    return 0


def _emit(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _report_checks(checks, stream) -> int:
    failed = 0
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}", file=stream)
        failed += not ok
    return 1 if failed else 0


def _cmd_montecarlo(args) -> int:
    try:
        spec = MonteCarloSpec(runs=args.runs, seed=args.seed, t_max=args.tmax)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    report = run_table1(spec, BUNDLES["double-integrator"](args.lyapunov))
    _emit(report.to_csv(), args.out)
    return _report_checks(CHECKS["table1"](report), sys.stdout if args.out else sys.stderr)


def _cmd_compare(args) -> int:
    kwargs = {} if args.tmax is None else {"t_max": args.tmax}
    report = COMPARISONS[args.model](**kwargs)
    if args.out:
        report.write(args.out)
        print(f"wrote {os.path.join(args.out, report.name + '.csv')}")
    else:
        sys.stdout.write(report.to_csv())
    return _report_checks(CHECKS[args.model](report), sys.stdout if args.out else sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {"run": _cmd_run, "montecarlo": _cmd_montecarlo, "compare": _cmd_compare}[args.command]
        return handler(args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except ErgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
