"""Command-line front end: ``solve``, ``sweep`` and ``validate``.

Exit status: 0 success, 1 a validation check failed, 2 a solver did not
converge, 3 bad input (arguments, config file, output path).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import List, Optional, Sequence

import numpy as np

from .config import ConfigError, SolverConfig, load_config
from .fading import RayleighFadingPair
from .numerics import ConvergenceError
from .policies import PowerConstraint
from .rates import SCHEMES, ConsistencyError, evaluate_scheme
from .sweep import db_range, db_to_power, power_to_db, run_sweep
from .validation import MC_CASES, run_validation_suite

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NONCONVERGENCE = 2
EXIT_BAD_INPUT = 3

DEFAULT_DB_RANGE = "-10:40:2"


class BadInput(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_BAD_INPUT, f"{self.prog}: error: {message}\n")


def _common(parser: argparse.ArgumentParser, multi_scheme: bool) -> None:
    parser.add_argument("--gamma-m", type=float, help="mean main-channel power gain (default 1)")
    parser.add_argument("--gamma-e", type=float, help="mean eavesdropper power gain (default 1)")
    grid = parser.add_mutually_exclusive_group()
    grid.add_argument("--pbar", type=float, nargs="+", help="average power(s), linear scale")
    grid.add_argument("--pbar-db-range", metavar="START:STOP:STEP",
                      help="inclusive grid of average powers in dB")
    if multi_scheme:
        parser.add_argument("--schemes", "--scheme", nargs="+", choices=SCHEMES, dest="schemes",
                            help="schemes to evaluate (default all)")
    else:
        parser.add_argument("--scheme", "--schemes", choices=SCHEMES, dest="scheme", default="full_csi")
    parser.add_argument("--unit", choices=("nats", "bits"), help="rate unit (default nats)")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers")
    parser.add_argument("--seed", type=int, help="Monte Carlo seed")
    parser.add_argument("--out", help="write the result here instead of stdout")
    parser.add_argument("--config", help="JSON file of solver settings")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="secrecy-fading", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    solve = sub.add_parser("solve", help="solve one scheme at one average power, print JSON")
    _common(solve, multi_scheme=False)
    solve.add_argument("--tau", type=float, help="fixed on/off threshold instead of the optimal one")
    sweep = sub.add_parser("sweep", help="rates of several schemes over a power grid, CSV")
    _common(sweep, multi_scheme=True)
    validate = sub.add_parser("validate", help="run the oracle checks and print a pass/fail table")
    _common(validate, multi_scheme=True)
    return parser


def _config(args) -> SolverConfig:
    cfg = load_config(args.config) if args.config else SolverConfig()
    return cfg.replace(unit=args.unit, mc_seed=args.seed)


def _model(args) -> RayleighFadingPair:
    gm = 1.0 if args.gamma_m is None else args.gamma_m
    ge = 1.0 if args.gamma_e is None else args.gamma_e
    if not (math.isfinite(gm) and math.isfinite(ge)):
        raise BadInput("mean gains must be finite")
    try:
        return RayleighFadingPair(gm, ge)
    except ValueError as exc:
        raise BadInput(str(exc)) from exc


def _grid_db(args, default: Optional[str]) -> List[float]:
    if args.pbar is not None:
        if any(not (math.isfinite(p) and p > 0) for p in args.pbar):
            raise BadInput("average power must be positive and finite")
        return [power_to_db(p) for p in args.pbar]
    text = args.pbar_db_range or default
    if text is None:
        raise BadInput("give --pbar or --pbar-db-range")
    try:
        start, stop, step = (float(x) for x in text.split(":"))
        return db_range(start, stop, step)
    except ValueError as exc:
        raise BadInput(f"bad dB range {text!r}: expected START:STOP:STEP") from exc


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise BadInput(f"cannot write {out}: {exc}") from exc


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _dumps(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n"


def cmd_solve(args) -> int:
    cfg = _config(args)
    model = _model(args)
    grid = _grid_db(args, None)
    if len(grid) != 1:
        raise BadInput("solve takes exactly one average power")
    p_bar = args.pbar[0] if args.pbar is not None else db_to_power(grid[0])
    if args.tau is not None and (args.scheme != "onoff" or not args.tau >= 0):
        raise BadInput("--tau needs --scheme onoff and a non-negative value")
    base = {"gamma_m": model.gamma_m, "gamma_e": model.gamma_e, "pbar_db": power_to_db(p_bar)}
    try:
        ev = evaluate_scheme(args.scheme, model, PowerConstraint(p_bar), cfg, tau=args.tau)
    except ConvergenceError as exc:
        payload = dict(base, scheme=args.scheme, p_bar=p_bar, error=str(exc),
                       diagnostics=getattr(exc, "diagnostics", {}))
        _emit(_dumps(payload), args.out)
        return EXIT_NONCONVERGENCE
    except ConsistencyError as exc:
        _emit(_dumps(dict(base, scheme=args.scheme, p_bar=p_bar, error=str(exc))), args.out)
        return EXIT_VALIDATION
    _emit(_dumps(dict(base, **ev.to_dict(cfg.unit))), args.out)
    if args.scheme == "constant_rate" and not ev.diagnostics["converged"]:
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    model = _model(args)
    grid = _grid_db(args, DEFAULT_DB_RANGE)
    result = run_sweep(model, grid, args.schemes or SCHEMES, cfg, jobs=max(args.jobs, 1))
    _emit(result.to_csv(), args.out)
    return EXIT_OK if result.converged else EXIT_NONCONVERGENCE


def _mc_cases(args):
    if args.gamma_m is None and args.gamma_e is None and args.pbar is None and args.pbar_db_range is None:
        return MC_CASES
    model = _model(args)
    return [(model.gamma_m, model.gamma_e, db_to_power(db)) for db in _grid_db(args, "0:0:1")]


def cmd_validate(args) -> int:
    cfg = _config(args)
    cases = _mc_cases(args)
    results = run_validation_suite(cfg, max(args.jobs, 1), cases, args.schemes or SCHEMES)
    width = max(len(r.name) for r in results)
    lines = [f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.seconds:6.2f}s  {r.detail}"
             for r in results]
    failed = sum(not r.passed for r in results)
    lines.append(f"{len(results) - failed}/{len(results)} checks passed")
    print("\n".join(lines))
    if args.out:
        report = [{"name": r.name, "passed": r.passed, "detail": r.detail,
                   "seconds": r.seconds, "data": r.data} for r in results]
        _emit(_dumps({"config": cfg.to_dict(), "checks": report}), args.out)
    return EXIT_VALIDATION if failed else EXIT_OK


def _attach_range_values(argv: Sequence[str]) -> List[str]:
    # "--pbar-db-range -10:40:2" would be read as an option; bind the value explicitly
    out, it = [], iter(argv)
    for tok in it:
        if tok == "--pbar-db-range":
            value = next(it, None)
            out.append(tok if value is None else f"{tok}={value}")
        else:
            out.append(tok)
    return out


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "validate": cmd_validate}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    args = build_parser().parse_args(_attach_range_values(argv))
    try:
        return COMMANDS[args.command](args)
    except (BadInput, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except ConvergenceError as exc:
        print(f"error: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
