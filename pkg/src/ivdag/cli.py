"""Command-line frontend: simulate, discover, estimate, test, benchmark.

All outputs are JSON with stable key ordering (or CSV with fixed columns), so
identical configurations and seeds produce byte-identical files. Errors are
emitted as a JSON object on standard error with exit codes 2 (usage),
3 (data), or 4 (numerical failure).
"""

import argparse
import csv
import json
import sys

import numpy as np

from .benchmark import run_benchmark, standard_batteries
from .config import PIPELINE_DEFAULTS, Hyperparams
from .effects import NoCandidateInstrumentsError, estimate_effects
from .graphs import CycleError, HypothesisSet
from .inference import test_edges
from .peeling import ArgEstimate, DegenerateColumnError, OrphanVariablesError, peel
from .precision import estimate_precision
from .simulate import Dataset, gen_hub, gen_random, sample

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class CliError(Exception):
    def __init__(self, code: int, message: str, **details):
        super().__init__(message)
        self.code = code
        self.message = message
        self.details = details


class DataError(ValueError):
    """Raised by dataset ingestion on malformed input files."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_USAGE, message)


def _read_csv(path: str):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            rows = [row for row in reader if row and any(c.strip() for c in row)]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}")
    if not rows:
        raise DataError(f"empty dataset: {path} has no header row")
    names = tuple(c.strip() for c in rows[0])
    if len(rows) == 1:
        raise DataError(f"empty dataset: {path} has a header but no data rows")
    data = np.empty((len(rows) - 1, len(names)))
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != len(names):
            raise DataError(f"{path} row {i} has {len(row)} cells, header has {len(names)}")
        for c, cell in enumerate(row):
            try:
                data[i - 1, c] = float(cell)
            except ValueError:
                raise DataError(
                    f"non-numeric cell at {path} row {i}, column {names[c]!r}: {cell!r}")
    return names, data


def load_dataset(y_path: str, x_path: str) -> Dataset:
    """Read Y and X sample-by-variable CSV files into a Dataset."""
    y_names, y = _read_csv(y_path)
    x_names, x = _read_csv(x_path)
    if y.shape[0] != x.shape[0]:
        raise DataError(
            f"row-count mismatch: {y_path} has {y.shape[0]} samples, "
            f"{x_path} has {x.shape[0]}")
    return Dataset(y=y.T, x=x.T, names=(y_names, x_names))


def _write_csv(path: str, names, data) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in data:
            writer.writerow([repr(float(v)) for v in row])


def _emit(obj: dict, out: str | None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _add_hyper_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--kappa-max", type=int, default=None)
    p.add_argument("--dim-penalty", type=float, default=None)
    p.add_argument("--config", default=None, help="flat key-value JSON; flags win")


def _params_from(args) -> Hyperparams:
    cfg = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(EXIT_USAGE, f"cannot read config {args.config}: {exc}")
        if not isinstance(cfg, dict):
            raise CliError(EXIT_USAGE, "config file must hold a flat JSON object")

    def pick(flag_value, key, cast):
        if flag_value is not None:
            return flag_value
        if key in cfg and cfg[key] is not None:
            return cast(cfg[key])
        return None

    overrides = {}
    tau = pick(getattr(args, "tau", None), "tau", float)
    if tau is not None:
        overrides["tau"] = tau
    kappa = pick(getattr(args, "kappa_max", None), "kappa_max", int)
    if kappa is not None:
        overrides["kappa_max"] = kappa
    dim_pen = pick(getattr(args, "dim_penalty", None), "dim_penalty", float)
    if dim_pen is not None:
        overrides["dim_penalty"] = dim_pen
    for key in ("alpha", "mode", "seed", "reps", "workers", "n"):
        if getattr(args, key, None) is None and key in cfg and cfg[key] is not None:
            setattr(args, key, cfg[key])
    return PIPELINE_DEFAULTS.with_overrides(**overrides)


def _load_pipeline(args):
    data = load_dataset(args.y, args.x)
    params = _params_from(args)
    if getattr(args, "arg", None):
        with open(args.arg, encoding="utf-8") as fh:
            arg = ArgEstimate.from_dict(json.load(fh))
    else:
        arg = peel(data, params)
    return data, params, arg


def _cmd_simulate(args) -> int:
    _params_from(args)
    seed = int(args.seed if args.seed is not None else 0)
    n = int(args.n if args.n is not None else 500)
    if args.suite == "hub":
        spec = gen_hub(seed, args.intervention)
    else:
        spec = gen_random(seed, intervention_kind=args.intervention)
    data = sample(spec, n)
    _write_csv(args.out_y, [f"y{j}" for j in range(1, spec.p + 1)], data.y.T)
    _write_csv(args.out_x, [f"x{l}" for l in range(1, spec.q + 1)], data.x.T)
    if args.truth:
        _emit({
            "suite": args.suite, "seed": seed, "n": n,
            "p": spec.p, "q": spec.q, "r": spec.r,
            "edges": spec.true_digraph().to_dict()["edges"],
            "interventions": spec.true_interventions().to_dict()["edges"],
            "sigmas": [float(s) for s in spec.sigmas],
        }, args.truth)
    return EXIT_OK


def _cmd_discover(args) -> int:
    data, params, arg = _load_pipeline(args)
    _emit(arg.to_dict(), args.out)
    return EXIT_OK


def _cmd_estimate(args) -> int:
    data, params, arg = _load_pipeline(args)
    mode = args.mode or "recovery"
    fitted = estimate_effects(data, arg, mode, params)
    omega = estimate_precision(fitted.residuals, params)
    out = fitted.to_dict()
    out["omega"] = omega.to_dict()
    _emit(out, args.out)
    return EXIT_OK


def _cmd_test(args) -> int:
    try:
        h = HypothesisSet.parse(args.edges)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc))
    data, params, arg = _load_pipeline(args)
    mode = args.mode or "recovery"
    alpha = float(args.alpha if args.alpha is not None else 0.05)
    if not 0.0 < alpha < 1.0:
        raise CliError(EXIT_USAGE, f"alpha must lie in (0, 1), got {alpha}")
    fitted = estimate_effects(data, arg, mode, params)
    omega = estimate_precision(fitted.residuals, params)
    report = test_edges(data, arg, fitted, omega, h, alpha, params)
    _emit(report.to_dict(), args.out)
    return EXIT_OK


def _cmd_benchmark(args) -> int:
    params = _params_from(args)
    batteries = ()
    if args.batteries == "standard":
        batteries = standard_batteries(args.suite)
    report = run_benchmark(
        suite=args.suite,
        n=int(args.n if args.n is not None else 500),
        reps=int(args.reps if args.reps is not None else 100),
        seed=int(args.seed if args.seed is not None else 0),
        mode=args.mode or "recovery",
        intervention=args.intervention,
        batteries=batteries,
        alpha=float(args.alpha if args.alpha is not None else 0.05),
        workers=int(args.workers if args.workers is not None else 1),
        naive_baseline=args.naive_baseline,
        fix_graph=args.fix_graph,
        params=params,
    )
    if args.out_csv:
        report.write_csv(args.out_csv)
    _emit(report.to_dict(), args.out_json)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="ivdag", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a benchmark dataset")
    p.add_argument("--suite", choices=["hub", "random"], required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--intervention", choices=["continuous", "discrete"],
                   default="continuous")
    p.add_argument("--out-y", required=True)
    p.add_argument("--out-x", required=True)
    p.add_argument("--truth", default=None)
    _add_hyper_flags(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("discover", help="estimate the ancestral relation graph")
    p.add_argument("--y", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--out", default=None)
    _add_hyper_flags(p)
    p.set_defaults(func=_cmd_discover, arg=None)

    p = sub.add_parser("estimate", help="fit direct effects and the precision matrix")
    p.add_argument("--y", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--arg", default=None, help="reuse a discovered graph (JSON)")
    p.add_argument("--mode", choices=["recovery", "estimation"], default=None)
    p.add_argument("--out", default=None)
    _add_hyper_flags(p)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("test", help="likelihood-ratio test of directed edges")
    p.add_argument("--y", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--edges", required=True, help='e.g. "1->2,2->3"')
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--arg", default=None)
    p.add_argument("--mode", choices=["recovery", "estimation"], default=None)
    p.add_argument("--out", default=None)
    _add_hyper_flags(p)
    p.set_defaults(func=_cmd_test)

    p = sub.add_parser("benchmark", help="seeded Monte-Carlo replications")
    p.add_argument("--suite", choices=["hub", "random"], required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--mode", choices=["recovery", "estimation"], default=None)
    p.add_argument("--intervention", choices=["continuous", "discrete"],
                   default="continuous")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--batteries", choices=["none", "standard"], default="none")
    p.add_argument("--naive-baseline", action="store_true")
    p.add_argument("--fix-graph", action="store_true")
    p.add_argument("--out-json", default=None)
    p.add_argument("--out-csv", default=None)
    _add_hyper_flags(p)
    p.set_defaults(func=_cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        _print_error(exc.code, exc.message, exc.details)
        return exc.code
    except DataError as exc:
        _print_error(EXIT_DATA, str(exc), {})
        return EXIT_DATA
    except DegenerateColumnError as exc:
        _print_error(EXIT_DATA, str(exc), {"column": exc.column})
        return EXIT_DATA
    except (OrphanVariablesError, NoCandidateInstrumentsError, CycleError,
            np.linalg.LinAlgError, ValueError) as exc:
        _print_error(EXIT_NUMERIC, str(exc), {"type": type(exc).__name__})
        return EXIT_NUMERIC


def _print_error(code: int, message: str, details: dict) -> None:
    payload = {"error": {"code": code, "message": message}}
    if details:
        payload["error"]["details"] = details
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")


if __name__ == "__main__":
    sys.exit(main())
