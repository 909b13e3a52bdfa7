"""Command line entry point: ``densemble {bench,curve,tune,fit,sample}``.

Exit codes: 0 success, 2 configuration or validation error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import sys

import numpy as np

from .bench import (
    ExperimentConfig,
    curve_csv,
    parse_estimator,
    run_benchmark,
    run_curve,
    write_atomic,
    write_results,
)
from .density import QuadratureGrid
from .errors import ConfigError, DensityError
from .models import ModelId, model_sample
from .tuning import TuneGrid, tune

log = logging.getLogger("densemble")

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}")


def _model(text: str) -> ModelId:
    try:
        return ModelId.parse(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown model {text!r}, expected M1..M11")


def read_data_csv(path) -> np.ndarray:
    """Single column of reals; a non-numeric first row is taken as a header."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and r[0].strip()]
    except OSError as exc:
        raise ConfigError(f"cannot read data file: {exc}") from None
    values = []
    for i, row in enumerate(rows):
        try:
            values.append(float(row[0]))
        except ValueError:
            if i == 0:
                continue
            raise ConfigError(f"{path}: row {i + 1} is not a number: {row[0]!r}") from None
    return np.asarray(values)


def _column_csv(header, columns) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in zip(*columns):
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def _emit(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        write_atomic(out, text)
        log.info("wrote %s", out)


def cmd_bench(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    overrides = {k: v for k, v in (("reps", args.reps), ("seed", args.seed)) if v is not None}
    if overrides:
        config = dataclasses.replace(config, **overrides)
    rows = run_benchmark(config, threads=args.threads)
    for path in write_results(rows, config, args.out, args.format):
        print(path)
    return 0


def cmd_curve(args) -> int:
    spec = parse_estimator(args.estimator)
    sizes = args.m_grid
    results = run_curve(spec, args.model, args.n, sizes, reps=args.reps, seed=args.seed,
                        threads=args.threads)
    _emit(curve_csv(results, sizes), args.out)
    return 0


def cmd_tune(args) -> int:
    grid = TuneGrid(tuple(args.breaks), tuple(args.gammas), args.M, args.reps)
    result = tune(args.family, args.model, args.n, grid, seed=args.seed)
    print(json.dumps({"family": result.family, "model": result.model.value, "n": result.n,
                      "best_params": result.best_params}))
    for point, score in result.score_table.items():
        params = ",".join(f"{k}={v}" for k, v in zip(("L", "gamma"), point))
        print(f"{params}\t{'failed' if score is None else f'{score:.6f}'}")
    return 0


def cmd_fit(args) -> int:
    spec = parse_estimator(args.estimator)
    try:
        lo, hi, size = args.eval_grid.split(":")
        grid = QuadratureGrid(float(lo), float(hi), int(size))
    except (ValueError, DensityError) as exc:
        raise ConfigError(f"--eval-grid must be lo:hi:G with lo < hi and odd G >= 3 ({exc})") from None
    x = read_data_csv(args.data)
    d = spec.fitter(M=args.M)(x, np.random.default_rng(args.seed))
    points = grid.points
    _emit(_column_csv(["x", "density"], [points, d(points)]), args.out)
    return 0


def cmd_sample(args) -> int:
    x = model_sample(args.model, args.n, np.random.default_rng(args.seed))
    _emit(_column_csv(["x"], [x]), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="densemble",
                                     description="Ensemble density estimation benchmark")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench", help="reproduce MISE tables from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--reps", type=int, help="override the replication count")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("curve", help="MISE against ensemble size")
    p.add_argument("--model", type=_model, required=True)
    p.add_argument("--estimator", required=True, help="baghist or aggreghist spec")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m-grid", type=_int_list, default=[1, 5, 10, 25, 50, 100, 200, 300])
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("tune", help="grid-search breakpoints and gamma")
    p.add_argument("--family", required=True, choices=["histogram", "baghist", "aggreghist"])
    p.add_argument("--model", type=_model, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--breaks", type=_int_list, default=list(TuneGrid.breaks_grid))
    p.add_argument("--gammas", type=_float_list, default=list(TuneGrid.gamma_grid))
    p.add_argument("--M", type=int, default=TuneGrid.M)
    p.add_argument("--reps", type=int, default=TuneGrid.reps)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("fit", help="fit an estimator to a data file")
    p.add_argument("--estimator", required=True, help="kind[:key=value,...] or JSON")
    p.add_argument("--data", required=True)
    p.add_argument("--eval-grid", required=True, help="lo:hi:G (write --eval-grid=-5:5:101 when lo is negative)")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--M", type=int, default=300, help="ensemble size when the spec omits M")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sample", help="draw from a benchmark model")
    p.add_argument("--model", type=_model, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if getattr(args, "threads", 1) < 1:
            raise ConfigError("--threads must be at least 1")
        return args.func(args)
    except ConfigError as exc:
        print(f"densemble: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DensityError, FloatingPointError) as exc:
        print(f"densemble: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"densemble: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
