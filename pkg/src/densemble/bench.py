"""
Benchmark runner: labelled estimator specifications, experiment configs and
the table / curve producers behind the command line interface.

Config files are JSON::

    {
      "models": ["M1", "M5"],          # default: all eleven
      "ns": [500],                     # default: [100, 500, 1000]
      "reps": 100,
      "M": 300,                        # ensemble size for baghist/aggreghist
      "seed": 12345,
      "grid_size": null,               # quadrature points; null = per-model default
      "estimators": [                  # default: the nine table estimators
        {"label": "AggregHist", "kind": "aggreghist",
         "params": {"L": "valpars", "gamma": "valpars"}}
      ],
      "output": {"dir": "results", "format": "csv"}
    }

``"valpars"`` resolves ``L`` / ``gamma`` from the published optimal values
for the current model and sample size.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .density import Kernel, bandwidth_nrd0, bandwidth_ucv, default_ucv_grid, fit_histogram, fit_kde
from .ensemble import (
    AGGPURE_BANDWIDTHS,
    KdeLearner,
    HistLearner,
    STACKHIST_LEARNERS,
    STACKING_LEARNERS,
    agg_pure,
    aggreg_hist,
    bag_hist,
    boost_kde,
    stack_densities,
)
from .errors import ConfigError
from .evaluation import (
    MiseResult,
    _fit_replication,
    _map,
    _summarise,
    ise_on_grid,
    mise_curve,
)
from .models import ModelId, model_grid
from .tuning import valpars

__all__ = [
    "KINDS",
    "EstimatorSpec",
    "table_estimators",
    "parse_estimator",
    "ExperimentConfig",
    "TableRow",
    "run_benchmark",
    "table_csv",
    "results_json",
    "run_curve",
    "curve_csv",
    "write_atomic",
]

VALPARS = "valpars"

# kind -> {param: default}; a default of None means "required" unless noted
KINDS = {
    "histogram": {"L": VALPARS},
    "kde": {"h": None, "kernel": "gaussian"},
    "kde_nrd0": {"kernel": "gaussian"},
    "kde_ucv": {"grid_points": 30},
    "boostkde": {"steps": 5, "h": "nrd0", "renormalize": False},
    "aggpure": {"bandwidths": list(AGGPURE_BANDWIDTHS), "S": 10},
    "stacking": {"V": 10, "learners": [{"kernel": l.kernel.value, "h": l.h} for l in STACKING_LEARNERS]},
    "stackhist": {"V": 10, "breaks": [l.L for l in STACKHIST_LEARNERS]},
    "baghist": {"L": VALPARS, "M": "config"},
    "aggreghist": {"L": VALPARS, "gamma": VALPARS, "M": "config"},
}


def _int(value, name, minimum):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise ConfigError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def _positive(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
        raise ConfigError(f"{name} must be a positive number, got {value!r}")
    return float(value)


def _kernel(value):
    try:
        return Kernel(str(value).lower())
    except ValueError:
        raise ConfigError(f"unknown kernel {value!r}") from None


@dataclass
class EstimatorSpec:
    label: str
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.kind = str(self.kind).lower()
        if self.kind not in KINDS:
            raise ConfigError(f"unknown estimator kind {self.kind!r}; known: {sorted(KINDS)}")
        unknown = set(self.params) - set(KINDS[self.kind])
        if unknown:
            raise ConfigError(f"{self.label}: unknown parameters {sorted(unknown)}")
        merged = dict(KINDS[self.kind])
        merged.update(self.params)
        self.params = merged
        self._check()

    def _check(self):
        p = self.params
        k = self.kind
        if k == "kde":
            if p["h"] is None:
                raise ConfigError(f"{self.label}: kde needs a bandwidth h")
            _positive(p["h"], "h")
        if "kernel" in p:
            _kernel(p["kernel"])
        if "L" in p and p["L"] != VALPARS:
            _int(p["L"], "L", 2)
        if "gamma" in p and p["gamma"] != VALPARS:
            if isinstance(p["gamma"], bool) or not isinstance(p["gamma"], (int, float)) or p["gamma"] < 0:
                raise ConfigError(f"gamma must be a nonnegative number, got {p['gamma']!r}")
        if "M" in p and p["M"] != "config":
            _int(p["M"], "M", 1)
        if k == "kde_ucv":
            _int(p["grid_points"], "grid_points", 1)
        if k == "boostkde":
            _int(p["steps"], "steps", 1)
            if p["h"] != "nrd0":
                _positive(p["h"], "h")
        if k == "aggpure":
            _int(p["S"], "S", 1)
            if not p["bandwidths"]:
                raise ConfigError("aggpure needs at least one bandwidth")
            for h in p["bandwidths"]:
                _positive(h, "bandwidth")
        if k in ("stacking", "stackhist"):
            _int(p["V"], "V", 2)
            self.learners()

    def learners(self):
        p = self.params
        if self.kind == "stackhist":
            if not p["breaks"]:
                raise ConfigError("stackhist needs at least one breakpoint count")
            return [HistLearner(_int(L, "breaks", 2)) for L in p["breaks"]]
        if not p["learners"]:
            raise ConfigError("stacking needs at least one learner")
        out = []
        for item in p["learners"]:
            if not isinstance(item, dict) or set(item) - {"kernel", "h"} or "h" not in item:
                raise ConfigError(f"stacking learner must be {{'kernel', 'h'}}, got {item!r}")
            out.append(KdeLearner(_kernel(item.get("kernel", "gaussian")), _positive(item["h"], "h")))
        return out

    def resolved(self, model=None, n: Optional[int] = None, M: Optional[int] = None) -> dict:
        """Parameters with ``valpars`` / ``config`` placeholders filled in."""
        p = dict(self.params)
        if VALPARS in (p.get("L"), p.get("gamma")):
            if model is None or n is None:
                raise ConfigError(f"{self.label}: 'valpars' needs a benchmark model and n")
            row = valpars(model, n)
            if p.get("L") == VALPARS:
                p["L"] = {"histogram": row.L_hist, "baghist": row.L_baghist,
                          "aggreghist": row.L_aggreghist}[self.kind]
            if p.get("gamma") == VALPARS:
                p["gamma"] = row.gamma_aggreghist
        if p.get("M") == "config":
            if M is None:
                raise ConfigError(f"{self.label}: ensemble size M not given")
            p["M"] = M
        return p

    def fitter(self, model=None, n: Optional[int] = None,
               M: Optional[int] = None) -> Callable[[np.ndarray, np.random.Generator], Any]:
        """``fit(sample, rng) -> density`` with every parameter resolved."""
        p = self.resolved(model, n, M)
        k = self.kind
        if k == "histogram":
            return lambda x, rng: fit_histogram(x, p["L"])
        if k == "kde":
            return lambda x, rng: fit_kde(x, p["kernel"], p["h"])
        if k == "kde_nrd0":
            return lambda x, rng: fit_kde(x, p["kernel"], bandwidth_nrd0(x))
        if k == "kde_ucv":
            return lambda x, rng: fit_kde(
                x, Kernel.GAUSSIAN, bandwidth_ucv(x, default_ucv_grid(x, p["grid_points"])))
        if k == "boostkde":
            h = None if p["h"] == "nrd0" else p["h"]
            return lambda x, rng: boost_kde(x, p["steps"], h, renormalize=p["renormalize"])
        if k == "aggpure":
            return lambda x, rng: agg_pure(x, p["bandwidths"], p["S"], rng)
        if k in ("stacking", "stackhist"):
            learners = self.learners()
            return lambda x, rng: stack_densities(x, learners, p["V"], rng)
        if k == "baghist":
            return lambda x, rng: bag_hist(x, p["L"], p["M"], rng)
        return lambda x, rng: aggreg_hist(x, p["L"], p["gamma"], p["M"], rng)

    def to_dict(self) -> dict:
        return {"label": self.label, "kind": self.kind, "params": self.params}


def table_estimators() -> list[EstimatorSpec]:
    """The nine columns of the published MISE tables."""
    return [
        EstimatorSpec("Histogram", "histogram"),
        EstimatorSpec("KdeNrd0", "kde_nrd0"),
        EstimatorSpec("KdeUCV", "kde_ucv"),
        EstimatorSpec("BoostKde", "boostkde"),
        EstimatorSpec("AggPure", "aggpure"),
        EstimatorSpec("Stacking", "stacking"),
        EstimatorSpec("StackHist", "stackhist"),
        EstimatorSpec("BagHist", "baghist"),
        EstimatorSpec("AggregHist", "aggreghist"),
    ]


def _parse_value(text: str):
    text = text.strip()
    if "/" in text:
        return [_parse_value(t) for t in text.split("/") if t.strip()]
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def parse_estimator(text: str, label: Optional[str] = None) -> EstimatorSpec:
    """Parse ``kind[:key=value,...]`` (lists as ``a/b/c``) or a JSON object."""
    text = text.strip()
    if text.startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad estimator JSON: {exc}") from None
        return EstimatorSpec(obj.get("label", label or obj.get("kind", "")), obj.get("kind", ""),
                             obj.get("params", {}))
    kind, _, rest = text.partition(":")
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"expected key=value in estimator spec, got {item!r}")
        params[key.strip()] = _parse_value(value)
    return EstimatorSpec(label or kind, kind, params)


@dataclass
class ExperimentConfig:
    models: list = field(default_factory=lambda: list(ModelId))
    ns: list = field(default_factory=lambda: [100, 500, 1000])
    estimators: list = field(default_factory=table_estimators)
    reps: int = 100
    M: int = 300
    seed: int = 0
    grid_size: Optional[int] = None
    out_dir: str = "results"
    format: str = "csv"

    def __post_init__(self):
        try:
            self.models = [ModelId.parse(m) for m in self.models]
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not self.models:
            raise ConfigError("config needs at least one model")
        self.ns = [_int(n, "n", 2) for n in self.ns]
        if not self.ns:
            raise ConfigError("config needs at least one sample size")
        self.reps = _int(self.reps, "reps", 1)
        self.M = _int(self.M, "M", 1)
        self.seed = _int(self.seed, "seed", 0)
        if self.seed >= 2**64:
            raise ConfigError("seed must fit in 64 bits")
        if self.grid_size is not None:
            size = _int(self.grid_size, "grid_size", 3)
            if size % 2 == 0:
                raise ConfigError("grid_size must be odd")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        labels = [e.label for e in self.estimators]
        if not labels:
            raise ConfigError("config needs at least one estimator")
        if len(set(labels)) != len(labels):
            raise ConfigError(f"estimator labels must be unique: {labels}")
        # resolve placeholders now so bad parameters fail before any work
        for spec in self.estimators:
            for model in self.models:
                for n in self.ns:
                    spec.fitter(model, n, self.M)

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        known = {"models", "ns", "estimators", "reps", "M", "seed", "grid_size", "output"}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        kwargs = {k: obj[k] for k in ("models", "ns", "reps", "M", "seed", "grid_size") if k in obj}
        if "estimators" in obj:
            specs = []
            for item in obj["estimators"]:
                if not isinstance(item, dict) or "kind" not in item:
                    raise ConfigError(f"estimator entries need a kind: {item!r}")
                specs.append(EstimatorSpec(item.get("label", item["kind"]), item["kind"],
                                           item.get("params", {})))
            kwargs["estimators"] = specs
        output = obj.get("output", {})
        if "dir" in output:
            kwargs["out_dir"] = output["dir"]
        if "format" in output:
            kwargs["format"] = output["format"]
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                obj = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(obj)


@dataclass
class TableRow:
    model: ModelId
    n: int
    cells: dict  # label -> MiseResult

    @property
    def winner(self) -> str:
        return min(self.cells, key=lambda label: self.cells[label].mean_ise)


def run_benchmark(config: ExperimentConfig, threads: int = 1) -> list[TableRow]:
    """One row per (model, n) with the MISE of every configured estimator.

    Work is split into (model, n, estimator, replication) units; each unit
    seeds itself from the master seed, so results do not depend on
    ``threads``.
    """
    fitters = {(m, n, s.label): s.fitter(m, n, config.M)
               for m in config.models for n in config.ns for s in config.estimators}
    grids = {m: model_grid(m, config.grid_size) for m in config.models}
    units = [(m, n, s.label, r) for m in config.models for n in config.ns
             for s in config.estimators for r in range(config.reps)]

    def one(unit):
        m, n, label, r = unit
        d = _fit_replication(fitters[m, n, label], label, m, n, r, config.seed)
        return ise_on_grid(np.asarray(d(grids[m].points), dtype=float), m, grids[m])

    values = iter(_map(one, units, threads))
    rows = []
    for m in config.models:
        for n in config.ns:
            cells = {}
            for spec in config.estimators:
                ises = [next(values) for _ in range(config.reps)]
                cells[spec.label] = _summarise(ises, spec.label, m, n)
            rows.append(TableRow(m, n, cells))
    return rows


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def table_csv(rows: Sequence[TableRow], n: int) -> str:
    """Table for one sample size: 100 x MISE per estimator, standard errors, winner."""
    selected = [r for r in rows if r.n == n]
    labels = list(selected[0].cells) if selected else []
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model"] + labels + [f"{lab}_se" for lab in labels] + ["winner"])
    for row in selected:
        writer.writerow([row.model.value]
                        + [_fmt(row.cells[lab].scaled) for lab in labels]
                        + [_fmt(100 * row.cells[lab].std_error) for lab in labels]
                        + [row.winner])
    return buf.getvalue()


def results_json(rows: Sequence[TableRow], config: ExperimentConfig) -> str:
    payload = {
        "seed": config.seed,
        "reps": config.reps,
        "M": config.M,
        "estimators": [s.to_dict() for s in config.estimators],
        "rows": [
            {
                "model": r.model.value,
                "n": r.n,
                "winner": r.winner,
                "cells": {
                    label: {"mise_x100": res.scaled, "stderr_x100": 100 * res.std_error,
                            "mean_ise": res.mean_ise, "std_error": res.std_error, "reps": res.reps}
                    for label, res in r.cells.items()
                },
            }
            for r in rows
        ],
    }
    return json.dumps(payload, indent=2) + "\n"


def write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_results(rows, config: ExperimentConfig, out_dir=None, fmt=None) -> list[str]:
    out_dir = out_dir or config.out_dir
    fmt = fmt or config.format
    if fmt == "json":
        path = os.path.join(out_dir, "results.json")
        write_atomic(path, results_json(rows, config))
        return [path]
    paths = []
    for n in config.ns:
        path = os.path.join(out_dir, f"table_n{n}.csv")
        write_atomic(path, table_csv(rows, n))
        paths.append(path)
    return paths


def run_curve(spec: EstimatorSpec, model, n: int, sizes: Sequence[int], reps: int = 50,
              seed: int = 0, G: Optional[int] = None, threads: int = 1) -> list[MiseResult]:
    """MISE against ensemble size for ``baghist`` or ``aggreghist``."""
    if spec.kind not in ("baghist", "aggreghist"):
        raise ConfigError("curves need a baghist or aggreghist estimator")
    sizes = [_int(s, "M", 1) for s in sizes]
    if not sizes:
        raise ConfigError("empty ensemble size grid")
    fit = spec.fitter(model, n, max(sizes))
    if spec.params.get("M") not in ("config", None) and spec.params["M"] < max(sizes):
        raise ConfigError("estimator M is smaller than the largest curve size")
    return mise_curve(fit, model, n, sizes, reps=reps, seed=seed, label=spec.label, G=G,
                      threads=threads)


def curve_csv(results: Sequence[MiseResult], sizes: Sequence[int]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", "estimator", "M", "mise", "stderr"])
    for size, res in zip(sizes, results):
        writer.writerow([res.model.value, res.estimator_label, size,
                         f"{res.mean_ise:.9e}", f"{res.std_error:.9e}"])
    return buf.getvalue()
