"""
Accuracy metrics: integrated squared error against a benchmark model,
Monte-Carlo MISE over seeded replications, and held-out log-likelihood.

Seeding
-------
Every replication draws from two counter-based streams derived from the
master seed with :class:`numpy.random.SeedSequence` spawn keys:

* sample stream   ``(0, model, n, rep, attempt)``
* estimator stream ``(1, crc32(label), model, n, rep, attempt)``

so all estimators see the same samples (common random numbers) and adding an
estimator, or running replications in any order or thread, changes nothing
else.
"""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DensityError
from .models import ModelId, model_density, model_grid, model_sample

__all__ = [
    "LOG_FLOOR",
    "MiseResult",
    "ise",
    "ise_on_grid",
    "sample_stream",
    "estimator_stream",
    "mise",
    "mise_curve",
    "mean_log_likelihood",
]

LOG_FLOOR = 1e-12
MAX_ATTEMPTS = 6  # first try plus five retries

# fit(sample, rng) -> density
Fitter = Callable[[np.ndarray, np.random.Generator], Callable]


@dataclass(frozen=True)
class MiseResult:
    mean_ise: float
    std_error: float
    reps: int
    n: int
    estimator_label: str
    model: ModelId
    ises: tuple = ()

    @property
    def scaled(self) -> float:
        """``100 * MISE``, the unit of the published tables."""
        return 100.0 * self.mean_ise


def label_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def sample_stream(seed: int, model, n: int, rep: int, attempt: int = 0) -> np.random.Generator:
    model = ModelId.parse(model)
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(0, model.index, n, rep, attempt)))


def estimator_stream(seed: int, label: str, model, n: int, rep: int,
                     attempt: int = 0) -> np.random.Generator:
    model = ModelId.parse(model)
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(1, label_key(label), model.index, n, rep, attempt)))


def ise_on_grid(values: np.ndarray, model, grid) -> float:
    diff = values - model_density(model, grid.points)
    return float(np.dot(grid.weights, diff * diff))


def ise(estimate: Callable, model, G: Optional[int] = None) -> float:
    """Integrated squared error over the model's domain (trapezoid rule)."""
    grid = model_grid(model, G)
    return ise_on_grid(np.asarray(estimate(grid.points), dtype=float), model, grid)


def _fit_replication(fit: Fitter, label: str, model, n: int, rep: int, seed: int):
    last = None
    for attempt in range(MAX_ATTEMPTS):
        x = model_sample(model, n, sample_stream(seed, model, n, rep, attempt))
        try:
            return fit(x, estimator_stream(seed, label, model, n, rep, attempt))
        except DensityError as exc:
            last = exc
    raise DensityError(f"{label}: replication {rep} failed {MAX_ATTEMPTS} times: {last}")


def _summarise(ises: Sequence[float], label: str, model, n: int) -> MiseResult:
    arr = np.asarray(ises, dtype=float)
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return MiseResult(float(arr.mean()), se, int(arr.size), n, label,
                      ModelId.parse(model), tuple(arr.tolist()))


def _map(func, items, threads: int):
    if threads <= 1:
        return [func(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def mise(fit: Fitter, model, n: int, reps: int = 100, seed: int = 0, label: str = "estimator",
         G: Optional[int] = None, threads: int = 1) -> MiseResult:
    """Monte-Carlo MISE of the estimator ``fit`` on ``reps`` fresh samples.

    A replication whose fit raises :class:`DensityError` is redrawn from a
    fresh sample up to five times before the whole call fails.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    model = ModelId.parse(model)
    grid = model_grid(model, G)

    def one(rep):
        d = _fit_replication(fit, label, model, n, rep, seed)
        return ise_on_grid(np.asarray(d(grid.points), dtype=float), model, grid)

    return _summarise(_map(one, range(reps), threads), label, model, n)


def mise_curve(fit: Fitter, model, n: int, sizes: Sequence[int], reps: int = 50, seed: int = 0,
               label: str = "estimator", G: Optional[int] = None,
               threads: int = 1) -> list[MiseResult]:
    """MISE of uniform ensembles truncated to each size in ``sizes``.

    ``fit`` must return a uniform :class:`~densemble.ensemble.MixtureDensity`
    of at least ``max(sizes)`` components. Ensembles built from per-member
    substreams have the prefix property, so truncating one large fit equals
    refitting with the smaller size.
    """
    sizes = [int(s) for s in sizes]
    if reps < 1 or not sizes or min(sizes) < 1:
        raise ValueError("need reps >= 1 and positive ensemble sizes")
    model = ModelId.parse(model)
    grid = model_grid(model, G)

    def one(rep):
        d = _fit_replication(fit, label, model, n, rep, seed)
        if len(d) < max(sizes):
            raise DensityError(f"ensemble has {len(d)} members, need {max(sizes)}")
        values = [g(grid.points) for g in d.components[:max(sizes)]]
        out = []
        for k in sizes:
            # same accumulation order as MixtureDensity.truncated(k)(points)
            w = d.truncated(k).weights
            acc = np.zeros(grid.size)
            for a, v in zip(w, values[:k]):
                acc += a * v
            out.append(ise_on_grid(acc, model, grid))
        return out

    table = np.asarray(_map(one, range(reps), threads))
    return [_summarise(table[:, j], label, model, n) for j in range(len(sizes))]


def mean_log_likelihood(d: Callable, test_samples: Sequence) -> float:
    """Average over test samples of the per-point mean of ``log max(d(x), 1e-12)``."""
    if len(test_samples) == 0:
        raise ValueError("need at least one test sample")
    scores = [np.mean(np.log(np.maximum(np.asarray(d(np.asarray(s, dtype=float))), LOG_FLOOR)))
              for s in test_samples]
    return float(np.mean(scores))
