"""
Grid-search tuning of histogram breakpoint counts and the AggregHist
perturbation coefficient by held-out log-likelihood, plus the published
optimal values for every (model, n) cell.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .density import fit_histogram
from .ensemble import aggreg_hist, bag_hist
from .errors import DensityError
from .evaluation import mean_log_likelihood
from .models import ModelId, model_sample

__all__ = ["FAMILIES", "TuneGrid", "TuneResult", "ValparsEntry", "VALPARS", "valpars", "tune"]

FAMILIES = ("histogram", "baghist", "aggreghist")


@dataclass(frozen=True)
class ValparsEntry:
    """Published optimal breakpoint counts and gamma for one (model, n)."""

    L_hist: int
    L_aggreghist: int
    L_baghist: int
    gamma_aggreghist: float


def _row(*cells):
    return {n: ValparsEntry(*cells[4 * j:4 * j + 4]) for j, n in enumerate((100, 500, 1000))}


# columns per n: L_H, L_AH, L_BH, gamma_AH
VALPARS = {
    ModelId.M1: _row(50, 10, 50, 1.0, 50, 10, 10, 0.5, 50, 20, 20, 0.5),
    ModelId.M2: _row(50, 10, 50, 0.5, 50, 50, 50, 0.5, 50, 50, 50, 0.5),
    ModelId.M3: _row(50, 10, 50, 0.5, 50, 10, 50, 0.5, 50, 20, 50, 0.5),
    ModelId.M4: _row(50, 20, 50, 0.5, 50, 50, 50, 0.5, 50, 50, 50, 0.5),
    ModelId.M5: _row(50, 20, 50, 1.0, 50, 50, 50, 2.0, 50, 50, 50, 1.0),
    ModelId.M6: _row(50, 10, 50, 1.0, 50, 20, 20, 1.0, 50, 50, 20, 2.0),
    ModelId.M7: _row(50, 20, 10, 0.5, 20, 20, 20, 0.5, 20, 50, 20, 0.5),
    ModelId.M8: _row(50, 20, 50, 0.5, 50, 50, 50, 0.5, 50, 50, 50, 2.0),
    ModelId.M9: _row(50, 20, 50, 0.5, 50, 50, 50, 0.5, 50, 50, 50, 1.0),
    ModelId.M10: _row(50, 50, 50, 0.5, 50, 50, 50, 0.5, 50, 50, 50, 0.5),
    ModelId.M11: _row(50, 20, 50, 0.5, 50, 50, 50, 0.5, 50, 50, 50, 0.5),
}


def valpars(model, n: int) -> ValparsEntry:
    """Published parameters; for other sample sizes the nearest tabulated n is used."""
    row = VALPARS[ModelId.parse(model)]
    nearest = min(row, key=lambda k: (abs(k - n), k))
    return row[nearest]


@dataclass(frozen=True)
class TuneGrid:
    breaks_grid: tuple = (10, 20, 50)
    gamma_grid: tuple = (0.5, 1.0, 1.5, 2.0, 2.5)
    M: int = 300
    reps: int = 100


@dataclass
class TuneResult:
    family: str
    model: ModelId
    n: int
    best_params: dict
    # (L,) or (L, gamma) -> mean log-likelihood, None when the fit failed
    score_table: dict = field(default_factory=dict)


def _grid_points(family: str, grid: TuneGrid):
    breaks = sorted(int(b) for b in grid.breaks_grid)
    if family == "aggreghist":
        return list(itertools.product(breaks, sorted(float(g) for g in grid.gamma_grid)))
    return [(b,) for b in breaks]


def _fit(family, x, point, M, rng):
    if family == "histogram":
        return fit_histogram(x, point[0])
    if family == "baghist":
        return bag_hist(x, point[0], M, rng)
    return aggreg_hist(x, point[0], point[1], M, rng)


def tune(family: str, model, n: int, grid: Optional[TuneGrid] = None, seed: int = 0) -> TuneResult:
    """Pick the grid point maximising mean held-out log-likelihood.

    A single training sample of size ``n`` is shared by all grid points and
    so is the randomness of the ensemble fit; the score is averaged over
    ``grid.reps`` fresh test samples of size ``n``. Ties go to fewer
    breakpoints, then smaller gamma.
    """
    family = family.lower()
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}, expected one of {FAMILIES}")
    grid = grid or TuneGrid()
    points = _grid_points(family, grid)
    if not points:
        raise ValueError("empty tuning grid")
    model = ModelId.parse(model)
    seq = np.random.SeedSequence(seed, spawn_key=(2, model.index, n))
    train_seq, test_seq, fit_seq = seq.spawn(3)
    x = model_sample(model, n, np.random.default_rng(train_seq))
    test_rng = np.random.default_rng(test_seq)
    tests = [model_sample(model, n, test_rng) for _ in range(grid.reps)]

    table = {}
    for point in points:
        try:
            d = _fit(family, x, point, grid.M, np.random.default_rng(fit_seq))
        except DensityError:
            table[point] = None
            continue
        table[point] = mean_log_likelihood(d, tests)
    scored = [p for p in points if table[p] is not None]
    if not scored:
        raise DensityError("every grid point failed to fit")
    # points are sorted lexicographically, so max() keeps the first maximiser
    best = max(scored, key=lambda p: table[p])
    names = ("L", "gamma")
    return TuneResult(family, model, n, dict(zip(names, best)), table)
