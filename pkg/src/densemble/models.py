"""
The eleven benchmark densities M1..M11: exact pdfs, samplers and the fixed
integration domains used for ISE.

Every second Gaussian parameter is a standard deviation. The uniform "comb"
parts of M10 and M11 use T equal to the number of intervals, which is the
only choice giving unit mass.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .density import DEFAULT_GRID_SIZE, QuadratureGrid

__all__ = [
    "ModelId",
    "GaussianMixtureSpec",
    "MIXTURES",
    "smooth_comb_terms",
    "model_density",
    "model_sample",
    "model_domain",
    "model_grid",
]

SQRT_2PI = math.sqrt(2.0 * math.pi)


class ModelId(str, enum.Enum):
    M1 = "M1"
    M2 = "M2"
    M3 = "M3"
    M4 = "M4"
    M5 = "M5"
    M6 = "M6"
    M7 = "M7"
    M8 = "M8"
    M9 = "M9"
    M10 = "M10"
    M11 = "M11"

    @property
    def index(self) -> int:
        return int(self.value[1:])

    @classmethod
    def parse(cls, value) -> "ModelId":
        if isinstance(value, ModelId):
            return value
        text = str(value).strip().upper()
        if text.isdigit():
            text = "M" + text
        return cls(text)


@dataclass(frozen=True)
class GaussianMixtureSpec:
    weights: tuple
    means: tuple
    sds: tuple

    def __post_init__(self):
        if not len(self.weights) == len(self.means) == len(self.sds):
            raise ValueError("weights, means and sds must have equal lengths")
        if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1) > 1e-12:
            raise ValueError("mixture weights must be convex")
        if any(s <= 0 for s in self.sds):
            raise ValueError("standard deviations must be positive")

    def pdf(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros(x.shape)
        for w, mu, sd in zip(self.weights, self.means, self.sds):
            out += w * _normal_pdf(x, mu, sd)
        return out

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        comp = rng.choice(len(self.weights), size=n, p=np.asarray(self.weights, dtype=float))
        means = np.asarray(self.means, dtype=float)[comp]
        sds = np.asarray(self.sds, dtype=float)[comp]
        return means + sds * rng.standard_normal(n)


def smooth_comb_terms() -> list[tuple[Fraction, Fraction, Fraction]]:
    """Exact (weight, mean, sd) triples of the smooth comb, i = 0..5."""
    return [
        (Fraction(2 ** (5 - i), 63),
         (Fraction(65) - Fraction(96, 2**i)) / 21,
         Fraction(32, 63) / 2**i)
        for i in range(6)
    ]


def _float_mixture(weights, means, sds) -> GaussianMixtureSpec:
    return GaussianMixtureSpec(tuple(float(w) for w in weights),
                               tuple(float(m) for m in means),
                               tuple(float(s) for s in sds))


_comb = smooth_comb_terms()

MIXTURES = {
    ModelId.M1: _float_mixture([1], [0], [1]),
    ModelId.M5: _float_mixture([0.5, 0.5], [-1, 1], [0.3, 0.3]),
    ModelId.M6: _float_mixture([0.5, 0.5], [-2.5, 2.5], [1, 1]),
    ModelId.M7: _float_mixture([0.25, 0.5, 0.25], [-3, 0, 3], [0.5, 1, 0.5]),
    ModelId.M8: _float_mixture([0.5] + [0.1] * 5,
                               [0] + [i / 2 - 1 for i in range(5)],
                               [1] + [0.1] * 5),
    ModelId.M9: _float_mixture(*zip(*_comb)),
}

# 4200 cells of width 1/420 put every comb jump (multiples of 1/10 and
# 1/14) on a node of [-5, 5], where the trapezoid rule is exact.
_ALIGNED_GRID_SIZE = 4201

# Number of uniform intervals ((2(i-1))/T, (2i-1)/T] with T = count.
_COMB_INTERVALS = {ModelId.M10: 10, ModelId.M11: 14}

_DOMAINS = {
    ModelId.M1: (-5.0, 5.0),
    ModelId.M2: (0.0, 15.0),
    ModelId.M3: (0.0, 50.0),
    ModelId.M4: (-30.0, 30.0),
    ModelId.M5: (-3.0, 3.0),
    ModelId.M6: (-7.0, 7.0),
    ModelId.M7: (-6.0, 6.0),
    ModelId.M8: (-5.0, 5.0),
    ModelId.M9: (-4.0, 5.0),
    ModelId.M10: (-5.0, 5.0),
    ModelId.M11: (-5.0, 5.0),
}


def _normal_pdf(x, mu=0.0, sd=1.0):
    z = (x - mu) / sd
    return np.exp(-0.5 * z * z) / (sd * SQRT_2PI)


def _comb_pdf(x: np.ndarray, count: int) -> np.ndarray:
    # interval ends are multiples of 1/T; snap float noise onto them so grid
    # nodes that should coincide with a jump land on the right side of it
    t = x * count
    nearest = np.round(t)
    t = np.where(np.abs(t - nearest) < 1e-9, nearest, t)
    k = np.ceil(t / 2.0)
    on = (t > 2 * (k - 1)) & (t <= 2 * k - 1) & (k >= 1) & (k <= count)
    return np.where(on, 1.0, 0.0)


def model_density(model, x):
    """True density of a benchmark model at ``x``."""
    model = ModelId.parse(model)
    x = np.asarray(x, dtype=float)
    if model in MIXTURES:
        out = MIXTURES[model].pdf(x)
    elif model is ModelId.M2:
        out = np.where(x >= 0, np.exp(-np.abs(x)), 0.0)
    elif model is ModelId.M3:
        xp = np.maximum(x, 0.0)
        out = np.where(x >= 0, xp**4 * np.exp(-xp / 2) / 768.0, 0.0)
    elif model is ModelId.M4:
        out = 0.375 * (1.0 + x * x / 4.0) ** -2.5
    else:
        out = 0.5 * _normal_pdf(x) + 0.5 * _comb_pdf(x, _COMB_INTERVALS[model])
    return out if out.ndim else float(out)


def model_sample(model, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` i.i.d. observations from a benchmark model."""
    model = ModelId.parse(model)
    if n < 1:
        raise ValueError("n must be positive")
    if model in MIXTURES:
        return MIXTURES[model].sample(n, rng)
    if model is ModelId.M2:
        return rng.exponential(1.0, n)
    if model is ModelId.M3:
        return np.sum(rng.standard_normal((n, 10)) ** 2, axis=1)
    if model is ModelId.M4:
        z = rng.standard_normal(n)
        v = np.sum(rng.standard_normal((n, 4)) ** 2, axis=1)
        return z / np.sqrt(v / 4.0)
    count = _COMB_INTERVALS[model]
    from_comb = rng.random(n) < 0.5
    normal = rng.standard_normal(n)
    interval = rng.integers(1, count + 1, n)
    # (right - u * width) with u in [0, 1) lands in the right-closed interval
    right = (2 * interval - 1) / count
    comb = right - rng.random(n) * (1.0 / count)
    return np.where(from_comb, comb, normal)


def model_domain(model) -> tuple[float, float]:
    """Fixed integration range holding all but < 1e-5 of the model's mass."""
    return _DOMAINS[ModelId.parse(model)]


def model_grid(model, size=None) -> QuadratureGrid:
    """Quadrature grid over the model domain.

    The default size is 4097 points, except for the two comb models whose
    jumps need an aligned grid.
    """
    model = ModelId.parse(model)
    if size is None:
        size = _ALIGNED_GRID_SIZE if model in _COMB_INTERVALS else DEFAULT_GRID_SIZE
    lo, hi = model_domain(model)
    return QuadratureGrid(lo, hi, size)
