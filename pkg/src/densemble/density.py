"""
Base univariate density estimators.

Histograms with explicit breakpoints, (weighted) kernel density estimators,
the two bandwidth selectors used by the benchmark (Silverman's nrd0 rule and
least-squares cross validation) and a composite trapezoid integrator.

All density objects are callables mapping an array of abscissae to an array of
nonnegative values, and expose a ``support`` tuple outside of which they are
zero (or negligible, for Gaussian kernels).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DegenerateSampleError, DensityError

__all__ = [
    "Kernel",
    "kernel_eval",
    "Histogram",
    "KernelDensity",
    "QuadratureGrid",
    "as_sample",
    "fit_histogram",
    "histogram_from_breaks",
    "fit_kde",
    "density_eval",
    "bandwidth_nrd0",
    "ucv_score",
    "bandwidth_ucv",
    "default_ucv_grid",
    "integrate",
]

SQRT_2PI = math.sqrt(2.0 * math.pi)
DEFAULT_GRID_SIZE = 4097
# Gaussian kernel support used for quadrature ranges, in bandwidths.
GAUSSIAN_REACH = 8.0

# Maximum number of kernel evaluations held in memory at once.
_CHUNK_ELEMENTS = 1 << 21


class Kernel(str, enum.Enum):
    GAUSSIAN = "gaussian"
    TRIANGULAR = "triangular"

    @property
    def reach(self) -> float:
        return GAUSSIAN_REACH if self is Kernel.GAUSSIAN else 1.0


def kernel_eval(kernel, u):
    """Evaluate the kernel ``K(u)``; ``u`` may be a scalar or an array."""
    kernel = Kernel(kernel)
    u = np.asarray(u, dtype=float)
    if kernel is Kernel.GAUSSIAN:
        out = np.exp(-0.5 * u * u) / SQRT_2PI
    else:
        out = np.maximum(0.0, 1.0 - np.abs(u))
    return out if out.ndim else float(out)


def as_sample(values, min_size: int = 2) -> np.ndarray:
    """Validate and return a sample as a read-only 1-d float array."""
    x = np.array(values, dtype=float).ravel()
    if x.size < min_size:
        raise DensityError(f"sample needs at least {min_size} observations, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DensityError("sample contains non-finite values")
    x.setflags(write=False)
    return x


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Histogram:
    """Piecewise constant density on ascending ``breaks``.

    Cells are right-closed ``(b_l, b_{l+1}]`` except the first, which also
    contains its left end point.
    """

    breaks: np.ndarray
    heights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "breaks", _frozen(self.breaks))
        object.__setattr__(self, "heights", _frozen(self.heights))
        if self.breaks.size < 2 or self.heights.size != self.breaks.size - 1:
            raise DensityError("histogram needs L >= 2 breakpoints and L - 1 heights")
        if np.any(np.diff(self.breaks) <= 0):
            raise DensityError("histogram breakpoints must be strictly increasing")
        if np.any(self.heights < 0):
            raise DensityError("histogram heights must be nonnegative")

    @property
    def support(self) -> tuple[float, float]:
        return float(self.breaks[0]), float(self.breaks[-1])

    @property
    def mass(self) -> float:
        return float(np.dot(self.heights, np.diff(self.breaks)))

    def cell_index(self, x) -> np.ndarray:
        """Cell of each point, -1 when outside the support."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.breaks, x, side="left") - 1
        idx = np.where(x == self.breaks[0], 0, idx)
        return np.where((idx < 0) | (idx >= self.heights.size), -1, idx)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = self.cell_index(x)
        out = np.where(idx >= 0, self.heights[np.maximum(idx, 0)], 0.0)
        return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class KernelDensity:
    """Weighted kernel estimate ``sum_i (w_i / h) K((x - x_i) / h)``.

    Weights are not required to sum to one (boosting updates do not preserve
    the sum); with the default uniform weights the estimate is a density.
    """

    centers: np.ndarray
    weights: np.ndarray
    bandwidth: float
    kernel: Kernel = Kernel.GAUSSIAN

    def __post_init__(self):
        object.__setattr__(self, "centers", _frozen(self.centers))
        object.__setattr__(self, "weights", _frozen(self.weights))
        object.__setattr__(self, "kernel", Kernel(self.kernel))
        if not self.bandwidth > 0 or not math.isfinite(self.bandwidth):
            raise DensityError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.weights.shape != self.centers.shape:
            raise DensityError("weights and centers must have the same length")

    @property
    def support(self) -> tuple[float, float]:
        pad = self.kernel.reach * self.bandwidth
        return float(self.centers.min() - pad), float(self.centers.max() + pad)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        out = np.empty(flat.size)
        h = self.bandwidth
        step = max(1, _CHUNK_ELEMENTS // max(1, self.centers.size))
        for start in range(0, flat.size, step):
            u = (flat[start:start + step, None] - self.centers[None, :]) / h
            out[start:start + step] = kernel_eval(self.kernel, u) @ self.weights / h
        out = out.reshape(x.shape)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class QuadratureGrid:
    """Uniform grid of ``size`` points (odd, >= 3) on ``[lo, hi]``."""

    lo: float
    hi: float
    size: int = DEFAULT_GRID_SIZE

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DensityError(f"quadrature grid needs lo < hi, got [{self.lo}, {self.hi}]")
        if self.size < 3 or self.size % 2 == 0:
            raise DensityError(f"grid size must be odd and >= 3, got {self.size}")

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.size - 1)

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.size)

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.size, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        return w


def integrate(f: Callable, grid: QuadratureGrid) -> float:
    """Composite trapezoid rule for a vectorised ``f`` over ``grid``."""
    values = np.asarray(f(grid.points), dtype=float)
    return float(np.dot(grid.weights, values))


def density_eval(d, x):
    """Evaluate any density object at ``x``."""
    return d(x)


def histogram_from_breaks(sample, breaks) -> Histogram:
    """Histogram of ``sample`` on the given breakpoints.

    Observations outside ``[breaks[0], breaks[-1]]`` are not counted and the
    heights are normalised by the number of counted observations, so the
    result always has unit mass.
    """
    x = np.asarray(sample, dtype=float)
    breaks = np.asarray(breaks, dtype=float)
    idx = np.searchsorted(breaks, x, side="left") - 1
    idx[x == breaks[0]] = 0
    inside = (idx >= 0) & (idx < breaks.size - 1)
    counted = int(inside.sum())
    if counted == 0:
        raise DensityError("no observation falls inside the histogram breakpoints")
    counts = np.bincount(idx[inside], minlength=breaks.size - 1)
    return Histogram(breaks, counts / (counted * np.diff(breaks)))


def fit_histogram(sample, L: int) -> Histogram:
    """Histogram with ``L`` equispaced breakpoints from ``min(sample)`` to ``max(sample)``."""
    x = as_sample(sample)
    if L < 2:
        raise DensityError(f"a histogram needs L >= 2 breakpoints, got {L}")
    lo, hi = x.min(), x.max()
    if not hi > lo:
        raise DegenerateSampleError("zero-width support")
    return histogram_from_breaks(x, np.linspace(lo, hi, int(L)))


def fit_kde(sample, kernel=Kernel.GAUSSIAN, h: float = 1.0,
            weights: Optional[Sequence[float]] = None) -> KernelDensity:
    x = as_sample(sample, min_size=1)
    if not h > 0:
        raise DensityError(f"bandwidth must be positive, got {h}")
    if weights is None:
        w = np.full(x.size, 1.0 / x.size)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != x.shape:
            raise DensityError("weights must have the same length as the sample")
    return KernelDensity(x, w, float(h), Kernel(kernel))


def bandwidth_nrd0(sample) -> float:
    """Silverman's rule of thumb, ``0.9 * min(sd, IQR / 1.34) * n^(-1/5)``.

    Falls back to the nonzero one of ``sd`` and ``IQR / 1.34``, then to
    ``|x_1|`` and finally to 1 so the result is always positive.
    """
    x = as_sample(sample)
    sd = float(np.std(x, ddof=1))
    q1, q3 = np.quantile(x, [0.25, 0.75])
    iqr = float(q3 - q1)
    lo = min(sd, iqr / 1.34)
    if not lo:
        lo = sd or abs(float(x[0])) or 1.0
    return 0.9 * lo * x.size ** -0.2


def ucv_score(sample, h: float, grid_size: int = DEFAULT_GRID_SIZE) -> float:
    """Least-squares cross-validation criterion for a Gaussian KDE.

    ``int fhat_h^2 - (2/n) sum_i fhat_{h,-i}(x_i)``, the first term by
    trapezoid quadrature over ``[min - 4h, max + 4h]``.
    """
    x = as_sample(sample)
    n = x.size
    kde = fit_kde(x, Kernel.GAUSSIAN, h)
    grid = QuadratureGrid(float(x.min() - 4 * h), float(x.max() + 4 * h), grid_size)
    squared = integrate(lambda t: kde(t) ** 2, grid)
    k = kernel_eval(Kernel.GAUSSIAN, (x[:, None] - x[None, :]) / h) / h
    np.fill_diagonal(k, 0.0)
    loo = k.sum(axis=1) / (n - 1)
    return squared - 2.0 * loo.mean()


def default_ucv_grid(sample, size: int = 30) -> np.ndarray:
    """Log-spaced bandwidths on ``[0.1, 3] * nrd0``."""
    h0 = bandwidth_nrd0(sample)
    return np.geomspace(0.1 * h0, 3.0 * h0, size)


def bandwidth_ucv(sample, h_grid=None, grid_size: int = DEFAULT_GRID_SIZE) -> float:
    """Grid point minimising :func:`ucv_score`; ties go to the smaller bandwidth."""
    x = as_sample(sample)
    if h_grid is None:
        h_grid = default_ucv_grid(x)
    hs = np.sort(np.asarray(h_grid, dtype=float))
    if hs.size == 0 or np.any(hs <= 0):
        raise DensityError("bandwidth grid must be nonempty and positive")
    scores = [ucv_score(x, h, grid_size) for h in hs]
    return float(hs[int(np.argmin(scores))])
