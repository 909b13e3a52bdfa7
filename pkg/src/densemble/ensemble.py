"""
Aggregated density estimators.

Additive ensembles (``sum_m alpha_m g_m``): bagged histograms, histograms on
randomly perturbed breakpoints, stacking of kernel or histogram learners with
EM-fitted weights and split-averaged EM aggregation of kernel estimates.
Multiplicative ensemble: boosted kernel density estimation, a normalised
product of reweighted kernel estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .density import (
    DEFAULT_GRID_SIZE,
    Kernel,
    KernelDensity,
    QuadratureGrid,
    as_sample,
    bandwidth_nrd0,
    fit_histogram,
    fit_kde,
    histogram_from_breaks,
    kernel_eval,
)
from .errors import DegenerateSampleError, DensityError, NoUsableRowsError

__all__ = [
    "MixtureDensity",
    "ProductDensity",
    "AverageDensity",
    "KdeLearner",
    "HistLearner",
    "STACKING_LEARNERS",
    "STACKHIST_LEARNERS",
    "AGGPURE_BANDWIDTHS",
    "substreams",
    "bootstrap",
    "bag_hist",
    "aggreg_hist",
    "em_mixture_weights",
    "held_out_matrix",
    "stack_densities",
    "agg_pure",
    "boost_kde",
]

AGGPURE_BANDWIDTHS = (0.001, 0.005, 0.01, 0.05, 0.1, 0.5)
MAX_REDRAWS = 100


class MixtureDensity:
    """Convex combination ``sum_m alpha_m g_m`` of component densities."""

    def __init__(self, components: Sequence[Callable], weights):
        weights = np.array(weights, dtype=float)
        if len(components) == 0 or weights.shape != (len(components),):
            raise DensityError("need one weight per component and at least one component")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise DensityError(f"mixture weights must be convex, got sum {weights.sum()!r}")
        weights.setflags(write=False)
        self.components = tuple(components)
        self.weights = weights

    @classmethod
    def uniform(cls, components):
        return cls(components, np.full(len(components), 1.0 / len(components)))

    def __len__(self):
        return len(self.components)

    def truncated(self, k: int) -> "MixtureDensity":
        """Uniform average of the first ``k`` components."""
        return MixtureDensity.uniform(self.components[:k])

    @property
    def support(self) -> tuple[float, float]:
        lows, highs = zip(*(c.support for c in self.components))
        return min(lows), max(highs)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for a, g in zip(self.weights, self.components):
            out += a * g(x)
        return out if out.ndim else float(out)


class ProductDensity:
    """Normalised product ``C * prod_m g_m(x)`` on ``domain``, zero outside.

    ``log_norm`` is ``log C``; the product is accumulated in log space.
    """

    def __init__(self, components: Sequence[KernelDensity], log_norm: float,
                 domain: tuple[float, float]):
        self.components = tuple(components)
        self.log_norm = float(log_norm)
        self.domain = (float(domain[0]), float(domain[1]))

    @property
    def normalizer(self) -> float:
        return math.exp(self.log_norm)

    @property
    def support(self) -> tuple[float, float]:
        return self.domain

    def log_product(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        total = np.zeros(x.shape)
        with np.errstate(divide="ignore"):
            for g in self.components:
                total += np.log(g(x))
        return total

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.domain
        inside = (x >= lo) & (x <= hi)
        out = np.zeros(x.shape)
        if np.any(inside):
            out[inside] = np.exp(self.log_product(x[inside]) + self.log_norm)
        return out if out.ndim else float(out)


class AverageDensity:
    """Equal-weight average of per-split mixtures."""

    def __init__(self, terms: Sequence[MixtureDensity]):
        if len(terms) == 0:
            raise DensityError("need at least one term")
        self.terms = tuple(terms)

    @property
    def support(self) -> tuple[float, float]:
        lows, highs = zip(*(t.support for t in self.terms))
        return min(lows), max(highs)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for t in self.terms:
            out += t(x)
        out /= len(self.terms)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class KdeLearner:
    kernel: Kernel
    h: float

    def fit(self, sample):
        return fit_kde(sample, self.kernel, self.h)


@dataclass(frozen=True)
class HistLearner:
    L: int

    def fit(self, sample):
        return fit_histogram(sample, self.L)


STACKING_LEARNERS = tuple(
    [KdeLearner(Kernel.GAUSSIAN, h) for h in (0.1, 0.2, 0.3)]
    + [KdeLearner(Kernel.TRIANGULAR, h) for h in (0.1, 0.2, 0.3)]
)
STACKHIST_LEARNERS = tuple(HistLearner(L) for L in (5, 10, 20, 30, 40, 50))


def substreams(rng: np.random.Generator, count: int) -> list[np.random.Generator]:
    """Independent generators ``0..count-1`` derived from one draw of ``rng``.

    Stream ``m`` depends only on that draw and ``m``, so the first ``k``
    streams for ``count = K`` equal the streams for ``count = k``.
    """
    base = int(rng.integers(0, 2**63))
    return [np.random.default_rng(np.random.SeedSequence(base, spawn_key=(m,)))
            for m in range(count)]


def bootstrap(sample: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """n-out-of-n resample with replacement."""
    return sample[rng.integers(0, sample.size, sample.size)]


def bag_hist(sample, L: int, M: int, rng: np.random.Generator,
             resample: Callable = bootstrap) -> MixtureDensity:
    """Average of ``M`` histograms, each fit on a bootstrap resample.

    Each histogram uses ``L`` equispaced breakpoints over its own resample's
    range. ``resample`` is exposed so tests can substitute the identity.
    """
    x = as_sample(sample)
    if M < 1:
        raise DensityError("M must be at least 1")
    components = []
    for stream in substreams(rng, M):
        for _ in range(MAX_REDRAWS):
            try:
                components.append(fit_histogram(resample(x, stream), L))
                break
            except DegenerateSampleError:
                continue
        else:
            raise DegenerateSampleError(
                f"{MAX_REDRAWS} bootstrap resamples in a row had zero-width range")
    return MixtureDensity.uniform(components)


def aggreg_hist(sample, L: int, gamma: float, M: int,
                rng: np.random.Generator) -> MixtureDensity:
    """Average of ``M`` histograms of the full sample on jittered breakpoints.

    The equispaced breakpoints of the base histogram are shifted by
    independent ``N(0, sigma)`` noise, ``sigma = gamma * min gap``, then
    sorted. If the jittered range no longer covers the sample, the first or
    last breakpoint is moved back to the sample extreme so that every
    observation is counted.
    """
    x = as_sample(sample)
    if M < 1:
        raise DensityError("M must be at least 1")
    if gamma < 0:
        raise DensityError("gamma must be nonnegative")
    base = fit_histogram(x, L).breaks
    sigma = gamma * float(np.min(np.diff(base)))
    min_gap = 1e-12 * float(base[-1] - base[0])
    components = []
    for stream in substreams(rng, M):
        for _ in range(MAX_REDRAWS):
            breaks = np.sort(base + stream.normal(0.0, sigma, base.size))
            # every observation is counted: stretch the outer cells to span the data
            breaks[0] = min(breaks[0], base[0])
            breaks[-1] = max(breaks[-1], base[-1])
            if np.min(np.diff(breaks)) < min_gap:
                continue
            components.append(histogram_from_breaks(x, breaks))
            break
        else:
            raise DensityError(f"{MAX_REDRAWS} breakpoint perturbations in a row were unusable")
    return MixtureDensity.uniform(components)


def em_mixture_weights(A, tol: float = 1e-8, max_iter: int = 500):
    """Mixture weights maximising ``sum_i log sum_m alpha_m A[i, m]`` by EM.

    Rows that are zero in every column carry no information and are dropped.
    Starts from uniform weights and stops once the log-likelihood gain falls
    below ``tol`` or after ``max_iter`` iterations.

    Returns
    -------
    alpha : ndarray
        Convex weights, one per column.
    trace : list of float
        Log-likelihood before the first and after every iteration.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[1] == 0:
        raise DensityError("held-out matrix must be two dimensional with at least one column")
    if np.any(A < 0) or not np.all(np.isfinite(A)):
        raise DensityError("held-out matrix entries must be finite and nonnegative")
    A = A[np.any(A > 0, axis=1)]
    if A.shape[0] == 0:
        raise NoUsableRowsError("no usable held-out points")
    M = A.shape[1]
    alpha = np.full(M, 1.0 / M)
    mix = A @ alpha
    loglik = float(np.sum(np.log(mix)))
    trace = [loglik]
    for _ in range(max_iter):
        alpha = (A / mix[:, None]).mean(axis=0) * alpha
        alpha /= alpha.sum()
        mix = A @ alpha
        new = float(np.sum(np.log(mix)))
        trace.append(new)
        if new - loglik < tol:
            break
        loglik = new
    return alpha, trace


def held_out_matrix(learners, train_test_pairs, n: int) -> np.ndarray:
    """``A[i, m]``: learner ``m`` fit without point ``i``'s fold, evaluated at it."""
    A = np.zeros((n, len(learners)))
    for train, test_idx, test in train_test_pairs:
        for m, learner in enumerate(learners):
            A[test_idx, m] = learner.fit(train)(test)
    return A


def stack_densities(sample, learners, V: int, rng: np.random.Generator) -> MixtureDensity:
    """Stacked density: EM weights from V-fold held-out values, components refit on all data."""
    x = as_sample(sample)
    n = x.size
    if V < 2 or n < V:
        raise DensityError(f"need 2 <= V <= n, got V={V}, n={n}")
    if len(learners) == 0:
        raise DensityError("need at least one learner")
    fold = np.empty(n, dtype=int)
    fold[rng.permutation(n)] = np.arange(n) % V
    pairs = []
    for v in range(V):
        test_idx = np.flatnonzero(fold == v)
        pairs.append((x[fold != v], test_idx, x[test_idx]))
    alpha, _ = em_mixture_weights(held_out_matrix(learners, pairs, n))
    return MixtureDensity([learner.fit(x) for learner in learners], alpha)


def agg_pure(sample, bandwidths=AGGPURE_BANDWIDTHS, S: int = 10,
             rng: Optional[np.random.Generator] = None) -> AverageDensity:
    """Average over ``S`` random half splits of EM-weighted Gaussian KDE mixtures.

    For each split the kernel estimates are fit on the first half and their
    weights on the second; components are not refit on the whole sample.
    """
    x = as_sample(sample)
    if S < 1:
        raise DensityError("S must be at least 1")
    if rng is None:
        rng = np.random.default_rng()
    n = x.size
    n_train = n // 2
    terms = []
    for _ in range(S):
        perm = rng.permutation(n)
        train, test = x[perm[:n_train]], x[perm[n_train:]]
        kdes = [fit_kde(train, Kernel.GAUSSIAN, h) for h in bandwidths]
        A = np.column_stack([g(test) for g in kdes])
        alpha, _ = em_mixture_weights(A)
        terms.append(MixtureDensity(kdes, alpha))
    return AverageDensity(terms)


def boost_kde(sample, steps: int = 5, h: Optional[float] = None,
              domain: Optional[tuple[float, float]] = None,
              grid_size: int = DEFAULT_GRID_SIZE, renormalize: bool = False) -> ProductDensity:
    """Boosted kernel density estimate.

    Starting from uniform weights ``1/n``, each step forms the weighted
    Gaussian estimate ``g_m`` and adds ``log(g_m(x_i) / g_m^(-i)(x_i))`` to
    the weight of observation ``i``, where the leave-one-out value keeps the
    other weights unchanged. The output is the product of the ``g_m``,
    normalised by trapezoid quadrature over ``domain``.

    With ``renormalize`` the weights are rescaled to sum to one after every
    update; by default the update is applied as is and weights grow.
    """
    x = as_sample(sample)
    if steps < 1:
        raise DensityError("steps must be at least 1")
    if h is None:
        h = bandwidth_nrd0(x)
    if domain is None:
        domain = (float(x.min() - 4 * h), float(x.max() + 4 * h))
    K = kernel_eval(Kernel.GAUSSIAN, (x[:, None] - x[None, :]) / h) / h
    K_loo = K.copy()
    np.fill_diagonal(K_loo, 0.0)

    w = np.full(x.size, 1.0 / x.size)
    components = []
    for m in range(steps):
        components.append(KernelDensity(x, w, h, Kernel.GAUSSIAN))
        if m == steps - 1:
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.log((K @ w) / (K_loo @ w))
        if not np.all(np.isfinite(ratio)):
            raise DensityError("degenerate leave-one-out value")
        w = w + ratio
        if renormalize:
            w = w / w.sum()

    product = ProductDensity(components, 0.0, domain)
    grid = QuadratureGrid(domain[0], domain[1], grid_size)
    logp = product.log_product(grid.points)
    top = float(np.max(logp))
    if not math.isfinite(top):
        raise DensityError("boosted product vanishes on the whole domain")
    mass = float(np.dot(grid.weights, np.exp(logp - top)))
    return ProductDensity(components, -(top + math.log(mass)), domain)
