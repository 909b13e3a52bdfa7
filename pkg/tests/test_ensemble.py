"""Tests for the ensemble estimators and the EM weight fit."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from densemble.density import Kernel, QuadratureGrid, fit_histogram, fit_kde, integrate
from densemble.ensemble import (
    STACKHIST_LEARNERS,
    STACKING_LEARNERS,
    HistLearner,
    KdeLearner,
    MixtureDensity,
    agg_pure,
    aggreg_hist,
    bag_hist,
    boost_kde,
    em_mixture_weights,
    stack_densities,
    substreams,
)
from densemble.errors import DensityError, NoUsableRowsError
from oracles import em_brute_force



def mass(d, lo, hi, size=20001):
    return integrate(d, QuadratureGrid(lo, hi, size))


class TestMixture:
    def test_rejects_non_convex(self):
        g = fit_kde([0.0, 1.0], Kernel.GAUSSIAN, 1.0)
        with pytest.raises(DensityError):
            MixtureDensity([g, g], [0.7, 0.7])
        with pytest.raises(DensityError):
            MixtureDensity([g, g], [1.5, -0.5])

    def test_truncated_prefix(self, rng):
        comps = [fit_kde(rng.normal(size=10), Kernel.GAUSSIAN, 0.5) for _ in range(4)]
        mix = MixtureDensity.uniform(comps)
        t = np.linspace(-2, 2, 9)
        assert_allclose(mix.truncated(2)(t), 0.5 * (comps[0](t) + comps[1](t)), rtol=1e-14)


def test_substreams_prefix(rng):
    seed = rng.integers(0, 2**32)
    a = substreams(np.random.default_rng(seed), 5)
    b = substreams(np.random.default_rng(seed), 2)
    for ga, gb in zip(a, b):
        assert ga.random() == gb.random()


class TestBagHist:
    def test_identity_resample_is_histogram(self, rng):
        x = rng.normal(size=100)
        bag = bag_hist(x, 12, 1, rng, resample=lambda s, r: s)
        base = fit_histogram(x, 12)
        t = np.linspace(-4, 4, 801)
        assert_array_equal(bag(t), base(t))

    def test_unit_mass(self, rng):
        x = rng.normal(size=200)
        bag = bag_hist(x, 20, 30, rng)
        lo, hi = bag.support
        assert mass(bag, lo, hi, 200_001) == pytest.approx(1.0, abs=1e-3)

    def test_reproducible(self):
        x = np.random.default_rng(1).normal(size=80)
        t = np.linspace(-3, 3, 301)
        a = bag_hist(x, 10, 25, np.random.default_rng(9))(t)
        b = bag_hist(x, 10, 25, np.random.default_rng(9))(t)
        assert_array_equal(a, b)

    def test_prefix_property(self):
        x = np.random.default_rng(2).normal(size=80)
        t = np.linspace(-3, 3, 301)
        big = bag_hist(x, 10, 40, np.random.default_rng(4))
        small = bag_hist(x, 10, 7, np.random.default_rng(4))
        assert_array_equal(big.truncated(7)(t), small(t))

    def test_rejects_bad_M(self, rng):
        with pytest.raises(DensityError):
            bag_hist(rng.normal(size=10), 5, 0, rng)


class TestAggregHist:
    def test_gamma_zero_is_base_histogram(self, rng):
        x = rng.normal(size=150)
        agg = aggreg_hist(x, 15, 0.0, 5, rng)
        t = np.linspace(-4, 4, 801)
        assert_allclose(agg(t), fit_histogram(x, 15)(t), rtol=1e-14)

    @pytest.mark.parametrize("gamma", [0.5, 1.0, 2.5])
    def test_unit_mass(self, rng, gamma):
        x = rng.exponential(size=300)
        agg = aggreg_hist(x, 20, gamma, 40, rng)
        lo, hi = agg.support
        assert mass(agg, lo, hi, 200_001) == pytest.approx(1.0, abs=1e-3)

    def test_every_observation_counted(self, rng):
        x = rng.normal(size=60)
        agg = aggreg_hist(x, 10, 2.5, 50, rng)
        for g in agg.components:
            assert g.breaks[0] <= x.min() and g.breaks[-1] >= x.max()
            assert g.mass == pytest.approx(1.0, abs=1e-12)

    def test_prefix_property(self):
        x = np.random.default_rng(3).normal(size=90)
        t = np.linspace(-3, 3, 301)
        big = aggreg_hist(x, 10, 1.0, 30, np.random.default_rng(8))
        small = aggreg_hist(x, 10, 1.0, 4, np.random.default_rng(8))
        assert_array_equal(big.truncated(4)(t), small(t))

    def test_rejects_negative_gamma(self, rng):
        with pytest.raises(DensityError):
            aggreg_hist(rng.normal(size=10), 5, -1.0, 3, rng)


class TestEm:
    def test_single_column(self):
        alpha, _ = em_mixture_weights([[0.2], [0.5], [1.0]])
        assert_allclose(alpha, [1.0])

    def test_identical_columns(self):
        alpha, _ = em_mixture_weights([[0.2, 0.2], [0.5, 0.5]])
        assert_allclose(alpha, [0.5, 0.5])

    def test_disjoint_columns(self):
        alpha, _ = em_mixture_weights([[1, 0], [0, 1], [1, 0]], tol=1e-14, max_iter=5000)
        assert_allclose(alpha, [2 / 3, 1 / 3], atol=1e-6)

    def test_all_zero_rows_dropped(self):
        a, _ = em_mixture_weights([[1, 0], [0, 1], [1, 0], [0, 0]], tol=1e-14, max_iter=5000)
        assert_allclose(a, [2 / 3, 1 / 3], atol=1e-6)

    def test_no_usable_rows(self):
        with pytest.raises(NoUsableRowsError, match="no usable held-out points"):
            em_mixture_weights(np.zeros((4, 3)))

    def test_rejects_negative_entries(self):
        with pytest.raises(DensityError):
            em_mixture_weights([[1.0, -0.1]])

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), rows=st.integers(5, 50))
    def test_matches_brute_force(self, seed, rows):
        A = np.random.default_rng(seed).exponential(size=(rows, 2))
        alpha, trace = em_mixture_weights(A)
        assert abs(alpha[0] - em_brute_force(A)) <= 0.01
        assert np.all(np.diff(trace) >= -1e-10)
        assert alpha.sum() == pytest.approx(1.0, abs=1e-12)


class TestStacking:
    def test_single_learner_is_refit(self, rng):
        x = rng.normal(size=60)
        learner = KdeLearner(Kernel.GAUSSIAN, 0.3)
        st_ = stack_densities(x, [learner], 5, rng)
        t = np.linspace(-3, 3, 61)
        assert_allclose(st_(t), learner.fit(x)(t), rtol=1e-14)

    def test_identical_learners(self, rng):
        x = rng.normal(size=60)
        learner = KdeLearner(Kernel.TRIANGULAR, 0.2)
        st_ = stack_densities(x, [learner] * 3, 5, rng)
        t = np.linspace(-3, 3, 61)
        assert_allclose(st_(t), learner.fit(x)(t), rtol=1e-12, atol=1e-15)

    @pytest.mark.parametrize("learners", [STACKING_LEARNERS, STACKHIST_LEARNERS],
                             ids=["kde", "hist"])
    def test_unit_mass(self, rng, learners):
        x = rng.normal(size=200)
        st_ = stack_densities(x, learners, 10, rng)
        lo, hi = st_.support
        assert mass(st_, lo, hi, 100_001) == pytest.approx(1.0, abs=1e-3)

    def test_fold_count_checked(self, rng):
        with pytest.raises(DensityError):
            stack_densities(rng.normal(size=5), [HistLearner(5)], 10, rng)


class TestAggPure:
    def test_single_split_single_bandwidth(self):
        x = np.random.default_rng(4).normal(size=40)
        d = agg_pure(x, bandwidths=(0.3,), S=1, rng=np.random.default_rng(5))
        perm = np.random.default_rng(5).permutation(40)
        ref = fit_kde(x[perm[:20]], Kernel.GAUSSIAN, 0.3)
        t = np.linspace(-3, 3, 61)
        assert_allclose(d(t), ref(t), rtol=1e-14)

    def test_unit_mass(self, rng):
        x = rng.normal(size=200)
        d = agg_pure(x, S=3, rng=rng)
        lo, hi = d.support
        # the h=0.001 components need a fine grid
        assert mass(d, lo, hi, 2_000_001) == pytest.approx(1.0, abs=1e-3)


class TestBoostKde:
    def test_single_step_is_kde(self, rng):
        x = rng.normal(size=100)
        h = 0.4
        d = boost_kde(x, steps=1, h=h, domain=(-12, 12))
        t = np.linspace(-4, 4, 81)
        assert_allclose(d(t), fit_kde(x, Kernel.GAUSSIAN, h)(t), atol=1e-9)
        assert d.normalizer == pytest.approx(1.0, abs=1e-6)

    def test_second_step_weight(self):
        d = boost_kde([0.0, 1.0], steps=2, h=1.0)
        # closed form: 1/2 + log((K(0) + K(1)) / K(1)) = 1/2 + log(1 + e^{1/2})
        exact = 0.5 + math.log1p(math.exp(0.5))
        assert_allclose(d.components[1].weights, [exact, exact], rtol=1e-14)

    def test_renormalized_weights(self):
        d = boost_kde([0.0, 1.0], steps=3, h=1.0, renormalize=True)
        for g in d.components:
            assert g.weights.sum() == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("renormalize", [False, True])
    def test_normalised_on_domain(self, rng, renormalize):
        x = rng.normal(size=150)
        d = boost_kde(x, steps=5, renormalize=renormalize, domain=(-6, 6))
        assert mass(d, -6, 6, 4097) == pytest.approx(1.0, abs=1e-6)
        assert d(7.0) == 0.0

    def test_default_domain_normalised(self, rng):
        d = boost_kde(rng.normal(size=80))
        lo, hi = d.support
        assert mass(d, lo, hi, 4097) == pytest.approx(1.0, abs=1e-6)

    def test_coincident_points_without_neighbours(self):
        with pytest.raises(DensityError, match="degenerate leave-one-out"):
            boost_kde([0.0, 1e6], steps=2, h=1.0)
