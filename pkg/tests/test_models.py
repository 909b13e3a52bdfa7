"""Tests for the benchmark densities and their samplers."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from densemble.density import integrate
from densemble.models import (
    MIXTURES,
    ModelId,
    model_density,
    model_domain,
    model_grid,
    model_sample,
    smooth_comb_terms,
)
from oracles import M9_DISPLAYED, chi_square_gof, model_cdf

ALL = list(ModelId)


class TestModelId:
    @pytest.mark.parametrize("text", ["M5", "m5", "5", " 5 "])
    def test_parse(self, text):
        assert ModelId.parse(text) is ModelId.M5

    def test_unknown(self):
        with pytest.raises(ValueError):
            ModelId.parse("M12")


class TestDensities:
    def test_standard_normal_at_zero(self):
        assert model_density("M1", 0.0) == pytest.approx(0.398942, abs=1e-6)

    def test_separated_bimodal_at_zero(self):
        assert model_density("M6", 0.0) == pytest.approx(0.017528, abs=1e-6)

    def test_comb_inside_interval(self):
        # 0.5 * phi(0.05) + 0.5 * 1
        assert model_density("M10", 0.05) == pytest.approx(0.699222, abs=1e-6)

    def test_comb_right_closed(self):
        # first interval is (0, 1/10]
        assert model_density("M10", 0.1) == pytest.approx(0.5 * math.exp(-0.005) / math.sqrt(2 * math.pi) + 0.5)
        assert model_density("M10", 0.0) == pytest.approx(0.5 / math.sqrt(2 * math.pi))
        assert model_density("M10", 0.15) == pytest.approx(0.5 * model_density("M1", 0.15))

    def test_comb_last_interval(self):
        assert model_density("M11", 27 / 14 - 0.01) > 0.5
        assert model_density("M11", 27 / 14 + 0.01) < 0.5

    @pytest.mark.parametrize("model", ["M2", "M3"])
    def test_zero_below_origin(self, model):
        assert model_density(model, -0.5) == 0.0

    @pytest.mark.parametrize("model", ALL)
    def test_nonnegative(self, model):
        x = np.linspace(-40, 60, 10_001)
        assert np.all(model_density(model, x) >= 0)

    @pytest.mark.parametrize("model", ALL)
    def test_unit_mass_on_domain(self, model):
        assert integrate(lambda x: model_density(model, x), model_grid(model)) == pytest.approx(1.0, abs=1e-5)

    @pytest.mark.parametrize("model", ALL)
    def test_domain_mass(self, model):
        lo, hi = model_domain(model)
        name = model.value
        inside = float(model_cdf(name, hi) - model_cdf(name, lo))
        assert inside >= 1 - 1e-5

    @pytest.mark.parametrize("model", ["M1", "M2", "M3", "M4", "M6", "M8"])
    def test_matches_cdf_derivative(self, model):
        x = np.linspace(0.3, 4.0, 15)
        eps = 1e-6
        deriv = (model_cdf(model, x + eps) - model_cdf(model, x - eps)) / (2 * eps)
        assert_allclose(model_density(model, x), deriv, rtol=1e-6, atol=1e-9)


class TestSmoothComb:
    def test_rational_expansion(self):
        assert smooth_comb_terms() == M9_DISPLAYED

    def test_float_table_matches(self):
        spec = MIXTURES[ModelId.M9]
        exact = smooth_comb_terms()
        assert spec.weights == tuple(float(w) for w, _, _ in exact)
        assert spec.means == tuple(float(m) for _, m, _ in exact)
        assert spec.sds == tuple(float(s) for _, _, s in exact)


class TestSamplers:
    def test_reproducible(self):
        a = model_sample("M8", 500, np.random.default_rng(3))
        b = model_sample("M8", 500, np.random.default_rng(3))
        assert np.array_equal(a, b)

    def test_normal_moments(self, rng):
        x = model_sample("M1", 100_000, rng)
        assert abs(x.mean()) < 0.02
        assert x.std() == pytest.approx(1.0, abs=0.02)

    def test_exponential(self, rng):
        x = model_sample("M2", 100_000, rng)
        assert x.min() >= 0
        assert x.mean() == pytest.approx(1.0, abs=0.02)

    def test_bimodal_balance(self, rng):
        x = model_sample("M5", 100_000, rng)
        assert np.mean(x < 0) == pytest.approx(0.5, abs=0.01)

    def test_rejects_empty(self, rng):
        with pytest.raises(ValueError):
            model_sample("M1", 0, rng)

    @pytest.mark.parametrize("model", ALL)
    def test_chi_square_goodness_of_fit(self, model):
        x = model_sample(model, 100_000, np.random.default_rng(1000 + model.index))
        assert chi_square_gof(model.value, x) > 1e-4


def test_aligned_grid_hits_comb_jumps():
    grid = model_grid("M11")
    assert grid.size == 4201
    jumps = np.arange(-70, 71) / 14
    jumps = jumps[(jumps >= -5) & (jumps <= 5)]
    assert np.all(np.min(np.abs(grid.points[:, None] - jumps[None, :]), axis=0) < 1e-12)
