"""Ensemble univariate density estimation and its Monte-Carlo benchmark."""

from .density import (
    Histogram,
    Kernel,
    KernelDensity,
    QuadratureGrid,
    bandwidth_nrd0,
    bandwidth_ucv,
    density_eval,
    fit_histogram,
    fit_kde,
    integrate,
    kernel_eval,
)
from .ensemble import (
    AverageDensity,
    MixtureDensity,
    ProductDensity,
    agg_pure,
    aggreg_hist,
    bag_hist,
    boost_kde,
    em_mixture_weights,
    stack_densities,
)
from .errors import ConfigError, DegenerateSampleError, DensityError, NoUsableRowsError
from .evaluation import MiseResult, ise, mean_log_likelihood, mise
from .models import ModelId, model_density, model_domain, model_sample
from .tuning import VALPARS, TuneGrid, TuneResult, tune, valpars

__version__ = "0.1.0"
