"""Exception types raised by the estimators and the benchmark runner."""


class DensityError(ValueError):
    """A fit or evaluation could not produce a valid density."""


class DegenerateSampleError(DensityError):
    """The sample has zero-width support (all values equal)."""


class NoUsableRowsError(DensityError):
    """Every held-out row evaluated to zero for every component."""


class ConfigError(ValueError):
    """Invalid experiment configuration or estimator parameters."""
