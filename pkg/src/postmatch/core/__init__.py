"""Probability primitives and the extended precision scalar contract."""

from .distributions import (
    CONTINUOUS, DISCRETE, MIXED, AtomPlusExponential,
    AtomPlusTruncatedExponential, Cauchy, Discrete, Erlang, Exponential,
    Gaussian, Laplace, ScalarDistribution, Shifted, Tabulated, Transformed,
    Triangular, Uniform, check_valid, inverse_cdf_sample, sample, uniformize,
)
from .errors import (
    ConfigError, DensityUnderflow, IdenticalDistributions, InfinitePenalty,
    IntegrationFailed, NotDiscrete, NotSeparable, OutOfSupport, PostMatchError,
    PrecisionExhausted, RateAboveThreshold, UnsupportedOutput,
)
from .precision import (
    DEFAULT_PRECISION, UnitValue, as_unit, check_horizon, format_mp,
    parse_mp, raw_value, required_precision, to_mp, working_precision,
)
from .quadrature import expectation, integrate_1d, quantile_nodes
from .rng import RngStream
