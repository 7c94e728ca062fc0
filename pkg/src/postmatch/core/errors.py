"""Exception types shared across the package."""


class PostMatchError(Exception):
    """Base class for all package errors."""


class OutOfSupport(PostMatchError, ValueError):
    """A point lies outside the support where an operation is defined.

    Parameters
    ----------
    message : str
        Human readable description.
    step : int, optional
        Session step at which the violation occurred, when known.
    """

    def __init__(self, message, step=None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step


class IntegrationFailed(PostMatchError, RuntimeError):
    """Quadrature did not reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        if achieved is not None:
            message = f"{message} (achieved error {achieved:.3g})"
        super().__init__(message)
        self.achieved = achieved


class UnsupportedOutput(PostMatchError, ValueError):
    """An output value has zero density under the output law."""


class IdenticalDistributions(PostMatchError, ValueError):
    """Two pmfs that were required to differ are equal."""


class NotDiscrete(PostMatchError, TypeError):
    """A discrete-only operation received a continuous object."""


class PrecisionExhausted(PostMatchError, ArithmeticError):
    """The working precision cannot resolve the requested quantity."""


class DensityUnderflow(PostMatchError, ArithmeticError):
    """A likelihood ratio evaluated to zero along a transcript."""

    def __init__(self, message, step=None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step


class NotSeparable(PostMatchError, ValueError):
    """A claimed separable decomposition fails numerically."""


class RateAboveThreshold(PostMatchError, ValueError):
    """A target rate is not below the threshold it must undercut."""


class InfinitePenalty(PostMatchError, ArithmeticError):
    """A divergence in the mismatch bound is infinite."""


class ConfigError(PostMatchError, ValueError):
    """An experiment configuration failed validation."""
