"""Exception types shared across the package."""


class MixedResError(Exception):
    """Base class for every error raised by this package."""


class ModelError(MixedResError, ValueError):
    """Invalid model construction or a dimension mismatch."""


class QuantizerDomainError(MixedResError, ValueError):
    """Quantizer input is not finite."""


class SingularPriorError(MixedResError):
    """Prior covariance could not be factorized (not positive definite)."""


class DegenerateCovarianceError(MixedResError):
    """A covariance matrix has a zero or negative diagonal entry."""


class NumericalDomainError(MixedResError):
    """An intermediate value left its mathematically valid domain."""


class EstimatorUndefinedError(MixedResError):
    """Measurement covariance is singular or too ill-conditioned to solve.

    Carries the 1-norm condition estimate (``math.inf`` when the
    factorization failed outright).
    """

    def __init__(self, message: str, condition: float | None = None):
        super().__init__(message)
        self.condition = condition


class AssumptionViolationError(MixedResError):
    """Mixing matrices do not have the required orthonormal-block structure."""


class InstanceTooLargeError(MixedResError):
    """Problem instance exceeds the exhaustive reference solver's limits."""


class ConfigError(MixedResError):
    """Invalid experiment configuration."""
