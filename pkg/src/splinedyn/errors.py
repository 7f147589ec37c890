"""Exception types raised across the package."""


class SplineDynError(Exception):
    """Base class for all package errors."""


class ConfigError(SplineDynError, ValueError):
    """Invalid configuration or argument combination."""


class DomainError(SplineDynError, ValueError):
    """Evaluation point outside the basis domain."""


class SingularFitError(SplineDynError):
    """Normal equations are rank deficient."""


class NonDynamicPartitionError(SplineDynError):
    """A partition has a zero derivative coefficient and cannot be discretized."""


class TraceError(SplineDynError, ValueError):
    """Malformed, non-uniform or non-finite trace data."""
