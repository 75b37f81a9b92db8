"""Exception types raised across the package."""


class CvrDebiasError(Exception):
    """Base class for all package errors."""


class ParseError(CvrDebiasError):
    """A data file could not be parsed; message carries the line number."""


class ValidationError(CvrDebiasError):
    """Input data violates a structural invariant."""


class ConfigError(CvrDebiasError):
    """A configuration value is out of range or inconsistent."""


class EstimatorError(CvrDebiasError):
    """A loss estimator cannot be evaluated on the given inputs."""


class GenerationError(CvrDebiasError):
    """Semi-synthetic data generation failed (degenerate world, no flip
    candidates, zero denominator)."""


class TrainingError(CvrDebiasError):
    """Model training failed (divergence, empty batch, bad shapes)."""


class EvaluationError(CvrDebiasError):
    """Metric evaluation cannot proceed (e.g. empty test set)."""
