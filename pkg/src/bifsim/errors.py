"""Exception types shared across the simulator."""


class BifsimError(Exception):
    """Base class for all simulator errors."""


class ConfigurationError(BifsimError):
    """Invalid configuration: bad parameter value, empty schedule, unknown key."""


class StepDomainError(BifsimError):
    """A per-step update left the positive-amplitude domain (kick too large)."""


class SaturationError(BifsimError):
    """An exponential argument exceeded the representable range (|log| > 700)."""


class DegenerateReductionError(BifsimError):
    """The scattering submatrix has (numerically) zero trace and cannot be renormalized."""


class EnsembleError(BifsimError):
    """An ensemble run produced no usable trials."""
