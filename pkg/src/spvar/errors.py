"""Exception types shared across the package."""


class SpvarError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(SpvarError):
    """Invalid configuration: unknown keys, bad types, out-of-range values."""


class DataError(SpvarError):
    """Unusable input data: wrong shape, NaN/inf values, season misalignment."""


class NumericalError(SpvarError):
    """A numerical procedure failed: singularity, ill-conditioning, infeasibility."""
