class PyncormError(Exception):
    """Base class for every error raised on purpose by pyncorm."""


class ConfigError(PyncormError, ValueError):
    """An invalid run configuration or config file."""


class DataError(PyncormError, ValueError):
    """Malformed or inconsistent input data."""


class NumericalError(PyncormError, ArithmeticError):
    """A numerical routine could not produce a valid result."""


class DominanceError(NumericalError):
    """A Poisson-estimator ratio exceeded its bound (phi / (C kappa) > 1)."""


EXIT_CODES = {
    ConfigError: 2,
    DataError: 3,
    NumericalError: 4,
}
