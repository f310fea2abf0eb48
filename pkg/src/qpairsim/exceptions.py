"""Exception types shared across the package."""


class QPairSimError(Exception):
    """Base class for all package-specific errors."""


class InvalidParameterError(QPairSimError, ValueError):
    """A constructor or operation received an out-of-range argument."""


class QuadratureError(QPairSimError, RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance.

    The best estimate obtained is attached as ``estimate``.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class DegenerateChannelError(QPairSimError, ValueError):
    """A channel has (numerically) empty passband, e.g. zero I1."""


class ResolutionError(QPairSimError, ValueError):
    """A time grid is too coarse or too short to resolve a wavepacket."""


class UndefinedVisibilityError(QPairSimError, ValueError):
    """Visibility is undefined because C_max + C_min vanished."""


class OutOfModelError(QPairSimError, RuntimeError):
    """Rates left the low-gain regime the analytic model assumes."""


class InsufficientDataError(QPairSimError, ValueError):
    """Too few sweep points (or similar) to perform a fit."""


class InsufficientStatisticsError(QPairSimError, RuntimeError):
    """A simulated acquisition produced zero coincidences in a required
    setting.  Partial count records are attached as ``records``."""

    def __init__(self, message, records=None):
        super().__init__(message)
        self.records = records or []


class IngestionError(QPairSimError, ValueError):
    """A device directory or channel CSV failed validation."""


class ConfigurationError(QPairSimError, ValueError):
    """A run configuration file is malformed or inconsistent."""
