"""Exception hierarchy. Each class carries the CLI exit code it maps to."""

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_RESOLUTION = 4


class IBNLSError(Exception):
    exit_code = EXIT_NUMERICAL


# ================================
# Configuration / input errors
# ================================

class ConfigInvalid(IBNLSError, ValueError):
    exit_code = EXIT_CONFIG


class ConfigParseError(ConfigInvalid):
    def __init__(self, message: str, field: str = None, line: int = None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"{message}{suffix}")


class ParameterOutOfRange(ConfigInvalid):
    pass


class InvalidGrid(ConfigInvalid):
    pass


class InvalidExponent(ConfigInvalid):
    pass


class RadiusOutOfRange(ConfigInvalid):
    pass


class WrongGauge(ConfigInvalid):
    pass


class ConfigHashMismatch(ConfigInvalid):
    pass


# ================================
# Numerical errors
# ================================

class SpaceMismatch(IBNLSError, ValueError):
    pass


class GridMismatch(IBNLSError, ValueError):
    pass


class SingularOrigin(IBNLSError, ValueError):
    pass


class ZeroField(IBNLSError, ValueError):
    pass


class NoBracket(IBNLSError):
    pass


class NoConvergence(IBNLSError):
    def __init__(self, message: str, iterations: int = None, residual: float = None):
        self.iterations = iterations
        self.residual = residual
        super().__init__(message)


class DivergedToZero(IBNLSError):
    pass


class NotConverged(IBNLSError):
    pass


class EmptySeries(IBNLSError, ValueError):
    pass


class NoSnapshots(IBNLSError, ValueError):
    pass


class InsufficientSnapshots(IBNLSError, ValueError):
    pass


class CorruptSnapshot(IBNLSError):
    pass


# ================================
# Resolution / verdict errors
# ================================

class ResolutionLoss(IBNLSError):
    exit_code = EXIT_RESOLUTION


class WraparoundDetected(IBNLSError):
    exit_code = EXIT_RESOLUTION


class SpanTooShort(IBNLSError):
    exit_code = EXIT_RESOLUTION


class HorizonTooShort(IBNLSError):
    exit_code = EXIT_RESOLUTION
