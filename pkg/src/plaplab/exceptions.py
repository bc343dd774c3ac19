"""Exception types raised by the lab."""


class PlapError(Exception):
    """Base class for every error raised by plaplab."""


class InvalidDomain(PlapError, ValueError):
    """A nonlinearity or parameter lies outside its admissible range."""


class ParamOutOfRange(InvalidDomain):
    pass


class UnknownExample(PlapError, KeyError):
    pass


class NonConvergentQuadrature(PlapError):
    pass


class DerivativeUnavailable(PlapError):
    pass


class HorizonTooSmall(PlapError, ValueError):
    pass


class NonIntegrableSource(PlapError, ValueError):
    pass


class BlowUpBeforeBoundary(PlapError):
    """Shooting left the admissible range before reaching r = 1."""

    def __init__(self, message, radius=None):
        super().__init__(message)
        self.radius = radius


class StiffnessFailure(PlapError):
    pass


class ZeroDenominator(PlapError, ZeroDivisionError):
    pass


class UnsupportedP(PlapError, ValueError):
    pass


class TransformDomainExceeded(PlapError):
    pass


class ConfigError(PlapError, ValueError):
    """Configuration file could not be parsed or failed validation."""

    def __init__(self, message, key=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.key = key
        self.line = line
