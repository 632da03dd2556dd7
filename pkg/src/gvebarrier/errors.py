"""Exception hierarchy for gvebarrier."""


class GveBarrierError(Exception):
    """Base class for all package errors."""


class SingularityError(GveBarrierError, ArithmeticError):
    pass


class EccentricitySingularity(SingularityError):
    """Eccentricity too small for a term that divides by e."""


class InclinationSingularity(SingularityError):
    """|sin i| too small for a term that divides by sin i."""


class IntegrationFailure(GveBarrierError, RuntimeError):
    """The adaptive integrator could not advance (step size underflow)."""

    def __init__(self, message, t=None):
        super().__init__(message if t is None else f"{message} (t = {t:.6f} s)")
        self.t = t


class ResetNotPermitted(GveBarrierError):
    """Weight reset requested while a barrier term is active."""


class InfeasibleTerminalSet(GveBarrierError):
    """No positive terminal level exists for the given virtual target."""


class InfeasibleInitialState(GveBarrierError, ValueError):
    pass


class ConfigError(GveBarrierError, ValueError):
    pass


class ParseError(ConfigError):
    """Malformed scenario file; carries the offending line and key."""

    def __init__(self, message, path=None, line=None, key=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        prefix = ":".join(where)
        if key is not None:
            prefix = f"{prefix} (key '{key}')" if prefix else f"key '{key}'"
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.path = path
        self.line = line
        self.key = key


class ValidationError(ConfigError):
    """A configuration value violates a documented invariant."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
