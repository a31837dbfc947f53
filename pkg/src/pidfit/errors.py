"""Exception types raised by pidfit."""


class PidfitError(Exception):
    """Base class for all pidfit errors."""


class DomainError(PidfitError, ValueError):
    """An argument lies outside the domain of the operation."""


class StructuralError(PidfitError):
    """A system is structurally unusable, e.g. improper."""


class SingularityError(PidfitError):
    """A frequency sample hits a pole on the imaginary axis."""

    def __init__(self, omega: float, message: str = ""):
        self.omega = omega
        super().__init__(message or f"singular frequency response at omega={omega:.6g} rad/s")


class IndeterminateError(PidfitError):
    """0/0 evaluation (e.g. DC gain with a common root at the origin)."""


class NotSettledError(PidfitError):
    """A response never stays inside the settling band."""


class NotFoundError(PidfitError):
    """A searched-for feature (e.g. a phase crossover) does not exist."""


class InfeasibleTargetError(DomainError):
    """A tuning rule would produce a negative gain for the requested target."""


class ConfigError(PidfitError):
    """Invalid run configuration. ``key`` names the offending key path."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)
