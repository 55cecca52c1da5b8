"""Exception and warning types shared across the package."""


class DomainError(ValueError):
    """An evaluation left the domain of a log / division (e.g. a_i^T x <= 0)."""


class DimensionError(ValueError):
    """Inconsistent shapes, indices out of bounds, or malformed structure."""


class StallError(RuntimeError):
    """A backtracking loop shrank its step too many times in a row."""


class ExplosionGuard(RuntimeError):
    """A simulated point process exceeded the hard event budget."""


class ConvergenceWarning(UserWarning):
    """An iterative routine hit its iteration cap before reaching tolerance."""
