"""Exception hierarchy shared by all modules."""


class MemsError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(MemsError, ValueError):
    pass


class NotClamped(MemsError, ValueError):
    pass


class BelowObstacle(MemsError, ValueError):
    pass


class OutOfDomain(MemsError, ValueError):
    pass


class TouchdownGeometry(MemsError):
    """The free region is too thin for the mapped mesh to be a bijection."""


class DegenerateRange(MemsError, ValueError):
    pass


class SingularSystem(MemsError, ArithmeticError):
    pass


class ModelMismatch(MemsError, ValueError):
    pass


class TraceUnavailable(MemsError):
    pass


class NumericalFailure(MemsError, ArithmeticError):
    """Raised by the harness when a solve or a minimization fails."""


class MaxItersExceeded(UserWarning):
    """Warning category: the optimizer stopped on its iteration budget."""
