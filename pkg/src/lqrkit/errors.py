"""Exception types shared across the toolkit."""


class LqrkitError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(LqrkitError, ValueError):
    """Operands have incompatible or invalid shapes."""


class ValidationError(LqrkitError, ValueError):
    """An input violates a documented precondition (symmetry, finiteness, ...)."""


class StabilityError(LqrkitError, ValueError):
    """A matrix required to be Hurwitz is not.

    Carries ``max_real_part``, the largest eigenvalue real part observed.
    """

    def __init__(self, message: str, max_real_part: float | None = None):
        super().__init__(message)
        self.max_real_part = max_real_part


class ConvergenceError(LqrkitError, RuntimeError):
    """An iterative method failed to converge within its iteration budget."""

    def __init__(self, message: str, iterations: int | None = None):
        super().__init__(message)
        self.iterations = iterations


class BudgetError(LqrkitError, RuntimeError):
    """A requested accuracy is infeasible under the configured resource cap,
    or a bounded-noise emulator exceeded its certified deviation.

    ``measured`` holds the offending quantity (node count, deviation ratio, ...).
    """

    def __init__(self, message: str, measured: float | None = None):
        super().__init__(message)
        self.measured = measured


class StepSizeError(LqrkitError, RuntimeError):
    """A gradient step left the stabilizing sublevel set.

    Carries the offending iteration and a suggested halved step size.
    """

    def __init__(self, message: str, iteration: int, suggested_sigma: float):
        super().__init__(message)
        self.iteration = iteration
        self.suggested_sigma = suggested_sigma


class RadiusError(LqrkitError, RuntimeError):
    """A smoothing perturbation persistently destabilized the closed loop."""

    def __init__(self, message: str, suggested_radius: float | None = None):
        super().__init__(message)
        self.suggested_radius = suggested_radius


class VerificationError(LqrkitError, RuntimeError):
    """An end-to-end verification assertion failed.

    Carries the full verification report so callers can inspect every
    intermediate norm.
    """

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report
