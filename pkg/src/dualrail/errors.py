"""Shared exception types."""


class ConvergenceError(RuntimeError):
    """An iterative routine failed to reach its tolerance.

    Carries the final residual so callers can decide whether the partial
    result is still usable.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class InfeasibleTargetError(ValueError):
    """A requested setting cannot be realized by the hardware model."""


class DegenerateDataError(ValueError):
    """Input data carries no usable signal (e.g. zero total counts)."""
