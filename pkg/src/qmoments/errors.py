"""Exception types shared across the package."""


class UsageError(ValueError):
    """Invalid arguments, configuration, or model structure."""


class NumericalError(RuntimeError):
    """A numerical computation produced an unusable result."""


class DivergenceError(NumericalError):
    """An ODE solve left the finite range.

    ``last_time`` is the last integration time at which the state was still
    finite.
    """

    def __init__(self, message: str, last_time: float):
        super().__init__(message)
        self.last_time = last_time
