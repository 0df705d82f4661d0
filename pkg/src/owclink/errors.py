"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of a function."""


class ConvergenceError(ArithmeticError):
    """An iterative procedure stopped before reaching its tolerance.

    The best available estimate and its error are kept on the exception so
    that callers can decide whether a partial answer is still useful.
    """

    def __init__(self, message, estimate=float("nan"), error=float("inf")):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class SeriesConvergenceError(ConvergenceError):
    """An infinite series did not settle within its term budget."""
