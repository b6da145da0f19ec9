"""Exception types shared across the package."""


class CipcError(Exception):
    """Base class for library errors."""


class DomainError(CipcError, ValueError):
    """An argument lies outside the domain of the requested function."""


class ConvergenceError(CipcError, ArithmeticError):
    """An iterative method stopped before reaching its tolerance.

    ``estimate`` holds the best value available when it stopped.
    """

    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate
