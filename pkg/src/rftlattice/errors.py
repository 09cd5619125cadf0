"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the requested function."""


class UnattainableError(ArithmeticError):
    """The expected Euler characteristic never reaches the requested alpha.

    Raised when the search region is too small (too few resels) for any
    threshold to give the requested family-wise error rate.
    """


class NoBracketError(ArithmeticError):
    """The threshold root lies beyond the search ceiling."""
