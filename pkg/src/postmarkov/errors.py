"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition (shape, normalization, range)."""


class NumericalError(ArithmeticError):
    """A numerical routine failed its own accuracy or conditioning check."""
