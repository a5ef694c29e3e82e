class ValidationError(ValueError):
    """Input violates a documented precondition or invariant."""


class NumericalError(ArithmeticError):
    """A numerical procedure failed to converge or two routes disagree."""
