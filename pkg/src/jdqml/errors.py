"""Exception types shared across the package."""


class JdqmlError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(JdqmlError, ValueError):
    """A parameter value violates a model or simulator precondition."""


class SingularDiffusionError(JdqmlError, ArithmeticError):
    """S(x, alpha) = a a^T is not positive definite at some state."""


class NonFiniteStateError(JdqmlError, ArithmeticError):
    """A simulated path left the finite floating point range."""


class DegenerateFilterError(JdqmlError):
    """A threshold filter left too few increments for an estimator to exist.

    ``requirement`` names the failed precondition, e.g. ``"n1 >= 1"``.
    """

    def __init__(self, requirement: str, detail: str = ""):
        self.requirement = requirement
        msg = f"degenerate filter: {requirement} not satisfied"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class ConstraintError(JdqmlError, ValueError):
    """A fixed-value constraint is out of range or out of bounds."""


class ConfigError(JdqmlError, ValueError):
    """A run configuration file is malformed or has unknown keys."""
