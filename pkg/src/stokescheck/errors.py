"""Exception types shared across the package."""

from __future__ import annotations


class StokescheckError(Exception):
    """Base class for every error raised by this package."""


class ExpressionSyntaxError(StokescheckError):
    """Raised when expression text does not match the grammar."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (offset {position})")
        self.position = position


class EvaluationError(StokescheckError):
    """Base class for errors raised while evaluating an expression."""


class UnboundVariableError(EvaluationError):
    def __init__(self, name: str):
        super().__init__(f"variable '{name}' is not bound in the environment")
        self.name = name


class DomainError(EvaluationError):
    """A function was evaluated outside its domain (log/sqrt of a negative
    number, division by zero, fractional power of a negative base)."""

    def __init__(self, message: str, subexpression: str):
        super().__init__(f"{message} in '{subexpression}'")
        self.subexpression = subexpression


class ScenarioError(StokescheckError):
    """A region, chart, form or scenario failed validation."""


class PreconditionError(StokescheckError):
    """An operation was called with arguments violating its contract."""


class QuadratureError(StokescheckError):
    """An integrand could not be evaluated to a finite value at a node."""
