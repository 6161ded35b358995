"""Exception hierarchy shared across the package."""

from __future__ import annotations


class AuctionGanError(Exception):
    """Base class for all package errors."""


class ShapeError(AuctionGanError, ValueError):
    """Array dimensions do not chain or do not match a network."""


class ConfigError(AuctionGanError, ValueError):
    """Invalid configuration value; ``key`` names the offending setting."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class ContractError(AuctionGanError, ValueError):
    """A caller violated an operation's precondition."""


class UndefinedMetricError(AuctionGanError, ValueError):
    """A metric has no defined value for the given input."""


class NumericError(AuctionGanError, ArithmeticError):
    """NaN/Inf encountered in parameters, gradients or scores.

    ``context`` accumulates where it happened (gan, epoch, minibatch, ...)
    as the error propagates up through the trainer.
    """

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.message = message
        self.context = dict(context)

    def add_context(self, **context) -> "NumericError":
        for key, value in context.items():
            self.context.setdefault(key, value)
        return self

    def __str__(self) -> str:
        if not self.context:
            return self.message
        where = ", ".join(f"{k}={v}" for k, v in self.context.items())
        return f"{self.message} ({where})"
