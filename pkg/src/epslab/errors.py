"""Exception hierarchy shared by every epslab module."""


class EPSError(Exception):
    """Base class for all errors raised by epslab."""


class InvalidInputError(EPSError, ValueError):
    """Arguments violate a documented precondition."""


class ConfigError(InvalidInputError):
    """A run configuration could not be resolved."""


class DomainCoverageError(EPSError):
    """The grid does not cover the support of a state."""


class UnsupportedOrderError(EPSError):
    """Requested eigenstate index or derivative order is outside the supported range."""


class UnsupportedError(EPSError):
    """Input is well formed but outside what the operation handles."""


class NumericalConsistencyError(EPSError):
    """A numerical self-check failed (e.g. a real quantity came out complex)."""


class NormalizationError(EPSError):
    """A normalization divisor vanished."""


class ExpansionError(EPSError):
    """An eigenbasis expansion lost too much mass when truncated."""


class ExpressionBlowupError(EPSError):
    """Symbolic expression exceeded the parameter exponent guard."""


class UnboundSymbolError(EPSError, KeyError):
    """A parameter symbol had no value during numeric evaluation."""

    def __str__(self):
        return Exception.__str__(self)


class TruncationError(EPSError):
    """A series did not terminate or converge within the allowed order.

    ``partial`` holds the partial result, ``diagnostics`` whatever the raising
    routine recorded about the failure (term norms, orders reached, ...).
    """

    def __init__(self, message, partial=None, diagnostics=None):
        super().__init__(message)
        self.partial = partial
        self.diagnostics = diagnostics or {}
