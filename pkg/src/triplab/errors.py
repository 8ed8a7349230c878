"""Exception types shared across the package.

Most failures are value errors with a dedicated subclass so callers (and the
CLI exit-code mapping) can tell configuration mistakes from data problems.
"""


class InvalidSizeError(ValueError):
    """A signal or universe is too small to work with (n < 3, empty file)."""


class SignalFormatError(ValueError):
    """A signal file could not be parsed; carries the offending row number."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class BudgetExceedsUniverseError(ValueError):
    """Requested more triplets than the universe contains."""


class DuplicateQueryError(ValueError):
    """The same canonical triplet appears more than once in an input."""


class FusionConflictError(ValueError):
    """Two labeled sets claim the same canonical triplet.

    ``query`` is the colliding triplet; ``annotators`` the ids involved.
    """

    def __init__(self, message, query=None, annotators=()):
        super().__init__(message)
        self.query = query
        self.annotators = tuple(annotators)


class EmptyInputError(ValueError):
    """An operation that needs at least one element received none."""


class NumericalOverflowError(ArithmeticError):
    """A non-finite value appeared during risk/gradient evaluation."""


class NotPSDError(ValueError):
    """A Gram matrix has a negative eigenvalue beyond tolerance."""


class UndefinedCorrelationError(ValueError):
    """Pearson correlation requested on a constant sequence."""


class InvalidBinsError(ValueError):
    """Bin count outside the valid range for the given label set."""


class ConfigError(ValueError):
    """An experiment configuration file is missing or malformed."""
