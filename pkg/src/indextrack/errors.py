"""Exception and warning taxonomy shared across the package."""


class IndexTrackError(Exception):
    """Base class for all package errors."""


class DataError(IndexTrackError):
    """Malformed or invalid input data (bad dates, non-positive prices, ...)."""


class ConfigError(IndexTrackError):
    """Invalid configuration or precondition violation."""


class NumericalError(IndexTrackError):
    """Numerical failure during a computation."""


class DegenerateDesignError(NumericalError):
    """Rank-deficient regression design.

    ``columns`` holds the indices of the offending (linearly dependent)
    design columns.
    """

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class LadDegeneracyError(NumericalError):
    """The L1 simplex exceeded its iteration cap (degenerate LP)."""


class UndefinedRatioError(NumericalError):
    """A return-risk ratio has a zero denominator."""


class EmptyUniverseWarning(UserWarning):
    """Eligible universe came out empty for a rebalance."""


class CarryForwardWarning(UserWarning):
    """A missing out-of-sample price was carried forward."""
