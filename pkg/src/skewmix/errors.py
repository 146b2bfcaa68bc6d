"""Exception types shared across the package."""


class SkewmixError(Exception):
    """Base class for all package errors."""


class FactorizationError(SkewmixError):
    """A matrix that must be positive definite failed to factor.

    ``minor`` is the 1-based index of the offending leading minor when the
    underlying routine reports one, else None.
    """

    def __init__(self, message, minor=None):
        super().__init__(message)
        self.minor = minor


class CanonicalValidityError(SkewmixError):
    """A (delta, omega) point does not map back to a finite skewness vector."""


class DataError(SkewmixError):
    """Malformed input data (ragged rows, unparseable cells, empty rows...)."""


class DegenerateClusterError(SkewmixError):
    """A cluster's effective size fell at or below the dimension."""


class SingularSystemError(SkewmixError):
    """The 2x2 location/skew update system lost positive determinant."""


class FitFailureError(SkewmixError):
    """Every start of the fit aborted; carries per-start diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []
