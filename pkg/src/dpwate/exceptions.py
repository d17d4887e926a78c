"""Exception hierarchy shared across the package."""


class DPWateError(Exception):
    """Base class for every error raised by dpwate."""


class ParameterError(DPWateError, ValueError):
    """A public parameter (M, a, epsilon, pi, ...) is out of range."""


class DataError(DPWateError):
    """Problems with the confidential input file or arrays."""


class InputError(DataError):
    """The input is empty or unreadable."""


class SchemaError(DataError):
    """A declared column is missing or a schema mapping is malformed."""


class ValidationError(DataError):
    """A value violates the dataset contract (e.g. non-binary outcome)."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class FitError(DPWateError):
    """Logistic regression could not be fitted (separation, rank deficiency)."""


class DegenerateSubsetError(DPWateError):
    """A subset lacks treated or control records."""


class AggregationError(DPWateError):
    """Every partition was degenerate, so nothing can be aggregated."""


class PlanningError(DPWateError):
    """The requested margin of error cannot be met."""
