"""Exception hierarchy shared by all corax modules."""


class CoraxError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(CoraxError):
    """An argument is outside its documented domain (bad dimensions, sigma, interval)."""


class EmptyInputError(CoraxError):
    """An operation that requires content received an empty input."""


class EmptySelectionError(CoraxError):
    """A time interval selected no frames or fixations; the caller decides the fallback."""


class EmptyMaskError(CoraxError):
    """Binarization of an all-zero frame would produce a meaningless mask."""


class AlreadyPresentError(CoraxError):
    """Appending a finding that the report already asserts."""


class ConfigurationError(CoraxError):
    """A backend or grounder is missing required inputs (priors, ground truth, transcript)."""


class SpecificationError(CoraxError):
    """An error-injection spec asks for more alterations than the data supports."""


class UndefinedMetricError(CoraxError):
    """A metric's denominator is empty (no misses, no opportunities, n too small)."""


class StateError(CoraxError):
    """An operation was applied in an illegal lifecycle state (re-deciding, undecided referrals)."""


class ValidationError(CoraxError):
    """A bundle or config document violates its schema. Carries the offending field path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


class ConflictError(CoraxError):
    """Re-ingestion of an existing case id with different content."""


class IOFailure(CoraxError):
    """A file or directory could not be read or written."""
