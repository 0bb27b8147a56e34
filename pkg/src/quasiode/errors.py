"""Exception hierarchy shared across the package."""


class QuasiodeError(Exception):
    """Base class for all package errors."""


class ParseError(QuasiodeError):
    """Malformed expression source; carries the byte offset of the failure."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class EvaluationError(QuasiodeError):
    """Expression evaluation hit a singular point or produced a non-finite value."""


class SmoothnessError(QuasiodeError):
    """A derivative was requested beyond what the coefficient representation supports."""


class CoefficientError(QuasiodeError):
    """A coefficient set violates its structural hypotheses."""


class SchemaError(QuasiodeError):
    """A problem document failed validation."""


class IntegrationError(QuasiodeError):
    """The adaptive integrator could not complete a run."""
