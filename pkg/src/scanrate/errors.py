"""Exception types raised across the package."""


class ScanRateError(Exception):
    """Base class for all package errors."""


class InvalidLengthError(ScanRateError, ValueError):
    pass


class CapacityError(ScanRateError):
    pass


class DomainError(ScanRateError, ValueError):
    pass


class ShapeError(ScanRateError, ValueError):
    pass


class InsufficientSampleError(ScanRateError):
    pass


class DegenerateDesignError(ScanRateError):
    pass


class DegenerateDataError(ScanRateError):
    pass


class OutOfDomainError(ScanRateError, ValueError):
    pass


class NonstationaryError(ScanRateError, ValueError):
    pass


class ParseError(ScanRateError):
    """Input file could not be parsed; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line
