class LatstretchError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(LatstretchError, ValueError):
    pass


class InvalidBodyError(InvalidInputError):
    pass


class PreconditionError(LatstretchError):
    """A documented hypothesis of the requested computation does not hold."""


class NumericFailureError(LatstretchError):
    def __init__(self, message, achieved_tolerance=None):
        super().__init__(message)
        self.achieved_tolerance = achieved_tolerance


class OracleTooLargeError(LatstretchError):
    def __init__(self, message, box_size=None, limit=None):
        super().__init__(message)
        self.box_size = box_size
        self.limit = limit


class TooLargeError(LatstretchError):
    pass
