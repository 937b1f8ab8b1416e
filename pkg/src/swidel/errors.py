"""Exception hierarchy shared by all modules."""


class SwidelError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(SwidelError, ValueError):
    pass


class NumericOverflowError(SwidelError, ArithmeticError):
    pass


class InvalidInputError(SwidelError, ValueError):
    pass


class InvalidDelayError(InvalidInputError):
    pass


class UnsupportedInstanceError(SwidelError, ValueError):
    pass


class ConvergenceError(SwidelError, ArithmeticError):
    """An iterative routine ran out of iterations.

    ``lower`` and ``upper`` carry the best bracket found for the quantity
    that was being computed.
    """

    def __init__(self, message, lower=None, upper=None):
        super().__init__(message)
        self.lower = lower
        self.upper = upper
