"""Exception hierarchy shared by every module."""


class RotafactorError(Exception):
    """Base class for all errors raised by rotafactor."""


class DimensionError(RotafactorError, ValueError):
    """Operand shapes are incompatible."""


class NumericalError(RotafactorError, ArithmeticError):
    """A numerical procedure could not produce a trustworthy result."""


class SingularMatrixError(NumericalError):
    pass


class NotPositiveDefiniteError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass
