"""Exception hierarchy.

Subclasses of :class:`ValidationError` signal bad user input; subclasses of
:class:`NumericalError` signal that a well-posed computation failed. The
command line maps the two families to different exit codes.
"""


class AssortMatchError(Exception):
    """Base class for all package errors."""


class ValidationError(AssortMatchError, ValueError):
    pass


class NumericalError(AssortMatchError, ArithmeticError):
    pass


class MissingColumn(ValidationError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"missing column {column!r}")


class UnknownCategory(ValidationError):
    def __init__(self, row, attr, label):
        self.row, self.attr, self.label = row, attr, label
        super().__init__(f"row {row}: unknown category {label!r} for attribute {attr!r}")


class EmptySample(ValidationError):
    pass


class DegenerateColumn(ValidationError):
    def __init__(self, attr):
        self.attr = attr
        super().__init__(f"column {attr!r} has zero standard deviation")


class DegenerateCharacteristic(ValidationError):
    def __init__(self, characteristic):
        self.characteristic = characteristic
        super().__init__(f"characteristic {characteristic!r} is constant across occupations")


class EmptyBinSpec(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class InsufficientTrades(ValidationError):
    def __init__(self, message, available=None):
        self.available = available
        super().__init__(message)


class InfeasibleLabor(ValidationError):
    def __init__(self, labor):
        self.labor = labor
        super().__init__(f"implied female labor supply {labor:.6g} lies outside [0, 1]")


class ZeroMatrix(ValidationError):
    def __init__(self, period):
        self.period = period
        super().__init__(f"affinity matrix for period {period!r} has zero norm")


class NonConvergence(NumericalError):
    def __init__(self, iterations, marginal_error):
        self.iterations = iterations
        self.marginal_error = marginal_error
        super().__init__(
            f"equilibrium solver stopped after {iterations} iterations "
            f"with marginal error {marginal_error:.3e}"
        )


class NumericalOverflow(NumericalError):
    pass


class InnerSolverFailure(NumericalError):
    pass


class NotConverged(NumericalError):
    def __init__(self, message, result=None):
        self.result = result
        super().__init__(message)
