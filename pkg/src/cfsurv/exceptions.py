"""Exception hierarchy.

Everything raised on purpose by this package derives from ``CfsurvError``.
``DataError`` covers problems with the input data (the CLI maps it to exit
code 2) and ``NumericalError`` covers breakdowns of the linear algebra
(exit code 3).
"""


class CfsurvError(Exception):
    """Base class for all package errors."""


class DataError(CfsurvError, ValueError):
    """The input data violates a precondition."""


class NumericalError(CfsurvError, ArithmeticError):
    """A numerical routine failed."""


class MissingColumn(DataError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"missing column {name!r}")


class NonPositiveTime(DataError):
    def __init__(self, row, value=None):
        self.row = row
        self.value = value
        super().__init__(f"row {row}: time must be positive and finite, got {value!r}")


class NonBinaryIndicator(DataError):
    def __init__(self, row, column, value=None):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"row {row}: column {column!r} must be 0 or 1, got {value!r}")


class NonFiniteCovariate(DataError):
    def __init__(self, row, column, value=None):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"row {row}: covariate {column!r} is not a finite number ({value!r})")


class MissingValue(DataError):
    def __init__(self, row, column):
        self.row = row
        self.column = column
        super().__init__(f"row {row}: missing value in column {column!r}")


class EmptyInput(DataError):
    pass


class LengthMismatch(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class EmptyArm(DataError):
    def __init__(self, which):
        self.which = which
        super().__init__(f"arm {which} has no observations")


class DegenerateCensoring(DataError):
    """Every observation in an arm is censored, so all IPCW weights vanish."""


class AllPointsIdentical(DataError):
    pass


class DegenerateRange(DataError):
    pass


class SingularSystem(NumericalError):
    pass
