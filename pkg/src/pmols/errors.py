"""Exception hierarchy.

Everything raised on purpose by the package derives from ``PmolsError`` so
callers (and the CLI) can separate bad input from genuine bugs.
"""


class PmolsError(Exception):
    """Base class for all package errors."""


class ValidationError(PmolsError, ValueError):
    """Input violates a documented precondition."""


class DimensionError(ValidationError):
    pass


class DomainError(ValidationError):
    """A scalar parameter lies outside its admissible range."""


class NumericalError(PmolsError, ArithmeticError):
    """A numerical routine could not produce a trustworthy answer."""


class DecompositionError(NumericalError):
    def __init__(self, shape, cause=None):
        self.shape = tuple(shape)
        msg = f"SVD failed to converge for a {shape[0]}x{shape[1]} matrix"
        if cause is not None:
            msg += f" ({cause})"
        super().__init__(msg)


class ZeroColumnError(ValidationError):
    def __init__(self, column):
        self.column = int(column)
        super().__init__(f"column {self.column} has zero l2-norm")


class RankDeficiencyError(NumericalError):
    pass


class DegenerateInputError(ValidationError):
    pass


class SingularityError(NumericalError):
    pass


class ExhaustionError(NumericalError):
    """Fewer admissible columns remain than the selection asks for."""


class NegativityError(ValidationError):
    def __init__(self, row, col, value):
        self.row, self.col, self.value = int(row), int(col), float(value)
        super().__init__(
            f"lifted entry ({self.row}, {self.col}) = {self.value:.6g} is negative"
        )


class PhysicalityError(ValidationError):
    pass


class PgmFormatError(PmolsError, ValueError):
    def __init__(self, message, offset):
        self.offset = int(offset)
        super().__init__(f"{message} (byte offset {self.offset})")


class BudgetError(ValidationError):
    def __init__(self, n, k, count, budget):
        self.count = count
        super().__init__(
            f"C({n},{k}) = {count} supports exceeds the brute-force budget {budget}"
        )


class NotPositiveDefiniteError(ValidationError):
    pass


class OverlapError(ValidationError):
    pass
