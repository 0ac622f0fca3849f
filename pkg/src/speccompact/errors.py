"""Exception and warning types raised across the package."""


class SpecCompactError(Exception):
    """Base class for all package errors."""


class MissingColumn(SpecCompactError):
    pass


class NonNumericValue(SpecCompactError):
    def __init__(self, row_id, column, text):
        self.row_id = row_id
        self.column = column
        self.text = text
        super().__init__(f"non-numeric value {text!r} in row {row_id}, column {column}")


class DuplicateId(SpecCompactError):
    pass


class AlreadyNormalized(SpecCompactError):
    pass


class UnknownSpecName(SpecCompactError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class EmptyDataset(SpecCompactError):
    pass


class InvalidSpec(SpecCompactError):
    pass


class DimensionMismatch(SpecCompactError):
    pass


class DegenerateLabels(SpecCompactError):
    """Training labels contain a single class."""

    def __init__(self, message, side=None):
        self.side = side
        super().__init__(message if side is None else f"{side} model: {message}")


class EmptyRetainedSet(SpecCompactError):
    pass


class CellLimitExceeded(SpecCompactError):
    def __init__(self, n_cells, limit):
        self.n_cells = n_cells
        self.limit = limit
        super().__init__(f"grid has {n_cells:.4g} cells, budget is {limit}")


class LengthMismatch(SpecCompactError):
    pass


class InvalidCounts(SpecCompactError):
    pass


class InvalidConfig(SpecCompactError):
    pass


class CyclicDependence(InvalidConfig):
    pass


class InvariantViolation(SpecCompactError, AssertionError):
    """An internal consistency check failed."""


class NonConvergence(UserWarning):
    """SMO stopped at its iteration cap before meeting the KKT tolerance."""


class GridTooCoarse(UserWarning):
    pass
