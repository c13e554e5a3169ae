"""Exception hierarchy shared across the pipeline.

Split into configuration problems (operator error, CLI exit 2) and data
problems (bad or inconsistent input files, CLI exit 3). Anything else that
escapes is an internal error (exit 4).
"""


class CanopyFluxError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(CanopyFluxError):
    """Invalid configuration: unknown key, bad value, out-of-range parameter."""


class DataError(CanopyFluxError):
    """Base class for problems with input data."""


class EmptyInput(DataError):
    """An operation received an empty series or table where data is required."""


class MalformedSeries(DataError):
    """Timestamps not strictly increasing, or a series otherwise unusable."""


class InvalidReading(DataError):
    """A probe reading violates sensor physics (non-positive temperature difference)."""


class InvalidInventory(DataError):
    """An inventory record is unusable (non-positive stem diameter)."""


class InventoryMismatch(DataError):
    """Sap-flow data references a tree that has no inventory record."""


class SchemaError(DataError):
    """A CSV header does not match the documented schema."""

    def __init__(self, column: str, detail: str = ""):
        self.column = column
        msg = f"schema mismatch: column {column!r}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class RowError(DataError):
    """A CSV row cannot be parsed or violates a field constraint."""

    def __init__(self, line_no: int, detail: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {detail}")


class DuplicateRecord(DataError):
    """Two records claim the same key (e.g. the same calendar date)."""


class NoOverlap(DataError):
    """Joining weekly sources produced no rows; message reports per-source coverage."""


class ShapeError(DataError):
    """Vector or matrix dimensions do not line up."""


class EmptyTrainingSet(DataError):
    """Model fitting was asked to train on zero rows."""


class ModelFormatError(DataError):
    """A persisted model document has an unknown schema version or bad structure."""


class IoError(CanopyFluxError):
    """Filesystem failure while writing artifacts."""
