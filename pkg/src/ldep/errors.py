"""Exception types shared across the package."""


class LdepError(ValueError):
    """Base class for all errors raised by this package."""


class DimensionMismatch(LdepError):
    """Two objects that must agree in size do not.

    Carries the offending sizes so callers can report them without parsing
    the message.
    """

    def __init__(self, what: str, expected, actual):
        self.what = what
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what}: expected {expected}, got {actual}")


class DataFormatError(LdepError):
    """A data file violates the labeled-CSV schema.

    ``row`` and ``col`` are 1-based positions in the file when known.
    """

    def __init__(self, message: str, row=None, col=None):
        self.row = row
        self.col = col
        where = ""
        if row is not None:
            where = f" (row {row}" + (f", col {col})" if col is not None else ")")
        super().__init__(message + where)


class ModelFormatError(LdepError):
    """A model file is malformed or has an unsupported format version."""


class SingleClassError(LdepError):
    """Training data contains samples from only one class."""
