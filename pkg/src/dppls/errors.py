"""Exception hierarchy shared across the package.

Every error raised by the library derives from DpplsError so callers can
catch library failures without masking programming errors.  The CLI maps
each class to a distinct exit code.
"""


class DpplsError(Exception):
    """Base class for all library errors."""


class ArgumentError(DpplsError, ValueError):
    """A parameter is out of range or otherwise unusable."""


class ConfigurationError(ArgumentError):
    """Inconsistent or incomplete run configuration."""


class DegenerateInputError(ArgumentError):
    """Input data is structurally valid but statistically unusable
    (constant response, too few samples, zero-variance reference, ...)."""


class ShapeError(DpplsError, ValueError):
    """Array dimensions do not match the operation's contract."""


class StateError(DpplsError, RuntimeError):
    """Operation called on an object in the wrong lifecycle state,
    e.g. transforming with an unfitted pipeline."""


class NumericalError(DpplsError, ArithmeticError):
    """A numerical routine failed to produce a usable result."""


class SingularSystemError(NumericalError):
    """A linear system was singular within solver tolerance.

    Carries the number of components reached and a condition estimate so
    callers can suggest reducing the component count.
    """

    def __init__(self, message, components=None, condition=None):
        super().__init__(message)
        self.components = components
        self.condition = condition


class CsvFormatError(DpplsError, ValueError):
    """A CSV file violated the expected sample-per-row layout."""

    def __init__(self, message, path=None, line=None):
        super().__init__(message)
        self.path = path
        self.line = line
