"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`EdfcapError`.
The CLI maps the subclasses onto exit codes.
"""


class EdfcapError(Exception):
    """Base class for all package errors."""


class DomainError(EdfcapError, ValueError):
    """An argument lies outside the domain of an operation."""


class ResourceError(EdfcapError):
    """An operation would exceed a configured resource budget."""


class InputError(EdfcapError, ValueError):
    """Input data is well formed but unusable (e.g. an empty point cloud)."""


class ParseError(EdfcapError, ValueError):
    """A text input could not be parsed."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
        self.line = line
        self.path = path


class GridFormatError(EdfcapError):
    """A binary grid file is malformed."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class NonTerminationError(EdfcapError):
    """A capsule check exceeded its query budget without reaching a verdict."""

    def __init__(self, message: str, queries: int, configuration=None, sample_index=None):
        super().__init__(message)
        self.queries = queries
        self.configuration = configuration
        self.sample_index = sample_index
