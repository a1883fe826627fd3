"""Exception types raised across vreatlas.

All of them derive from ValueError so callers that only guard against
invalid values keep working. The CLI maps ConfigError to exit code 1 and
DataError (and its subclasses) to exit code 2.
"""

from typing import Any, Dict, List, Optional, Tuple


class VreAtlasError(ValueError):
    """Base class for every error raised by the package."""

    def report(self) -> Dict[str, Any]:
        """Machine-readable form written to error_report.json by the CLI."""
        return {"error": type(self).__name__, "message": str(self)}


class ConfigError(VreAtlasError):
    """Malformed run or scenario configuration."""


class DataError(VreAtlasError):
    """Input data violates a documented contract."""


class InvalidInputError(DataError):
    """An argument is outside its legal domain."""


class AlignmentError(DataError):
    """Two grids that must share a GridSpec do not."""


class DataQualityError(DataError):
    """Inconsistent source data, e.g. a cell marked both positive and negative."""

    def __init__(self, message: str, cells: Optional[List[Tuple[int, int]]] = None):
        super().__init__(message)
        self.cells = cells or []

    def report(self) -> Dict[str, Any]:
        body = super().report()
        body["cells"] = [list(c) for c in self.cells]
        return body


class CollinearityError(DataError):
    """Design matrix is rank deficient."""

    def __init__(self, message: str, column: Optional[str] = None):
        super().__init__(message)
        self.column = column

    def report(self) -> Dict[str, Any]:
        body = super().report()
        body["column"] = self.column
        return body


class SeparationError(DataError):
    """Maximum-likelihood estimate does not exist (perfect or quasi separation)."""


class UndefinedLcoeError(DataError):
    """LCOE requested for a non-positive annual yield."""


class MissingLayerError(DataError):
    """A configured input file does not exist."""

    def __init__(self, message: str, path: str):
        super().__init__(message)
        self.path = path

    def report(self) -> Dict[str, Any]:
        body = super().report()
        body["path"] = self.path
        return body


class UnreadableInputError(DataError):
    """An input could not be decoded or parsed; keeps the type of the original failure."""

    def __init__(self, message: str, cause: Optional[str] = None):
        super().__init__(message)
        self.cause = cause

    @classmethod
    def wrap(cls, error: BaseException) -> "UnreadableInputError":
        return cls(str(error) or type(error).__name__, cause=type(error).__name__)

    def report(self) -> Dict[str, Any]:
        body = super().report()
        body["cause"] = self.cause
        return body
