"""
Exception hierarchy shared by every module
"""
from typing import Optional


class HarTemplateError(Exception):
    """Base class for all library errors"""


class DomainError(HarTemplateError, ValueError):
    """An operation was called outside its preconditions"""


class DatasetFormatError(HarTemplateError):
    """A signal or label file does not follow the row/column layout"""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{location}{message}")


class DatasetParseError(DatasetFormatError):
    """A token in a signal or label file is not a number"""

    def __init__(self, path: str, line: int, column: int, token: str):
        self.column = column
        self.token = token
        super().__init__(f"column {column}: cannot parse {token!r} as a number", path, line)


class DatasetConsistencyError(HarTemplateError):
    """Parallel signal/label files disagree on their row count"""


class ArtifactFormatError(HarTemplateError):
    """A persisted template, PCA, SVM or bundle file is malformed"""


class ConfigError(HarTemplateError):
    """The effective configuration is invalid"""
