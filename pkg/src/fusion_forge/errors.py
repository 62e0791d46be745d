"""Exception hierarchy shared by every module."""

from __future__ import annotations


class FusionForgeError(Exception):
    """Base class for all engine errors."""


class InputError(FusionForgeError):
    """Bad user input: config, missing file, malformed record."""


class DuplicateDocument(InputError):
    def __init__(self, doc_id: str):
        super().__init__(f"duplicate document id: {doc_id!r}")
        self.doc_id = doc_id


class NonFiniteScore(FusionForgeError):
    pass


class QueryMismatch(FusionForgeError):
    pass


class DimensionMismatch(InputError):
    def __init__(self, message: str, record_id: str | None = None):
        super().__init__(message)
        self.record_id = record_id


class ZeroNormVector(FusionForgeError):
    pass


class NearZeroQueryNorm(FusionForgeError):
    pass


class DocumentNotInIndex(FusionForgeError):
    def __init__(self, doc_id: str):
        super().__init__(f"document not in index: {doc_id!r}")
        self.doc_id = doc_id


class EmptyPool(FusionForgeError):
    pass


class PoolMismatch(FusionForgeError):
    pass


class InvalidParameter(FusionForgeError, ValueError):
    pass


class TooFewQueries(FusionForgeError):
    pass


class ParseError(InputError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)
        self.line = line
        self.path = path


class IoError(InputError, OSError):
    pass
