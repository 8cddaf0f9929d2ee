"""Exception hierarchy.

Class names double as the error names printed by the CLI, so they follow the
names used throughout the docs rather than the usual ``*Error`` suffix.
"""

from __future__ import annotations


class FootprintError(Exception):
    """Base class for every error raised by this package."""


class DataError(FootprintError):
    """Bad input data or corpus state. The CLI maps these to exit code 2."""


# -- ingest -----------------------------------------------------------------


class MalformedInput(DataError):
    """The report is not JSON or lacks a behavior section."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)


class RecordSchemaError(DataError):
    """A single behavior record is missing required fields."""


# -- features ---------------------------------------------------------------


class MissingDataField(DataError):
    """An event has nothing to render into the data part of its key."""


class DuplicateSourceId(DataError):
    pass


# -- ranking ----------------------------------------------------------------


class EmptyDocument(DataError):
    pass


class DomainError(DataError, ValueError):
    pass


class UnknownInfectedId(DataError):
    pass


class CorpusTooSmall(DataError):
    pass


# -- corpus store -----------------------------------------------------------


class DuplicateDocId(DataError):
    pass


class UnknownDocId(DataError):
    pass


class InvalidDocId(DataError, ValueError):
    pass


class DigestMismatch(DataError):
    def __init__(self, doc_id: str, expected: str, actual: str):
        self.doc_id = doc_id
        self.expected = expected
        self.actual = actual
        super().__init__(f"digest mismatch for {doc_id!r}: manifest {expected}, file {actual}")


class MissingFile(DataError):
    pass


class VersionUnsupported(DataError):
    pass


class IoFailure(DataError):
    pass
