"""Exception hierarchy shared across the toolkit.

Every operational failure raises a subclass of :class:`GridQaError` so callers
can catch the whole family at the CLI boundary while tests pin down the exact
condition.
"""

from __future__ import annotations


class GridQaError(Exception):
    """Base class for all gridqa errors."""


# --- video ingest ---------------------------------------------------------


class SourceNotFound(GridQaError):
    """Video source path does not exist or is unreadable."""


class EmptyVideo(GridQaError):
    """Source exists but contains zero frames."""


class MetadataUnavailable(GridQaError):
    """No frame count and no fps/duration to derive one from."""


class IndexOutOfRange(GridQaError):
    """Requested frame index is outside [0, total_frames)."""


class DecodeFailure(GridQaError):
    """External decoder failed or a frame file could not be read."""


# --- sampling / compositing -----------------------------------------------


class InvalidArgument(GridQaError, ValueError):
    """Argument outside the documented domain."""


class WrongFrameCount(GridQaError):
    """compose() received a frame list whose length is not grid_side**2."""


class DegenerateCell(GridQaError):
    """Grid cell would be zero pixels wide."""


class IoFailure(GridQaError):
    """Filesystem write or read failed."""


# --- dataset ---------------------------------------------------------------


class ParseFailure(GridQaError):
    """A manifest line is not a valid record."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DuplicateQid(GridQaError):
    """The same qid appears on two manifest lines."""

    def __init__(self, qid: str, first_line: int, second_line: int):
        super().__init__(f"duplicate qid {qid!r} on lines {first_line} and {second_line}")
        self.qid = qid
        self.lines = (first_line, second_line)


class BadAnswerIndex(GridQaError):
    """answer_idx is outside [0, len(options))."""


class MissingColumn(GridQaError):
    """Source table lacks a required column."""


class MissingField(GridQaError):
    """Source record lacks a required field (or its value is unusable)."""


class UnknownTypeCode(GridQaError):
    """Question-type code does not map to a known question type."""


class MissingGridImage(GridQaError):
    """Finetune export found no grid image for an item."""

    def __init__(self, qid: str, path: object):
        super().__init__(f"no grid image for qid {qid!r}: expected {path}")
        self.qid = qid


# --- inference --------------------------------------------------------------


class ConfigInvalid(GridQaError):
    """Backend or run configuration fails validation."""


class AllItemsFailed(GridQaError):
    """Every record in a batch ended in transport_error."""


# --- scoring -----------------------------------------------------------------


class ParseError(GridQaError):
    """No precedence rule extracted an option letter from the model output."""


class QidMismatch(GridQaError):
    """Records and manifest do not cover identical qid sets."""


class IncompatibleColumns(GridQaError):
    """Reports being combined have different column sets."""
