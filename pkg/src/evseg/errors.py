"""Exception hierarchy shared by all evseg modules.

Every error carries an ``exit_code`` so the CLI can map failures to stable
process exit codes:

    0  success
    2  configuration error (bad key, bad value, invariant violation on load)
    3  input format error (malformed stream record, corrupt snapshot, bad spec)
    4  dimension mismatch between inputs (stream vs. predictor vs. memory)
    5  internal invariant violation / misuse of an API contract
"""

from __future__ import annotations


class EvsegError(Exception):
    """Base class; default exit code covers internal invariant violations."""

    exit_code = 5


class ConfigError(EvsegError):
    exit_code = 2


class StreamFormatError(EvsegError):
    """Problems with the bytes/records of an input artifact."""

    exit_code = 3


class MalformedRecord(StreamFormatError):
    pass


class NonMonotoneTimestamp(StreamFormatError):
    pass


class ZeroEmbedding(StreamFormatError):
    pass


class NonFiniteValue(StreamFormatError):
    pass


class CorruptSnapshot(StreamFormatError):
    pass


class InvalidSpec(StreamFormatError):
    """Invalid synthetic-stream parameters."""


class DimensionMismatch(EvsegError):
    exit_code = 4


class StreamTooShort(EvsegError):
    pass


class AlreadyFrozen(EvsegError):
    pass


class EmptySegment(EvsegError):
    pass


class NonPositiveSharpness(EvsegError):
    pass
