"""Frame-feature records, stream file formats, and windowed min-max normalization.

A stream is an ordered sequence of per-frame records: a timestamp in seconds,
an L2-normalized embedding of fixed dimension d, and a non-negative raw motion
magnitude. Two on-disk encodings are supported (byte layouts in
docs/formats.md):

* JSONL — one object per line: ``{"t": float, "emb": [float, ...], "motion": float}``
* binary — magic ``EVST``, u32 version=1, u32 d, then repeated
  ``[f64 t][f32 x d emb][f32 motion]`` records, little-endian.

Ingestion validates every record: embeddings are re-normalized unless they are
already unit-norm within ``UNIT_NORM_TOL`` (this keeps binary round-trips
byte-identical), zero embeddings and non-finite values are hard errors, and
timestamps must be strictly increasing. Records are never silently skipped —
dropping a record would desynchronize downstream timing.
"""

from __future__ import annotations

import io
import json
import math
import os
import struct
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Union

import numpy as np

from .errors import (
    MalformedRecord,
    NonFiniteValue,
    NonMonotoneTimestamp,
    ZeroEmbedding,
)

STREAM_MAGIC = b"EVST"
STREAM_VERSION = 1

#: Embeddings whose L2 norm is within this tolerance of 1 pass through
#: unchanged; anything else is renormalized on ingest.
UNIT_NORM_TOL = 1e-6


@dataclass
class FrameFeature:
    """One stream record: timestamp (s), unit-norm embedding, raw motion."""

    t: float
    emb: np.ndarray
    motion: float

    @property
    def dim(self) -> int:
        return int(self.emb.shape[0])


class SlidingWindowNormalizer:
    """Min-max normalization over a sliding window of the last ``capacity`` values.

    The current value is pushed into the window before the statistics are
    taken, so the very first value normalizes against a singleton window and
    yields 0 rather than a division error. A degenerate window
    (max - min <= epsilon) also yields 0, which biases against boundaries in
    static scenes.
    """

    def __init__(self, capacity: int, epsilon: float = 1e-12):
        if capacity < 1:
            raise ValueError("normalizer capacity must be >= 1")
        self.capacity = int(capacity)
        self.epsilon = float(epsilon)
        self._buf = np.empty(self.capacity, dtype=np.float64)
        self._count = 0
        self._next = 0

    def __len__(self) -> int:
        return self._count

    @property
    def values(self) -> np.ndarray:
        """Window contents in chronological order (oldest first)."""
        if self._count < self.capacity:
            return self._buf[: self._count].copy()
        return np.concatenate((self._buf[self._next :], self._buf[: self._next]))

    def reset(self) -> None:
        self._count = 0
        self._next = 0

    def push(self, value: float) -> None:
        self._buf[self._next] = value
        self._next = (self._next + 1) % self.capacity
        if self._count < self.capacity:
            self._count += 1

    def normalize(self, value: float) -> float:
        if not math.isfinite(value):
            raise NonFiniteValue(f"cannot normalize non-finite value {value!r}")
        self.push(value)
        window = self._buf[: self._count]
        lo = float(window.min())
        hi = float(window.max())
        if hi - lo <= self.epsilon:
            return 0.0
        return (value - lo) / (hi - lo)


def _ingest_embedding(raw, d_expected: int | None) -> np.ndarray:
    emb = np.asarray(raw, dtype=np.float64)
    if emb.ndim != 1 or emb.shape[0] == 0:
        raise MalformedRecord(f"embedding must be a non-empty vector, got shape {emb.shape}")
    if d_expected is not None and emb.shape[0] != d_expected:
        raise MalformedRecord(
            f"embedding dimension {emb.shape[0]} != stream dimension {d_expected}"
        )
    if not np.all(np.isfinite(emb)):
        raise MalformedRecord("embedding contains non-finite values")
    norm = float(np.linalg.norm(emb))
    if norm < 1e-12:
        raise ZeroEmbedding("zero embedding cannot be normalized")
    if abs(norm - 1.0) > UNIT_NORM_TOL:
        emb = emb / norm
    return emb


def _ingest_record(
    t, emb_raw, motion, d_expected: int | None, prev_t: float | None
) -> FrameFeature:
    t = float(t)
    if not math.isfinite(t):
        raise MalformedRecord(f"non-finite timestamp {t!r}")
    if prev_t is not None and t <= prev_t:
        raise NonMonotoneTimestamp(f"timestamp {t} not greater than previous {prev_t}")
    motion = float(motion)
    if not math.isfinite(motion) or motion < 0.0:
        raise MalformedRecord(f"motion must be finite and >= 0, got {motion!r}")
    emb = _ingest_embedding(emb_raw, d_expected)
    return FrameFeature(t=t, emb=emb, motion=motion)


def read_jsonl(source: IO) -> Iterator[FrameFeature]:
    """Yield validated records from a JSONL stream (text or binary handle)."""
    d = None
    prev_t = None
    for lineno, line in enumerate(source, start=1):
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            t, emb_raw, motion = obj["t"], obj["emb"], obj["motion"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise MalformedRecord(f"line {lineno}: {exc}") from exc
        rec = _ingest_record(t, emb_raw, motion, d, prev_t)
        d = rec.dim
        prev_t = rec.t
        yield rec


_HEADER = struct.Struct("<4sII")


def read_binary(source: IO) -> Iterator[FrameFeature]:
    """Yield validated records from an EVST binary stream."""
    header = source.read(_HEADER.size)
    if len(header) < _HEADER.size:
        raise MalformedRecord("truncated stream header")
    magic, version, d = _HEADER.unpack(header)
    if magic != STREAM_MAGIC:
        raise MalformedRecord(f"bad magic {magic!r}, expected {STREAM_MAGIC!r}")
    if version != STREAM_VERSION:
        raise MalformedRecord(f"unsupported stream version {version}")
    if d == 0:
        raise MalformedRecord("stream dimension must be positive")
    rec = struct.Struct(f"<d{d}ff")
    prev_t = None
    while True:
        chunk = source.read(rec.size)
        if not chunk:
            return
        if len(chunk) < rec.size:
            raise MalformedRecord(f"truncated record ({len(chunk)} of {rec.size} bytes)")
        fields = rec.unpack(chunk)
        out = _ingest_record(fields[0], fields[1 : 1 + d], fields[1 + d], d, prev_t)
        prev_t = out.t
        yield out


def _sniff_format(source: IO) -> str:
    head = source.peek(4)[:4] if hasattr(source, "peek") else b""
    if not head:
        pos = source.tell()
        head = source.read(4)
        source.seek(pos)
    return "binary" if head[:4] == STREAM_MAGIC else "jsonl"


def open_stream(
    source: Union[str, IO], format: str = "auto"
) -> Iterator[FrameFeature]:
    """Iterate FrameFeatures from a path or a readable byte source.

    ``format`` is one of ``jsonl``, ``binary``, or ``auto`` (sniff the EVST
    magic). The returned iterator owns the file handle when a path was given.
    """
    if isinstance(source, (str, bytes, os.PathLike)):
        handle = open(source, "rb")

        def _closing() -> Iterator[FrameFeature]:
            with handle:
                yield from open_stream(handle, format=format)

        return _closing()
    if format == "auto":
        format = _sniff_format(source)
    if format == "jsonl":
        return read_jsonl(source)
    if format == "binary":
        return read_binary(source)
    raise ValueError(f"unknown stream format {format!r}")


def write_binary(records: Iterable[FrameFeature], sink: IO, d: int | None = None) -> int:
    """Write records in the EVST binary format; returns the record count.

    ``d`` may be given for an empty stream; otherwise it is taken from the
    first record. Embeddings are stored as f32, timestamps as f64.
    """
    records = iter(records)
    first = next(records, None)
    if first is None and d is None:
        raise ValueError("cannot write an empty stream without an explicit dimension")
    dim = first.dim if first is not None else int(d)
    sink.write(_HEADER.pack(STREAM_MAGIC, STREAM_VERSION, dim))
    rec = struct.Struct(f"<d{dim}ff")
    count = 0

    def emit(r: FrameFeature) -> None:
        nonlocal count
        emb32 = r.emb.astype(np.float32)
        sink.write(rec.pack(r.t, *emb32.tolist(), np.float32(r.motion)))
        count += 1

    if first is not None:
        emit(first)
        for r in records:
            emit(r)
    return count


def write_jsonl(records: Iterable[FrameFeature], sink: IO) -> int:
    """Write records as JSONL (full float64 precision); returns the count."""
    count = 0
    for r in records:
        line = json.dumps({"t": r.t, "emb": r.emb.tolist(), "motion": r.motion})
        sink.write(line + "\n" if isinstance(sink, io.TextIOBase) else (line + "\n").encode())
        count += 1
    return count
