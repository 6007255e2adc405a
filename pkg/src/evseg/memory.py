"""Consolidated event memory: merge-or-append slots plus cosine retrieval.

A new event is compared against the most recent slot only. If their cosine
exceeds ``gamma_mem`` the slot absorbs it,
``slot = normalize((1 - lam) * slot + lam * event)``, extending the slot's
time span and merge count; otherwise the event is appended as a fresh slot.
Comparing against the last slot only is deliberate: an event similar to some
older slot but not the latest one is still appended, because temporally
separated recurrences are distinct events.

Capacity is optional. When ``max_slots`` is set and exceeded, the two
most-similar adjacent slots are merged (frame-count weighted), which keeps
temporal order and discards the least information. Retrieval is a linear
top-k cosine scan with ties broken newest-first; slot counts stay small
enough that an index would be overhead.

Snapshots use the ``EVMB`` binary format (docs/formats.md). Slot embeddings
are stored as f64 so a restored bank retrieves identically to the original.
"""

from __future__ import annotations

import struct
from dataclasses import replace
from typing import IO

import numpy as np

from .errors import ConfigError, CorruptSnapshot, DimensionMismatch
from .events import EventToken

SNAPSHOT_MAGIC = b"EVMB"
SNAPSHOT_VERSION = 1

MERGED = "merged"
APPENDED = "appended"

_HEADER = struct.Struct("<4sIIddIQI")
_SLOT_HEAD = struct.Struct("<QdddII")


class MemoryBank:
    """Ordered event slots (oldest first) with merge-or-append consolidation."""

    def __init__(
        self,
        lam: float = 0.3,
        gamma_mem: float = 0.95,
        max_slots: int | None = None,
    ):
        if not 0.0 < lam < 1.0:
            raise ConfigError(f"lambda must be in (0,1), got {lam}")
        if not -1.0 < gamma_mem <= 1.0:
            raise ConfigError(f"gamma_mem must be in (-1,1], got {gamma_mem}")
        if max_slots is not None and max_slots < 1:
            raise ConfigError(f"max_slots must be >= 1, got {max_slots}")
        self.lam = float(lam)
        self.gamma_mem = float(gamma_mem)
        self.max_slots = max_slots
        self.slots: list[EventToken] = []
        self.total_events_seen = 0

    def __len__(self) -> int:
        return len(self.slots)

    @property
    def dim(self) -> int | None:
        return None if not self.slots else int(self.slots[0].emb.shape[0])

    def _check_dim(self, emb: np.ndarray) -> None:
        if self.dim is not None and emb.shape[0] != self.dim:
            raise DimensionMismatch(
                f"event dimension {emb.shape[0]} != bank dimension {self.dim}"
            )

    def update(self, event: EventToken) -> str:
        """Consolidate one event; returns MERGED or APPENDED."""
        self._check_dim(event.emb)
        self.total_events_seen += 1
        if self.slots:
            last = self.slots[-1]
            if float(np.dot(event.emb, last.emb)) > self.gamma_mem:
                blended = (1.0 - self.lam) * last.emb + self.lam * event.emb
                norm = float(np.linalg.norm(blended))
                if norm < 1e-12:
                    blended, norm = event.emb.copy(), 1.0
                last.emb = blended / norm
                last.t_end = max(last.t_end, event.t_end)
                last.t_b = max(last.t_b, event.t_b)
                last.frame_count += event.frame_count
                last.merge_count += 1
                return MERGED
        self.slots.append(
            EventToken(
                index=event.index,
                emb=event.emb.copy(),
                t_start=event.t_start,
                t_end=event.t_end,
                t_b=event.t_b,
                frame_count=event.frame_count,
                merge_count=event.merge_count,
            )
        )
        if self.max_slots is not None and len(self.slots) > self.max_slots:
            self._evict()
        return APPENDED

    def _evict(self) -> None:
        """Merge the most-similar adjacent pair (earliest such pair on ties)."""
        best_i, best_sim = 0, -2.0
        for i in range(len(self.slots) - 1):
            sim = float(np.dot(self.slots[i].emb, self.slots[i + 1].emb))
            if sim > best_sim:
                best_i, best_sim = i, sim
        a, b = self.slots[best_i], self.slots[best_i + 1]
        na, nb = a.frame_count, b.frame_count
        blended = (na * a.emb + nb * b.emb) / (na + nb)
        norm = float(np.linalg.norm(blended))
        if norm < 1e-12:
            blended, norm = b.emb.copy(), 1.0
        merged = EventToken(
            index=a.index,
            emb=blended / norm,
            t_start=a.t_start,
            t_end=b.t_end,
            t_b=b.t_b,
            frame_count=na + nb,
            merge_count=a.merge_count + b.merge_count + 1,
        )
        self.slots[best_i : best_i + 2] = [merged]

    def retrieve(self, query_emb: np.ndarray, k: int) -> list[EventToken]:
        """Top-k slots by cosine to the query, ties broken newest-first."""
        if k < 0:
            raise ConfigError(f"k must be >= 0, got {k}")
        if k == 0 or not self.slots:
            return []
        query = np.asarray(query_emb, dtype=np.float64)
        self._check_dim(query)
        scored = [
            (float(np.dot(slot.emb, query)), pos, slot)
            for pos, slot in enumerate(self.slots)
        ]
        scored.sort(key=lambda item: (-item[0], -item[1]))
        # Copies, not live slots: callers must not be able to mutate the bank.
        return [replace(slot, emb=slot.emb.copy()) for _, _, slot in scored[:k]]

    # ---------------------------------------------------------------- snapshot

    def snapshot(self, sink: IO) -> None:
        d = self.dim or 0
        sink.write(
            _HEADER.pack(
                SNAPSHOT_MAGIC,
                SNAPSHOT_VERSION,
                d,
                self.lam,
                self.gamma_mem,
                self.max_slots or 0,
                self.total_events_seen,
                len(self.slots),
            )
        )
        for slot in self.slots:
            sink.write(
                _SLOT_HEAD.pack(
                    slot.index,
                    slot.t_start,
                    slot.t_end,
                    slot.t_b,
                    slot.frame_count,
                    slot.merge_count,
                )
            )
            sink.write(np.ascontiguousarray(slot.emb, dtype="<f8").tobytes())

    @classmethod
    def restore(cls, source: IO) -> "MemoryBank":
        header = source.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise CorruptSnapshot("truncated snapshot header")
        magic, version, d, lam, gamma_mem, max_slots, seen, count = _HEADER.unpack(header)
        if magic != SNAPSHOT_MAGIC:
            raise CorruptSnapshot(f"bad magic {magic!r}, expected {SNAPSHOT_MAGIC!r}")
        if version != SNAPSHOT_VERSION:
            raise CorruptSnapshot(f"unsupported snapshot version {version}")
        bank = cls(lam=lam, gamma_mem=gamma_mem, max_slots=max_slots or None)
        bank.total_events_seen = seen
        for _ in range(count):
            head = source.read(_SLOT_HEAD.size)
            if len(head) < _SLOT_HEAD.size:
                raise CorruptSnapshot("truncated slot header")
            index, t_start, t_end, t_b, frame_count, merge_count = _SLOT_HEAD.unpack(head)
            blob = source.read(8 * d)
            if len(blob) < 8 * d:
                raise CorruptSnapshot("truncated slot embedding")
            emb = np.frombuffer(blob, dtype="<f8").copy()
            bank.slots.append(
                EventToken(
                    index=index,
                    emb=emb,
                    t_start=t_start,
                    t_end=t_end,
                    t_b=t_b,
                    frame_count=frame_count,
                    merge_count=merge_count,
                )
            )
        return bank
