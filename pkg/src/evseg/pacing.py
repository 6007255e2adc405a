"""Emission pacing: boundary coalescing, keep-alives, responder dispatch.

One clock governs everything: ``last_emit``, the time of the most recent
emission of either kind. A boundary arriving within ``delta_min`` of it is
not emitted; its token is folded into a pending event (frame-count-weighted
mean) that rides along until the next boundary far enough out, at which point
the merged token is emitted with ``coalesced`` counting the absorbed
boundaries. Ticks fire a keep-alive once ``delta_max`` of silence has
accumulated; the first silence interval is measured from the stream start.

Keep-alives narrate the current running state; they do not consume the
pending event and do not represent a consolidated event, so the pipeline
never writes them to memory. At end of stream a still-pending event is
emitted if ``delta_min`` has elapsed, otherwise dropped: its content already
reached the memory bank when its segment closed, so only the narration is
skipped.

The responder is a pluggable callable; the bundled stub renders a fixed
template so end-to-end runs are deterministic and cheap to benchmark.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError
from .events import EventToken, merge_tokens
from .memory import MemoryBank

KIND_BOUNDARY = "boundary"
KIND_KEEP_ALIVE = "keep_alive"


@dataclass(frozen=True)
class PacingConfig:
    delta_min: float = 2.0
    delta_max: float = 30.0
    retrieve_k: int = 4

    def validate(self) -> None:
        if self.delta_min < 0:
            raise ConfigError(f"delta_min must be >= 0, got {self.delta_min}")
        if self.delta_max <= self.delta_min:
            raise ConfigError(
                f"delta_max must be > delta_min, got {self.delta_max} <= {self.delta_min}"
            )
        if self.retrieve_k < 0:
            raise ConfigError(f"retrieve_k must be >= 0, got {self.retrieve_k}")


@dataclass
class EmissionRecord:
    t_emit: float
    kind: str
    event: EventToken
    context: list[EventToken]
    text: str
    coalesced: int
    latency_ms: float | None = None

    def to_dict(self) -> dict:
        return {
            "t_emit": self.t_emit,
            "kind": self.kind,
            "event_index": self.event.index,
            "span": [self.event.t_start, self.event.t_end],
            "coalesced": self.coalesced,
            "context_indices": [s.index for s in self.context],
            "text": self.text,
            "latency_ms": self.latency_ms,
        }


def stub_respond(event: EventToken, context: Sequence[EventToken]) -> str:
    """Deterministic stand-in for a real responder."""
    if context:
        sims = [float(np.dot(event.emb, s.emb)) for s in context]
        nearest = max(range(len(sims)), key=lambda i: sims[i])
        ctx = ",".join(str(s.index) for s in context)
        return (
            f"event {event.index} [t{event.t_start:.1f}-t{event.t_end:.1f}] "
            f"ctx:[{ctx}] nearest:{context[nearest].index} cos:{sims[nearest]:.4f}"
        )
    return f"event {event.index} [t{event.t_start:.1f}-t{event.t_end:.1f}] ctx:[]"


class Pacer:
    """Hysteresis emission policy over boundary events and frame ticks.

    ``stream_start`` anchors the silence clock before the first emission.
    """

    def __init__(
        self,
        cfg: PacingConfig,
        responder: Callable[[EventToken, Sequence[EventToken]], str] = stub_respond,
        stream_start: float = 0.0,
    ):
        cfg.validate()
        self.cfg = cfg
        self.responder = responder
        self.stream_start = stream_start
        self.last_emit: float | None = None
        self.pending: EventToken | None = None
        self.pending_count = 0

    def _emit(
        self, t: float, kind: str, event: EventToken, bank: MemoryBank, coalesced: int
    ) -> EmissionRecord:
        context = bank.retrieve(event.emb, self.cfg.retrieve_k)
        text = self.responder(event, context)
        self.last_emit = t
        return EmissionRecord(
            t_emit=t,
            kind=kind,
            event=event,
            context=context,
            text=text,
            coalesced=coalesced,
        )

    def on_boundary(
        self, t: float, event: EventToken, bank: MemoryBank
    ) -> Optional[EmissionRecord]:
        """Emit the boundary event, or absorb it into the pending token."""
        if self.last_emit is not None and t - self.last_emit < self.cfg.delta_min:
            if self.pending is None:
                self.pending = event
            else:
                self.pending = merge_tokens(self.pending, event)
            self.pending_count += 1
            return None
        if self.pending is not None:
            event = merge_tokens(self.pending, event)
        coalesced = self.pending_count
        self.pending = None
        self.pending_count = 0
        return self._emit(t, KIND_BOUNDARY, event, bank, coalesced)

    def on_tick(
        self,
        t: float,
        token_factory: Callable[[], EventToken],
        bank: MemoryBank,
    ) -> Optional[EmissionRecord]:
        """Keep-alive check; ``token_factory`` is only called when emitting."""
        ref = self.last_emit if self.last_emit is not None else self.stream_start
        if t - ref >= self.cfg.delta_max:
            return self._emit(t, KIND_KEEP_ALIVE, token_factory(), bank, 0)
        return None

    def finish(self, t_end: float, bank: MemoryBank) -> Optional[EmissionRecord]:
        """Flush a pending event at end of stream if the gap allows it."""
        if self.pending is None:
            return None
        event, coalesced = self.pending, self.pending_count
        self.pending = None
        self.pending_count = 0
        if self.last_emit is not None and t_end - self.last_emit < self.cfg.delta_min:
            return None
        return self._emit(t_end, KIND_BOUNDARY, event, bank, coalesced)
