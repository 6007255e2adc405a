"""The single causal forward loop: detect, pool, consolidate, pace.

Per frame: the detector classifies it; if it is a boundary (or the open
segment hit its frame cap) the buffered segment, boundary frame included, is
pooled into an event token, consolidated into the memory bank, offered to the
pacer, and the detector restarts from the boundary frame. Otherwise the pacer
gets a tick so it can fire a keep-alive after prolonged silence. Nothing ever
looks ahead; state after frame t is a pure function of frames 1..t.

End of stream closes the still-open segment (if any) as a final event and
flushes the pacer. Keep-alive tokens are built lazily from the running
representation and are never written to memory.
"""

from __future__ import annotations

import time
from typing import Iterable, Iterator, Optional

import numpy as np

from .detector import BoundaryDecision, BoundaryDetector, DetectorConfig
from .events import BuilderConfig, EventToken, build_event
from .memory import MemoryBank
from .pacing import EmissionRecord, Pacer
from .stream import FrameFeature


class Pipeline:
    """One stream's engine instances plus the loop glue."""

    def __init__(
        self,
        detector: BoundaryDetector,
        builder_cfg: BuilderConfig,
        bank: MemoryBank,
        pacer: Pacer,
        timing: bool = False,
    ):
        builder_cfg.validate()
        self.detector = detector
        self.builder_cfg = builder_cfg
        self.bank = bank
        self.pacer = pacer
        self.timing = timing
        self.events_built = 0
        self.frames_seen = 0
        self.boundaries = 0
        self.force_closes = 0

    def _close_segment(self, frame: FrameFeature) -> EventToken:
        det = self.detector
        event = build_event(
            det.segment_times,
            det.segment_embs,
            t_b=frame.t,
            index=self.events_built,
            sigma_sharp=self.builder_cfg.sigma_sharp,
            mode=self.builder_cfg.mode,
        )
        self.events_built += 1
        self.bank.update(event)
        det.reset_segment(frame)
        return event

    def _keep_alive_token(self) -> EventToken:
        det = self.detector
        f_bar = det.f_bar
        norm = float(np.linalg.norm(f_bar))
        emb = f_bar / norm if norm >= 1e-12 else f_bar.copy()
        now = det.last_t
        return EventToken(
            index=self.events_built,
            emb=emb,
            t_start=det.segment_start if det.segment_start is not None else now,
            t_end=now,
            t_b=now,
            frame_count=max(det.segment_len, 1),
        )

    def _timed(self, fn, *args) -> Optional[EmissionRecord]:
        if not self.timing:
            return fn(*args)
        start = time.perf_counter()
        record = fn(*args)
        if record is not None:
            record.latency_ms = (time.perf_counter() - start) * 1e3
        return record

    def process(self, frame: FrameFeature):
        """Run one frame; returns (decision, emission-or-None)."""
        decision = self.detector.step(frame)
        self.frames_seen += 1
        if decision.is_boundary:
            self.boundaries += 1
            event = self._close_segment(frame)
            emission = self._timed(self.pacer.on_boundary, frame.t, event, self.bank)
        elif self.detector.segment_len >= self.detector.cfg.max_segment_frames:
            self.force_closes += 1
            event = self._close_segment(frame)
            emission = self._timed(self.pacer.on_boundary, frame.t, event, self.bank)
        else:
            emission = self._timed(
                self.pacer.on_tick, frame.t, self._keep_alive_token, self.bank
            )
        return decision, emission

    def finish(self) -> list[EmissionRecord]:
        """Close the open segment and flush the pacer at end of stream."""
        det = self.detector
        emissions = []
        if det.segment_len > 0:
            last = FrameFeature(t=det.last_t, emb=det.segment_embs[-1], motion=0.0)
            event = self._close_segment(last)
            record = self._timed(self.pacer.on_boundary, last.t, event, self.bank)
            if record is not None:
                emissions.append(record)
        if det.last_t is not None:
            record = self._timed(self.pacer.finish, det.last_t, self.bank)
            if record is not None:
                emissions.append(record)
        return emissions

    def run(
        self, frames: Iterable[FrameFeature]
    ) -> Iterator[tuple[Optional[BoundaryDecision], Optional[EmissionRecord]]]:
        """Drive the full loop; yields one (decision, emission) per frame and
        then (None, emission) for each end-of-stream emission."""
        for frame in frames:
            yield self.process(frame)
        for record in self.finish():
            yield None, record


def make_pipeline(
    det_cfg: DetectorConfig,
    builder_cfg: BuilderConfig,
    bank: MemoryBank,
    pacer: Pacer,
    predictor,
    timing: bool = False,
) -> Pipeline:
    return Pipeline(
        BoundaryDetector(det_cfg, predictor), builder_cfg, bank, pacer, timing=timing
    )
