"""Online boundary detection over an embedding stream.

Per frame the detector maintains a running event representation ``f_bar``
(an EMA of the open segment's embeddings) and scores three cues:

* semantic drift: ``1 - cos(f_t, f_bar)``
* motion: raw magnitude min-max normalized over a sliding window
* prediction error: squared residual of the causal predictor, normalized the
  same way

The combined score is ``score = w_sem * drift + w_mot * motion + w_pred * err``
and the boundary probability is ``logistic(score)``. The threshold adapts to
recent motion variance: ``thr = tau0 * (1 + eta * var)`` with the population
variance of the last ``var_window`` raw motion values. Depending on
``threshold_mode`` the probability (``probability``) or the raw score
(``raw_score``) is compared against the threshold; a frame is a boundary when
the compared quantity strictly exceeds it.

On a non-boundary frame ``f_bar`` moves by ``f_bar = (1-rho)*f_bar + rho*f_t``.
Boundary frames leave ``f_bar`` untouched; the pipeline closes the segment
(the boundary frame is its last frame) and then calls ``reset_segment``, which
restarts ``f_bar`` from the boundary frame's embedding and opens a new segment
at the next frame.

Determinism contract: the decision trace is a pure function of the record
prefix, and the arithmetic below is kept in a fixed expression order (including
the ring-buffer layout of the normalizer windows) so that an offline replay
can reproduce it exactly, float for float. Change the order only together
with the batch oracle in harness.py.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionMismatch, NonMonotoneTimestamp
from .stream import FrameFeature, SlidingWindowNormalizer

THRESHOLD_MODES = ("probability", "raw_score")


@dataclass(frozen=True)
class DetectorConfig:
    """Cue weights, EMA rate, and threshold policy.

    ``max_segment_frames`` caps the open-segment buffer: the pipeline
    force-closes a segment that reaches this many frames even if no boundary
    fired, which keeps resident state bounded on pathological streams. It
    lives here because replaying a trace requires it (a force-close resets
    ``f_bar`` and therefore changes every later decision).
    """

    w_sem: float = 1.0
    w_mot: float = 0.5
    w_pred: float = 0.5
    rho: float = 0.1
    # Tuned once on held-out synthetic streams (scripts/tune_detector.py):
    # midpoint of the perfect-F1 plateau [0.69, 0.84], then frozen.
    tau0: float = 0.77
    eta: float = 0.0
    norm_window: int = 64
    var_window: int = 64
    threshold_mode: str = "probability"
    max_segment_frames: int = 4096

    def validate(self) -> None:
        if not 0.0 < self.rho < 1.0:
            raise ConfigError(f"rho must be in (0,1), got {self.rho}")
        for name in ("w_sem", "w_mot", "w_pred"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not math.isfinite(self.tau0):
            raise ConfigError(f"tau0 must be finite, got {self.tau0}")
        if self.eta < 0:
            raise ConfigError(f"eta must be >= 0, got {self.eta}")
        if self.var_window < 2:
            raise ConfigError(f"var_window must be >= 2, got {self.var_window}")
        if self.norm_window < 1:
            raise ConfigError(f"norm_window must be >= 1, got {self.norm_window}")
        if self.threshold_mode not in THRESHOLD_MODES:
            raise ConfigError(
                f"threshold_mode must be one of {THRESHOLD_MODES}, got {self.threshold_mode!r}"
            )
        if self.max_segment_frames < 2:
            raise ConfigError(
                f"max_segment_frames must be >= 2, got {self.max_segment_frames}"
            )


@dataclass
class BoundaryDecision:
    """Everything the detector knew when it classified one frame."""

    t: float
    similarity: float
    motion: float
    pred_error: float
    score: float
    probability: float
    threshold: float
    is_boundary: bool

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "similarity": self.similarity,
            "motion": self.motion,
            "pred_error": self.pred_error,
            "score": self.score,
            "probability": self.probability,
            "threshold": self.threshold,
            "is_boundary": self.is_boundary,
        }


class _VarWindow:
    """Ring buffer of the last ``capacity`` raw motions, population variance."""

    def __init__(self, capacity: int):
        self._buf = np.empty(capacity, dtype=np.float64)
        self._cap = capacity
        self._count = 0
        self._next = 0

    def push(self, value: float) -> None:
        self._buf[self._next] = value
        self._next = (self._next + 1) % self._cap
        if self._count < self._cap:
            self._count += 1

    def variance(self) -> float:
        if self._count == 0:
            return 0.0
        return float(np.var(self._buf[: self._count]))


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine with a denominator guard; fixed expression order (see module doc)."""
    den = float(np.linalg.norm(a)) * float(np.linalg.norm(b))
    if den < 1e-12:
        return 0.0
    return float(np.dot(a, b)) / den


def logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def adaptive_threshold(cfg: DetectorConfig, variance: float) -> float:
    return cfg.tau0 * (1.0 + cfg.eta * variance)


class BoundaryDetector:
    """Stateful per-stream detector; one instance per stream, single-threaded.

    The open-segment buffer always contains every frame from ``segment_start``
    through the frame just stepped, boundary or not; the caller pools it and
    then calls ``reset_segment``.
    """

    def __init__(self, cfg: DetectorConfig, predictor):
        cfg.validate()
        self.cfg = cfg
        self.predictor = predictor
        self.f_bar: np.ndarray | None = None
        self.f_prev: np.ndarray | None = None
        self.last_t: float | None = None
        self.segment_start: float | None = None
        self.segment_times: list[float] = []
        self.segment_embs: list[np.ndarray] = []
        self._motion_norm = SlidingWindowNormalizer(cfg.norm_window)
        self._pred_norm = SlidingWindowNormalizer(cfg.norm_window)
        self._var = _VarWindow(cfg.var_window)

    @property
    def segment_len(self) -> int:
        return len(self.segment_times)

    def step(self, frame: FrameFeature) -> BoundaryDecision:
        cfg = self.cfg
        emb = frame.emb
        if self.f_bar is not None and emb.shape != self.f_bar.shape:
            raise DimensionMismatch(
                f"frame dimension {emb.shape[0]} != detector dimension {self.f_bar.shape[0]}"
            )
        if self.last_t is not None and frame.t <= self.last_t:
            raise NonMonotoneTimestamp(
                f"timestamp {frame.t} not greater than previous {self.last_t}"
            )
        if self.segment_start is None:
            self.segment_start = frame.t

        if self.f_bar is None:
            # First frame: seed f_bar, never a boundary (no history to drift from).
            self.f_bar = emb.copy()
            similarity = cosine(emb, self.f_bar)
            motion = self._motion_norm.normalize(frame.motion)
            pred_error = 0.0
            score = cfg.w_sem * (1.0 - similarity) + cfg.w_mot * motion + cfg.w_pred * pred_error
            probability = logistic(score)
            self._var.push(frame.motion)
            threshold = adaptive_threshold(cfg, self._var.variance())
            decision = BoundaryDecision(
                t=frame.t,
                similarity=similarity,
                motion=motion,
                pred_error=pred_error,
                score=score,
                probability=probability,
                threshold=threshold,
                is_boundary=False,
            )
        else:
            similarity = cosine(emb, self.f_bar)
            motion = self._motion_norm.normalize(frame.motion)
            raw_err = self.predictor.error(self.f_prev, emb)
            pred_error = self._pred_norm.normalize(raw_err)
            score = cfg.w_sem * (1.0 - similarity) + cfg.w_mot * motion + cfg.w_pred * pred_error
            probability = logistic(score)
            self._var.push(frame.motion)
            threshold = adaptive_threshold(cfg, self._var.variance())
            compared = probability if cfg.threshold_mode == "probability" else score
            is_boundary = compared > threshold
            if not is_boundary:
                self.f_bar = (1.0 - cfg.rho) * self.f_bar + cfg.rho * emb
            decision = BoundaryDecision(
                t=frame.t,
                similarity=similarity,
                motion=motion,
                pred_error=pred_error,
                score=score,
                probability=probability,
                threshold=threshold,
                is_boundary=is_boundary,
            )

        self.segment_times.append(frame.t)
        self.segment_embs.append(emb)
        self.f_prev = emb
        self.last_t = frame.t
        return decision

    def reset_segment(self, frame: FrameFeature) -> None:
        """Restart after a segment closed at ``frame`` (its last frame).

        The new segment's start time is unknown until the next frame arrives,
        so it is set lazily by the next ``step``.
        """
        self.f_bar = frame.emb.copy()
        self.segment_times.clear()
        self.segment_embs.clear()
        self.segment_start = None
