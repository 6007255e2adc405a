"""Pooling a closed segment's frames into one normalized event token.

Weighted mode follows the boundary-aware scheme: frame weights decay
exponentially with temporal distance from the boundary,
``w_i = exp(-|t_i - t_b| / sigma_sharp)``, normalized to sum to 1 before
pooling. Mean mode is the plain average. Either way the pooled vector is
L2-normalized, so downstream cosine math can assume unit slots.

``sigma_sharp`` is the temporal sharpness in seconds: small values
concentrate the token on frames near the boundary, large values approach the
mean. When unset it defaults to half the segment duration, clamped to at
least one inter-frame gap, which keeps the decay scale-free across frame
rates and segment lengths.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, EmptySegment, NonPositiveSharpness

POOL_MODES = ("weighted", "mean")


@dataclass
class EventToken:
    """One consolidated event: pooled unit embedding plus its time span."""

    index: int
    emb: np.ndarray
    t_start: float
    t_end: float
    t_b: float
    frame_count: int
    merge_count: int = 0


@dataclass(frozen=True)
class BuilderConfig:
    mode: str = "weighted"
    sigma_sharp: float | None = None  # None: half segment duration

    def validate(self) -> None:
        if self.mode not in POOL_MODES:
            raise ConfigError(f"pool mode must be one of {POOL_MODES}, got {self.mode!r}")
        if self.sigma_sharp is not None and self.sigma_sharp <= 0:
            raise ConfigError(f"sigma_sharp must be > 0, got {self.sigma_sharp}")


def default_sharpness(times: Sequence[float], t_b: float) -> float:
    """Half the span [t_start, t_b], clamped to >= one inter-frame gap."""
    if len(times) >= 2:
        gap = (times[-1] - times[0]) / (len(times) - 1)
    else:
        gap = 1.0
    return max((t_b - times[0]) / 2.0, gap)


def build_event(
    times: Sequence[float],
    embs: Sequence[np.ndarray],
    t_b: float,
    index: int,
    sigma_sharp: float | None = None,
    mode: str = "weighted",
) -> EventToken:
    """Pool one closed segment (time-ordered frames) into an EventToken.

    ``t_b`` is the boundary time, normally the last frame's timestamp.
    """
    n = len(times)
    if n == 0:
        raise EmptySegment("cannot build an event from zero frames")
    if sigma_sharp is None:
        sigma_sharp = default_sharpness(times, t_b)
    if not sigma_sharp > 0:
        raise NonPositiveSharpness(f"sigma_sharp must be > 0, got {sigma_sharp}")

    F = np.stack([np.asarray(e, dtype=np.float64) for e in embs])
    if mode == "mean":
        pooled = F.mean(axis=0)
    elif mode == "weighted":
        ts = np.asarray(times, dtype=np.float64)
        w = np.exp(-np.abs(ts - t_b) / sigma_sharp)
        w = w / w.sum()
        pooled = w @ F
    else:
        raise ConfigError(f"pool mode must be one of {POOL_MODES}, got {mode!r}")

    norm = float(np.linalg.norm(pooled))
    if norm < 1e-12:
        # Frames cancelled out; fall back to the boundary frame so the token
        # stays unit-norm rather than crashing mid-stream.
        pooled = F[-1].copy()
        norm = float(np.linalg.norm(pooled))
    pooled = pooled / norm
    return EventToken(
        index=index,
        emb=pooled,
        t_start=float(times[0]),
        t_end=float(times[-1]),
        t_b=float(t_b),
        frame_count=n,
        merge_count=0,
    )


def merge_tokens(a: EventToken, b: EventToken, index: int | None = None) -> EventToken:
    """Frame-count-weighted combination of two tokens (used when coalescing).

    The result spans both inputs and its weight is their combined frame count;
    ``t_b`` is taken from the later token.
    """
    na, nb = a.frame_count, b.frame_count
    pooled = (na * a.emb + nb * b.emb) / (na + nb)
    norm = float(np.linalg.norm(pooled))
    if norm < 1e-12:
        pooled = b.emb.copy()
        norm = float(np.linalg.norm(pooled))
    return EventToken(
        index=a.index if index is None else index,
        emb=pooled / norm,
        t_start=min(a.t_start, b.t_start),
        t_end=max(a.t_end, b.t_end),
        t_b=max(a.t_b, b.t_b),
        frame_count=na + nb,
        merge_count=a.merge_count + b.merge_count,
    )
