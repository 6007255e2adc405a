"""Synthetic streams, scoring, batch replay oracle, diagnostics, benchmarks.

Synthetic streams are piecewise-constant in semantics: each segment has a
unit mean direction, frames are ``normalize(mean + noise_sigma * gaussian)``,
and the motion channel follows a configurable profile (spikes at segment
transitions, a uniform level, or an explicit series). Ground truth is the
timestamp of the first frame of each segment after the first. Frames are
stamped ``(i + 1) / fps`` so a stream of duration D ends exactly at t = D.

``offline_oracle`` re-derives the full decision trace from a recorded stream
in one batch pass, independently of the detector class but in the same
arithmetic expression order (including ring-buffer memory layout, which fixes
the summation order inside the variance). Streaming and batch traces must
match float for float; the equivalence suite asserts exactly that.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Iterator, Optional, Sequence, Union

import numpy as np

from .detector import BoundaryDecision, BoundaryDetector, DetectorConfig
from .errors import InvalidSpec
from .events import BuilderConfig
from .memory import MemoryBank
from .pacing import Pacer, PacingConfig, stub_respond
from .pipeline import Pipeline
from .stream import FrameFeature


# --------------------------------------------------------------------- synthesis


@dataclass(frozen=True)
class SpikeMotion:
    """Motion spikes at segment transitions over a flat base level.

    ``lead_s`` shifts each spike earlier than the semantic change by that many
    seconds; 0 keeps them aligned.
    """

    height: float = 1.0
    width: int = 1
    lead_s: float = 0.0
    base: float = 0.0


@dataclass(frozen=True)
class UniformMotion:
    level: float = 0.0


@dataclass(frozen=True)
class CustomMotion:
    series: tuple[float, ...] = ()


MotionProfile = Union[SpikeMotion, UniformMotion, CustomMotion]


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic stream; deterministic under ``seed``."""

    d: int
    segments: tuple[tuple[float, int], ...]  # (duration seconds, mean seed)
    noise_sigma: float = 0.05
    fps: float = 2.0
    motion: MotionProfile = SpikeMotion()
    seed: int = 0

    def validate(self) -> None:
        if self.d < 1:
            raise InvalidSpec(f"d must be >= 1, got {self.d}")
        if not self.segments:
            raise InvalidSpec("at least one segment required")
        for dur, _ in self.segments:
            if not dur > 0:
                raise InvalidSpec(f"segment durations must be > 0, got {dur}")
        if self.noise_sigma < 0:
            raise InvalidSpec(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not self.fps > 0:
            raise InvalidSpec(f"fps must be > 0, got {self.fps}")
        if isinstance(self.motion, SpikeMotion):
            if self.motion.width < 1:
                raise InvalidSpec(f"spike width must be >= 1, got {self.motion.width}")
            if self.motion.height < 0 or self.motion.base < 0:
                raise InvalidSpec("spike height and base must be >= 0")
        if isinstance(self.motion, UniformMotion) and self.motion.level < 0:
            raise InvalidSpec(f"uniform motion level must be >= 0, got {self.motion.level}")
        if isinstance(self.motion, CustomMotion):
            n = sum(self._frame_counts())
            if len(self.motion.series) != n:
                raise InvalidSpec(
                    f"custom motion series length {len(self.motion.series)} != {n} frames"
                )
            if any(v < 0 for v in self.motion.series):
                raise InvalidSpec("custom motion values must be >= 0")

    def _frame_counts(self) -> list[int]:
        return [max(1, int(round(dur * self.fps))) for dur, _ in self.segments]

    def total_frames(self) -> int:
        return sum(self._frame_counts())


def _unit_mean(seed: int, d: int) -> np.ndarray:
    v = np.random.default_rng(seed).standard_normal(d)
    return v / float(np.linalg.norm(v))


def truth_times(spec: SynthSpec) -> list[float]:
    """First-frame timestamps of every segment after the first."""
    counts = spec._frame_counts()
    out, cum = [], 0
    for n in counts[:-1]:
        cum += n
        out.append((cum + 1) / spec.fps)
    return out


def _motion_series(spec: SynthSpec) -> np.ndarray:
    counts = spec._frame_counts()
    n = sum(counts)
    if isinstance(spec.motion, CustomMotion):
        return np.asarray(spec.motion.series, dtype=np.float64)
    if isinstance(spec.motion, UniformMotion):
        return np.full(n, float(spec.motion.level))
    m = np.full(n, float(spec.motion.base))
    lead = int(round(spec.motion.lead_s * spec.fps))
    w = spec.motion.width
    cum = 0
    for seg_n in counts[:-1]:
        cum += seg_n
        center = cum - lead  # index of the first frame of the next segment, shifted
        for i in range(center - (w - 1) // 2, center + w // 2 + 1):
            if 0 <= i < n:
                m[i] = spec.motion.height
    return m


def generate_stream(spec: SynthSpec) -> Iterator[FrameFeature]:
    """Lazy frame generator; one rng draw per frame, so iteration order is
    the determinism contract."""
    spec.validate()
    motions = _motion_series(spec)
    rng = np.random.default_rng(spec.seed)
    idx = 0
    for (dur, mean_seed), seg_n in zip(spec.segments, spec._frame_counts()):
        mean = _unit_mean(mean_seed, spec.d)
        for _ in range(seg_n):
            if spec.noise_sigma > 0:
                e = mean + spec.noise_sigma * rng.standard_normal(spec.d)
            else:
                e = mean.copy()
            e = e / float(np.linalg.norm(e))
            yield FrameFeature(t=(idx + 1) / spec.fps, emb=e, motion=float(motions[idx]))
            idx += 1


def generate(spec: SynthSpec) -> tuple[list[FrameFeature], list[float]]:
    return list(generate_stream(spec)), truth_times(spec)


def standard_suite_spec(
    seed: int,
    d: int = 128,
    n_segments: int = 20,
    dur_range: tuple[float, float] = (10.0, 60.0),
    noise_sigma: float = 0.05,
    fps: float = 2.0,
    max_pairwise_cos: float = 0.3,
    motion: MotionProfile = SpikeMotion(height=1.0, width=1),
) -> SynthSpec:
    """The standard evaluation stream family used for tuning and acceptance.

    Segment means are drawn from derived seeds and re-drawn until all pairs
    satisfy |cos| < max_pairwise_cos, so every transition is detectable.
    """
    rng = np.random.default_rng(seed)
    durations = rng.uniform(dur_range[0], dur_range[1], n_segments)
    means: list[np.ndarray] = []
    mean_seeds: list[int] = []
    candidate = seed * 1_000_003 + 1
    while len(means) < n_segments:
        v = _unit_mean(candidate, d)
        if all(abs(float(np.dot(v, m))) < max_pairwise_cos for m in means):
            means.append(v)
            mean_seeds.append(candidate)
        candidate += 1
    segments = tuple(
        (float(dur), s) for dur, s in zip(durations, mean_seeds)
    )
    return SynthSpec(
        d=d, segments=segments, noise_sigma=noise_sigma, fps=fps, motion=motion, seed=seed
    )


# ---------------------------------------------------------------------- scoring


@dataclass
class BoundaryScore:
    precision: float
    recall: float
    f1: float
    mean_latency_frames: float
    n_detected: int
    n_truth: int
    n_matched: int

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "mean_latency_frames": self.mean_latency_frames,
            "n_detected": self.n_detected,
            "n_truth": self.n_truth,
            "n_matched": self.n_matched,
        }


def eval_boundaries(
    detected: Sequence[float],
    truth: Sequence[float],
    tolerance_frames: int = 2,
    fps: float = 2.0,
) -> BoundaryScore:
    """Greedy one-to-one matching within a frame tolerance.

    Truth times are visited in order and matched to the earliest unmatched
    detection within tolerance. Empty-vs-empty scores perfect; empty
    detections against non-empty truth score precision 0 (documented
    convention so F1 stays defined). Latency is signed, detected minus true,
    in frames, averaged over matches.
    """
    detected = sorted(detected)
    truth = sorted(truth)
    tol = tolerance_frames / fps + 1e-9
    used = [False] * len(detected)
    latencies = []
    for t_true in truth:
        for i, t_det in enumerate(detected):
            if not used[i] and abs(t_det - t_true) <= tol:
                used[i] = True
                latencies.append((t_det - t_true) * fps)
                break
    matched = len(latencies)
    precision = matched / len(detected) if detected else (1.0 if not truth else 0.0)
    recall = matched / len(truth) if truth else (1.0 if not detected else 0.0)
    f1 = (
        2 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return BoundaryScore(
        precision=precision,
        recall=recall,
        f1=f1,
        mean_latency_frames=float(np.mean(latencies)) if latencies else 0.0,
        n_detected=len(detected),
        n_truth=len(truth),
        n_matched=matched,
    )


def detect_boundaries(
    frames: Iterable[FrameFeature], cfg: DetectorConfig, predictor
) -> tuple[list[BoundaryDecision], list[float]]:
    """Detector-only loop (with segment resets); returns trace + fired times."""
    det = BoundaryDetector(cfg, predictor)
    decisions, fired = [], []
    for frame in frames:
        decision = det.step(frame)
        decisions.append(decision)
        if decision.is_boundary:
            fired.append(frame.t)
            det.reset_segment(frame)
        elif det.segment_len >= cfg.max_segment_frames:
            det.reset_segment(frame)
    return decisions, fired


# ----------------------------------------------------------------- batch oracle


def offline_oracle(
    frames: Sequence[FrameFeature], cfg: DetectorConfig, predictor
) -> list[BoundaryDecision]:
    """Recompute the full decision trace from a recorded stream in one pass.

    Independent re-derivation of the streaming recurrence: plain local
    variables and inline ring buffers instead of detector state. Expression
    order mirrors the engine exactly; see the module docstring.
    """
    cfg.validate()
    ncap, vcap = cfg.norm_window, cfg.var_window
    mot_buf = np.empty(ncap)
    mot_n = mot_i = 0
    err_buf = np.empty(ncap)
    err_n = err_i = 0
    var_buf = np.empty(vcap)
    var_n = var_i = 0
    f_bar = None
    f_prev = None
    seg_len = 0
    out: list[BoundaryDecision] = []

    def minmax_norm(buf, n, value):
        window = buf[:n]
        lo = float(window.min())
        hi = float(window.max())
        if hi - lo <= 1e-12:
            return 0.0
        return (value - lo) / (hi - lo)

    for frame in frames:
        emb, m_raw = frame.emb, frame.motion
        first = f_bar is None
        if first:
            f_bar = emb.copy()

        den = float(np.linalg.norm(emb)) * float(np.linalg.norm(f_bar))
        sim = float(np.dot(emb, f_bar)) / den if den >= 1e-12 else 0.0

        mot_buf[mot_i] = m_raw
        mot_i = (mot_i + 1) % ncap
        mot_n = min(mot_n + 1, ncap)
        motion = minmax_norm(mot_buf, mot_n, m_raw)

        if first:
            pred_error = 0.0
        else:
            raw_err = predictor.error(f_prev, emb)
            err_buf[err_i] = raw_err
            err_i = (err_i + 1) % ncap
            err_n = min(err_n + 1, ncap)
            pred_error = minmax_norm(err_buf, err_n, raw_err)

        score = cfg.w_sem * (1.0 - sim) + cfg.w_mot * motion + cfg.w_pred * pred_error
        if score >= 0:
            probability = 1.0 / (1.0 + math.exp(-score))
        else:
            e = math.exp(score)
            probability = e / (1.0 + e)

        var_buf[var_i] = m_raw
        var_i = (var_i + 1) % vcap
        var_n = min(var_n + 1, vcap)
        threshold = cfg.tau0 * (1.0 + cfg.eta * float(np.var(var_buf[:var_n])))

        if first:
            is_boundary = False
        else:
            compared = probability if cfg.threshold_mode == "probability" else score
            is_boundary = compared > threshold
            if not is_boundary:
                f_bar = (1.0 - cfg.rho) * f_bar + cfg.rho * emb

        out.append(
            BoundaryDecision(
                t=frame.t,
                similarity=sim,
                motion=motion,
                pred_error=pred_error,
                score=score,
                probability=probability,
                threshold=threshold,
                is_boundary=is_boundary,
            )
        )

        seg_len += 1
        if is_boundary or seg_len >= cfg.max_segment_frames:
            f_bar = emb.copy()
            seg_len = 0
        f_prev = emb
    return out


# ------------------------------------------------------------------ diagnostics


def similarity_matrix(
    frames: Sequence[FrameFeature], stride: int = 1
) -> tuple[np.ndarray, list[tuple[int, float]]]:
    """Pairwise cosine matrix of strided frames plus a gap-decay curve.

    The curve entry for gap g is the mean cosine over all frame pairs g
    strided steps apart, reported in original-frame units (g * stride).
    """
    if stride < 1:
        raise InvalidSpec(f"stride must be >= 1, got {stride}")
    embs = np.stack([f.emb for f in frames[::stride]])
    if embs.shape[0] < 2:
        raise InvalidSpec("similarity matrix needs at least 2 strided frames")
    S = embs @ embs.T
    decay = [
        (g * stride, float(np.mean(np.diagonal(S, offset=g))))
        for g in range(1, embs.shape[0])
    ]
    return S, decay


# -------------------------------------------------------------------- benchmark


def _percentiles_ms(samples_s: Sequence[float]) -> dict:
    if not samples_s:
        return {"p50_ms": 0.0, "p95_ms": 0.0, "max_ms": 0.0}
    arr = np.asarray(samples_s) * 1e3
    return {
        "p50_ms": float(np.percentile(arr, 50)),
        "p95_ms": float(np.percentile(arr, 95)),
        "max_ms": float(np.max(arr)),
    }


def bench(
    frames: Iterable[FrameFeature],
    det_cfg: DetectorConfig,
    builder_cfg: BuilderConfig,
    pacing_cfg: PacingConfig,
    predictor,
    bank: Optional[MemoryBank] = None,
    responder: Optional[Callable] = None,
    include_responder: bool = False,
    slot_sample_every: int = 1000,
) -> dict:
    """Wall-clock per-frame engine cost and per-emission cost, measured apart.

    Responder time inside an emission is subtracted from the frame's engine
    cost unless ``include_responder`` is set. Per-emission latency always
    covers retrieval plus responder.
    """
    bank = bank if bank is not None else MemoryBank()
    responder_spent = 0.0

    def timed_responder(event, context):
        nonlocal responder_spent
        r0 = time.perf_counter()
        text = (responder or stub_respond)(event, context)
        responder_spent += time.perf_counter() - r0
        return text

    pacer = Pacer(pacing_cfg, responder=timed_responder)
    pipeline = Pipeline(
        BoundaryDetector(det_cfg, predictor), builder_cfg, bank, pacer, timing=True
    )
    frame_costs: list[float] = []
    emission_costs: list[float] = []
    slot_samples: list[int] = []
    t_first = t_last = None
    total = 0
    for frame in frames:
        if t_first is None:
            t_first = frame.t
        t_last = frame.t
        responder_spent = 0.0
        f0 = time.perf_counter()
        _, emission = pipeline.process(frame)
        cost = time.perf_counter() - f0
        if not include_responder:
            cost -= responder_spent
        frame_costs.append(cost)
        if emission is not None:
            emission_costs.append(emission.latency_ms / 1e3)
        total += 1
        if total % slot_sample_every == 0:
            slot_samples.append(len(bank))
    for emission in pipeline.finish():
        emission_costs.append(emission.latency_ms / 1e3)
    engine_time = float(np.sum(frame_costs)) if frame_costs else 0.0
    span = (t_last - t_first) if (t_first is not None and total > 1) else 0.0
    report = {
        "frames": total,
        "stream_span_s": span,
        "engine": _percentiles_ms(frame_costs)
        | {"frames_per_s": (total / engine_time) if engine_time > 0 else 0.0},
        "emissions": _percentiles_ms(emission_costs) | {"count": len(emission_costs)},
        "events_built": pipeline.events_built,
        "boundaries": pipeline.boundaries,
        "memory_slots": len(bank),
        "memory_slot_samples": slot_samples,
    }
    return report


# --------------------------------------------------------------------- ablation


ABLATIONS = {
    "full": {},
    "no_motion": {"w_mot": 0.0},
    "no_semantic": {"w_sem": 0.0},
    "no_prediction": {"w_pred": 0.0},
}


def ablation_scores(
    spec: SynthSpec,
    base_cfg: DetectorConfig,
    predictor,
    tolerance_frames: int = 2,
) -> dict[str, BoundaryScore]:
    """Standard-suite F1 with each cue removed in turn (weights zeroed)."""
    frames, truth = generate(spec)
    out = {}
    for name, overrides in ABLATIONS.items():
        cfg = replace(base_cfg, **overrides)
        _, fired = detect_boundaries(frames, cfg, predictor)
        out[name] = eval_boundaries(fired, truth, tolerance_frames, spec.fps)
    return out
