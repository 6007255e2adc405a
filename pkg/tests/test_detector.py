import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evseg.detector import (
    BoundaryDetector,
    DetectorConfig,
    adaptive_threshold,
    cosine,
    logistic,
)
from evseg.errors import ConfigError, DimensionMismatch, NonMonotoneTimestamp
from evseg.harness import (
    SynthSpec,
    detect_boundaries,
    eval_boundaries,
    generate,
    offline_oracle,
    truth_times,
)
from evseg.predictor import IdentityPredictor

from conftest import decisions_equal, make_frames, unit


# ------------------------------------------------------------------ primitives


def test_logistic_known_values():
    assert logistic(0.0) == 0.5
    assert logistic(1.0) == pytest.approx(1.0 / (1.0 + math.exp(-1.0)), abs=1e-15)
    assert logistic(-30.0) == pytest.approx(math.exp(-30.0), rel=1e-12)
    assert 0.0 < logistic(-700.0) < 1e-300  # no overflow on the negative branch


@given(st.floats(min_value=-50, max_value=50))
def test_logistic_symmetric(x):
    assert logistic(x) + logistic(-x) == pytest.approx(1.0, abs=1e-12)


@given(st.floats(min_value=-20, max_value=20))
def test_logistic_strictly_monotone_before_saturation(x):
    assert logistic(x + 1e-3) > logistic(x)


def test_cosine_guard_on_zero_vector():
    assert cosine(np.zeros(3), np.ones(3)) == 0.0


def test_adaptive_threshold_examples():
    assert adaptive_threshold(DetectorConfig(tau0=0.7, eta=0.0), variance=5.0) == 0.7
    cfg = DetectorConfig(tau0=0.5, eta=0.03)
    assert adaptive_threshold(cfg, variance=1.0) == pytest.approx(0.515, abs=1e-12)
    # Zero variance leaves the base threshold untouched whatever eta is.
    assert adaptive_threshold(DetectorConfig(tau0=0.96, eta=0.03), 0.0) == 0.96


def test_adaptive_threshold_scales_linearly_in_eta():
    v = 2.5
    lo = adaptive_threshold(DetectorConfig(tau0=0.6, eta=0.01), v)
    hi = adaptive_threshold(DetectorConfig(tau0=0.6, eta=0.02), v)
    assert hi - 0.6 == pytest.approx(2.0 * (lo - 0.6), rel=1e-12)


# ------------------------------------------------------------------ config


def test_config_validation():
    with pytest.raises(ConfigError):
        DetectorConfig(w_sem=-0.1).validate()
    with pytest.raises(ConfigError):
        DetectorConfig(rho=0.0).validate()
    with pytest.raises(ConfigError):
        DetectorConfig(rho=1.5).validate()
    with pytest.raises(ConfigError):
        DetectorConfig(tau0=float("nan")).validate()
    with pytest.raises(ConfigError):
        DetectorConfig(eta=-0.01).validate()
    with pytest.raises(ConfigError):
        DetectorConfig(norm_window=0).validate()
    with pytest.raises(ConfigError):
        DetectorConfig(threshold_mode="bogus").validate()
    with pytest.raises(ConfigError):
        DetectorConfig(max_segment_frames=0).validate()
    DetectorConfig().validate()


# ------------------------------------------------------------------ step


def test_constant_stream_never_fires(rng):
    v = unit(rng, 8)
    det = BoundaryDetector(DetectorConfig(tau0=0.51), IdentityPredictor())
    for f in make_frames([v.copy() for _ in range(50)]):
        d = det.step(f)
        assert not d.is_boundary
        assert d.similarity == pytest.approx(1.0, abs=1e-12)
        assert d.motion == 0.0
        assert d.pred_error == 0.0
        assert d.score == pytest.approx(0.0, abs=1e-12)
        assert d.probability == pytest.approx(0.5, abs=1e-12)


def test_first_frame_is_never_a_boundary(rng):
    # p = 0.5 on the first frame would clear a low threshold, but there is
    # no history yet so the decision must stay negative.
    det = BoundaryDetector(DetectorConfig(tau0=0.3), IdentityPredictor())
    d = det.step(make_frames([unit(rng, 4)])[0])
    assert not d.is_boundary
    assert d.probability > d.threshold


def test_orthogonal_jump_scores_full_semantic_drift():
    cfg = DetectorConfig(w_sem=1.0, w_mot=0.0, w_pred=0.0)
    det = BoundaryDetector(cfg, IdentityPredictor())
    a = np.array([1.0, 0.0])
    b = np.array([0.0, 1.0])
    det.step(make_frames([a])[0])
    d = det.step(make_frames([b], t0=2.0)[0])
    assert d.similarity == 0.0
    assert d.score == 1.0
    assert d.probability == pytest.approx(logistic(1.0), abs=1e-15)


def test_score_is_the_weighted_cue_sum(rng):
    # Reconstruct the score from the reported cues for every decision; with
    # non-negative weights this pins monotonicity in each cue.
    cfg = DetectorConfig(w_sem=1.3, w_mot=0.7, w_pred=0.4)
    spec = SynthSpec(d=16, segments=((5.0, 1), (5.0, 2)), seed=0)
    frames, _ = generate(spec)
    det = BoundaryDetector(cfg, IdentityPredictor())
    for f in frames:
        d = det.step(f)
        want = 1.3 * (1.0 - d.similarity) + 0.7 * d.motion + 0.4 * d.pred_error
        assert d.score == want
        assert d.probability == logistic(d.score)
        if d.is_boundary:
            det.reset_segment(f)


def test_raw_score_mode_pure_semantic(rng):
    # With only the semantic cue and no noise, drift at the transition is
    # exactly 1 - cos(m1, m2); the boundary fires iff that clears tau0.
    a = np.array([1.0, 0.0, 0.0])
    m2 = np.array([math.cos(math.pi / 3), math.sin(math.pi / 3), 0.0])  # cos = 0.5
    embs = [a] * 5 + [m2] * 5
    frames = make_frames([e.copy() for e in embs])

    def fired(tau0):
        cfg = DetectorConfig(
            w_sem=1.0, w_mot=0.0, w_pred=0.0, tau0=tau0, threshold_mode="raw_score"
        )
        _, times = detect_boundaries(frames, cfg, IdentityPredictor())
        return times

    assert fired(0.4) == [frames[5].t]  # drift 0.5 > 0.4, exactly once
    assert fired(0.6) == []  # 0.5 < 0.6, never


def test_two_segment_stream_fires_within_tolerance():
    spec = SynthSpec(d=64, segments=((12.0, 10), (12.0, 11)), seed=5)
    frames, truth = generate(spec)
    _, times = detect_boundaries(frames, DetectorConfig(), IdentityPredictor())
    score = eval_boundaries(times, truth, tolerance_frames=2, fps=spec.fps)
    assert score.f1 == 1.0


def test_ema_moves_representation_toward_input(rng):
    cfg = DetectorConfig(rho=0.25, tau0=10.0)  # threshold high: never fires
    det = BoundaryDetector(cfg, IdentityPredictor())
    a, b = unit(rng, 6), unit(rng, 6)
    det.step(make_frames([a])[0])
    det.step(make_frames([b], t0=2.0)[0])
    np.testing.assert_allclose(det.f_bar, 0.75 * a + 0.25 * b, atol=1e-15)


def test_boundary_frame_does_not_update_ema():
    cfg = DetectorConfig(w_sem=1.0, w_mot=0.0, w_pred=0.0, tau0=0.4, threshold_mode="raw_score")
    det = BoundaryDetector(cfg, IdentityPredictor())
    a = np.array([1.0, 0.0])
    b = np.array([0.0, 1.0])
    det.step(make_frames([a])[0])
    d = det.step(make_frames([b], t0=2.0)[0])
    assert d.is_boundary
    np.testing.assert_array_equal(det.f_bar, a)  # untouched by the boundary frame


# ------------------------------------------------------------------ reset


def test_reset_starts_next_segment_cleanly(rng):
    det = BoundaryDetector(DetectorConfig(), IdentityPredictor())
    frames = make_frames([unit(rng, 8) for _ in range(3)])
    for f in frames:
        det.step(f)
    det.reset_segment(frames[-1])
    assert det.segment_len == 0
    assert det.segment_start is None
    # Representation now equals the closing frame, so re-feeding that
    # embedding scores similarity exactly 1.
    nxt = make_frames([frames[-1].emb.copy()], t0=frames[-1].t + 0.5)[0]
    d = det.step(nxt)
    assert d.similarity == pytest.approx(1.0, abs=1e-12)
    assert det.segment_start == nxt.t  # set lazily by the next step
    assert det.segment_len == 1


def test_buffer_spans_whole_open_segment(rng):
    det = BoundaryDetector(DetectorConfig(), IdentityPredictor())
    frames = make_frames([unit(rng, 4) for _ in range(5)])
    for f in frames:
        det.step(f)
    assert det.segment_times == [f.t for f in frames]
    assert det.segment_len == 5


def test_normalizer_windows_survive_reset(rng):
    # Cue normalizers are stream-scoped, not segment-scoped: a reset must
    # not clear them, otherwise the cue scale would jump at each boundary.
    det = BoundaryDetector(DetectorConfig(), IdentityPredictor())
    frames = make_frames([unit(rng, 4) for _ in range(4)], motions=[0.0, 1.0, 2.0, 3.0])
    for f in frames:
        det.step(f)
    before = list(det._motion_norm.values)
    det.reset_segment(frames[-1])
    assert list(det._motion_norm.values) == before


# ------------------------------------------------------------------ guards


def test_dimension_mismatch_rejected(rng):
    det = BoundaryDetector(DetectorConfig(), IdentityPredictor())
    det.step(make_frames([unit(rng, 4)])[0])
    with pytest.raises(DimensionMismatch):
        det.step(make_frames([unit(rng, 5)], t0=2.0)[0])


def test_non_monotone_timestamp_rejected(rng):
    det = BoundaryDetector(DetectorConfig(), IdentityPredictor())
    det.step(make_frames([unit(rng, 4)], t0=2.0)[0])
    with pytest.raises(NonMonotoneTimestamp):
        det.step(make_frames([unit(rng, 4)], t0=2.0)[0])


# ------------------------------------------------------------------ batch parity


@settings(deadline=None, max_examples=25)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_streaming_matches_batch_bitwise(seed):
    rg = np.random.default_rng(seed)
    n_seg = int(rg.integers(1, 4))
    spec = SynthSpec(
        d=int(rg.choice([4, 16])),
        segments=tuple((float(rg.uniform(2.0, 8.0)), int(rg.integers(0, 1000))) for _ in range(n_seg)),
        noise_sigma=float(rg.uniform(0.0, 0.2)),
        fps=2.0,
        seed=seed,
    )
    frames, _ = generate(spec)
    cfg = DetectorConfig(
        w_mot=float(rg.uniform(0.0, 1.0)),
        w_pred=float(rg.uniform(0.0, 1.0)),
        eta=float(rg.uniform(0.0, 0.1)),
        norm_window=int(rg.integers(2, 12)),
        var_window=int(rg.integers(2, 12)),
        threshold_mode=str(rg.choice(["probability", "raw_score"])),
        max_segment_frames=int(rg.integers(3, 50)),
    )
    live, _ = detect_boundaries(frames, cfg, IdentityPredictor())
    batch = offline_oracle(frames, cfg, IdentityPredictor())
    assert decisions_equal(live, batch)


def test_truth_times_follow_segment_layout():
    spec = SynthSpec(d=4, segments=((2.0, 1), (2.0, 2), (2.0, 3)), fps=2.0, seed=0)
    # 4 frames per segment at 2 fps, stamps (i+1)/fps: transitions at frames
    # 4 and 8, i.e. the first frame of each later segment.
    assert truth_times(spec) == [2.5, 4.5]
