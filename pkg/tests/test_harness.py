import io

import numpy as np
import pytest

from evseg.detector import DetectorConfig
from evseg.errors import InvalidSpec
from evseg.events import BuilderConfig
from evseg.harness import (
    ABLATIONS,
    CustomMotion,
    SpikeMotion,
    SynthSpec,
    UniformMotion,
    ablation_scores,
    bench,
    eval_boundaries,
    generate,
    generate_stream,
    offline_oracle,
    similarity_matrix,
    standard_suite_spec,
    truth_times,
)
from evseg.pacing import PacingConfig
from evseg.predictor import IdentityPredictor
from evseg.stream import write_binary


# ------------------------------------------------------------------ generator


def test_generator_is_deterministic():
    spec = SynthSpec(d=16, segments=((3.0, 1), (3.0, 2)), seed=4)
    a, _ = generate(spec)
    b, _ = generate(spec)
    assert len(a) == len(b) == 12
    for x, y in zip(a, b):
        assert x.t == y.t and x.motion == y.motion
        np.testing.assert_array_equal(x.emb, y.emb)


def test_generator_bytes_reproducible(tmp_path):
    spec = SynthSpec(d=8, segments=((4.0, 3),), seed=9)
    bufs = []
    for _ in range(2):
        buf = io.BytesIO()
        write_binary(generate_stream(spec), buf)
        bufs.append(buf.getvalue())
    assert bufs[0] == bufs[1]


def test_zero_noise_makes_constant_segments():
    spec = SynthSpec(d=8, segments=((3.0, 1), (3.0, 2)), noise_sigma=0.0, seed=0)
    frames, truth = generate(spec)
    assert truth == [3.5]
    first = [f for f in frames if f.t <= 3.0]
    for f in first[1:]:
        np.testing.assert_array_equal(f.emb, first[0].emb)


def test_frames_stamped_at_frame_ends():
    spec = SynthSpec(d=4, segments=((2.0, 1),), fps=2.0, seed=0)
    frames, _ = generate(spec)
    assert [f.t for f in frames] == [0.5, 1.0, 1.5, 2.0]


def test_unit_embeddings(rng):
    spec = SynthSpec(d=32, segments=((5.0, 7),), noise_sigma=0.3, seed=1)
    frames, _ = generate(spec)
    for f in frames:
        assert abs(float(np.linalg.norm(f.emb)) - 1.0) <= 1e-9


def test_motion_spike_sits_on_transition():
    spec = SynthSpec(
        d=4, segments=((5.0, 1), (5.0, 2)), motion=SpikeMotion(height=2.0, width=1), seed=0
    )
    frames, truth = generate(spec)
    peaks = [f.t for f in frames if f.motion == 2.0]
    assert peaks == truth


def test_motion_spike_lead_shifts_peak_earlier():
    # A 2 s anticipation at 2 fps puts the peak 4 frames before the cut.
    spec = SynthSpec(
        d=4,
        segments=((10.0, 1), (10.0, 2)),
        motion=SpikeMotion(height=1.5, width=1, lead_s=2.0),
        seed=0,
    )
    frames, truth = generate(spec)
    peaks = [i for i, f in enumerate(frames) if f.motion == 1.5]
    cut = [i for i, f in enumerate(frames) if f.t == truth[0]]
    assert len(peaks) == 1 and len(cut) == 1
    assert cut[0] - peaks[0] == 4


def test_uniform_and_custom_motion_profiles():
    spec = SynthSpec(d=4, segments=((2.0, 1),), motion=UniformMotion(level=0.7), seed=0)
    frames, _ = generate(spec)
    assert all(f.motion == 0.7 for f in frames)
    series = (0.1, 0.2, 0.3, 0.4)
    spec = SynthSpec(d=4, segments=((2.0, 1),), motion=CustomMotion(series=series), seed=0)
    frames, _ = generate(spec)
    assert tuple(f.motion for f in frames) == series


def test_spec_validation():
    with pytest.raises(InvalidSpec):
        SynthSpec(d=0, segments=((1.0, 1),)).validate()
    with pytest.raises(InvalidSpec):
        SynthSpec(d=4, segments=()).validate()
    with pytest.raises(InvalidSpec):
        SynthSpec(d=4, segments=((0.0, 1),)).validate()
    with pytest.raises(InvalidSpec):
        SynthSpec(d=4, segments=((1.0, 1),), fps=0.0).validate()
    with pytest.raises(InvalidSpec):
        SynthSpec(d=4, segments=((1.0, 1),), noise_sigma=-0.1).validate()
    with pytest.raises(InvalidSpec):
        SynthSpec(
            d=4, segments=((2.0, 1),), motion=CustomMotion(series=(0.1,))
        ).validate()  # series shorter than the stream


def test_standard_suite_means_are_separated():
    spec = standard_suite_spec(seed=3)
    assert len(spec.segments) == 20
    from evseg.harness import _unit_mean

    means = [_unit_mean(s, spec.d) for _, s in spec.segments]
    worst = max(
        abs(float(np.dot(means[i], means[j])))
        for i in range(len(means))
        for j in range(i + 1, len(means))
    )
    assert worst <= 0.3


def test_standard_suite_durations_in_range():
    spec = standard_suite_spec(seed=8, dur_range=(10.0, 60.0))
    assert all(10.0 <= dur <= 60.0 for dur, _ in spec.segments)


# ------------------------------------------------------------------ scoring


def test_eval_perfect_match():
    s = eval_boundaries([2.5, 7.0], [2.5, 7.0])
    assert s.precision == 1.0 and s.recall == 1.0 and s.f1 == 1.0
    assert s.mean_latency_frames == 0.0


def test_eval_empty_detected_scores_zero():
    s = eval_boundaries([], [2.5])
    assert s.precision == 0.0 and s.recall == 0.0 and s.f1 == 0.0


def test_eval_empty_both_scores_perfect():
    s = eval_boundaries([], [])
    assert s.precision == 1.0 and s.recall == 1.0 and s.f1 == 1.0


def test_eval_within_tolerance_counts_with_latency():
    # Detection one frame late at 2 fps: matched, latency +1 frame.
    s = eval_boundaries([3.0], [2.5], tolerance_frames=2, fps=2.0)
    assert s.f1 == 1.0
    assert s.mean_latency_frames == pytest.approx(1.0, abs=1e-9)


def test_eval_outside_tolerance_misses():
    s = eval_boundaries([4.1], [2.5], tolerance_frames=2, fps=2.0)
    assert s.n_matched == 0
    assert s.f1 == 0.0


def test_eval_matching_is_one_to_one():
    # Two truths, one detection between them: only one truth matches.
    s = eval_boundaries([2.5], [2.5, 3.0], tolerance_frames=2, fps=2.0)
    assert s.n_matched == 1
    assert s.precision == 1.0
    assert s.recall == 0.5


def test_eval_spurious_detection_costs_precision():
    s = eval_boundaries([2.5, 50.0], [2.5], tolerance_frames=2, fps=2.0)
    assert s.precision == 0.5 and s.recall == 1.0


# ------------------------------------------------------------------ oracle


def test_oracle_empty_stream():
    assert offline_oracle([], DetectorConfig(), IdentityPredictor()) == []


def test_oracle_single_frame_single_negative_decision():
    spec = SynthSpec(d=4, segments=((0.5, 1),), seed=0)
    frames, _ = generate(spec)
    assert len(frames) == 1
    trace = offline_oracle(frames, DetectorConfig(), IdentityPredictor())
    assert len(trace) == 1
    assert not trace[0].is_boundary


# ------------------------------------------------------------------ similarity matrix


def test_simmatrix_constant_stream_all_ones():
    spec = SynthSpec(d=8, segments=((3.0, 1),), noise_sigma=0.0, seed=0)
    frames, _ = generate(spec)
    S, decay = similarity_matrix(frames, stride=1)
    assert S.shape == (6, 6)
    np.testing.assert_allclose(S, 1.0, atol=1e-9)
    assert all(v == pytest.approx(1.0, abs=1e-9) for _, v in decay)


def test_simmatrix_orthogonal_segments_block_structure():
    spec = SynthSpec(d=64, segments=((5.0, 1), (5.0, 2)), noise_sigma=0.0, seed=0)
    frames, _ = generate(spec)
    S, _ = similarity_matrix(frames, stride=1)
    n = len(frames)
    half = n // 2
    diag_block = S[:half, :half]
    off_block = S[:half, half:]
    np.testing.assert_allclose(diag_block, 1.0, atol=1e-9)
    assert np.max(np.abs(off_block)) <= 0.3  # suite means are near-orthogonal


def test_simmatrix_stride_subsamples():
    spec = SynthSpec(d=8, segments=((10.0, 1),), seed=0)
    frames, _ = generate(spec)
    S, decay = similarity_matrix(frames, stride=4)
    assert S.shape == (5, 5)
    # Gap axis is in original-frame units.
    assert [g for g, _ in decay] == [4, 8, 12, 16]


def test_simmatrix_decay_head_monotone():
    # Within-segment correlation falls with gap; pin the head of the curve
    # where every gap still averages many same-segment pairs, and check the
    # tail settles at the cross-segment noise floor (means are separated by
    # at most 0.3 in cosine, so the floor is bounded by that).
    spec = standard_suite_spec(seed=11, d=64, n_segments=12)
    frames, _ = generate(spec)
    _, decay = similarity_matrix(frames, stride=4)
    vals = [v for _, v in decay]
    head = vals[:10]
    assert all(a > b for a, b in zip(head, head[1:]))
    assert vals[0] == max(vals)
    tail = np.asarray(vals[len(vals) // 2 :])
    assert float(np.max(np.abs(tail))) <= 0.3


# ------------------------------------------------------------------ bench


def test_bench_report_schema_and_order():
    spec = SynthSpec(d=16, segments=((6.0, 1), (6.0, 2)), seed=2)
    frames, _ = generate(spec)
    rep = bench(
        frames,
        det_cfg=DetectorConfig(),
        builder_cfg=BuilderConfig(),
        pacing_cfg=PacingConfig(),
        predictor=IdentityPredictor(),
    )
    assert rep["frames"] == len(frames)
    assert rep["stream_span_s"] == pytest.approx(frames[-1].t - frames[0].t)
    eng = rep["engine"]
    assert 0.0 <= eng["p50_ms"] <= eng["p95_ms"] <= eng["max_ms"]
    assert eng["frames_per_s"] > 0
    assert rep["events_built"] >= 1
    ems = rep["emissions"]
    assert ems["count"] >= 1
    assert 0.0 <= ems["p50_ms"] <= ems["p95_ms"] <= ems["max_ms"]
    assert rep["memory_slots"] >= 1
    assert isinstance(rep["memory_slot_samples"], list)


def test_bench_includes_responder_latency_only_on_request():
    # Two segments so a boundary emission (and its responder call) happens
    # inside the frame loop, where the include/exclude flag applies.
    spec = SynthSpec(d=32, segments=((6.0, 1), (6.0, 2)), seed=2)
    frames, _ = generate(spec)

    def slow_responder(event, context):
        import time

        time.sleep(0.02)
        return "slow"

    kwargs = dict(
        det_cfg=DetectorConfig(),
        builder_cfg=BuilderConfig(),
        pacing_cfg=PacingConfig(),
        predictor=IdentityPredictor(),
        responder=slow_responder,
    )
    excl = bench(frames, **kwargs)
    incl = bench(frames, include_responder=True, **kwargs)
    assert excl["boundaries"] >= 1
    # With the responder excluded the max engine latency stays well under
    # the 20 ms sleep; included, at least one frame absorbs it.
    assert excl["engine"]["max_ms"] < 20.0
    assert incl["engine"]["max_ms"] >= 20.0
    # Per-emission latency always includes the responder.
    assert excl["emissions"]["max_ms"] >= 20.0


# ------------------------------------------------------------------ ablations


def test_ablation_table_keys():
    assert set(ABLATIONS) == {"full", "no_motion", "no_semantic", "no_prediction"}
    spec = SynthSpec(d=32, segments=((8.0, 1), (8.0, 2)), seed=6)
    scores = ablation_scores(spec, DetectorConfig(), IdentityPredictor())
    assert set(scores) == set(ABLATIONS)
    for s in scores.values():
        assert 0.0 <= s.f1 <= 1.0
