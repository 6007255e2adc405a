import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from evseg.errors import (
    MalformedRecord,
    NonFiniteValue,
    NonMonotoneTimestamp,
    StreamFormatError,
    ZeroEmbedding,
)
from evseg.stream import (
    FrameFeature,
    SlidingWindowNormalizer,
    open_stream,
    read_binary,
    read_jsonl,
    write_binary,
    write_jsonl,
)

from conftest import make_frames, unit


# ------------------------------------------------------------------ normalizer


def test_normalizer_basic_example():
    n = SlidingWindowNormalizer(capacity=8)
    n.push(1.0)
    n.push(3.0)
    assert n.normalize(2.0) == 0.5


def test_normalizer_degenerate_window_yields_zero():
    n = SlidingWindowNormalizer(capacity=8)
    n.push(2.0)
    n.push(2.0)
    assert n.normalize(2.0) == 0.0


def test_normalizer_first_value_yields_zero():
    n = SlidingWindowNormalizer(capacity=8)
    assert n.normalize(5.0) == 0.0


def test_normalizer_evicts_oldest():
    # Capacity 3 fed 1,2,3,4: the 1 falls out, window is {2,3,4}, so the
    # final value normalizes to (4-2)/(4-2) = 1.0.
    n = SlidingWindowNormalizer(capacity=3)
    n.push(1.0)
    n.push(2.0)
    n.push(3.0)
    assert n.normalize(4.0) == 1.0
    assert list(n.values) == [2.0, 3.0, 4.0]


def test_normalizer_values_chronological_before_wrap():
    n = SlidingWindowNormalizer(capacity=4)
    n.push(7.0)
    n.push(9.0)
    assert list(n.values) == [7.0, 9.0]


def test_normalizer_rejects_non_finite():
    n = SlidingWindowNormalizer(capacity=4)
    with pytest.raises(NonFiniteValue):
        n.normalize(float("nan"))
    with pytest.raises(NonFiniteValue):
        n.normalize(float("inf"))


def test_normalizer_reset():
    n = SlidingWindowNormalizer(capacity=4)
    n.push(1.0)
    n.push(10.0)
    n.reset()
    assert len(n) == 0
    assert n.normalize(3.0) == 0.0


@given(st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=1, max_size=50))
def test_normalizer_output_in_unit_interval(values):
    n = SlidingWindowNormalizer(capacity=7)
    for v in values:
        out = n.normalize(v)
        assert 0.0 <= out <= 1.0


@given(st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=1, max_size=50))
def test_normalizer_deterministic(values):
    a = SlidingWindowNormalizer(capacity=5)
    b = SlidingWindowNormalizer(capacity=5)
    for v in values:
        assert a.normalize(v) == b.normalize(v)


# ------------------------------------------------------------------ jsonl

def _jsonl(lines) -> io.StringIO:
    return io.StringIO("".join(json.dumps(obj) + "\n" for obj in lines))


def test_jsonl_renormalizes_embedding():
    src = _jsonl([{"t": 0.5, "emb": [2.0, 0.0, 0.0, 0.0], "motion": 0.3}])
    frames = list(read_jsonl(src))
    assert len(frames) == 1
    f = frames[0]
    assert f.t == 0.5
    assert f.motion == 0.3
    np.testing.assert_array_equal(f.emb, [1.0, 0.0, 0.0, 0.0])


def test_jsonl_keeps_already_unit_embedding_bitwise():
    v = [1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0)]
    src = _jsonl([{"t": 1.0, "emb": v, "motion": 0.0}])
    (f,) = list(read_jsonl(src))
    np.testing.assert_array_equal(f.emb, np.asarray(v))


def test_jsonl_rejects_equal_timestamps():
    src = _jsonl(
        [
            {"t": 1.0, "emb": [1, 0], "motion": 0.0},
            {"t": 1.0, "emb": [0, 1], "motion": 0.0},
        ]
    )
    with pytest.raises(NonMonotoneTimestamp):
        list(read_jsonl(src))


def test_jsonl_rejects_decreasing_timestamps():
    src = _jsonl(
        [
            {"t": 2.0, "emb": [1, 0], "motion": 0.0},
            {"t": 1.0, "emb": [0, 1], "motion": 0.0},
        ]
    )
    with pytest.raises(NonMonotoneTimestamp):
        list(read_jsonl(src))


def test_jsonl_rejects_zero_embedding():
    src = _jsonl([{"t": 1.0, "emb": [0.0, 0.0], "motion": 0.0}])
    with pytest.raises(ZeroEmbedding):
        list(read_jsonl(src))


def test_jsonl_rejects_nan_embedding():
    src = io.StringIO('{"t": 1.0, "emb": [NaN, 0.0], "motion": 0.0}\n')
    with pytest.raises(StreamFormatError):
        list(read_jsonl(src))


def test_jsonl_rejects_negative_motion():
    src = _jsonl([{"t": 1.0, "emb": [1, 0], "motion": -0.5}])
    with pytest.raises(MalformedRecord):
        list(read_jsonl(src))


def test_jsonl_rejects_dimension_change():
    src = _jsonl(
        [
            {"t": 1.0, "emb": [1, 0], "motion": 0.0},
            {"t": 2.0, "emb": [1, 0, 0], "motion": 0.0},
        ]
    )
    with pytest.raises(MalformedRecord):
        list(read_jsonl(src))


def test_jsonl_rejects_garbage_line():
    src = io.StringIO("not json\n")
    with pytest.raises(MalformedRecord):
        list(read_jsonl(src))


def test_jsonl_skips_blank_lines():
    src = io.StringIO(
        json.dumps({"t": 1.0, "emb": [1, 0], "motion": 0.0}) + "\n\n"
        + json.dumps({"t": 2.0, "emb": [0, 1], "motion": 0.0}) + "\n"
    )
    assert len(list(read_jsonl(src))) == 2


# ------------------------------------------------------------------ binary

def _roundtrip_binary(frames, d=None):
    buf = io.BytesIO()
    write_binary(frames, buf, d=d)
    buf.seek(0)
    return buf, list(read_binary(buf))


def test_binary_roundtrip(rng):
    frames = make_frames([unit(rng, 6) for _ in range(5)], motions=[0.0, 0.1, 0.2, 0.3, 0.4])
    _, back = _roundtrip_binary(frames)
    assert len(back) == 5
    for a, b in zip(frames, back):
        assert b.t == a.t
        # Stored as f32, so reading re-normalizes the rounded vector.
        assert abs(float(np.linalg.norm(b.emb)) - 1.0) <= 1e-6
        assert np.max(np.abs(a.emb - b.emb)) < 1e-6
        assert abs(a.motion - b.motion) < 1e-6


def test_binary_write_read_write_is_byte_identical(rng):
    frames = make_frames([unit(rng, 4) for _ in range(7)], motions=list(np.linspace(0, 1, 7)))
    buf1, back = _roundtrip_binary(frames)
    buf2 = io.BytesIO()
    write_binary(back, buf2)
    assert buf1.getvalue() == buf2.getvalue()


def test_binary_empty_stream_needs_explicit_dim():
    buf, back = _roundtrip_binary([], d=3)
    assert back == []
    assert len(buf.getvalue()) == 12  # magic + version + d


def test_binary_rejects_bad_magic():
    buf = io.BytesIO(b"XXXX" + b"\x00" * 8)
    with pytest.raises(MalformedRecord):
        list(read_binary(buf))


def test_binary_rejects_truncated_record(rng):
    frames = make_frames([unit(rng, 4) for _ in range(2)])
    buf = io.BytesIO()
    write_binary(frames, buf)
    data = buf.getvalue()[:-3]
    with pytest.raises(MalformedRecord):
        list(read_binary(io.BytesIO(data)))


def test_binary_rejects_non_monotone(rng):
    # Hand-assemble a file with t going backwards.
    import struct

    e = unit(rng, 2).astype(np.float32)
    rec = struct.Struct("<d2ff")
    data = struct.pack("<4sII", b"EVST", 1, 2)
    data += rec.pack(2.0, *e, 0.0)
    data += rec.pack(1.0, *e, 0.0)
    with pytest.raises(NonMonotoneTimestamp):
        list(read_binary(io.BytesIO(data)))


# ------------------------------------------------------------------ open_stream

def test_open_stream_sniffs_binary(tmp_path, rng):
    frames = make_frames([unit(rng, 3) for _ in range(4)])
    p = tmp_path / "s.evst"
    with open(p, "wb") as fp:
        write_binary(frames, fp)
    back = list(open_stream(p))
    assert len(back) == 4


def test_open_stream_sniffs_jsonl(tmp_path, rng):
    frames = make_frames([unit(rng, 3) for _ in range(4)])
    p = tmp_path / "s.jsonl"
    with open(p, "w") as fp:
        write_jsonl(frames, fp)
    back = list(open_stream(p))
    assert len(back) == 4
    for a, b in zip(frames, back):
        assert b.t == a.t
        np.testing.assert_allclose(a.emb, b.emb, atol=1e-15)


def test_open_stream_explicit_format_overrides(tmp_path, rng):
    frames = make_frames([unit(rng, 3) for _ in range(2)])
    p = tmp_path / "s.dat"
    with open(p, "w") as fp:
        write_jsonl(frames, fp)
    assert len(list(open_stream(p, format="jsonl"))) == 2
    with pytest.raises(StreamFormatError):
        list(open_stream(p, format="binary"))


def test_jsonl_roundtrip_preserves_floats(rng):
    frames = make_frames([unit(rng, 5) for _ in range(3)], motions=[0.125, 0.25, 1.0])
    sink = io.StringIO()
    write_jsonl(frames, sink)
    back = list(read_jsonl(io.StringIO(sink.getvalue())))
    for a, b in zip(frames, back):
        assert a.t == b.t
        assert a.motion == b.motion
        np.testing.assert_array_equal(a.emb, b.emb)


def test_frame_dim_property(rng):
    f = FrameFeature(t=1.0, emb=unit(rng, 9), motion=0.0)
    assert f.dim == 9
