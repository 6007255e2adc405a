import numpy as np
import pytest

from evseg.stream import FrameFeature


def unit(rng: np.random.Generator, d: int) -> np.ndarray:
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def make_frames(embs, t0: float = 1.0, dt: float = 0.5, motions=None) -> list[FrameFeature]:
    """Wrap a list of embeddings as frames with evenly spaced timestamps."""
    out = []
    for i, e in enumerate(embs):
        m = motions[i] if motions is not None else 0.0
        out.append(FrameFeature(t=t0 + i * dt, emb=np.asarray(e, dtype=np.float64), motion=m))
    return out


def decisions_equal(a, b) -> bool:
    """Bitwise comparison of two decision traces (exact float equality)."""
    if len(a) != len(b):
        return False
    return all(x.to_dict() == y.to_dict() for x, y in zip(a, b))


@pytest.fixture
def rng():
    return np.random.default_rng(0)
