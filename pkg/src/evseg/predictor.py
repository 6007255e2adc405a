"""Next-embedding predictors and their training loop.

The learned predictor is a three-layer MLP (d -> h -> h -> d) with a smooth
activation after the first two layers. It is trained self-supervised on
consecutive frame pairs (predict f_t from f_{t-1}, squared-L2 loss) and then
frozen; at segmentation time only the forward pass runs. The squared residual
of that forward pass is the prediction-error cue consumed by the boundary
detector.

``IdentityPredictor`` is the no-model baseline: it predicts the previous
embedding unchanged, so its error cue is just the squared displacement between
consecutive embeddings. It lets the full pipeline run with a non-zero
prediction weight before any training pass has happened.

Model files (magic ``EVPR``, layout in docs/formats.md) store weights as f32;
in memory everything is float64.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .errors import (
    AlreadyFrozen,
    ConfigError,
    CorruptSnapshot,
    DimensionMismatch,
    StreamTooShort,
)
from .stream import FrameFeature

MODEL_MAGIC = b"EVPR"
MODEL_VERSION = 1

#: Stable on-disk ids; append only.
ACTIVATIONS = {"tanh": 0, "softplus": 1}
_ACTIVATION_BY_ID = {v: k for k, v in ACTIVATIONS.items()}

_PARAM_ORDER = ("W1", "b1", "W2", "b2", "W3", "b3")


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(z)
    return np.logaddexp(0.0, z)  # softplus


def _act_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return 1.0 - a * a
    return 1.0 / (1.0 + np.exp(-z))  # sigmoid, d/dz softplus


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for the self-supervised fit."""

    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 10
    seed: int = 0
    optimizer: str = "adam"  # or "sgd"

    def validate(self) -> None:
        if self.lr <= 0:
            raise ConfigError(f"learning rate must be > 0, got {self.lr}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be >= 1, got {self.batch_size}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be adam or sgd, got {self.optimizer!r}")


class IdentityPredictor:
    """Baseline predictor: next embedding = previous embedding."""

    def predict(self, f_prev: np.ndarray) -> np.ndarray:
        return np.asarray(f_prev, dtype=np.float64)

    def error(self, f_prev: np.ndarray, f_now: np.ndarray) -> float:
        diff = np.asarray(f_now, dtype=np.float64) - np.asarray(f_prev, dtype=np.float64)
        return float(np.dot(diff, diff))


class CausalPredictor:
    """Learned next-embedding model, frozen after training.

    Weights are Glorot-uniform initialized from ``seed``. ``train`` optimizes
    the mean squared-L2 residual over shuffled consecutive pairs and returns
    the loss trace; ``freeze`` makes the instance read-only (training again
    raises AlreadyFrozen). Prediction consumes only the previous frame's
    embedding, which keeps the error cue strictly causal.
    """

    def __init__(
        self,
        d: int,
        hidden: int | None = None,
        activation: str = "tanh",
        seed: int = 0,
    ):
        if activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {activation!r}")
        if d < 1:
            raise ConfigError("d must be positive")
        hidden = 2 * d if hidden is None else int(hidden)
        if hidden < 1:
            raise ConfigError("hidden width must be positive")
        self.d = int(d)
        self.hidden = hidden
        self.activation = activation
        self.frozen = False
        rng = np.random.default_rng(seed)

        def glorot(fan_out: int, fan_in: int) -> np.ndarray:
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-bound, bound, size=(fan_out, fan_in))

        self.params = {
            "W1": glorot(hidden, d),
            "b1": np.zeros(hidden),
            "W2": glorot(hidden, hidden),
            "b2": np.zeros(hidden),
            "W3": glorot(d, hidden),
            "b3": np.zeros(d),
        }
        self._adam_m = None
        self._adam_v = None
        self._adam_t = 0

    # ------------------------------------------------------------------ forward

    def _forward(self, X: np.ndarray):
        p = self.params
        Z1 = X @ p["W1"].T + p["b1"]
        A1 = _act(self.activation, Z1)
        Z2 = A1 @ p["W2"].T + p["b2"]
        A2 = _act(self.activation, Z2)
        Y = A2 @ p["W3"].T + p["b3"]
        return Y, (X, Z1, A1, Z2, A2)

    def predict(self, f_prev: np.ndarray) -> np.ndarray:
        x = np.asarray(f_prev, dtype=np.float64)
        if x.shape != (self.d,):
            raise DimensionMismatch(f"predictor expects dimension {self.d}, got {x.shape}")
        y, _ = self._forward(x[None, :])
        return y[0]

    def error(self, f_prev: np.ndarray, f_now: np.ndarray) -> float:
        diff = self.predict(f_prev) - np.asarray(f_now, dtype=np.float64)
        return float(np.dot(diff, diff))

    # ----------------------------------------------------------------- training

    def loss_and_grads(self, X: np.ndarray, T: np.ndarray):
        """Mean squared-L2 loss over the batch and its parameter gradients."""
        Y, (X, Z1, A1, Z2, A2) = self._forward(X)
        R = Y - T
        n = X.shape[0]
        loss = float(np.einsum("ij,ij->", R, R)) / n
        p = self.params
        dY = (2.0 / n) * R
        grads = {"W3": dY.T @ A2, "b3": dY.sum(axis=0)}
        dA2 = dY @ p["W3"]
        dZ2 = dA2 * _act_grad(self.activation, Z2, A2)
        grads["W2"] = dZ2.T @ A1
        grads["b2"] = dZ2.sum(axis=0)
        dA1 = dZ2 @ p["W2"]
        dZ1 = dA1 * _act_grad(self.activation, Z1, A1)
        grads["W1"] = dZ1.T @ X
        grads["b1"] = dZ1.sum(axis=0)
        return loss, grads

    def evaluate(self, X: np.ndarray, T: np.ndarray) -> float:
        """Mean squared-L2 loss without touching optimizer state."""
        Y, _ = self._forward(X)
        R = Y - T
        return float(np.einsum("ij,ij->", R, R)) / X.shape[0]

    def _step(self, grads, cfg: TrainConfig) -> None:
        if cfg.optimizer == "sgd":
            for k, g in grads.items():
                self.params[k] -= cfg.lr * g
            return
        beta1, beta2, eps = 0.9, 0.999, 1e-8
        if self._adam_m is None:
            self._adam_m = {k: np.zeros_like(v) for k, v in self.params.items()}
            self._adam_v = {k: np.zeros_like(v) for k, v in self.params.items()}
        self._adam_t += 1
        t = self._adam_t
        for k, g in grads.items():
            m = self._adam_m[k] = beta1 * self._adam_m[k] + (1 - beta1) * g
            v = self._adam_v[k] = beta2 * self._adam_v[k] + (1 - beta2) * g * g
            self.params[k] -= cfg.lr * (m / (1 - beta1**t)) / (
                np.sqrt(v / (1 - beta2**t)) + eps
            )

    def train(self, frames: Sequence[FrameFeature], cfg: TrainConfig = TrainConfig()) -> list[float]:
        """Fit on consecutive (f_{t-1}, f_t) pairs of one stream.

        Returns the loss trace: entry 0 is the untrained model's loss over all
        pairs, entry i >= 1 the mean of batch losses seen during epoch i.
        """
        return self.train_streams([frames], cfg)

    def train_streams(
        self, streams: Sequence[Sequence[FrameFeature]], cfg: TrainConfig = TrainConfig()
    ) -> list[float]:
        """Fit on consecutive pairs pooled from several streams.

        Pairs never straddle a stream boundary; frames from different streams
        are otherwise shuffled together.
        """
        if self.frozen:
            raise AlreadyFrozen("predictor is frozen; training is not allowed")
        cfg.validate()
        xs, ts = [], []
        for frames in streams:
            frames = list(frames)
            if not frames:
                continue
            if frames[0].dim != self.d:
                raise DimensionMismatch(
                    f"predictor dimension {self.d} != stream dimension {frames[0].dim}"
                )
            if len(frames) >= 2:
                emb = np.stack([f.emb for f in frames])
                xs.append(emb[:-1])
                ts.append(emb[1:])
        n = sum(x.shape[0] for x in xs)
        if n < cfg.batch_size:
            raise StreamTooShort(
                f"training needs >= batch_size + 1 frames per stream "
                f"(got {n} usable pairs, batch size {cfg.batch_size})"
            )
        X_all = np.concatenate(xs)
        T_all = np.concatenate(ts)
        rng = np.random.default_rng(cfg.seed)
        history = [self.evaluate(X_all, T_all)]
        for _ in range(cfg.epochs):
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                loss, grads = self.loss_and_grads(X_all[idx], T_all[idx])
                self._step(grads, cfg)
                total += loss * len(idx)
            history.append(total / n)
        return history

    def freeze(self) -> None:
        self.frozen = True
        self._adam_m = None
        self._adam_v = None

    # -------------------------------------------------------------------- io

    def save(self, sink: IO) -> None:
        """Write the EVPR model file (always loadable as frozen)."""
        sink.write(
            struct.pack(
                "<4sIIII",
                MODEL_MAGIC,
                MODEL_VERSION,
                self.d,
                self.hidden,
                ACTIVATIONS[self.activation],
            )
        )
        for key in _PARAM_ORDER:
            sink.write(np.ascontiguousarray(self.params[key], dtype=np.float32).tobytes())

    @classmethod
    def load(cls, source: IO) -> "CausalPredictor":
        header_fmt = "<4sIIII"
        header = source.read(struct.calcsize(header_fmt))
        if len(header) < struct.calcsize(header_fmt):
            raise CorruptSnapshot("truncated model header")
        magic, version, d, hidden, act_id = struct.unpack(header_fmt, header)
        if magic != MODEL_MAGIC:
            raise CorruptSnapshot(f"bad magic {magic!r}, expected {MODEL_MAGIC!r}")
        if version != MODEL_VERSION:
            raise CorruptSnapshot(f"unsupported model version {version}")
        if act_id not in _ACTIVATION_BY_ID:
            raise CorruptSnapshot(f"unknown activation id {act_id}")
        model = cls(d=d, hidden=hidden, activation=_ACTIVATION_BY_ID[act_id])
        shapes = {
            "W1": (hidden, d),
            "b1": (hidden,),
            "W2": (hidden, hidden),
            "b2": (hidden,),
            "W3": (d, hidden),
            "b3": (d,),
        }
        for key in _PARAM_ORDER:
            shape = shapes[key]
            nbytes = int(np.prod(shape)) * 4
            blob = source.read(nbytes)
            if len(blob) < nbytes:
                raise CorruptSnapshot(f"truncated weights for {key}")
            model.params[key] = (
                np.frombuffer(blob, dtype="<f4").astype(np.float64).reshape(shape)
            )
        model.freeze()
        return model


def gradient_check(
    model: CausalPredictor,
    f_prev: np.ndarray,
    f_curr: np.ndarray,
    epsilon: float = 1e-5,
) -> float:
    """Max relative gap between analytic and central-difference gradients.

    The loss probed is the single-pair squared-L2 residual. Identityish
    models with no parameters report 0 by convention.
    """
    if not hasattr(model, "loss_and_grads"):
        return 0.0
    if not 1e-6 <= epsilon <= 1e-3:
        raise ConfigError(f"epsilon must be in [1e-6, 1e-3], got {epsilon}")
    X = np.asarray(f_prev, dtype=np.float64)[None, :]
    T = np.asarray(f_curr, dtype=np.float64)[None, :]
    _, grads = model.loss_and_grads(X, T)
    worst = 0.0
    for key, g_analytic in grads.items():
        theta = model.params[key]
        flat = theta.reshape(-1)
        g_flat = np.asarray(g_analytic).reshape(-1)
        for i in range(flat.shape[0]):
            orig = flat[i]
            flat[i] = orig + epsilon
            up = model.evaluate(X, T)
            flat[i] = orig - epsilon
            down = model.evaluate(X, T)
            flat[i] = orig
            g_fd = (up - down) / (2.0 * epsilon)
            rel = abs(g_flat[i] - g_fd) / max(abs(g_flat[i]), abs(g_fd), 1e-8)
            worst = max(worst, rel)
    return worst
