"""Causal event segmentation for embedding streams.

An online engine that turns an unbounded stream of per-frame features
(embedding + motion magnitude) into discrete events: boundary detection from
semantic drift, motion, and prediction-error cues; boundary-aware pooling;
merge-or-append event memory; and hysteresis-paced emission. Strictly
causal: nothing reads a future frame.
"""

from .detector import BoundaryDecision, BoundaryDetector, DetectorConfig
from .errors import (
    ConfigError,
    DimensionMismatch,
    EvsegError,
    StreamFormatError,
)
from .events import BuilderConfig, EventToken, build_event
from .memory import MemoryBank
from .pacing import EmissionRecord, Pacer, PacingConfig, stub_respond
from .pipeline import Pipeline, make_pipeline
from .predictor import CausalPredictor, IdentityPredictor, TrainConfig, gradient_check
from .stream import FrameFeature, SlidingWindowNormalizer, open_stream

__version__ = "0.1.0"

__all__ = [
    "BoundaryDecision",
    "BoundaryDetector",
    "BuilderConfig",
    "CausalPredictor",
    "ConfigError",
    "DetectorConfig",
    "DimensionMismatch",
    "EmissionRecord",
    "EventToken",
    "EvsegError",
    "FrameFeature",
    "IdentityPredictor",
    "MemoryBank",
    "Pacer",
    "PacingConfig",
    "Pipeline",
    "SlidingWindowNormalizer",
    "StreamFormatError",
    "TrainConfig",
    "build_event",
    "gradient_check",
    "make_pipeline",
    "open_stream",
    "stub_respond",
    "__version__",
]
