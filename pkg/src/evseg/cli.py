"""Command-line interface.

Subcommands: ``segment`` (the streaming loop), ``train-predictor``,
``synth``, ``eval``, ``bench``, ``diag-simmatrix``. One pipeline per process;
everything runs on one logical thread, which is what makes the causal
contract trivial to honor.

Exit codes: 0 ok, 2 config error (argparse uses 2 as well), 3 input format
error, 4 dimension mismatch, 5 internal invariant violation. All file
outputs are written to a temporary sibling and atomically renamed into
place, so a crashed run never leaves a half-written artifact.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import os
import sys
from typing import IO, Iterator, Optional

from . import harness
from .config import PROFILES, RunConfig, load_config
from .errors import EvsegError, StreamFormatError
from .detector import BoundaryDetector
from .pacing import Pacer
from .pipeline import Pipeline
from .predictor import CausalPredictor, IdentityPredictor, TrainConfig
from .stream import open_stream, write_binary, write_jsonl


@contextlib.contextmanager
def _atomic_open(path: str, mode: str = "w") -> Iterator[IO]:
    tmp = path + ".tmp"
    fh = open(tmp, mode)
    try:
        with fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def _open_input(path: str):
    if path == "-":
        return sys.stdin.buffer
    try:
        return open(path, "rb")
    except OSError as exc:
        raise StreamFormatError(f"cannot open input {path}: {exc}") from exc


def _load_predictor(cfg: RunConfig):
    if cfg.predictor_path is None:
        return IdentityPredictor()
    try:
        with open(cfg.predictor_path, "rb") as fh:
            return CausalPredictor.load(fh)
    except OSError as exc:
        raise StreamFormatError(
            f"cannot open predictor model {cfg.predictor_path}: {exc}"
        ) from exc


def _config_from_args(args) -> RunConfig:
    return load_config(args.config, args.profile, args.set or [])


def _add_config_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="INI config file")
    sub.add_argument(
        "--profile", choices=sorted(PROFILES), help="named parameter profile"
    )
    sub.add_argument(
        "--set",
        action="append",
        metavar="SECTION.KEY=VALUE",
        help="override one config value (repeatable)",
    )


# ---------------------------------------------------------------------- segment


def cmd_segment(args) -> int:
    cfg = _config_from_args(args)
    timing = cfg.timing or args.timing
    predictor = _load_predictor(cfg)
    bank = cfg.make_bank()
    pacer = Pacer(cfg.pacing, stream_start=args.stream_start)
    pipeline = Pipeline(
        BoundaryDetector(cfg.detector, predictor),
        cfg.builder,
        bank,
        pacer,
        timing=timing,
    )

    out_ctx = (
        _atomic_open(args.emissions_out)
        if args.emissions_out
        else contextlib.nullcontext(sys.stdout)
    )
    trace_ctx = (
        _atomic_open(args.trace_out) if args.trace_out else contextlib.nullcontext(None)
    )
    source = _open_input(args.input)
    closing = contextlib.closing(source) if source is not sys.stdin.buffer else contextlib.nullcontext()
    with closing, out_ctx as emissions_fh, trace_ctx as trace_fh:
        for decision, emission in pipeline.run(open_stream(source)):
            if decision is not None and trace_fh is not None:
                trace_fh.write(json.dumps(decision.to_dict()) + "\n")
            if emission is not None:
                emissions_fh.write(json.dumps(emission.to_dict()) + "\n")
    if args.memory_out:
        with _atomic_open(args.memory_out, "wb") as fh:
            bank.snapshot(fh)
    return 0


# ---------------------------------------------------------------- train-predictor


def cmd_train_predictor(args) -> int:
    cfg = _config_from_args(args)
    streams = []
    for path in args.input:
        source = _open_input(path)
        with contextlib.closing(source) if source is not sys.stdin.buffer else contextlib.nullcontext():
            streams.append(list(open_stream(source)))
    d = streams[0][0].dim if streams and streams[0] else 0
    if d == 0:
        raise StreamFormatError("no training frames found")
    model = CausalPredictor(
        d=d,
        hidden=cfg.predictor_hidden,
        activation=cfg.predictor_activation,
        seed=cfg.seed,
    )
    train_cfg = TrainConfig(
        lr=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=cfg.seed,
        optimizer=args.optimizer,
    )
    losses = model.train_streams(streams, train_cfg)
    model.freeze()
    with _atomic_open(args.out, "wb") as fh:
        model.save(fh)
    if args.loss_out:
        with _atomic_open(args.loss_out) as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "loss"])
            for epoch, loss in enumerate(losses):
                writer.writerow([epoch, repr(loss)])
    print(f"trained d={d} h={model.hidden} final_loss={losses[-1]:.6g}")
    return 0


# ------------------------------------------------------------------------ synth


def cmd_synth(args) -> int:
    motion = harness.SpikeMotion(
        height=args.spike_height, width=args.spike_width, lead_s=args.spike_lead
    )
    spec = harness.standard_suite_spec(
        seed=args.seed,
        d=args.d,
        n_segments=args.segments,
        dur_range=(args.dur_min, args.dur_max),
        noise_sigma=args.noise,
        fps=args.fps,
        max_pairwise_cos=args.max_pairwise_cos,
        motion=motion,
    )
    frames = harness.generate_stream(spec)
    fmt = args.format or ("jsonl" if args.out.endswith(".jsonl") else "binary")
    if fmt == "binary":
        with _atomic_open(args.out, "wb") as fh:
            count = write_binary(frames, fh, d=spec.d)
    else:
        with _atomic_open(args.out) as fh:
            count = write_jsonl(frames, fh)
    if args.truth_out:
        with _atomic_open(args.truth_out) as fh:
            json.dump(harness.truth_times(spec), fh)
            fh.write("\n")
    print(f"wrote {count} frames to {args.out}")
    return 0


# ------------------------------------------------------------------------- eval


def _load_times(path: str) -> list[float]:
    """Times from a JSON array, a decision trace, or an emission log."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise StreamFormatError(f"cannot open times file {path}: {exc}") from exc
    stripped = text.lstrip()
    if not stripped:
        return []
    if stripped[0] == "[":
        data = json.loads(text)
        return [float(v) for v in data]
    times = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        if "is_boundary" in obj:
            if obj["is_boundary"]:
                times.append(float(obj["t"]))
        elif "kind" in obj:
            if obj["kind"] == "boundary":
                times.append(float(obj["t_emit"]))
        elif "t" in obj:
            times.append(float(obj["t"]))
        else:
            raise StreamFormatError(f"unrecognized record in {path}: {line[:80]}")
    return times


def cmd_eval(args) -> int:
    detected = _load_times(args.detected)
    truth = _load_times(args.truth)
    score = harness.eval_boundaries(detected, truth, args.tolerance_frames, args.fps)
    payload = json.dumps(score.to_dict(), indent=2)
    if args.out:
        with _atomic_open(args.out) as fh:
            fh.write(payload + "\n")
    else:
        print(payload)
    return 0


# ------------------------------------------------------------------------ bench


def cmd_bench(args) -> int:
    cfg = _config_from_args(args)
    predictor = _load_predictor(cfg)
    if args.input:
        source = _open_input(args.input)
        with contextlib.closing(source) if source is not sys.stdin.buffer else contextlib.nullcontext():
            frames = list(open_stream(source))
    else:
        n_seg = max(2, args.frames // 60)
        spec = harness.standard_suite_spec(seed=cfg.seed, d=args.d, n_segments=n_seg)
        while spec.total_frames() < args.frames:
            n_seg += 2
            spec = harness.standard_suite_spec(seed=cfg.seed, d=args.d, n_segments=n_seg)
        frames = []
        for frame in harness.generate_stream(spec):
            frames.append(frame)
            if len(frames) >= args.frames:
                break
    report = harness.bench(
        frames,
        cfg.detector,
        cfg.builder,
        cfg.pacing,
        predictor,
        bank=cfg.make_bank(),
        include_responder=args.include_responder,
    )
    payload = json.dumps(report, indent=2)
    if args.out:
        with _atomic_open(args.out) as fh:
            fh.write(payload + "\n")
    else:
        print(payload)
    return 0


# -------------------------------------------------------------------- simmatrix


def cmd_diag_simmatrix(args) -> int:
    source = _open_input(args.input)
    with contextlib.closing(source) if source is not sys.stdin.buffer else contextlib.nullcontext():
        frames = list(open_stream(source))
    S, decay = harness.similarity_matrix(frames, stride=args.stride)
    with _atomic_open(args.matrix_out) as fh:
        writer = csv.writer(fh)
        for row in S:
            writer.writerow([f"{v:.6f}" for v in row])
    if args.decay_out:
        with _atomic_open(args.decay_out) as fh:
            writer = csv.writer(fh)
            writer.writerow(["gap_frames", "mean_cosine"])
            for gap, mean in decay:
                writer.writerow([gap, f"{mean:.6f}"])
    print(f"matrix {S.shape[0]}x{S.shape[1]} written to {args.matrix_out}")
    return 0


# ----------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evseg",
        description="Causal event segmentation over embedding streams",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="run the streaming pipeline over a stream file")
    _add_config_flags(p)
    p.add_argument("--input", required=True, help="stream file (EVST or JSONL), - for stdin")
    p.add_argument("--emissions-out", help="emission log JSONL (default stdout)")
    p.add_argument("--trace-out", help="per-frame decision trace JSONL")
    p.add_argument("--memory-out", help="memory bank snapshot file")
    p.add_argument("--timing", action="store_true", help="record per-emission latency")
    p.add_argument(
        "--stream-start",
        type=float,
        default=0.0,
        help="time origin for the keep-alive silence clock",
    )
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("train-predictor", help="fit the next-embedding predictor")
    _add_config_flags(p)
    p.add_argument("--input", required=True, action="append", help="training stream (repeatable)")
    p.add_argument("--out", required=True, help="output model file")
    p.add_argument("--loss-out", help="per-epoch loss CSV")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    p.set_defaults(func=cmd_train_predictor)

    p = sub.add_parser("synth", help="generate a synthetic stream with ground truth")
    p.add_argument("--out", required=True, help="output stream file")
    p.add_argument("--truth-out", help="ground-truth boundary times JSON")
    p.add_argument("--format", choices=["binary", "jsonl"], help="default: by extension")
    p.add_argument("--d", type=int, default=128)
    p.add_argument("--segments", type=int, default=20)
    p.add_argument("--dur-min", type=float, default=10.0)
    p.add_argument("--dur-max", type=float, default=60.0)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--fps", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spike-height", type=float, default=1.0)
    p.add_argument("--spike-width", type=int, default=1)
    p.add_argument("--spike-lead", type=float, default=0.0)
    p.add_argument("--max-pairwise-cos", type=float, default=0.3)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="score detected boundaries against ground truth")
    p.add_argument("--detected", required=True, help="JSON times, trace, or emission log")
    p.add_argument("--truth", required=True, help="JSON times, trace, or emission log")
    p.add_argument("--tolerance-frames", type=int, default=2)
    p.add_argument("--fps", type=float, default=2.0)
    p.add_argument("--out", help="write report JSON here instead of stdout")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="measure per-frame and per-emission latency")
    _add_config_flags(p)
    p.add_argument("--input", help="stream file; omit to use a synthetic stream")
    p.add_argument("--frames", type=int, default=10000, help="synthetic frame count")
    p.add_argument("--d", type=int, default=512, help="synthetic embedding dim")
    p.add_argument("--include-responder", action="store_true")
    p.add_argument("--out", help="write report JSON here instead of stdout")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("diag-simmatrix", help="pairwise cosine matrix diagnostics")
    p.add_argument("--input", required=True)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--matrix-out", required=True, help="cosine matrix CSV")
    p.add_argument("--decay-out", help="mean-similarity-vs-gap CSV")
    p.set_defaults(func=cmd_diag_simmatrix)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EvsegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
