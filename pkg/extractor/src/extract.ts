import { readFileSync, writeFileSync } from "node:fs";

import { parseAvi } from "./avi.js";
import { DEFAULT_ENCODER, Frame, getEncoder } from "./encoders.js";
import { DEFAULT_MOTION, getMotion } from "./motion.js";
import { StreamRecord, writeEvst, writeJsonl } from "./evst.js";
import { UnreadableVideo, UsageError } from "./errors.js";

export interface ExtractSpec {
  video: string;
  /** Output sample rate; records are stamped t_k = k / fps, k = 1.. */
  fps: number;
  encoder: string;
  motion: string;
  out: string;
  /** "binary" | "jsonl"; default by output extension (.jsonl => jsonl). */
  format?: string;
}

export const DEFAULTS = { fps: 2, encoder: DEFAULT_ENCODER, motion: DEFAULT_MOTION };

export function extract(spec: ExtractSpec): { records: number; dim: number } {
  if (!(spec.fps > 0)) throw new UsageError(`fps must be positive, got ${spec.fps}`);
  const encoder = getEncoder(spec.encoder);
  const motionFn = getMotion(spec.motion);

  let data: Uint8Array;
  try {
    data = readFileSync(spec.video);
  } catch (err) {
    throw new UnreadableVideo(`cannot read ${spec.video}: ${(err as Error).message}`);
  }
  const clip = parseAvi(data);

  // One record per sample instant k / fps inside the clip's duration.
  // Each sample takes the last source frame at or before its instant, so
  // a 10 s clip at 2 fps yields exactly 20 records.
  const duration = clip.frames.length / clip.fps;
  const count = Math.floor(duration * spec.fps + 1e-9);
  if (count === 0) throw new UnreadableVideo(`clip is too short (${duration}s) for fps=${spec.fps}`);

  const records: StreamRecord[] = [];
  let prev: Frame | null = null;
  for (let k = 1; k <= count; k++) {
    const t = k / spec.fps;
    const idx = Math.min(clip.frames.length - 1, Math.max(0, Math.ceil(t * clip.fps - 1e-9) - 1));
    const frame: Frame = { width: clip.width, height: clip.height, bgr: clip.frames[idx]! };
    records.push({
      t,
      emb: encoder.encode(frame),
      // Raw magnitude between consecutive sampled frames; the stream's
      // first frame has no predecessor and is 0 by convention.
      motion: prev === null ? 0 : motionFn(prev, frame),
    });
    prev = frame;
  }

  const format = spec.format ?? (spec.out.endsWith(".jsonl") ? "jsonl" : "binary");
  if (format === "binary") {
    writeFileSync(spec.out, writeEvst(records, encoder.dim));
  } else if (format === "jsonl") {
    writeFileSync(spec.out, writeJsonl(records));
  } else {
    throw new UsageError(`unknown format "${format}"`);
  }
  return { records: records.length, dim: encoder.dim };
}
