/**
 * Frame encoders: BGR pixels in, unit-norm embedding out.
 *
 * These are deterministic hand-rolled descriptors, not a learned model;
 * the engine downstream is encoder-agnostic, it only requires unit-norm
 * vectors of a fixed dimension. Swapping in a real image encoder means
 * adding an entry to the registry with its output dimension.
 */

import { EncoderLoadFailure } from "./errors.js";

export interface Frame {
  width: number;
  height: number;
  /** Tightly packed top-down BGR24. */
  bgr: Uint8Array;
}

export interface Encoder {
  name: string;
  dim: number;
  encode(frame: Frame): Float64Array;
}

export function luma(frame: Frame): Float64Array {
  const { width, height, bgr } = frame;
  const out = new Float64Array(width * height);
  for (let i = 0, p = 0; i < out.length; i++, p += 3) {
    // BT.601 weights; bgr byte order.
    out[i] = (0.114 * bgr[p]! + 0.587 * bgr[p + 1]! + 0.299 * bgr[p + 2]!) / 255;
  }
  return out;
}

function normalize(v: Float64Array): Float64Array {
  let sq = 0;
  for (const x of v) sq += x * x;
  if (sq < 1e-24) {
    // All-zero descriptor (e.g. a black frame): fall back to a fixed
    // direction rather than emit a zero vector the engine would reject.
    v[0] = 1;
    return v;
  }
  const inv = 1 / Math.sqrt(sq);
  for (let i = 0; i < v.length; i++) v[i] = v[i]! * inv;
  return v;
}

const GRID = 4;

/**
 * 4x4 grid, 8 statistics per cell (d = 128): mean B/G/R, luma mean and
 * standard deviation, mean |dx|, mean |dy|, mean gradient magnitude.
 * Color captures palette, the gradient block captures texture; both in
 * [0, 1] so no channel dominates before normalization.
 */
function encodeGrid128(frame: Frame): Float64Array {
  const { width, height, bgr } = frame;
  const lum = luma(frame);
  const out = new Float64Array(GRID * GRID * 8);

  for (let cy = 0; cy < GRID; cy++) {
    const y0 = Math.floor((cy * height) / GRID);
    const y1 = Math.floor(((cy + 1) * height) / GRID);
    for (let cx = 0; cx < GRID; cx++) {
      const x0 = Math.floor((cx * width) / GRID);
      const x1 = Math.floor(((cx + 1) * width) / GRID);
      let sb = 0, sg = 0, sr = 0, sl = 0, sl2 = 0, sgx = 0, sgy = 0, smag = 0;
      for (let y = y0; y < y1; y++) {
        for (let x = x0; x < x1; x++) {
          const p = (y * width + x) * 3;
          sb += bgr[p]!;
          sg += bgr[p + 1]!;
          sr += bgr[p + 2]!;
          const l = lum[y * width + x]!;
          sl += l;
          sl2 += l * l;
          // Central differences, clamped at the image border.
          const gx = (lum[y * width + Math.min(x + 1, width - 1)]! - lum[y * width + Math.max(x - 1, 0)]!) / 2;
          const gy = (lum[Math.min(y + 1, height - 1) * width + x]! - lum[Math.max(y - 1, 0) * width + x]!) / 2;
          sgx += Math.abs(gx);
          sgy += Math.abs(gy);
          smag += Math.hypot(gx, gy);
        }
      }
      const n = (y1 - y0) * (x1 - x0);
      const base = (cy * GRID + cx) * 8;
      out[base] = sb / n / 255;
      out[base + 1] = sg / n / 255;
      out[base + 2] = sr / n / 255;
      out[base + 3] = sl / n;
      out[base + 4] = Math.sqrt(Math.max(0, sl2 / n - (sl / n) ** 2));
      out[base + 5] = sgx / n;
      out[base + 6] = sgy / n;
      out[base + 7] = smag / n;
    }
  }
  return normalize(out);
}

/** 4x4 grid of luma means (d = 16): the cheapest usable descriptor. */
function encodeGray16(frame: Frame): Float64Array {
  const { width, height } = frame;
  const lum = luma(frame);
  const out = new Float64Array(GRID * GRID);
  for (let cy = 0; cy < GRID; cy++) {
    const y0 = Math.floor((cy * height) / GRID);
    const y1 = Math.floor(((cy + 1) * height) / GRID);
    for (let cx = 0; cx < GRID; cx++) {
      const x0 = Math.floor((cx * width) / GRID);
      const x1 = Math.floor(((cx + 1) * width) / GRID);
      let s = 0;
      for (let y = y0; y < y1; y++) {
        for (let x = x0; x < x1; x++) s += lum[y * width + x]!;
      }
      out[cy * GRID + cx] = s / ((y1 - y0) * (x1 - x0));
    }
  }
  return normalize(out);
}

const REGISTRY: Record<string, Encoder> = {
  grid128: { name: "grid128", dim: 128, encode: encodeGrid128 },
  gray16: { name: "gray16", dim: 16, encode: encodeGray16 },
};

export const DEFAULT_ENCODER = "grid128";

export function getEncoder(name: string): Encoder {
  const enc = REGISTRY[name];
  if (!enc) {
    throw new EncoderLoadFailure(
      `unknown encoder "${name}" (available: ${Object.keys(REGISTRY).join(", ")})`,
    );
  }
  return enc;
}
