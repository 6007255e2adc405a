/**
 * Motion magnitude between two consecutive sampled frames.
 *
 * Values are written raw: the engine owns all normalization, so the
 * scale here only needs to be consistent within one extraction run.
 * Identical frames must produce exactly 0 under every method.
 */

import { EncoderLoadFailure } from "./errors.js";
import { Frame, luma } from "./encoders.js";

export type MotionFn = (prev: Frame, curr: Frame) => number;

/** Mean squared per-pixel difference over all channels, pixels in [0, 1]. */
export function frameDiff(prev: Frame, curr: Frame): number {
  const a = prev.bgr;
  const b = curr.bgr;
  let sum = 0;
  for (let i = 0; i < a.length; i++) {
    const d = (a[i]! - b[i]!) / 255;
    sum += d * d;
  }
  return sum / a.length;
}

const BLOCK = 8;
const SEARCH = 4;

/**
 * Coarse block-matching flow: best integer displacement within
 * +-SEARCH px per BLOCK x BLOCK luma block (SAD), averaged over blocks.
 * Zero displacement wins ties, so a static scene reports exactly 0.
 */
export function blockFlow(prev: Frame, curr: Frame): number {
  const { width, height } = prev;
  const a = luma(prev);
  const b = luma(curr);
  let total = 0;
  let blocks = 0;

  for (let by = 0; by + BLOCK <= height; by += BLOCK) {
    for (let bx = 0; bx + BLOCK <= width; bx += BLOCK) {
      let bestSad = Infinity;
      let bestMag = 0;
      for (let dy = -SEARCH; dy <= SEARCH; dy++) {
        for (let dx = -SEARCH; dx <= SEARCH; dx++) {
          const sy = by + dy;
          const sx = bx + dx;
          if (sy < 0 || sx < 0 || sy + BLOCK > height || sx + BLOCK > width) continue;
          let sad = 0;
          for (let y = 0; y < BLOCK; y++) {
            const rowB = (by + y) * width + bx;
            const rowA = (sy + y) * width + sx;
            for (let x = 0; x < BLOCK; x++) {
              sad += Math.abs(b[rowB + x]! - a[rowA + x]!);
            }
          }
          const mag = Math.hypot(dx, dy);
          if (sad < bestSad || (sad === bestSad && mag < bestMag)) {
            bestSad = sad;
            bestMag = mag;
          }
        }
      }
      total += bestMag;
      blocks++;
    }
  }
  return blocks === 0 ? 0 : total / blocks;
}

const METHODS: Record<string, MotionFn> = {
  frame_diff: frameDiff,
  optical_flow: blockFlow,
};

export const DEFAULT_MOTION = "frame_diff";

export function getMotion(name: string): MotionFn {
  const fn = METHODS[name];
  if (!fn) {
    throw new EncoderLoadFailure(
      `unknown motion method "${name}" (available: ${Object.keys(METHODS).join(", ")})`,
    );
  }
  return fn;
}
