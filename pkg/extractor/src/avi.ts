/**
 * Minimal RIFF/AVI reader for uncompressed 24-bit video.
 *
 * Handles exactly the container this tool needs to stay dependency-free:
 * a single 'vids' stream whose frames are raw BGR24 DIBs ('00db'/'00dc'
 * chunks, biCompression = 0). Rows arrive padded to 4 bytes and usually
 * bottom-up (positive biHeight); frames are returned as tightly packed
 * top-down BGR so callers never see stride or flip again.
 */

import { UnreadableVideo } from "./errors.js";

export interface VideoClip {
  width: number;
  height: number;
  /** Source frame rate (dwRate/dwScale). */
  fps: number;
  /** Tightly packed top-down BGR24, one entry per frame. */
  frames: Uint8Array[];
}

interface Chunk {
  fourcc: string;
  /** For LIST chunks, the list kind (e.g. "hdrl"); payload excludes it. */
  listKind: string | null;
  payloadStart: number;
  payloadSize: number;
}

function fourcc(view: DataView, off: number): string {
  return String.fromCharCode(
    view.getUint8(off),
    view.getUint8(off + 1),
    view.getUint8(off + 2),
    view.getUint8(off + 3),
  );
}

/** Depth-first chunk walk; chunk sizes are validated against the enclosure. */
function* walk(view: DataView, start: number, end: number): Generator<Chunk> {
  let off = start;
  while (off < end) {
    if (end - off < 8) throw new UnreadableVideo(`dangling ${end - off} bytes at offset ${off}`);
    const fcc = fourcc(view, off);
    const size = view.getUint32(off + 4, true);
    const payload = off + 8;
    if (payload + size > end) {
      throw new UnreadableVideo(`chunk ${fcc} at ${off} overruns its enclosure`);
    }
    if (fcc === "LIST") {
      yield { fourcc: fcc, listKind: fourcc(view, payload), payloadStart: payload + 4, payloadSize: size - 4 };
      yield* walk(view, payload + 4, payload + size);
    } else {
      yield { fourcc: fcc, listKind: null, payloadStart: payload, payloadSize: size };
    }
    off = payload + size + (size & 1); // chunks are word-aligned
  }
}

export function parseAvi(data: Uint8Array): VideoClip {
  if (data.length < 12) throw new UnreadableVideo("file too small to be AVI");
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  if (fourcc(view, 0) !== "RIFF" || fourcc(view, 8) !== "AVI ") {
    throw new UnreadableVideo("not a RIFF/AVI file");
  }
  const riffSize = view.getUint32(4, true);
  if (8 + riffSize > data.length) throw new UnreadableVideo("RIFF size exceeds file size");

  let width = 0;
  let height = 0;
  let topDown = false;
  let fps = 0;
  let declaredFrames = -1;
  let haveFormat = false;
  const framePayloads: Array<[number, number]> = [];

  for (const chunk of walk(view, 12, 8 + riffSize)) {
    switch (chunk.fourcc) {
      case "avih": {
        if (chunk.payloadSize < 56) throw new UnreadableVideo("truncated avih header");
        declaredFrames = view.getUint32(chunk.payloadStart + 16, true);
        break;
      }
      case "strh": {
        if (chunk.payloadSize < 56) throw new UnreadableVideo("truncated strh header");
        const type = fourcc(view, chunk.payloadStart);
        if (type !== "vids") break; // ignore audio/other streams
        const scale = view.getUint32(chunk.payloadStart + 20, true);
        const rate = view.getUint32(chunk.payloadStart + 24, true);
        if (scale === 0 || rate === 0) throw new UnreadableVideo("bad stream timebase");
        fps = rate / scale;
        break;
      }
      case "strf": {
        if (chunk.payloadSize < 40) throw new UnreadableVideo("truncated strf header");
        width = view.getInt32(chunk.payloadStart + 4, true);
        const biHeight = view.getInt32(chunk.payloadStart + 8, true);
        topDown = biHeight < 0;
        height = Math.abs(biHeight);
        const bitCount = view.getUint16(chunk.payloadStart + 14, true);
        const compression = view.getUint32(chunk.payloadStart + 16, true);
        if (bitCount !== 24 || compression !== 0) {
          throw new UnreadableVideo(
            `unsupported pixel format (bits=${bitCount}, compression=${compression}); only raw BGR24 is handled`,
          );
        }
        haveFormat = true;
        break;
      }
      default: {
        // '##db' / '##dc' are video frame chunks for stream ##.
        if (/^\d\ddb$/.test(chunk.fourcc) || /^\d\ddc$/.test(chunk.fourcc)) {
          framePayloads.push([chunk.payloadStart, chunk.payloadSize]);
        }
      }
    }
  }

  if (!haveFormat || width <= 0 || height <= 0) throw new UnreadableVideo("no video stream found");
  if (fps <= 0) throw new UnreadableVideo("no usable frame rate");
  if (framePayloads.length === 0) throw new UnreadableVideo("no frame data");
  if (declaredFrames >= 0 && declaredFrames !== framePayloads.length) {
    throw new UnreadableVideo(
      `header declares ${declaredFrames} frames but file holds ${framePayloads.length}`,
    );
  }

  const stride = (width * 3 + 3) & ~3;
  const frames = framePayloads.map(([start, size]) => {
    if (size !== stride * height) {
      throw new UnreadableVideo(`frame chunk is ${size} bytes, expected ${stride * height}`);
    }
    const tight = new Uint8Array(width * height * 3);
    for (let y = 0; y < height; y++) {
      const srcRow = topDown ? y : height - 1 - y;
      const src = data.subarray(start + srcRow * stride, start + srcRow * stride + width * 3);
      tight.set(src, y * width * 3);
    }
    return tight;
  });

  return { width, height, fps, frames };
}
