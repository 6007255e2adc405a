#!/usr/bin/env python3
"""Regenerate the tiny AVI fixtures under test/data/.

Writes uncompressed BGR24 AVI (RIFF) files with stdlib struct only, so
the fixtures can be rebuilt anywhere. Frames are synthetic gradients;
pixel content is a pure function of (clip, frame index), so reruns are
byte-identical.

  clip_5s.avi   48x36 @ 10 fps, 50 frames: drifting gradient with a hard
                scene change at 2.5 s (motion + one plausible boundary)
  clip_10s.avi  32x24 @ 4 fps, 40 frames: slow hue drift, no cut
  clip_dup.avi  48x36 @ 10 fps, 30 frames: one frame repeated verbatim
"""

import struct
from pathlib import Path

DATA = Path(__file__).resolve().parent.parent / "test" / "data"


def bgr_rows(width, height, pixel):
    """Bottom-up BGR24 rows, each padded to a 4-byte boundary."""
    stride_pad = (-(width * 3)) % 4
    rows = []
    for y in range(height - 1, -1, -1):
        row = bytearray()
        for x in range(width):
            b, g, r = pixel(x, y)
            row += bytes((b & 0xFF, g & 0xFF, r & 0xFF))
        row += b"\x00" * stride_pad
        rows.append(bytes(row))
    return b"".join(rows)


def chunk(fourcc, payload):
    pad = b"\x00" if len(payload) % 2 else b""
    return fourcc + struct.pack("<I", len(payload)) + payload + pad


def lst(kind, payload):
    return chunk(b"LIST", kind + payload)


def write_avi(path, width, height, fps, frames):
    frame_bytes = len(frames[0])
    avih = struct.pack(
        "<10I4x4x4x4x",
        round(1_000_000 / fps),  # dwMicroSecPerFrame
        frame_bytes * fps,       # dwMaxBytesPerSec
        0,                       # dwPaddingGranularity
        0,                       # dwFlags (no idx1 chunk is written)
        len(frames),             # dwTotalFrames
        0,                       # dwInitialFrames
        1,                       # dwStreams
        frame_bytes,             # dwSuggestedBufferSize
        width,
        height,
    )
    strh = struct.pack(
        "<4s4sIHHIIIIIIiI4H",
        b"vids", b"DIB ",
        0, 0, 0, 0,
        1, fps,                  # dwScale, dwRate -> fps
        0, len(frames),
        frame_bytes, -1, 0,
        0, 0, width, height,
    )
    strf = struct.pack(
        "<IiiHHIIiiII",
        40, width, height, 1, 24, 0, frame_bytes, 0, 0, 0, 0,
    )
    hdrl = lst(b"hdrl", chunk(b"avih", avih) + lst(b"strl", chunk(b"strh", strh) + chunk(b"strf", strf)))
    movi = lst(b"movi", b"".join(chunk(b"00db", f) for f in frames))
    body = b"AVI " + hdrl + movi
    path.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
    print(f"wrote {path} ({len(frames)} frames, {width}x{height} @ {fps} fps)")


def clip_5s():
    w, h, fps, n = 48, 36, 10, 50

    def frame(i):
        if i < 25:  # scene A: blue-ish gradient drifting right
            return bgr_rows(w, h, lambda x, y: (180 + ((x + 2 * i) % 40), 70 + y, 30))
        # scene B: warm diagonal bands drifting down
        return bgr_rows(w, h, lambda x, y: (25, 90 + ((x + y + 3 * i) % 50), 200 - y))

    write_avi(DATA / "clip_5s.avi", w, h, fps, [frame(i) for i in range(n)])


def clip_10s():
    w, h, fps, n = 32, 24, 4, 40

    def frame(i):
        return bgr_rows(w, h, lambda x, y: (100 + ((2 * x + i) % 60), 60 + ((y + i) % 40), 140))

    write_avi(DATA / "clip_10s.avi", w, h, fps, [frame(i) for i in range(n)])


def clip_dup():
    w, h, fps, n = 48, 36, 10, 30
    still = bgr_rows(w, h, lambda x, y: (60 + x, 140 - y, 80 + ((x * y) % 90)))
    write_avi(DATA / "clip_dup.avi", w, h, fps, [still] * n)


if __name__ == "__main__":
    DATA.mkdir(parents=True, exist_ok=True)
    clip_5s()
    clip_10s()
    clip_dup()
