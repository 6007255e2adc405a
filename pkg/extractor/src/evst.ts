/**
 * The engine's stream file formats.
 *
 * Binary layout (little-endian), per the engine's format reference
 * (docs/formats.md in the engine repo):
 *
 *   header:  "EVST", u32 version = 1, u32 dim
 *   record:  f64 timestamp, dim x f32 embedding, f32 motion
 *
 * JSONL alternative: one {"t", "emb", "motion"} object per line.
 */

export const MAGIC = "EVST";
export const VERSION = 1;

export interface StreamRecord {
  t: number;
  emb: Float64Array;
  motion: number;
}

export function writeEvst(records: StreamRecord[], dim: number): Buffer {
  const recordSize = 8 + 4 * dim + 4;
  const buf = Buffer.allocUnsafe(12 + records.length * recordSize);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt32LE(VERSION, 4);
  buf.writeUInt32LE(dim, 8);
  let off = 12;
  for (const rec of records) {
    if (rec.emb.length !== dim) {
      throw new Error(`record has dim ${rec.emb.length}, header says ${dim}`);
    }
    buf.writeDoubleLE(rec.t, off);
    off += 8;
    for (let i = 0; i < dim; i++) {
      buf.writeFloatLE(rec.emb[i]!, off);
      off += 4;
    }
    buf.writeFloatLE(rec.motion, off);
    off += 4;
  }
  return buf;
}

export function writeJsonl(records: StreamRecord[]): string {
  return records
    .map((r) => JSON.stringify({ t: r.t, emb: Array.from(r.emb), motion: r.motion }) + "\n")
    .join("");
}

/** Read back an EVST buffer (used by tests to verify what was written). */
export function readEvst(buf: Buffer): { dim: number; records: StreamRecord[] } {
  if (buf.length < 12 || buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error("not an EVST buffer");
  }
  const version = buf.readUInt32LE(4);
  if (version !== VERSION) throw new Error(`unsupported version ${version}`);
  const dim = buf.readUInt32LE(8);
  const recordSize = 8 + 4 * dim + 4;
  if ((buf.length - 12) % recordSize !== 0) throw new Error("truncated record");
  const records: StreamRecord[] = [];
  for (let off = 12; off < buf.length; off += recordSize) {
    const emb = new Float64Array(dim);
    for (let i = 0; i < dim; i++) emb[i] = buf.readFloatLE(off + 8 + 4 * i);
    records.push({ t: buf.readDoubleLE(off), emb, motion: buf.readFloatLE(off + 8 + 4 * dim) });
  }
  return { dim, records };
}
