/** Parser for the generator's binary graph format.
 *
 * Layout, little-endian throughout: a 24-byte header of magic "SERN",
 * u16 version (1), u16 flags (bit 0: per-edge distances present),
 * u64 node count n and u64 edge count e; then x as f32[n], y as
 * f32[n], edge sources as u32[e], edge targets as u32[e], and, when
 * flagged, distances as f32[e].
 */

export interface Graph {
  n: number;
  e: number;
  x: Float32Array;
  y: Float32Array;
  from: Uint32Array;
  to: Uint32Array;
  /** Per-edge distances, present only when the graph was generated with them. */
  dist: Float32Array | null;
}

const MAGIC = 0x4e524553; // "SERN" read as little-endian u32
const VERSION = 1;
const FLAG_DISTANCES = 0x0001;
const HEADER_BYTES = 24;

function toNumber(value: bigint, label: string): number {
  if (value > BigInt(Number.MAX_SAFE_INTEGER)) {
    throw new RangeError(`${label} ${value} exceeds the safe integer range`);
  }
  return Number(value);
}

/** Copy a section into a fresh, aligned buffer.
 *
 * An explicit copy, not a slice: Buffer.slice returns a view whose
 * backing ArrayBuffer still starts at the pool origin, so viewing
 * `.buffer` at offset 0 would read the wrong bytes entirely.
 */
function section(bytes: Uint8Array, offset: number, count: number): ArrayBuffer {
  const copy = new Uint8Array(4 * count);
  copy.set(bytes.subarray(offset, offset + 4 * count));
  return copy.buffer;
}

function f32Section(bytes: Uint8Array, offset: number, count: number): Float32Array {
  return new Float32Array(section(bytes, offset, count), 0, count);
}

function u32Section(bytes: Uint8Array, offset: number, count: number): Uint32Array {
  return new Uint32Array(section(bytes, offset, count), 0, count);
}

export function parseGraph(data: Uint8Array): Graph {
  if (data.byteLength < HEADER_BYTES) {
    throw new RangeError(`graph data ended early: ${data.byteLength} bytes`);
  }
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  if (view.getUint32(0, true) !== MAGIC) {
    throw new TypeError("not a SERN graph: bad magic");
  }
  const version = view.getUint16(4, true);
  if (version !== VERSION) {
    throw new TypeError(`unsupported graph version ${version}`);
  }
  const flags = view.getUint16(6, true);
  const n = toNumber(view.getBigUint64(8, true), "node count");
  const e = toNumber(view.getBigUint64(16, true), "edge count");
  const hasDist = (flags & FLAG_DISTANCES) !== 0;

  const expected = HEADER_BYTES + 8 * n + (hasDist ? 12 : 8) * e;
  if (data.byteLength !== expected) {
    throw new RangeError(
      `graph data ended early: have ${data.byteLength} bytes, need ${expected}`,
    );
  }

  let at = HEADER_BYTES;
  const x = f32Section(data, at, n);
  at += 4 * n;
  const y = f32Section(data, at, n);
  at += 4 * n;
  const from = u32Section(data, at, e);
  at += 4 * e;
  const to = u32Section(data, at, e);
  at += 4 * e;
  const dist = hasDist ? f32Section(data, at, e) : null;

  return { n, e, x, y, from, to, dist };
}
