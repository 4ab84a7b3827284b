import { ModelSpec } from "./model";

/** FNV-1a 32-bit hash over the UTF-8 bytes of `text`. */
function fnv1a(text: string): number {
  let h = 0x811c9dc5;
  for (const byte of Buffer.from(text, "utf-8")) {
    h ^= byte;
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

/** mulberry32: small deterministic PRNG, uniform draws in [0, 1). */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Layer-0 embedding of one subtoken: hash-seeded draws in [-1, 1). */
function staticEmbedding(spec: ModelSpec, subtoken: string): Float64Array {
  const rng = mulberry32(fnv1a(spec.id + "\u0000" + subtoken));
  const row = new Float64Array(spec.dim);
  for (let j = 0; j < spec.dim; j++) row[j] = 2 * rng() - 1;
  return row;
}

/**
 * One context-mixing layer: each position blends with its neighbours
 * inside the segment (missing neighbours contribute zero), squashed by
 * tanh.  Stacking layers widens the receptive field by one per layer.
 */
function mixLayer(rows: Float64Array[]): Float64Array[] {
  const n = rows.length;
  const out: Float64Array[] = [];
  for (let i = 0; i < n; i++) {
    const row = new Float64Array(rows[i].length);
    const left = i > 0 ? rows[i - 1] : null;
    const right = i < n - 1 ? rows[i + 1] : null;
    for (let j = 0; j < row.length; j++) {
      let v = 0.6 * rows[i][j];
      if (left) v += 0.25 * left[j];
      if (right) v += 0.25 * right[j];
      row[j] = Math.tanh(v);
    }
    out.push(row);
  }
  return out;
}

/** Hidden states of one segment after `layer` mixing layers (0 = static). */
export function encodeSegment(
  spec: ModelSpec,
  subtokens: string[],
  layer: number
): Float64Array[] {
  let rows = subtokens.map((s) => staticEmbedding(spec, s));
  for (let l = 0; l < layer; l++) rows = mixLayer(rows);
  return rows;
}

export function resolveLayer(spec: ModelSpec, layer?: number): number {
  if (layer === undefined) return spec.layers;
  if (!Number.isInteger(layer) || layer < 0 || layer > spec.layers) {
    throw new Error(
      `layer ${layer} out of range for ${spec.id} (0..${spec.layers})`
    );
  }
  return layer;
}

/**
 * Half-open [start, end) segment windows covering `n` positions.  Windows
 * are `maxSegment` wide and consecutive windows share `overlap` positions;
 * the final window is pinned to the end so the tail gets full context.
 */
export function splitSegments(
  n: number,
  maxSegment: number,
  overlap: number
): Array<[number, number]> {
  if (!Number.isInteger(maxSegment) || maxSegment < 1) {
    throw new Error(`max segment length must be a positive integer, got ${maxSegment}`);
  }
  if (!Number.isInteger(overlap) || overlap < 0 || overlap >= maxSegment) {
    throw new Error(
      `overlap must be an integer in [0, maxSegment), got ${overlap}`
    );
  }
  if (n <= maxSegment) return [[0, n]];
  const stride = maxSegment - overlap;
  const segs: Array<[number, number]> = [];
  let start = 0;
  while (start + maxSegment < n) {
    segs.push([start, start + maxSegment]);
    start += stride;
  }
  const last = n - maxSegment;
  if (segs.length === 0 || segs[segs.length - 1][0] !== last) {
    segs.push([last, n]);
  }
  return segs;
}

/**
 * Index of the segment whose centre lies closest to position `p`, among
 * segments containing `p`; ties go to the earlier segment.  This is the
 * stitching rule: each subtoken keeps the representation from the window
 * where it is most central.
 */
export function mostCentralSegment(
  p: number,
  segs: Array<[number, number]>
): number {
  let best = -1;
  let bestDist = Infinity;
  for (let s = 0; s < segs.length; s++) {
    const [start, end] = segs[s];
    if (p < start || p >= end) continue;
    const dist = Math.abs(p - (start + end - 1) / 2);
    if (dist < bestDist) {
      best = s;
      bestDist = dist;
    }
  }
  if (best < 0) throw new Error(`position ${p} not covered by any segment`);
  return best;
}

/**
 * Embeds a document's subtokens: encode each overlapping window
 * independently, then stitch one row per subtoken from its most central
 * window.  Returns row-major float32 data of shape (n_sub, dim).
 */
export function embedSubtokens(
  spec: ModelSpec,
  subtokens: string[],
  layer: number,
  maxSegment: number,
  overlap: number
): Float32Array {
  const n = subtokens.length;
  const out = new Float32Array(n * spec.dim);
  if (n === 0) return out;
  const segs = splitSegments(n, maxSegment, overlap);
  const encoded = segs.map(([start, end]) =>
    encodeSegment(spec, subtokens.slice(start, end), layer)
  );
  for (let p = 0; p < n; p++) {
    const s = mostCentralSegment(p, segs);
    const row = encoded[s][p - segs[s][0]];
    out.set(row, p * spec.dim);
  }
  return out;
}
