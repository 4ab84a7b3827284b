import * as fs from "fs";
import * as path from "path";

export interface EmbeddingRecord {
  docId: string;
  dim: number;
  /** Inclusive [start, end] subtoken range per word. */
  tokenMap: Array<[number, number]>;
  /** Row-major (n_sub, dim) subtoken embeddings. */
  vectors: Float32Array;
}

const MAGIC = Buffer.from("WLEMB1", "ascii");

function u32(value: number): Buffer {
  const b = Buffer.allocUnsafe(4);
  b.writeUInt32LE(value >>> 0, 0);
  return b;
}

/**
 * Serializes records to the WLEMB1 layout: magic, u32 LE document count,
 * then per document a length-prefixed UTF-8 doc_id, u32 n_sub / d /
 * n_tokens, the token_map as u32 LE (start, end) pairs and the embedding
 * matrix as 32-bit LE reals, row-major.
 */
export function encodeEmbeddingFile(records: EmbeddingRecord[]): Buffer {
  const parts: Buffer[] = [MAGIC, u32(records.length)];
  for (const rec of records) {
    if (rec.vectors.length % rec.dim !== 0) {
      throw new Error(
        `doc ${JSON.stringify(rec.docId)}: vector length ${rec.vectors.length} not a multiple of dim ${rec.dim}`
      );
    }
    const nSub = rec.vectors.length / rec.dim;
    const id = Buffer.from(rec.docId, "utf-8");
    parts.push(u32(id.length), id, u32(nSub), u32(rec.dim), u32(rec.tokenMap.length));
    const mapBuf = Buffer.allocUnsafe(rec.tokenMap.length * 8);
    for (let i = 0; i < rec.tokenMap.length; i++) {
      mapBuf.writeUInt32LE(rec.tokenMap[i][0], i * 8);
      mapBuf.writeUInt32LE(rec.tokenMap[i][1], i * 8 + 4);
    }
    parts.push(mapBuf);
    const vecBuf = Buffer.allocUnsafe(rec.vectors.length * 4);
    for (let i = 0; i < rec.vectors.length; i++) {
      vecBuf.writeFloatLE(rec.vectors[i], i * 4);
    }
    parts.push(vecBuf);
  }
  return Buffer.concat(parts);
}

/** Parses a WLEMB1 buffer back into records (inverse of encode). */
export function decodeEmbeddingFile(buf: Buffer): EmbeddingRecord[] {
  if (buf.length < 6 || !buf.subarray(0, 6).equals(MAGIC)) {
    throw new Error("bad magic: not a WLEMB1 file");
  }
  let off = 6;
  const readU32 = () => {
    if (off + 4 > buf.length) throw new Error("truncated file");
    const v = buf.readUInt32LE(off);
    off += 4;
    return v;
  };
  const count = readU32();
  const records: EmbeddingRecord[] = [];
  for (let r = 0; r < count; r++) {
    const idLen = readU32();
    if (off + idLen > buf.length) throw new Error("truncated file");
    const docId = buf.subarray(off, off + idLen).toString("utf-8");
    off += idLen;
    const nSub = readU32();
    const dim = readU32();
    const nTokens = readU32();
    const tokenMap: Array<[number, number]> = [];
    for (let i = 0; i < nTokens; i++) {
      tokenMap.push([readU32(), readU32()]);
    }
    const vectors = new Float32Array(nSub * dim);
    if (off + vectors.length * 4 > buf.length) throw new Error("truncated file");
    for (let i = 0; i < vectors.length; i++) {
      vectors[i] = buf.readFloatLE(off);
      off += 4;
    }
    records.push({ docId, dim, tokenMap, vectors });
  }
  return records;
}

/** Writes the file atomically: serialize to a sibling temp file, then rename. */
export function writeEmbeddingFile(outPath: string, records: EmbeddingRecord[]): void {
  const data = encodeEmbeddingFile(records);
  const tmp = path.join(
    path.dirname(outPath),
    `.${path.basename(outPath)}.tmp-${process.pid}`
  );
  fs.writeFileSync(tmp, data);
  fs.renameSync(tmp, outPath);
}
