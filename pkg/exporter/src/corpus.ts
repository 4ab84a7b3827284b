import * as fs from "fs";

export interface CorpusDocument {
  docId: string;
  sentences: string[][];
}

function isStringMatrix(value: unknown): value is string[][] {
  return (
    Array.isArray(value) &&
    value.length > 0 &&
    value.every(
      (sent) =>
        Array.isArray(sent) &&
        sent.length > 0 &&
        sent.every((w) => typeof w === "string")
    )
  );
}

/**
 * Reads a JSONL corpus: one document object per line.  Only `doc_id` and
 * `sentences` are consumed here; other fields (genre, speakers, clusters)
 * are passed over untouched.
 */
export function readCorpus(path: string): CorpusDocument[] {
  const text = fs.readFileSync(path, "utf-8");
  const docs: CorpusDocument[] = [];
  const seen = new Set<string>();
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (line === "") continue;
    let record: unknown;
    try {
      record = JSON.parse(line);
    } catch (err) {
      throw new Error(`line ${i + 1}: invalid JSON (${(err as Error).message})`);
    }
    if (typeof record !== "object" || record === null || Array.isArray(record)) {
      throw new Error(`line ${i + 1}: document must be a JSON object`);
    }
    const rec = record as Record<string, unknown>;
    if (typeof rec.doc_id !== "string" || rec.doc_id === "") {
      throw new Error(`line ${i + 1}: missing or empty doc_id`);
    }
    if (!isStringMatrix(rec.sentences)) {
      throw new Error(
        `line ${i + 1}: sentences must be a non-empty array of non-empty word arrays`
      );
    }
    if (seen.has(rec.doc_id)) {
      throw new Error(`line ${i + 1}: duplicate doc_id ${JSON.stringify(rec.doc_id)}`);
    }
    seen.add(rec.doc_id);
    docs.push({ docId: rec.doc_id, sentences: rec.sentences });
  }
  return docs;
}

/** All words of a document in reading order (sentence boundaries dropped). */
export function documentWords(doc: CorpusDocument): string[] {
  return doc.sentences.flat();
}
