import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { afterAll, describe, expect, it } from "vitest";
import { main } from "../src/cli";
import { readCorpus } from "../src/corpus";
import { runExport } from "../src/export";
import { decodeEmbeddingFile } from "../src/wlemb";

const tmp = fs.mkdtempSync(path.join(os.tmpdir(), "wlemb-"));
afterAll(() => fs.rmSync(tmp, { recursive: true, force: true }));

function writeLines(name: string, lines: string[]): string {
  const p = path.join(tmp, name);
  fs.writeFileSync(p, lines.join("\n") + "\n");
  return p;
}

const DOC = (id: string, sentences: string[][]) =>
  JSON.stringify({ doc_id: id, genre: "nw", sentences, speakers: [], clusters: [] });

describe("readCorpus", () => {
  it("reads documents and ignores extra fields", () => {
    const p = writeLines("ok.jsonl", [
      DOC("d1", [["Hello", "world"]]),
      DOC("d2", [["One"], ["Two", "Three"]]),
    ]);
    const docs = readCorpus(p);
    expect(docs.map((d) => d.docId)).toEqual(["d1", "d2"]);
    expect(docs[1].sentences).toEqual([["One"], ["Two", "Three"]]);
  });

  it("reports the offending line for invalid JSON", () => {
    const p = writeLines("bad.jsonl", [DOC("d1", [["a"]]), "{nope"]);
    expect(() => readCorpus(p)).toThrow(/line 2: invalid JSON/);
  });

  it("rejects missing doc_id, bad sentences and duplicates", () => {
    const missing = writeLines("m.jsonl", ['{"sentences": [["a"]]}']);
    expect(() => readCorpus(missing)).toThrow(/doc_id/);
    const empty = writeLines("e.jsonl", ['{"doc_id": "x", "sentences": []}']);
    expect(() => readCorpus(empty)).toThrow(/sentences/);
    const dup = writeLines("dup.jsonl", [DOC("x", [["a"]]), DOC("x", [["b"]])]);
    expect(() => readCorpus(dup)).toThrow(/duplicate doc_id/);
  });
});

describe("runExport", () => {
  it("writes one aligned record per document", () => {
    const corpus = writeLines("corpus.jsonl", [
      DOC("doc/a", [["The", "metropolitan", "museum"], ["It", "reopened"]]),
      DOC("doc/b", [["Short"]]),
    ]);
    const out = path.join(tmp, "out.wlemb");
    const summary = runExport({
      corpusPath: corpus,
      model: "hash-d4-l2",
      outputPath: out,
      maxSegment: 3,
      overlap: 1,
    });
    expect(summary).toMatchObject({ documents: 2, dim: 4, layer: 2 });

    const records = decodeEmbeddingFile(fs.readFileSync(out));
    expect(records.map((r) => r.docId)).toEqual(["doc/a", "doc/b"]);
    const words = [5, 1];
    records.forEach((rec, i) => {
      expect(rec.dim).toBe(4);
      expect(rec.tokenMap.length).toBe(words[i]);
      // Ranges tile [0, n_sub): every word exactly once.
      expect(rec.tokenMap[0][0]).toBe(0);
      for (let w = 1; w < rec.tokenMap.length; w++) {
        expect(rec.tokenMap[w][0]).toBe(rec.tokenMap[w - 1][1] + 1);
      }
      const nSub = rec.vectors.length / rec.dim;
      expect(rec.tokenMap[rec.tokenMap.length - 1][1]).toBe(nSub - 1);
    });
  });

  it("names the document and word when tokenization fails", () => {
    const corpus = writeLines("zero.jsonl", [DOC("bad-doc", [["ok", "\u0007"]])]);
    expect(() =>
      runExport({
        corpusPath: corpus,
        model: "hash-tiny",
        outputPath: path.join(tmp, "never.wlemb"),
        maxSegment: 128,
        overlap: 32,
      })
    ).toThrow(/doc "bad-doc": word 1 .* produced no subtokens/);
  });

  it("selects the requested layer", () => {
    const corpus = writeLines("layers.jsonl", [DOC("d", [["alpha", "beta"]])]);
    const outLast = path.join(tmp, "last.wlemb");
    const outStatic = path.join(tmp, "static.wlemb");
    const base = { corpusPath: corpus, model: "hash-d4-l2", maxSegment: 16, overlap: 4 };
    runExport({ ...base, outputPath: outLast });
    runExport({ ...base, outputPath: outStatic, layer: 0 });
    const a = decodeEmbeddingFile(fs.readFileSync(outLast))[0].vectors;
    const b = decodeEmbeddingFile(fs.readFileSync(outStatic))[0].vectors;
    expect(Array.from(a)).not.toEqual(Array.from(b));
  });
});

describe("cli main", () => {
  it("exports and returns 0", () => {
    const corpus = writeLines("cli.jsonl", [DOC("c1", [["Hello", "there"]])]);
    const out = path.join(tmp, "cli.wlemb");
    const rc = main([
      "--corpus", corpus,
      "--output", out,
      "--model", "hash-tiny",
      "--max-segment", "8",
      "--overlap", "2",
    ]);
    expect(rc).toBe(0);
    const records = decodeEmbeddingFile(fs.readFileSync(out));
    expect(records[0].docId).toBe("c1");
    expect(records[0].dim).toBe(16);
  });

  it("fails with exit code 1 on missing flags and bad values", () => {
    expect(main([])).toBe(1);
    expect(main(["--corpus", "x.jsonl"])).toBe(1);
    expect(
      main(["--corpus", "x.jsonl", "--output", "y", "--layer", "-3"])
    ).toBe(1);
    expect(
      main(["--corpus", "missing.jsonl", "--output", path.join(tmp, "z.wlemb")])
    ).toBe(1);
  });
});
