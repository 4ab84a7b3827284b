import { documentWords, readCorpus } from "./corpus";
import { embedSubtokens, resolveLayer } from "./encoder";
import { resolveModel } from "./model";
import { Alignment, alignWords } from "./tokenizer";
import { EmbeddingRecord, writeEmbeddingFile } from "./wlemb";

export interface ExportJob {
  corpusPath: string;
  /** Model identifier, e.g. "hash-small" or "hash-d8-l2". */
  model: string;
  outputPath: string;
  /** Hidden layer to export; defaults to the last layer. */
  layer?: number;
  /** Maximum subtokens per encoder window. */
  maxSegment: number;
  /** Subtokens shared between consecutive windows. */
  overlap: number;
}

export interface ExportSummary {
  documents: number;
  subtokens: number;
  dim: number;
  layer: number;
}

export function runExport(job: ExportJob): ExportSummary {
  const spec = resolveModel(job.model);
  const layer = resolveLayer(spec, job.layer);
  const docs = readCorpus(job.corpusPath);
  const records: EmbeddingRecord[] = [];
  let subtokenTotal = 0;
  for (const doc of docs) {
    const words = documentWords(doc);
    let aligned: Alignment;
    try {
      aligned = alignWords(words);
    } catch (err) {
      throw new Error(`doc ${JSON.stringify(doc.docId)}: ${(err as Error).message}`);
    }
    const vectors = embedSubtokens(
      spec,
      aligned.subtokens,
      layer,
      job.maxSegment,
      job.overlap
    );
    subtokenTotal += aligned.subtokens.length;
    records.push({
      docId: doc.docId,
      dim: spec.dim,
      tokenMap: aligned.tokenMap,
      vectors,
    });
  }
  writeEmbeddingFile(job.outputPath, records);
  return {
    documents: records.length,
    subtokens: subtokenTotal,
    dim: spec.dim,
    layer,
  };
}
