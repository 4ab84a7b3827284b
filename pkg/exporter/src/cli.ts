#!/usr/bin/env node
import { parseArgs } from "util";
import { ExportJob, runExport } from "./export";

const USAGE = `usage: wlemb-export --corpus <in.jsonl> --output <out.wlemb> [options]

options:
  --corpus <path>      JSONL corpus to embed (required)
  --output <path>      WLEMB1 file to write (required)
  --model <id>         encoder identifier (default: hash-small)
  --layer <n>          hidden layer to export (default: last)
  --max-segment <n>    max subtokens per encoder window (default: 128)
  --overlap <n>        subtokens shared between windows (default: 32)
`;

function parseCount(name: string, raw: string): number {
  const value = Number(raw);
  if (!Number.isInteger(value) || value < 0) {
    throw new Error(`--${name} expects a non-negative integer, got ${JSON.stringify(raw)}`);
  }
  return value;
}

export function buildJob(argv: string[]): ExportJob {
  const { values } = parseArgs({
    args: argv,
    options: {
      corpus: { type: "string" },
      output: { type: "string" },
      model: { type: "string", default: "hash-small" },
      layer: { type: "string" },
      "max-segment": { type: "string", default: "128" },
      overlap: { type: "string", default: "32" },
      help: { type: "boolean", default: false },
    },
  });
  if (values.help) {
    process.stdout.write(USAGE);
    process.exit(0);
  }
  if (!values.corpus) throw new Error("--corpus is required");
  if (!values.output) throw new Error("--output is required");
  return {
    corpusPath: values.corpus,
    outputPath: values.output,
    model: values.model as string,
    layer: values.layer === undefined ? undefined : parseCount("layer", values.layer),
    maxSegment: parseCount("max-segment", values["max-segment"] as string),
    overlap: parseCount("overlap", values.overlap as string),
  };
}

export function main(argv: string[]): number {
  try {
    const job = buildJob(argv);
    const summary = runExport(job);
    process.stdout.write(
      `exported ${summary.documents} documents ` +
        `(${summary.subtokens} subtokens, d=${summary.dim}, layer=${summary.layer}) ` +
        `to ${job.outputPath}\n`
    );
    return 0;
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
