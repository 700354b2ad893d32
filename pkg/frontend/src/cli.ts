/**
 * Exporter CLI.
 *
 *   export-run        --job job.json
 *   export-embeddings --images DIR --out DIR [--name image] [--dim 8]
 *
 * Exit codes: 0 ok, 1 usage, 2 data error.
 */

import { parseArgs } from "node:util";
import { DataError } from "./demos.js";
import { collectImageDir, exportEmbeddings } from "./embeddings.js";
import { exportRun, loadJob } from "./export.js";
import { FormatError } from "./iclt.js";
import { ToyMultimodalModel, ToyModelOptions, HostModel } from "./model.js";

function makeModel(name: string, options: ToyModelOptions): HostModel {
  if (name === "toy" || name.startsWith("toy-")) {
    return new ToyMultimodalModel(options);
  }
  throw new DataError(
    `unknown model ${name}; this build bundles the deterministic "toy" host ` +
      `(real hosts plug in through the HostModel interface)`,
  );
}

function runExportRun(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: { job: { type: "string" } },
  });
  if (!values.job) {
    console.error("usage: export-run --job PATH");
    return 1;
  }
  const job = loadJob(values.job);
  const model = makeModel(job.model, (job.model_options ?? {}) as ToyModelOptions);
  const result = exportRun(job, model);
  console.log(`exported ${result.samples} samples to ${result.outDir}`);
  return 0;
}

function runExportEmbeddings(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      images: { type: "string" },
      out: { type: "string" },
      name: { type: "string", default: "image" },
      dim: { type: "string", default: "8" },
    },
  });
  if (!values.images || !values.out) {
    console.error("usage: export-embeddings --images DIR --out DIR [--name N] [--dim D]");
    return 1;
  }
  const result = exportEmbeddings({
    items: collectImageDir(values.images),
    outDir: values.out,
    name: values.name,
    dim: Number(values.dim),
  });
  for (const err of result.errors) {
    console.error(`warning: ${err.id}: ${err.error}`);
  }
  console.log(`embedded ${result.ids.length} items -> ${result.tensorPath}`);
  return 0;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    if (command === "export-run") return runExportRun(rest);
    if (command === "export-embeddings") return runExportEmbeddings(rest);
    console.error("usage: <export-run|export-embeddings> ...");
    return 1;
  } catch (e) {
    if (e instanceof DataError || e instanceof FormatError) {
      console.error(`error: ${e.message}`);
      return 2;
    }
    throw e;
  }
}

const invokedDirectly =
  process.argv[1] && import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
