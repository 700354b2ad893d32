/**
 * Export runner: executes a host model over a demonstration set and
 * serializes attention, segmentations, captions, and a manifest into a
 * run directory loadable by the analysis toolkit.
 */

import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";
import { dirname, isAbsolute, join, resolve } from "node:path";
import { alignLayout, segmentationRecords, TokenInfo } from "./align.js";
import { DataError, loadDemoSet } from "./demos.js";
import { makeTensor, readTensorFile, writeFileAtomic, writeTensorFile, Dtype } from "./iclt.js";
import { GenerationSettings, HostModel, MaskSpec, SampleInput, Variant, VARIANTS } from "./model.js";

export interface ExportJob {
  /** host identifier; "toy" selects the bundled deterministic model */
  model: string;
  demos: string;
  out: string;
  capture: {
    variants: Variant[];
    /** capture only these layer indices; null/absent = all */
    layers?: number[] | null;
    dtype?: Dtype;
  };
  plan?: string | null;
  generation: GenerationSettings;
  model_options?: Record<string, unknown>;
}

export interface PlanInfo {
  mask: MaskSpec;
  kind: string;
  path: string;
  sha256: string;
}

export function loadJob(path: string): ExportJob {
  let obj: any;
  try {
    obj = JSON.parse(readFileSync(path, "utf-8"));
  } catch (e) {
    throw new DataError(`cannot read export job ${path}: ${e}`);
  }
  const job: ExportJob = {
    model: obj.model ?? "toy",
    demos: obj.demos,
    out: obj.out,
    capture: {
      variants: obj.capture?.variants ?? ["with_query_image", "without_query_image"],
      layers: obj.capture?.layers ?? null,
      dtype: obj.capture?.dtype ?? "f16",
    },
    plan: obj.plan ?? null,
    generation: {
      temperature: obj.generation?.temperature ?? 0.2,
      max_tokens: obj.generation?.max_tokens ?? 16,
    },
    model_options: obj.model_options ?? {},
  };
  if (!job.demos || !job.out) {
    throw new DataError("export job needs 'demos' and 'out' paths");
  }
  for (const v of job.capture.variants) {
    if (!VARIANTS.includes(v)) throw new DataError(`unknown capture variant ${v}`);
  }
  if (job.capture.variants.length === 0) {
    throw new DataError("export job requests no variants");
  }
  if (!(job.generation.temperature > 0)) {
    throw new DataError("generation temperature must be > 0");
  }
  const base = dirname(resolve(path));
  const rel = (p: string) => (isAbsolute(p) ? p : join(base, p));
  job.demos = rel(job.demos);
  job.out = rel(job.out);
  if (job.plan) job.plan = rel(job.plan);
  return job;
}

export function loadPlan(planDir: string): PlanInfo {
  const metaPath = join(planDir, "plan.json");
  const meta = JSON.parse(readFileSync(metaPath, "utf-8"));
  if (meta.kind !== "anchor_centric" && meta.kind !== "context_centric") {
    throw new DataError(`unsupported plan kind ${meta.kind} (mask plans only)`);
  }
  const maskPath = join(planDir, meta.mask_tensor ?? "mask.iclt");
  const tensor = readTensorFile(maskPath);
  if (tensor.shape.length !== 2 || tensor.shape[0] !== tensor.shape[1]) {
    throw new DataError(`mask tensor must be square, got ${JSON.stringify(tensor.shape)}`);
  }
  const digest = createHash("sha256").update(readFileSync(maskPath)).digest("hex");
  return {
    kind: meta.kind,
    path: maskPath,
    sha256: digest,
    mask: {
      allowed: tensor.data,
      seqLen: tensor.shape[0],
      layerStart: meta.layer_start,
      layerEnd: meta.layer_end,
    },
  };
}

function captureLayers(full: Float32Array, nLayers: number, nHeads: number, n: number, layers: number[] | null | undefined): { data: Float32Array; count: number } {
  if (!layers || layers.length === 0) return { data: full, count: nLayers };
  const per = nHeads * n * n;
  const out = new Float32Array(layers.length * per);
  layers.forEach((layer, idx) => {
    if (layer < 0 || layer >= nLayers) {
      throw new DataError(`capture layer ${layer} outside the model's 0..${nLayers - 1}`);
    }
    out.set(full.subarray(layer * per, (layer + 1) * per), idx * per);
  });
  return { data: out, count: layers.length };
}

export interface ExportResult {
  outDir: string;
  samples: number;
  manifestPath: string;
}

export function exportRun(job: ExportJob, model: HostModel): ExportResult {
  const demos = loadDemoSet(job.demos);
  const plan = job.plan ? loadPlan(job.plan) : null;
  const dtype = job.capture.dtype ?? "f16";
  const sampleEntries: any[] = [];
  const captionRecords: { sample_id: string; caption: string }[] = [];

  for (const seq of demos.sequences) {
    const tokens: TokenInfo[] = alignLayout(
      seq.layout,
      (text, role) => model.tokenizeItem(text, role),
      seq.sample_id,
    );
    const n = tokens.length;
    if (plan && plan.mask.seqLen !== n) {
      throw new DataError(
        `sample ${seq.sample_id}: plan was built for seq_len ${plan.mask.seqLen}, got ${n}`,
      );
    }
    const sample: SampleInput = {
      sampleId: seq.sample_id,
      queryImageId: seq.query_image_id,
      tokens,
      iceCaptions: seq.ices.map((ice) => ice.caption),
    };
    writeFileAtomic(
      join(job.out, `${seq.sample_id}.seg.json`),
      JSON.stringify(segmentationRecords(tokens), null, 1) + "\n",
    );
    const attention: Record<string, string> = {};
    for (const variant of job.capture.variants) {
      const full = model.attention(sample, variant, plan?.mask ?? undefined);
      const { data, count } = captureLayers(
        full, model.nLayers, model.nHeads, n, job.capture.layers,
      );
      const tensor = makeTensor(dtype, [count, model.nHeads, n, n], data);
      const filename = `${seq.sample_id}.${variant}.iclt`;
      writeTensorFile(join(job.out, filename), tensor);
      attention[variant] = filename;
    }
    const caption = model.generateCaption(sample, job.generation);
    captionRecords.push({ sample_id: seq.sample_id, caption });
    sampleEntries.push({
      sample_id: seq.sample_id,
      query_image_id: seq.query_image_id,
      seq_len: n,
      segmentation: `${seq.sample_id}.seg.json`,
      attention,
      generated_caption: caption,
    });
  }

  const manifest = {
    version: 1,
    model: {
      name: model.name,
      n_layers: model.nLayers,
      n_heads: model.nHeads,
      head_dim: model.headDim,
      kv_bytes_per_element: model.kvBytesPerElement,
      attention_dtype: dtype,
      generation: {
        temperature: job.generation.temperature,
        max_tokens: job.generation.max_tokens,
        shot_count: demos.shots,
      },
    },
    samples: sampleEntries,
    files: plan
      ? { plan: { kind: plan.kind, source: plan.path, sha256: plan.sha256 } }
      : {},
  };
  const manifestPath = join(job.out, "manifest.json");
  writeFileAtomic(manifestPath, JSON.stringify(manifest, null, 1) + "\n");
  writeFileAtomic(
    join(job.out, "generated_captions.json"),
    JSON.stringify({ captions: captionRecords }, null, 1) + "\n",
  );
  return { outDir: job.out, samples: sampleEntries.length, manifestPath };
}
