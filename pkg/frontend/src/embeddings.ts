/**
 * Embedding export: one unit-norm f32 row per input item plus an id
 * sidecar, in the interchange layout consumed by similarity retrieval.
 *
 * The bundled "toy" encoder derives each vector deterministically from
 * the item's file bytes, so byte-identical images map to identical rows
 * (cosine 1.0). A real encoder (e.g. a CLIP vision tower) implements
 * the same one-item-to-one-row contract.
 */

import { readdirSync, readFileSync, statSync } from "node:fs";
import { basename, join } from "node:path";
import { makeTensor, writeFileAtomic, writeTensorFile } from "./iclt.js";
import { hashBytes, mulberry32 } from "./rng.js";

export type Encoder = (bytes: Uint8Array) => Float32Array;

export function toyEncoder(dim: number): Encoder {
  return (bytes) => {
    const rand = mulberry32(hashBytes(bytes));
    const vec = new Float32Array(dim);
    let norm = 0;
    for (let i = 0; i < dim; i++) {
      vec[i] = rand() - 0.5;
      norm += vec[i] * vec[i];
    }
    norm = Math.sqrt(norm);
    for (let i = 0; i < dim; i++) vec[i] /= norm;
    return vec;
  };
}

export interface EmbeddingExport {
  ids: string[];
  errors: { id: string; error: string }[];
  tensorPath: string;
  idsPath: string;
}

export interface EmbeddingJob {
  /** item id -> file path */
  items: Record<string, string>;
  outDir: string;
  name?: string;
  dim?: number;
  encoder?: Encoder;
}

export function collectImageDir(dir: string): Record<string, string> {
  const items: Record<string, string> = {};
  for (const entry of readdirSync(dir).sort()) {
    const path = join(dir, entry);
    if (statSync(path).isFile()) {
      items[basename(entry).replace(/\.[^.]+$/, "")] = path;
    }
  }
  return items;
}

export function exportEmbeddings(job: EmbeddingJob): EmbeddingExport {
  const dim = job.dim ?? 8;
  const encode = job.encoder ?? toyEncoder(dim);
  const name = job.name ?? "image";
  const ids: string[] = [];
  const rows: Float32Array[] = [];
  const errors: { id: string; error: string }[] = [];
  for (const [id, path] of Object.entries(job.items)) {
    try {
      const vec = encode(new Uint8Array(readFileSync(path)));
      if (vec.length !== dim) {
        throw new Error(`encoder returned ${vec.length} dims, expected ${dim}`);
      }
      ids.push(id);
      rows.push(vec);
    } catch (e) {
      errors.push({ id, error: String(e) });
    }
  }
  const matrix = new Float32Array(ids.length * dim);
  rows.forEach((row, i) => matrix.set(row, i * dim));
  const tensorPath = join(job.outDir, `${name}_emb.iclt`);
  const idsPath = join(job.outDir, `${name}_emb.ids.json`);
  writeTensorFile(tensorPath, makeTensor("f32", [ids.length, dim], matrix));
  writeFileAtomic(idsPath, JSON.stringify({ ids, normalized: true }, null, 1) + "\n");
  return { ids, errors, tensorPath, idsPath };
}
