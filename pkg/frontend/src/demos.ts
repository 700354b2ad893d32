/** Types for the demonstration-set file produced by `iclens build`. */

import { readFileSync } from "node:fs";

export type Role = "bos" | "image_mark" | "context_text" | "period" | "delim" | "query";

export interface LayoutItem {
  index: number;
  role: Role;
  ice_index: number | null;
  text: string;
}

export interface DemoIce {
  image_id: string;
  caption: string;
  source: string;
}

export interface DemoSequence {
  sample_id: string;
  query_image_id: string;
  shot_count: number;
  ices: DemoIce[];
  prompt: string;
  layout: LayoutItem[];
}

export interface DemoSet {
  retrieval: string;
  source: string;
  shots: number;
  seed: number;
  sequences: DemoSequence[];
}

export class DataError extends Error {}

export function loadDemoSet(path: string): DemoSet {
  let obj: unknown;
  try {
    obj = JSON.parse(readFileSync(path, "utf-8"));
  } catch (e) {
    throw new DataError(`cannot read demonstration set ${path}: ${e}`);
  }
  const set = obj as DemoSet;
  if (!Array.isArray(set.sequences)) {
    throw new DataError(`demonstration set ${path} needs a 'sequences' array`);
  }
  for (const seq of set.sequences) {
    if (!seq.sample_id || !Array.isArray(seq.layout) || seq.layout.length < 3) {
      throw new DataError(`malformed sequence ${JSON.stringify(seq.sample_id)}`);
    }
  }
  return set;
}
