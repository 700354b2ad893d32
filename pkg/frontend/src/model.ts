/**
 * Host-model abstraction the exporter drives.
 *
 * A host exposes its geometry, an item tokenizer, post-softmax attention
 * for one sample under one input variant (optionally masked), and
 * caption generation. The bundled ToyMultimodalModel is a deterministic
 * stand-in with the qualitative structure of real dumps (anchor columns,
 * within-demonstration windows, extra query-self mass when the query
 * image is present), so the full export path can run and be validated
 * without model weights. Anything that implements HostModel (for
 * example a transformers.js wrapper capturing `output_attentions`)
 * plugs into the same exporter.
 */

import { TokenInfo } from "./align.js";
import { Role } from "./demos.js";
import { hashString, mulberry32 } from "./rng.js";

export type Variant = "with_query_image" | "without_query_image";

export const VARIANTS: Variant[] = ["with_query_image", "without_query_image"];

export interface GenerationSettings {
  temperature: number;
  max_tokens: number;
}

export interface MaskSpec {
  /** [seq][seq] 0/1 allow-matrix applied on layers in [layerStart, layerEnd] */
  allowed: Float32Array;
  seqLen: number;
  layerStart: number;
  layerEnd: number;
}

export interface SampleInput {
  sampleId: string;
  queryImageId: string;
  tokens: TokenInfo[];
  iceCaptions: string[];
}

export interface HostModel {
  readonly name: string;
  readonly nLayers: number;
  readonly nHeads: number;
  readonly headDim: number;
  readonly kvBytesPerElement: number;
  tokenizeItem(text: string, role: Role): string[];
  /** row-major [nLayers][nHeads][seq][seq], rows summing to 1, causal */
  attention(sample: SampleInput, variant: Variant, mask?: MaskSpec): Float32Array;
  generateCaption(sample: SampleInput, settings: GenerationSettings): string;
}

const ANCHOR_ROLES: Set<Role> = new Set(["bos", "image_mark", "period", "delim"]);

export interface ToyModelOptions {
  nLayers?: number;
  nHeads?: number;
  headDim?: number;
  /** split the delimiter marker into two pieces, like subword tokenizers do */
  splitDelimiter?: boolean;
  seed?: number;
}

export class ToyMultimodalModel implements HostModel {
  readonly name: string;
  readonly nLayers: number;
  readonly nHeads: number;
  readonly headDim: number;
  readonly kvBytesPerElement = 2;
  private readonly splitDelimiter: boolean;
  private readonly seed: number;

  constructor(options: ToyModelOptions = {}) {
    this.nLayers = options.nLayers ?? 4;
    this.nHeads = options.nHeads ?? 2;
    this.headDim = options.headDim ?? 16;
    this.splitDelimiter = options.splitDelimiter ?? false;
    this.seed = options.seed ?? 0;
    this.name = `toy-multimodal-${this.nLayers}l${this.nHeads}h`;
  }

  tokenizeItem(text: string, role: Role): string[] {
    if (role === "delim" && this.splitDelimiter && text.length > 2) {
      const mid = Math.ceil(text.length / 2);
      return [text.slice(0, mid), text.slice(mid)];
    }
    if (role === "context_text") {
      return text.split(/\s+/).filter((w) => w.length > 0);
    }
    return [text];
  }

  attention(sample: SampleInput, variant: Variant, mask?: MaskSpec): Float32Array {
    const tokens = sample.tokens;
    const n = tokens.length;
    if (mask && mask.seqLen !== n) {
      throw new Error(
        `mask seq_len ${mask.seqLen} does not match sample length ${n}`,
      );
    }
    const out = new Float32Array(this.nLayers * this.nHeads * n * n);
    const anchors = tokens.map((t) => ANCHOR_ROLES.has(t.role));
    const queryRows = new Set([n - 2, n - 1]);
    const rand = mulberry32(
      (hashString(`${sample.sampleId}|${variant}|${this.name}`) ^ this.seed) >>> 0,
    );
    // pre-draw noise so masking does not shift the stream between variants
    const noise = new Float32Array(this.nLayers * this.nHeads * n * n);
    for (let i = 0; i < noise.length; i++) noise[i] = rand();

    for (let l = 0; l < this.nLayers; l++) {
      const depth = (l + 1) / this.nLayers; // anchors brighten with depth
      for (let h = 0; h < this.nHeads; h++) {
        for (let j = 0; j < n; j++) {
          const base = ((l * this.nHeads + h) * n + j) * n;
          let sum = 0;
          for (let i = 0; i <= j; i++) {
            let w = 1.0;
            if (anchors[i]) w += 2.0 * depth;
            if (
              tokens[i].ice_index !== null &&
              tokens[i].ice_index === tokens[j].ice_index
            ) {
              w += 1.5;
            }
            if (variant === "with_query_image" && queryRows.has(j) && queryRows.has(i)) {
              w += 2.5; // visual evidence concentrates query-self attention
            }
            w += 0.4 * noise[base + i];
            if (mask && l >= mask.layerStart && l <= mask.layerEnd) {
              w *= mask.allowed[j * n + i];
            }
            out[base + i] = w;
            sum += w;
          }
          if (sum === 0) {
            // masked rows always keep BOS visible in practice; guard anyway
            out[base + 0] = 1;
            sum = 1;
          }
          for (let i = 0; i <= j; i++) out[base + i] /= sum;
        }
      }
    }
    return out;
  }

  generateCaption(sample: SampleInput, settings: GenerationSettings): string {
    const source = sample.iceCaptions[sample.iceCaptions.length - 1] ?? "a scene";
    const words = source.replace(/\.+$/, "").split(/\s+/);
    const kept = words.slice(0, Math.max(1, settings.max_tokens - 2));
    return `a view of ${kept.join(" ")}.`;
  }
}
