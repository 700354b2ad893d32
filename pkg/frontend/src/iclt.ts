/**
 * Reader/writer for the `.iclt` tensor container.
 *
 * Layout (little-endian): magic "ICLT", version byte (1), dtype code
 * (1 = f32, 2 = f16), rank byte, zero padding byte, rank x u64 extents,
 * row-major payload. f16 payloads widen to f32 in memory; values of an
 * f16 tensor are kept on the f16 grid so write(read(b)) === b.
 */

import { readFileSync, writeFileSync, renameSync, mkdirSync } from "node:fs";
import { dirname, join } from "node:path";
import { f16BitsToF32, f32ToF16Bits, quantizeToF16 } from "./f16.js";

export type Dtype = "f32" | "f16";

export interface Tensor {
  dtype: Dtype;
  shape: number[];
  /** always float32 in memory, length = product of shape */
  data: Float32Array;
}

const MAGIC = [0x49, 0x43, 0x4c, 0x54]; // "ICLT"
const VERSION = 1;
const DTYPE_CODES: Record<Dtype, number> = { f32: 1, f16: 2 };
const CODE_DTYPES: Record<number, Dtype> = { 1: "f32", 2: "f16" };

export class FormatError extends Error {}

export function elementCount(shape: number[]): number {
  return shape.reduce((a, b) => a * b, 1);
}

export function makeTensor(dtype: Dtype, shape: number[], data: Float32Array): Tensor {
  if (elementCount(shape) !== data.length) {
    throw new FormatError(
      `shape ${JSON.stringify(shape)} does not match ${data.length} scalars`,
    );
  }
  return { dtype, shape: [...shape], data: dtype === "f16" ? quantizeToF16(data) : data };
}

export function writeTensor(t: Tensor): Uint8Array {
  if (t.shape.length > 255) throw new FormatError(`rank ${t.shape.length} exceeds 255`);
  const count = elementCount(t.shape);
  const width = t.dtype === "f32" ? 4 : 2;
  const out = new Uint8Array(8 + 8 * t.shape.length + count * width);
  const view = new DataView(out.buffer);
  out.set(MAGIC, 0);
  out[4] = VERSION;
  out[5] = DTYPE_CODES[t.dtype];
  out[6] = t.shape.length;
  out[7] = 0;
  let offset = 8;
  for (const extent of t.shape) {
    if (extent < 0 || !Number.isSafeInteger(extent)) {
      throw new FormatError(`bad extent ${extent}`);
    }
    view.setBigUint64(offset, BigInt(extent), true);
    offset += 8;
  }
  if (t.dtype === "f32") {
    for (let i = 0; i < count; i++) {
      view.setFloat32(offset + 4 * i, t.data[i], true);
    }
  } else {
    for (let i = 0; i < count; i++) {
      view.setUint16(offset + 2 * i, f32ToF16Bits(t.data[i]), true);
    }
  }
  return out;
}

export function readTensor(bytes: Uint8Array): Tensor {
  if (bytes.length < 8) throw new FormatError("truncated header");
  for (let i = 0; i < 4; i++) {
    if (bytes[i] !== MAGIC[i]) throw new FormatError("bad magic");
  }
  if (bytes[4] !== VERSION) throw new FormatError(`unsupported version ${bytes[4]}`);
  const dtype = CODE_DTYPES[bytes[5]];
  if (!dtype) throw new FormatError(`unknown dtype code ${bytes[5]}`);
  if (bytes[7] !== 0) throw new FormatError("nonzero padding byte");
  const rank = bytes[6];
  if (bytes.length < 8 + 8 * rank) throw new FormatError("truncated extents");
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const shape: number[] = [];
  for (let i = 0; i < rank; i++) {
    const extent = view.getBigUint64(8 + 8 * i, true);
    if (extent > BigInt(Number.MAX_SAFE_INTEGER)) throw new FormatError("extent overflow");
    shape.push(Number(extent));
  }
  const count = elementCount(shape);
  const width = dtype === "f32" ? 4 : 2;
  const offset = 8 + 8 * rank;
  if (bytes.length < offset + count * width) {
    throw new FormatError(
      `truncated payload: expected ${count * width} bytes, got ${bytes.length - offset}`,
    );
  }
  const data = new Float32Array(count);
  if (dtype === "f32") {
    for (let i = 0; i < count; i++) data[i] = view.getFloat32(offset + 4 * i, true);
  } else {
    for (let i = 0; i < count; i++) data[i] = f16BitsToF32(view.getUint16(offset + 2 * i, true));
  }
  return { dtype, shape, data };
}

/** Atomic file write: temp file in the target directory, then rename. */
export function writeFileAtomic(path: string, bytes: Uint8Array | string): void {
  mkdirSync(dirname(path), { recursive: true });
  const tmp = join(dirname(path), `.tmp-${process.pid}-${Math.random().toString(36).slice(2)}`);
  writeFileSync(tmp, bytes);
  renameSync(tmp, path);
}

export function writeTensorFile(path: string, t: Tensor): void {
  writeFileAtomic(path, writeTensor(t));
}

export function readTensorFile(path: string): Tensor {
  return readTensor(new Uint8Array(readFileSync(path)));
}
