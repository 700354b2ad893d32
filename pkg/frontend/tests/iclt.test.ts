import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { f16BitsToF32, f32ToF16Bits } from "../src/f16.js";
import { elementCount, makeTensor, readTensor, writeTensor, FormatError } from "../src/iclt.js";

const HERE = dirname(fileURLToPath(import.meta.url));
const FIXTURE = join(HERE, "..", "..", "tests", "fixtures", "run_small", "s0.with.iclt");

describe("f16 conversion", () => {
  it("round-trips exact half values", () => {
    for (const v of [0, 1, -1, 0.5, 0.25, 1.5, 2048, -65504]) {
      expect(f16BitsToF32(f32ToF16Bits(v))).toBe(v);
    }
  });

  it("rounds to nearest with ties to even", () => {
    // 1 + 2^-11 sits exactly between 1 and the next half; even -> 1
    expect(f16BitsToF32(f32ToF16Bits(1 + 2 ** -11))).toBe(1);
    // one ulp above the midpoint rounds up
    expect(f16BitsToF32(f32ToF16Bits(1 + 2 ** -11 + 2 ** -20))).toBe(1 + 2 ** -10);
  });

  it("handles subnormals and overflow", () => {
    expect(f16BitsToF32(f32ToF16Bits(2 ** -24))).toBe(2 ** -24);
    expect(f16BitsToF32(f32ToF16Bits(1e6))).toBe(Number.POSITIVE_INFINITY);
  });
});

describe("tensor container", () => {
  it("round-trips f32 payloads bitwise", () => {
    const data = new Float32Array([1.5, -2.25, 3.125, 0, 42.0, 1e-8]);
    const t = makeTensor("f32", [2, 3], data);
    const bytes = writeTensor(t);
    const back = readTensor(bytes);
    expect(back.dtype).toBe("f32");
    expect(back.shape).toEqual([2, 3]);
    expect(Array.from(back.data)).toEqual(Array.from(data));
    expect(Array.from(writeTensor(back))).toEqual(Array.from(bytes));
  });

  it("round-trips f16 payloads after grid quantization", () => {
    const data = new Float32Array([0.1, 0.2, 0.7, 1.0]);
    const t = makeTensor("f16", [4], data);
    const back = readTensor(writeTensor(t));
    expect(Array.from(back.data)).toEqual(Array.from(t.data));
  });

  it("emits the documented header layout", () => {
    const bytes = writeTensor(makeTensor("f32", [], new Float32Array([0])));
    expect(Array.from(bytes.slice(0, 4))).toEqual([0x49, 0x43, 0x4c, 0x54]);
    expect(bytes[4]).toBe(1); // version
    expect(bytes[5]).toBe(1); // f32
    expect(bytes[6]).toBe(0); // rank
    expect(bytes[7]).toBe(0); // padding
    expect(bytes.length).toBe(12);
  });

  it("rejects malformed input", () => {
    const good = writeTensor(makeTensor("f32", [2], new Float32Array([1, 2])));
    const badMagic = Uint8Array.from(good);
    badMagic[0] = 0x58;
    expect(() => readTensor(badMagic)).toThrow(FormatError);
    expect(() => readTensor(good.slice(0, good.length - 3))).toThrow(/truncated/);
    const badCode = Uint8Array.from(good);
    badCode[5] = 7;
    expect(() => readTensor(badCode)).toThrow(/dtype/);
  });

  it("reads tensors written by the python toolkit", () => {
    const t = readTensor(new Uint8Array(readFileSync(FIXTURE)));
    expect(t.shape).toEqual([2, 1, 6, 6]);
    expect(t.dtype).toBe("f32");
    const n = 6;
    for (let l = 0; l < 2; l++) {
      for (let j = 0; j < n; j++) {
        let sum = 0;
        for (let i = 0; i < n; i++) {
          const v = t.data[((l * 1 + 0) * n + j) * n + i];
          if (i > j) expect(v).toBe(0);
          sum += v;
        }
        expect(Math.abs(sum - 1)).toBeLessThan(1e-3);
      }
    }
    expect(elementCount(t.shape)).toBe(t.data.length);
  });
});
