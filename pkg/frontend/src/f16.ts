/** IEEE 754 binary16 conversion helpers. */

const f32buf = new Float32Array(1);
const u32buf = new Uint32Array(f32buf.buffer);

/** Round a float to the nearest representable binary16 bit pattern. */
export function f32ToF16Bits(value: number): number {
  f32buf[0] = value;
  const x = u32buf[0];
  const sign = (x >>> 16) & 0x8000;
  let exp = (x >>> 23) & 0xff;
  let mant = x & 0x7fffff;

  if (exp === 0xff) {
    // inf / nan
    return sign | 0x7c00 | (mant ? 0x0200 : 0);
  }
  // re-bias from 127 to 15
  let e = exp - 127 + 15;
  if (e >= 0x1f) {
    return sign | 0x7c00; // overflow to inf
  }
  if (e <= 0) {
    // subnormal half: shift mantissa (with implicit leading 1) right
    if (e < -10) return sign; // underflow to zero
    mant |= 0x800000;
    const shift = 14 - e;
    const half = mant >>> shift;
    const rem = mant & ((1 << shift) - 1);
    const halfway = 1 << (shift - 1);
    if (rem > halfway || (rem === halfway && (half & 1))) {
      return sign | (half + 1);
    }
    return sign | half;
  }
  // normal half with round-to-nearest-even on the dropped 13 bits
  let half = (e << 10) | (mant >>> 13);
  const rem = mant & 0x1fff;
  if (rem > 0x1000 || (rem === 0x1000 && (half & 1))) {
    half += 1; // may carry into the exponent, which is still correct
  }
  return sign | half;
}

/** Decode a binary16 bit pattern to a JS number (exact widening). */
export function f16BitsToF32(bits: number): number {
  const sign = (bits & 0x8000) ? -1 : 1;
  const exp = (bits >>> 10) & 0x1f;
  const mant = bits & 0x3ff;
  if (exp === 0) {
    return sign * mant * 2 ** -24;
  }
  if (exp === 0x1f) {
    return mant ? Number.NaN : sign * Number.POSITIVE_INFINITY;
  }
  return sign * (1024 + mant) * 2 ** (exp - 25);
}

/** Quantize a float32 array onto the binary16 grid, in place semantics. */
export function quantizeToF16(values: Float32Array): Float32Array {
  const out = new Float32Array(values.length);
  for (let i = 0; i < values.length; i++) {
    out[i] = f16BitsToF32(f32ToF16Bits(values[i]));
  }
  return out;
}
