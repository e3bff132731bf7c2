import { describe, expect, it } from 'vitest';

import { decodeFova, encodeFova, FORMAT_VERSION } from '../src/fova.js';

function sample() {
  return {
    features: Float32Array.from([1, 0, 0, 0, 1, 0]),
    labels: Uint32Array.from([0, 1]),
    dim: 3,
    numClasses: 2,
    meta: { encoder: 'none' },
  };
}

describe('fova serialization', () => {
  it('round-trips exactly', () => {
    const blob = encodeFova(sample());
    const decoded = decodeFova(blob);
    expect(Array.from(decoded.features)).toEqual([1, 0, 0, 0, 1, 0]);
    expect(Array.from(decoded.labels)).toEqual([0, 1]);
    expect(decoded.dim).toBe(3);
    expect(decoded.numClasses).toBe(2);
    expect(decoded.meta).toEqual({ encoder: 'none' });
  });

  it('writes the documented header layout', () => {
    const blob = encodeFova(sample());
    expect(blob.subarray(0, 4).toString('ascii')).toBe('FOVA');
    expect(blob.readUInt32LE(4)).toBe(FORMAT_VERSION);
    expect(Number(blob.readBigUInt64LE(8))).toBe(2);
    expect(blob.readUInt32LE(16)).toBe(3);
    expect(blob.readUInt32LE(20)).toBe(2);
    const metaLen = blob.readUInt32LE(24);
    expect(JSON.parse(blob.subarray(28, 28 + metaLen).toString('utf-8'))).toEqual({
      encoder: 'none',
    });
    expect(blob.length).toBe(28 + metaLen + 2 * 3 * 4 + 2 * 4);
  });

  it('meta keys serialize in sorted order for byte stability', () => {
    const a = encodeFova({ ...sample(), meta: { b: '2', a: '1' } });
    const b = encodeFova({ ...sample(), meta: { a: '1', b: '2' } });
    expect(a.equals(b)).toBe(true);
  });

  it('rejects non-finite features', () => {
    const bad = sample();
    bad.features[0] = NaN;
    expect(() => encodeFova(bad)).toThrow(/NaN or Inf/);
  });

  it('rejects out-of-range labels', () => {
    const bad = sample();
    bad.labels = Uint32Array.from([0, 7]);
    expect(() => encodeFova(bad)).toThrow(/out of range/);
  });

  it('rejects truncated payloads on read', () => {
    const blob = encodeFova(sample());
    expect(() => decodeFova(blob.subarray(0, blob.length - 3))).toThrow(/header implies/);
  });

  it('rejects foreign magic', () => {
    expect(() => decodeFova(Buffer.from('JUNKJUNKJUNKJUNKJUNKJUNKJUNK'))).toThrow(/FOVA/);
  });
});
