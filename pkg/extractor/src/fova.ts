/**
 * FOVA feature-file serialization.
 *
 * Little-endian binary: magic "FOVA", format version u32, sample count u64,
 * feature dimension u32, class count u32, meta-blob length u32, a JSON
 * string map (sorted keys), then row-major float32 features and uint32
 * labels. The byte layout is the interchange contract with the training
 * side; files written here load there bit-exactly.
 */

export const MAGIC = Buffer.from('FOVA', 'ascii');
export const FORMAT_VERSION = 1;

const HEADER_BYTES = 4 + 4 + 8 + 4 + 4 + 4;

export interface FeatureFile {
  features: Float32Array; // n * dim, row-major
  labels: Uint32Array;
  dim: number;
  numClasses: number;
  meta: Record<string, string>;
}

function encodeMeta(meta: Record<string, string>): Buffer {
  const sorted = Object.fromEntries(
    Object.entries(meta).sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0)),
  );
  return Buffer.from(JSON.stringify(sorted), 'utf-8');
}

export function encodeFova(file: FeatureFile): Buffer {
  const n = file.labels.length;
  if (n < 1 || file.dim < 1) {
    throw new Error(`need at least one sample and one dimension, got n=${n} dim=${file.dim}`);
  }
  if (file.features.length !== n * file.dim) {
    throw new Error(
      `feature buffer has ${file.features.length} values, expected ${n} x ${file.dim}`,
    );
  }
  if (file.numClasses < 2) {
    throw new Error(`need at least two classes, got ${file.numClasses}`);
  }
  for (const value of file.features) {
    if (!Number.isFinite(value)) throw new Error('features contain NaN or Inf');
  }
  for (const label of file.labels) {
    if (label >= file.numClasses) {
      throw new Error(`label ${label} out of range for ${file.numClasses} classes`);
    }
  }
  const meta = encodeMeta(file.meta);
  const header = Buffer.alloc(HEADER_BYTES);
  MAGIC.copy(header, 0);
  header.writeUInt32LE(FORMAT_VERSION, 4);
  header.writeBigUInt64LE(BigInt(n), 8);
  header.writeUInt32LE(file.dim, 16);
  header.writeUInt32LE(file.numClasses, 20);
  header.writeUInt32LE(meta.length, 24);

  const features = Buffer.alloc(n * file.dim * 4);
  for (let i = 0; i < file.features.length; i++) {
    features.writeFloatLE(file.features[i], i * 4);
  }
  const labels = Buffer.alloc(n * 4);
  for (let i = 0; i < n; i++) {
    labels.writeUInt32LE(file.labels[i], i * 4);
  }
  return Buffer.concat([header, meta, features, labels]);
}

export function decodeFova(blob: Buffer): FeatureFile {
  if (blob.length < HEADER_BYTES || !blob.subarray(0, 4).equals(MAGIC)) {
    throw new Error('not a FOVA file');
  }
  const version = blob.readUInt32LE(4);
  if (version !== FORMAT_VERSION) throw new Error(`unsupported format version ${version}`);
  const n = Number(blob.readBigUInt64LE(8));
  const dim = blob.readUInt32LE(16);
  const numClasses = blob.readUInt32LE(20);
  const metaLen = blob.readUInt32LE(24);
  const metaEnd = HEADER_BYTES + metaLen;
  const meta = metaLen ? JSON.parse(blob.subarray(HEADER_BYTES, metaEnd).toString('utf-8')) : {};
  const expected = metaEnd + n * dim * 4 + n * 4;
  if (blob.length !== expected) {
    throw new Error(`payload is ${blob.length} bytes, header implies ${expected}`);
  }
  const features = new Float32Array(n * dim);
  for (let i = 0; i < features.length; i++) {
    features[i] = blob.readFloatLE(metaEnd + i * 4);
  }
  const labels = new Uint32Array(n);
  const labelsOffset = metaEnd + n * dim * 4;
  for (let i = 0; i < n; i++) {
    labels[i] = blob.readUInt32LE(labelsOffset + i * 4);
  }
  return { features, labels, dim, numClasses, meta };
}
