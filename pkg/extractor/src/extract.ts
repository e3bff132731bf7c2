/**
 * Feature extraction: run a frozen encoder over an image-folder dataset and
 * write the features as a FOVA file, one row per image in dataset order.
 */

import { writeFileSync } from 'node:fs';

import { scanFolderDataset } from './dataset.js';
import { getEncoder, SUPPORTED_ENCODERS } from './encoders.js';
import { encodeFova } from './fova.js';
import { decodeImage } from './images.js';

export interface ExtractionSpec {
  encoder: string;
  dataset: string; // image-folder root: one subdirectory per class
  split?: string; // optional subdirectory (e.g. train/test) under the root
  out: string;
  batchSize?: number;
  device?: string; // hint for the pretrained backends; toy encoder ignores it
}

export interface ExtractionResult {
  samples: number;
  dim: number;
  numClasses: number;
  out: string;
}

export async function extract(spec: ExtractionSpec): Promise<ExtractionResult> {
  if (!SUPPORTED_ENCODERS.includes(spec.encoder)) {
    throw new Error(
      `unknown encoder "${spec.encoder}"; supported: ${SUPPORTED_ENCODERS.join(', ')}`,
    );
  }
  const batchSize = spec.batchSize ?? 32;
  if (batchSize < 1) throw new Error(`batch size must be >= 1, got ${batchSize}`);
  const encoder = getEncoder(spec.encoder);
  const dataset = scanFolderDataset(spec.dataset, spec.split);

  const n = dataset.entries.length;
  const features = new Float32Array(n * encoder.dim);
  const labels = new Uint32Array(n);
  for (let start = 0; start < n; start += batchSize) {
    const batch = dataset.entries.slice(start, start + batchSize);
    const rows = await encoder.encode(batch.map((entry) => decodeImage(entry.path)));
    rows.forEach((row, i) => {
      if (row.length !== encoder.dim) {
        throw new Error(
          `encoder "${encoder.name}" produced ${row.length} dims, expected ${encoder.dim}`,
        );
      }
      features.set(row, (start + i) * encoder.dim);
      labels[start + i] = batch[i].label;
    });
  }

  const meta: Record<string, string> = {
    encoder: encoder.name,
    preprocessing: encoder.preprocessing,
    dim: String(encoder.dim),
    source: spec.dataset,
    classes: dataset.classNames.join(','),
  };
  if (spec.split) meta.split = spec.split;
  const blob = encodeFova({
    features,
    labels,
    dim: encoder.dim,
    numClasses: dataset.classNames.length,
    meta,
  });
  writeFileSync(spec.out, blob);
  return { samples: n, dim: encoder.dim, numClasses: dataset.classNames.length, out: spec.out };
}
