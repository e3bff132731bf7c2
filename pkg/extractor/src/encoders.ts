/**
 * Encoder registry.
 *
 * The pretrained vision transformers (class-token features) run through
 * transformers.js and need model weights at runtime; install the optional
 * `@huggingface/transformers` package to use them. `toy-patch16` is a
 * deterministic, dependency-free encoder (4x4 grid of patch-mean colors on
 * a 16x16 center-crop) intended for tests and pipeline smoke runs.
 */

import { DecodedImage, centerCropResize } from './images.js';

export interface Encoder {
  name: string;
  dim: number;
  preprocessing: string;
  encode(images: DecodedImage[]): Promise<Float32Array[]>;
}

const PRETRAINED: Record<string, { modelId: string; dim: number; inputSize: number }> = {
  'vit-b16': { modelId: 'Xenova/vit-base-patch16-224-in21k', dim: 768, inputSize: 224 },
  'vit-l16': { modelId: 'Xenova/vit-large-patch16-224-in21k', dim: 1024, inputSize: 224 },
  'dinov2-l14': { modelId: 'Xenova/dinov2-large', dim: 1024, inputSize: 224 },
};

export const SUPPORTED_ENCODERS = ['toy-patch16', ...Object.keys(PRETRAINED)];

const TOY_CROP = 16;
const TOY_GRID = 4;

function toyEncode(images: DecodedImage[]): Promise<Float32Array[]> {
  const patch = TOY_CROP / TOY_GRID;
  const rows = images.map((image) => {
    const small = centerCropResize(image, TOY_CROP);
    const out = new Float32Array(TOY_GRID * TOY_GRID * 3);
    for (let gy = 0; gy < TOY_GRID; gy++) {
      for (let gx = 0; gx < TOY_GRID; gx++) {
        let r = 0;
        let g = 0;
        let b = 0;
        for (let y = gy * patch; y < (gy + 1) * patch; y++) {
          for (let x = gx * patch; x < (gx + 1) * patch; x++) {
            const src = (y * TOY_CROP + x) * 3;
            r += small.rgb[src];
            g += small.rgb[src + 1];
            b += small.rgb[src + 2];
          }
        }
        const dst = (gy * TOY_GRID + gx) * 3;
        const area = patch * patch;
        out[dst] = r / area;
        out[dst + 1] = g / area;
        out[dst + 2] = b / area;
      }
    }
    return out;
  });
  return Promise.resolve(rows);
}

function pretrainedEncoder(name: string): Encoder {
  const spec = PRETRAINED[name];
  let pipelinePromise: Promise<any> | null = null;

  async function loadPipeline(): Promise<any> {
    if (!pipelinePromise) {
      pipelinePromise = (async () => {
        let transformers: any;
        try {
          transformers = await import('@huggingface/transformers');
        } catch {
          throw new Error(
            `encoder "${name}" needs the optional @huggingface/transformers package ` +
              '(npm install @huggingface/transformers) and network access for model weights',
          );
        }
        return transformers.pipeline('image-feature-extraction', spec.modelId);
      })();
    }
    return pipelinePromise;
  }

  return {
    name,
    dim: spec.dim,
    preprocessing: `center-crop, resize ${spec.inputSize}, model processor normalization`,
    async encode(images: DecodedImage[]): Promise<Float32Array[]> {
      const pipe = await loadPipeline();
      const { RawImage } = await import('@huggingface/transformers');
      const rows: Float32Array[] = [];
      for (const image of images) {
        const bytes = new Uint8ClampedArray(image.rgb.length);
        for (let i = 0; i < image.rgb.length; i++) {
          bytes[i] = Math.round(image.rgb[i] * 255);
        }
        const raw = new RawImage(bytes, image.width, image.height, 3);
        // class-token representation: first token of the last hidden state
        const output = await pipe(raw, { pooling: 'cls' });
        rows.push(Float32Array.from(output.data.slice(0, spec.dim)));
      }
      return rows;
    },
  };
}

export function getEncoder(name: string): Encoder {
  if (name === 'toy-patch16') {
    return {
      name,
      dim: TOY_GRID * TOY_GRID * 3,
      preprocessing: `center-crop, nearest resize ${TOY_CROP}, ${TOY_GRID}x${TOY_GRID} patch means`,
      encode: toyEncode,
    };
  }
  if (name in PRETRAINED) return pretrainedEncoder(name);
  throw new Error(`unknown encoder "${name}"; supported: ${SUPPORTED_ENCODERS.join(', ')}`);
}
