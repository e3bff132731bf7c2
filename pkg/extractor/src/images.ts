/**
 * Minimal image decoding: PPM (P6) natively, PNG and JPEG via small
 * pure-JS decoders. Pixels come out as RGB floats in [0, 1].
 */

import { readFileSync } from 'node:fs';
import { extname } from 'node:path';

import jpeg from 'jpeg-js';
import { PNG } from 'pngjs';

export interface DecodedImage {
  width: number;
  height: number;
  rgb: Float32Array; // length = width * height * 3, row-major
}

export const IMAGE_EXTENSIONS = new Set(['.ppm', '.png', '.jpg', '.jpeg']);

function fromRgba(width: number, height: number, rgba: Uint8Array): DecodedImage {
  const rgb = new Float32Array(width * height * 3);
  for (let p = 0; p < width * height; p++) {
    rgb[p * 3] = rgba[p * 4] / 255;
    rgb[p * 3 + 1] = rgba[p * 4 + 1] / 255;
    rgb[p * 3 + 2] = rgba[p * 4 + 2] / 255;
  }
  return { width, height, rgb };
}

function decodePpm(blob: Buffer): DecodedImage {
  // P6 header: magic, width, height, maxval (ASCII, # comments allowed),
  // then one whitespace byte and raw RGB triples
  let pos = 0;
  const token = (): string => {
    while (pos < blob.length) {
      const ch = blob[pos];
      if (ch === 0x23) {
        while (pos < blob.length && blob[pos] !== 0x0a) pos++;
      } else if (ch === 0x20 || ch === 0x09 || ch === 0x0a || ch === 0x0d) {
        pos++;
      } else {
        break;
      }
    }
    const start = pos;
    while (pos < blob.length && !/\s/.test(String.fromCharCode(blob[pos]))) pos++;
    return blob.subarray(start, pos).toString('ascii');
  };
  if (token() !== 'P6') throw new Error('not a binary PPM (P6) file');
  const width = parseInt(token(), 10);
  const height = parseInt(token(), 10);
  const maxval = parseInt(token(), 10);
  pos++; // single whitespace after maxval
  if (!(width > 0 && height > 0 && maxval > 0 && maxval < 65536)) {
    throw new Error('invalid PPM header');
  }
  if (maxval > 255) throw new Error('16-bit PPM not supported');
  const needed = width * height * 3;
  if (blob.length - pos < needed) throw new Error('PPM payload truncated');
  const rgb = new Float32Array(needed);
  for (let i = 0; i < needed; i++) {
    rgb[i] = blob[pos + i] / maxval;
  }
  return { width, height, rgb };
}

export function decodeImage(path: string): DecodedImage {
  const ext = extname(path).toLowerCase();
  if (!IMAGE_EXTENSIONS.has(ext)) {
    throw new Error(`unsupported image extension: ${path}`);
  }
  const blob = readFileSync(path);
  if (ext === '.ppm') return decodePpm(blob);
  if (ext === '.png') {
    const png = PNG.sync.read(blob);
    return fromRgba(png.width, png.height, png.data);
  }
  const img = jpeg.decode(blob, { useTArray: true, formatAsRGBA: true });
  return fromRgba(img.width, img.height, img.data);
}

/** Nearest-neighbor resize after a center crop to square. */
export function centerCropResize(image: DecodedImage, size: number): DecodedImage {
  const side = Math.min(image.width, image.height);
  const x0 = Math.floor((image.width - side) / 2);
  const y0 = Math.floor((image.height - side) / 2);
  const rgb = new Float32Array(size * size * 3);
  for (let y = 0; y < size; y++) {
    const sy = y0 + Math.min(side - 1, Math.floor(((y + 0.5) * side) / size));
    for (let x = 0; x < size; x++) {
      const sx = x0 + Math.min(side - 1, Math.floor(((x + 0.5) * side) / size));
      const src = (sy * image.width + sx) * 3;
      const dst = (y * size + x) * 3;
      rgb[dst] = image.rgb[src];
      rgb[dst + 1] = image.rgb[src + 1];
      rgb[dst + 2] = image.rgb[src + 2];
    }
  }
  return { width: size, height: size, rgb };
}
