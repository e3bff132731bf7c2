import { mkdirSync, writeFileSync } from 'node:fs';
import { join } from 'node:path';

/** Write a binary PPM (P6) with a solid color plus a per-pixel ramp. */
export function writePpm(
  path: string,
  width: number,
  height: number,
  base: [number, number, number],
  ramp = 0,
): void {
  const header = Buffer.from(`P6\n${width} ${height}\n255\n`, 'ascii');
  const pixels = Buffer.alloc(width * height * 3);
  for (let p = 0; p < width * height; p++) {
    pixels[p * 3] = Math.min(255, base[0] + ((p * ramp) % 13));
    pixels[p * 3 + 1] = Math.min(255, base[1] + ((p * ramp) % 7));
    pixels[p * 3 + 2] = Math.min(255, base[2] + ((p * ramp) % 5));
  }
  writeFileSync(path, Buffer.concat([header, pixels]));
}

/** Lay out a two-class toy image folder with `perClass` PPMs per class. */
export function makeToyDataset(root: string, perClass = 5): void {
  for (const [className, base] of [
    ['birds', [200, 40, 40]],
    ['cats', [30, 60, 220]],
  ] as const) {
    const dir = join(root, className);
    mkdirSync(dir, { recursive: true });
    for (let i = 0; i < perClass; i++) {
      writePpm(join(dir, `img_${i}.ppm`), 20 + i, 18, [...base] as [number, number, number], i + 1);
    }
  }
}
