/**
 * Image-folder datasets: one subdirectory per class, class ids assigned by
 * sorted subdirectory name, files visited in sorted order so extraction
 * order (and therefore the output file) is deterministic.
 */

import { readdirSync, statSync } from 'node:fs';
import { join } from 'node:path';

import { IMAGE_EXTENSIONS } from './images.js';

export interface DatasetEntry {
  path: string;
  label: number;
}

export interface FolderDataset {
  root: string;
  classNames: string[];
  entries: DatasetEntry[];
}

export function scanFolderDataset(root: string, split?: string): FolderDataset {
  let base = root;
  if (split) {
    const candidate = join(root, split);
    if (!statSync(candidate, { throwIfNoEntry: false })?.isDirectory()) {
      throw new Error(`split "${split}" not found under ${root}`);
    }
    base = candidate;
  }
  const classNames = readdirSync(base)
    .filter((name) => statSync(join(base, name)).isDirectory())
    .sort();
  if (classNames.length < 2) {
    throw new Error(`${base}: need at least two class subdirectories, found ${classNames.length}`);
  }
  const entries: DatasetEntry[] = [];
  classNames.forEach((className, label) => {
    const dir = join(base, className);
    for (const file of readdirSync(dir).sort()) {
      const ext = file.slice(file.lastIndexOf('.')).toLowerCase();
      if (IMAGE_EXTENSIONS.has(ext)) {
        entries.push({ path: join(dir, file), label });
      }
    }
  });
  if (entries.length === 0) {
    throw new Error(`${base}: no images found under class subdirectories`);
  }
  return { root: base, classNames, entries };
}
