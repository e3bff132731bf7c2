#!/usr/bin/env node
/**
 * CLI: extract frozen encoder features from an image folder into a FOVA file.
 *
 *   fova-extract --encoder toy-patch16 --dataset ./images --split train \
 *       --out features.fova [--batch-size 32] [--device cpu]
 */

import { parseArgs } from 'node:util';

import { SUPPORTED_ENCODERS } from './encoders.js';
import { extract } from './extract.js';

export async function main(argv: string[]): Promise<number> {
  let values;
  try {
    ({ values } = parseArgs({
      args: argv,
      options: {
        encoder: { type: 'string' },
        dataset: { type: 'string' },
        split: { type: 'string' },
        out: { type: 'string' },
        'batch-size': { type: 'string', default: '32' },
        device: { type: 'string', default: 'cpu' },
        help: { type: 'boolean', default: false },
      },
    }));
  } catch (err) {
    console.error(String(err));
    return 2;
  }
  if (values.help) {
    console.log(
      'usage: fova-extract --encoder <name> --dataset <dir> [--split <name>] --out <path>\n' +
        `encoders: ${SUPPORTED_ENCODERS.join(', ')}`,
    );
    return 0;
  }
  for (const required of ['encoder', 'dataset', 'out'] as const) {
    if (!values[required]) {
      console.error(`missing required --${required}`);
      return 2;
    }
  }
  try {
    const result = await extract({
      encoder: values.encoder!,
      dataset: values.dataset!,
      split: values.split,
      out: values.out!,
      batchSize: parseInt(values['batch-size']!, 10),
      device: values.device,
    });
    console.log(
      `wrote ${result.samples} x ${result.dim} features ` +
        `(${result.numClasses} classes) to ${result.out}`,
    );
    return 0;
  } catch (err) {
    console.error(err instanceof Error ? err.message : String(err));
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] && import.meta.url.endsWith(process.argv[1].split('/').pop()!);
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
