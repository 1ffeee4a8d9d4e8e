#!/usr/bin/env node
import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';
import { extract, parseManifest } from './extract.js';
import { verifyRoundtrip } from './ndm.js';

await yargs(hideBin(process.argv))
  .command(
    '$0',
    'extract model features for a stimulus manifest into an NDM1 matrix',
    (y) =>
      y
        .option('model', { type: 'string', demandOption: true, describe: 'model identifier' })
        .option('modality', {
          choices: ['vision', 'language', 'multimodal'] as const,
          demandOption: true,
        })
        .option('pooling', { choices: ['mean', 'cls'] as const, default: 'mean' as const })
        .option('manifest', {
          type: 'string',
          demandOption: true,
          describe: 'TSV: stimulus_id, image_path, caption_text',
        })
        .option('out', { type: 'string', demandOption: true })
        .option('include-special', {
          type: 'boolean',
          default: false,
          describe: 'include CLS/SEP tokens in mean pooling',
        }),
    (argv) => {
      const manifest = parseManifest(argv.manifest);
      const result = extract({
        model: argv.model,
        modality: argv.modality,
        pooling: argv.pooling,
        manifest,
        outPath: argv.out,
        includeSpecial: argv['include-special'],
      });
      verifyRoundtrip(argv.out);
      console.log(
        `${manifest.length} stimuli x ${result.dims} dims (${result.featureModality}) -> ${argv.out}`,
      );
    },
  )
  .strict()
  .fail((msg, err) => {
    console.error(err ? `${err.name}: ${err.message}` : msg);
    process.exit(1);
  })
  .parseAsync();
