#!/usr/bin/env node
import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';

import { runBridge } from './bridge.js';
import { NoiseFileError } from './noisefile.js';
import { PipelineUnavailableError } from './pipeline.js';

async function main(): Promise<number> {
  const argv = await yargs(hideBin(process.argv))
    .scriptName('noft-bridge')
    .usage('$0 --noise <file.noft> --prompt <text> --out <image.png>')
    .option('noise', { type: 'string', demandOption: true, describe: 'noise file from the engine' })
    .option('prompt', { type: 'string', demandOption: true })
    .option('out', { type: 'string', demandOption: true, describe: 'output image path' })
    .option('pipeline', { type: 'string', default: 'diffusers.js' })
    .option('steps', { type: 'number', default: 30 })
    .option('latent-scale', { type: 'number', describe: 'override the checkpoint latent scaling' })
    .strict()
    .parse();

  try {
    const result = await runBridge({
      noisePath: argv.noise,
      prompt: argv.prompt,
      pipeline: argv.pipeline,
      outputPath: argv.out,
      steps: argv.steps,
      latentScale: argv['latent-scale'],
    });
    console.log(
      `decoded latent [${result.shape.join(', ')}] (scale ${result.latentScale}) -> ${result.outputPath}`,
    );
    return 0;
  } catch (err) {
    if (err instanceof NoiseFileError || err instanceof PipelineUnavailableError) {
      console.error(`error: ${err.message}`);
      return 2;
    }
    throw err;
  }
}

main().then((code) => {
  process.exitCode = code;
});
