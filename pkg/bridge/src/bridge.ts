/**
 * The bridge: read a finetuned noise file, validate it, and hand the exact
 * latent to a local text-to-image pipeline for decoding.
 */

import { readFile, writeFile } from 'node:fs/promises';

import { LatentShapeError, parseNoiseFile, shapesEqual } from './noisefile.js';
import { loadPipeline, PipelineAdapter } from './pipeline.js';

export interface BridgeRequest {
  noisePath: string;
  prompt: string;
  pipeline: string;
  outputPath: string;
  steps: number;
  /** Override the adapter's latent scaling convention (checkpoint specific). */
  latentScale?: number;
}

export interface BridgeResult {
  outputPath: string;
  shape: number[];
  latentScale: number;
}

export async function runBridge(
  request: BridgeRequest,
  adapter?: PipelineAdapter,
): Promise<BridgeResult> {
  const bytes = new Uint8Array(await readFile(request.noisePath));
  const noise = parseNoiseFile(bytes);

  const pipe = adapter ?? (await loadPipeline(request.pipeline));
  if (!shapesEqual(noise.shape, pipe.expectedLatentShape)) {
    throw new LatentShapeError(
      `noise file has shape [${noise.shape.join(', ')}] but the pipeline expects ` +
        `latents of shape [${pipe.expectedLatentShape.join(', ')}]`,
    );
  }

  // The only numeric touch allowed: the pipeline's own scaling convention.
  const scale = request.latentScale ?? pipe.latentScale;
  let latent = noise.data;
  if (scale !== 1.0) {
    latent = new Float32Array(noise.data.length);
    for (let i = 0; i < noise.data.length; i++) {
      latent[i] = noise.data[i] * scale;
    }
  }

  const image = await pipe.run({
    latent,
    shape: noise.shape,
    prompt: request.prompt,
    steps: request.steps,
  });
  await writeFile(request.outputPath, image);
  return { outputPath: request.outputPath, shape: noise.shape, latentScale: scale };
}
