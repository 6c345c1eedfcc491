/**
 * Pipeline abstraction. A pipeline adapter accepts an initial latent and
 * denoises it into image bytes; the bridge never redraws or reshapes the
 * latent, it only applies the adapter's declared scaling convention.
 */

export interface LatentRunOptions {
  /** Initial latent, already multiplied by the adapter's latentScale. */
  latent: Float32Array;
  shape: number[];
  prompt: string;
  steps: number;
}

export interface PipelineAdapter {
  /** Latent shape the pipeline expects, e.g. [4, 64, 64]. */
  expectedLatentShape: number[];
  /** Multiplier the checkpoint expects on raw unit-variance noise (1.0 if none). */
  latentScale: number;
  run(options: LatentRunOptions): Promise<Uint8Array>;
}

export class PipelineUnavailableError extends Error {}

/** Module names tried per pipeline id; all are optional peer installs. */
const PIPELINE_MODULES: Record<string, { module: string; hint: string }> = {
  'diffusers.js': {
    module: '@aislamov/diffusers.js',
    hint: 'npm install @aislamov/diffusers.js',
  },
  'stable-diffusion-cpp': {
    module: 'node-stable-diffusion.cpp',
    hint: 'npm install node-stable-diffusion.cpp',
  },
};

/**
 * Dynamically load a pipeline adapter by id. The heavy dependencies are
 * deliberately not declared by this package; a descriptive error with the
 * install command is raised when they are absent.
 */
export async function loadPipeline(id: string): Promise<PipelineAdapter> {
  const entry = PIPELINE_MODULES[id];
  if (!entry) {
    const known = Object.keys(PIPELINE_MODULES).join(', ');
    throw new PipelineUnavailableError(`unknown pipeline id "${id}"; known ids: ${known}`);
  }
  let mod: { createAdapter?: (() => Promise<PipelineAdapter>) | undefined };
  try {
    mod = await import(entry.module);
  } catch {
    throw new PipelineUnavailableError(
      `pipeline "${id}" is not installed; run: ${entry.hint}`,
    );
  }
  if (typeof mod.createAdapter !== 'function') {
    throw new PipelineUnavailableError(
      `module "${entry.module}" does not expose a createAdapter() factory`,
    );
  }
  return mod.createAdapter();
}
