/**
 * Deterministic randomly-initialized encoders.
 *
 * Pretrained weight hubs are not reachable from this environment, so every
 * model id resolves to a random-initialization variant: token embeddings and
 * mixing weights are drawn from a stream seeded by the model id, making
 * extraction fully reproducible and giving the same role as a
 * randomly-initialized baseline model. The sequence interface (per-token
 * final hidden states with a leading CLS token) matches what pooling and
 * concatenation need.
 */

import { readFileSync } from 'fs';
import { gaussians, hash32, rngFrom } from './rng.js';

export class ModelLoadError extends Error {}
export class InputDecodeError extends Error {}

export const CLS = '[CLS]';
export const SEP = '[SEP]';

/** Hidden-state width per known model id; anything else uses the default. */
const KNOWN_DIMS: Record<string, { vision?: number; language?: number }> = {
  'vit-base': { vision: 768 },
  'dino-large': { vision: 1024 },
  'resnet50': { vision: 2048 },
  'bert-base': { language: 768 },
  'gpt2-xl': { language: 1600 },
  'clip-vit-large-patch14': { vision: 1024, language: 768 },
  'vilt-b32-mlm': { vision: 768, language: 768 },
  'flava-full': { vision: 768, language: 768 },
  'random-flava': { vision: 768, language: 768 },
};
const DEFAULT_DIM = 768;

export type Branch = 'vision' | 'language';

export interface Encoder {
  modelId: string;
  branch: Branch;
  dim: number;
  /** Final-layer hidden states: [CLS, token_0, ..., token_{n-1}, SEP]. */
  encode(tokens: string[]): Float64Array[];
}

class SeededEncoder implements Encoder {
  private embedCache = new Map<string, Float64Array>();
  private mix: Float64Array; // dim*dim context-mixing weights
  private gate: Float64Array;

  constructor(
    public modelId: string,
    public branch: Branch,
    public dim: number,
  ) {
    if (!modelId) throw new ModelLoadError('empty model id');
    if (dim <= 0) throw new ModelLoadError(`bad hidden dimension ${dim}`);
    this.mix = gaussians(dim * dim, rngFrom(modelId, branch, 'mix'));
    this.gate = gaussians(dim, rngFrom(modelId, branch, 'gate'));
  }

  private embedding(token: string, position: number): Float64Array {
    const key = `${token}@${position}`;
    let e = this.embedCache.get(key);
    if (!e) {
      e = gaussians(this.dim, rngFrom(this.modelId, this.branch, 'tok', token, position));
      this.embedCache.set(key, e);
    }
    return e;
  }

  encode(tokens: string[]): Float64Array[] {
    const seq = [CLS, ...tokens, SEP];
    const d = this.dim;
    const states = seq.map((t, i) => Float64Array.from(this.embedding(t, i)));
    // one mixing pass: every state attends to the sequence mean
    const ctx = new Float64Array(d);
    for (const h of states) for (let j = 0; j < d; j++) ctx[j] += h[j] / states.length;
    const mixed = new Float64Array(d);
    for (let j = 0; j < d; j++) {
      let acc = 0;
      for (let k = 0; k < d; k++) acc += this.mix[j * d + k] * ctx[k];
      mixed[j] = Math.tanh(acc / Math.sqrt(d));
    }
    for (const h of states) {
      for (let j = 0; j < d; j++) h[j] += this.gate[j] * mixed[j];
    }
    return states;
  }
}

export function loadEncoder(modelId: string, branch: Branch): Encoder {
  const known = KNOWN_DIMS[modelId];
  const dim = known?.[branch] ?? DEFAULT_DIM;
  return new SeededEncoder(modelId, branch, dim);
}

/** Lowercased word/punctuation tokens. */
export function tokenizeCaption(caption: string): string[] {
  const tokens = caption.toLowerCase().match(/[a-z0-9]+|[^\sa-z0-9]/g) ?? [];
  if (tokens.length === 0) throw new InputDecodeError('caption has no tokens');
  return tokens;
}

/** Content-addressed patch tokens from the image file's bytes. */
export function tokenizeImage(path: string, patchBytes = 64): string[] {
  let blob: Buffer;
  try {
    blob = readFileSync(path);
  } catch (err) {
    throw new InputDecodeError(`cannot read image ${path}: ${(err as Error).message}`);
  }
  if (blob.length === 0) throw new InputDecodeError(`empty image file ${path}`);
  const tokens: string[] = [];
  for (let off = 0; off < blob.length; off += patchBytes) {
    const patch = blob.subarray(off, off + patchBytes).toString('latin1');
    tokens.push(`patch:${hash32(patch).toString(16)}`);
  }
  return tokens;
}
