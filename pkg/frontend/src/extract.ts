/**
 * Feature extraction: pool per-token hidden states into one row per
 * stimulus, concatenating the vision and language branches for multimodal
 * output, and write the NDM1 matrix the decoding pipeline consumes.
 */

import { readFileSync, writeFileSync } from 'fs';
import { Matrix, writeMatrix } from './ndm.js';
import {
  Branch,
  CLS,
  Encoder,
  InputDecodeError,
  SEP,
  loadEncoder,
  tokenizeCaption,
  tokenizeImage,
} from './encoder.js';

export type Modality = 'vision' | 'language' | 'multimodal';
export type Pooling = 'mean' | 'cls';

export interface ManifestItem {
  stimulusId: string;
  imagePath?: string;
  captionText?: string;
}

export interface ExtractSpec {
  model: string;
  modality: Modality;
  pooling: Pooling;
  manifest: ManifestItem[];
  outPath: string;
  /** include CLS/SEP in token-mean pooling (off by default) */
  includeSpecial?: boolean;
}

export function parseManifest(path: string): ManifestItem[] {
  const lines = readFileSync(path, 'utf-8').split('\n');
  const items: ManifestItem[] = [];
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i];
    if (!line.trim()) continue;
    const parts = line.split('\t');
    if (parts.length !== 3) {
      throw new InputDecodeError(
        `${path}:${i + 1}: expected 3 tab-separated columns (stimulus_id, image_path, caption_text)`,
      );
    }
    const [stimulusId, imagePath, captionText] = parts;
    if (stimulusId === 'stimulus_id') continue; // optional header
    items.push({
      stimulusId,
      imagePath: imagePath || undefined,
      captionText: captionText || undefined,
    });
  }
  if (items.length === 0) throw new InputDecodeError(`${path}: empty manifest`);
  return items;
}

/** Sequence-to-vector reduction over final hidden states. */
export function pool(
  states: Float64Array[],
  tokens: string[],
  pooling: Pooling,
  includeSpecial = false,
): Float64Array {
  const seq = [CLS, ...tokens, SEP];
  if (pooling === 'cls') return states[0];
  const keep: number[] = [];
  for (let i = 0; i < seq.length; i++) {
    if (includeSpecial || (seq[i] !== CLS && seq[i] !== SEP)) keep.push(i);
  }
  const d = states[0].length;
  const out = new Float64Array(d);
  for (const i of keep) for (let j = 0; j < d; j++) out[j] += states[i][j];
  for (let j = 0; j < d; j++) out[j] /= keep.length;
  return out;
}

function encodeBranch(
  enc: Encoder,
  item: ManifestItem,
  pooling: Pooling,
  includeSpecial: boolean,
): Float64Array {
  let tokens: string[];
  if (enc.branch === 'vision') {
    if (!item.imagePath) throw new InputDecodeError('no image path for vision input');
    tokens = tokenizeImage(item.imagePath);
  } else {
    if (!item.captionText) throw new InputDecodeError('no caption text for language input');
    tokens = tokenizeCaption(item.captionText);
  }
  return pool(enc.encode(tokens), tokens, pooling, includeSpecial);
}

export interface ExtractResult {
  matrix: Matrix;
  dims: number;
  featureModality: string;
}

export function extract(spec: ExtractSpec): ExtractResult {
  const branches: Branch[] =
    spec.modality === 'multimodal' ? ['vision', 'language'] : [spec.modality];
  const encoders = branches.map((b) => loadEncoder(spec.model, b));
  const dims = encoders.reduce((acc, e) => acc + e.dim, 0);
  const include = spec.includeSpecial ?? false;

  const values = new Float32Array(spec.manifest.length * dims);
  const rowIds: string[] = [];
  spec.manifest.forEach((item, row) => {
    let offset = row * dims;
    for (const enc of encoders) {
      let pooled: Float64Array;
      try {
        pooled = encodeBranch(enc, item, spec.pooling, include);
      } catch (err) {
        if (err instanceof InputDecodeError) {
          throw new InputDecodeError(`stimulus ${item.stimulusId}: ${err.message}`);
        }
        throw err;
      }
      values.set(Float32Array.from(pooled), offset);
      offset += enc.dim;
    }
    rowIds.push(item.stimulusId);
  });

  const featureModality = spec.modality === 'multimodal' ? 'multimodal_concat' : spec.modality;
  const matrix: Matrix = { rows: spec.manifest.length, cols: dims, values, rowIds };
  writeMatrix(spec.outPath, matrix);
  const sidecar = spec.outPath.replace(/\.[^./\\]+$/, '') + '.json';
  writeFileSync(
    sidecar,
    JSON.stringify({ model_name: spec.model, feature_modality: featureModality }) + '\n',
  );
  return { matrix, dims, featureModality };
}
