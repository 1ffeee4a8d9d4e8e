import { mkdtempSync, writeFileSync } from 'fs';
import { tmpdir } from 'os';
import { join } from 'path';
import { describe, expect, it } from 'vitest';
import { InputDecodeError, loadEncoder, tokenizeCaption } from '../src/encoder.js';
import { extract, parseManifest, pool } from '../src/extract.js';
import { readMatrix } from '../src/ndm.js';

const tmp = () => mkdtempSync(join(tmpdir(), 'extract-'));

function writeManifest(dir: string, rows: string[][]): string {
  const path = join(dir, 'manifest.tsv');
  writeFileSync(path, rows.map((r) => r.join('\t')).join('\n') + '\n');
  return path;
}

function fakeImage(dir: string, name: string, seed: number): string {
  const path = join(dir, name);
  const bytes = Buffer.alloc(256);
  for (let i = 0; i < bytes.length; i++) bytes[i] = (i * 31 + seed * 7) % 256;
  writeFileSync(path, bytes);
  return path;
}

describe('pooling', () => {
  it('token-mean of a single-token input equals that token state exactly', () => {
    const enc = loadEncoder('bert-base', 'language');
    const tokens = tokenizeCaption('hello');
    expect(tokens).toEqual(['hello']);
    const states = enc.encode(tokens);
    const pooled = pool(states, tokens, 'mean');
    expect(Array.from(pooled)).toEqual(Array.from(states[1])); // states[0] is CLS
  });

  it('cls pooling returns the leading token state', () => {
    const enc = loadEncoder('bert-base', 'language');
    const tokens = tokenizeCaption('a small dog');
    const states = enc.encode(tokens);
    expect(pool(states, tokens, 'cls')).toEqual(states[0]);
  });

  it('mean pooling excludes special tokens unless asked', () => {
    const enc = loadEncoder('bert-base', 'language');
    const tokens = tokenizeCaption('two words');
    const states = enc.encode(tokens);
    const bare = pool(states, tokens, 'mean', false);
    const withSpecial = pool(states, tokens, 'mean', true);
    expect(bare).not.toEqual(withSpecial);
  });
});

describe('encoders', () => {
  it('are deterministic per model id', () => {
    const a = loadEncoder('gpt2-xl', 'language');
    const b = loadEncoder('gpt2-xl', 'language');
    const tokens = tokenizeCaption('same caption twice');
    expect(a.encode(tokens)).toEqual(b.encode(tokens));
    const other = loadEncoder('bert-base', 'language');
    expect(other.encode(tokens)).not.toEqual(a.encode(tokens));
  });

  it('resolves known dimensions and defaults', () => {
    expect(loadEncoder('gpt2-xl', 'language').dim).toBe(1600);
    expect(loadEncoder('dino-large', 'vision').dim).toBe(1024);
    expect(loadEncoder('some-new-model', 'language').dim).toBe(768);
  });

  it('supports a randomly initialized baseline variant', () => {
    const enc = loadEncoder('random-flava', 'vision');
    expect(enc.dim).toBe(768);
  });

  it('rejects empty captions', () => {
    expect(() => tokenizeCaption('   ')).toThrow(InputDecodeError);
  });
});

describe('extract', () => {
  it('writes one row per stimulus in manifest order with a sidecar', () => {
    const dir = tmp();
    const img = fakeImage(dir, 'i1.bin', 1);
    const manifest = parseManifest(
      writeManifest(dir, [
        ['stimulus_id', 'image_path', 'caption_text'],
        ['s1', img, 'a red bicycle'],
        ['s2', img, 'the same bicycle again'],
      ]),
    );
    const out = join(dir, 'f.ndm');
    const res = extract({
      model: 'vilt-b32-mlm',
      modality: 'language',
      pooling: 'mean',
      manifest,
      outPath: out,
    });
    const m = readMatrix(out);
    expect(m.rowIds).toEqual(['s1', 's2']);
    expect(m.cols).toBe(res.dims);
    expect(res.featureModality).toBe('language');
  });

  it('identical captions produce identical rows', () => {
    const dir = tmp();
    const manifest = parseManifest(
      writeManifest(dir, [
        ['s1', '', 'a cat sits on a mat'],
        ['s2', '', 'a cat sits on a mat'],
      ]),
    );
    const out = join(dir, 'f.ndm');
    extract({ model: 'bert-base', modality: 'language', pooling: 'mean', manifest, outPath: out });
    const m = readMatrix(out);
    const row1 = m.values.slice(0, m.cols);
    const row2 = m.values.slice(m.cols, 2 * m.cols);
    expect(row1).toEqual(row2);
  });

  it('multimodal rows concatenate vision and language dims', () => {
    const dir = tmp();
    const img = fakeImage(dir, 'i1.bin', 2);
    const manifest = parseManifest(writeManifest(dir, [['s1', img, 'a dog']]));
    const out = join(dir, 'mm.ndm');
    const res = extract({
      model: 'clip-vit-large-patch14',
      modality: 'multimodal',
      pooling: 'mean',
      manifest,
      outPath: out,
    });
    const dv = loadEncoder('clip-vit-large-patch14', 'vision').dim;
    const dl = loadEncoder('clip-vit-large-patch14', 'language').dim;
    expect(res.dims).toBe(dv + dl);
    expect(readMatrix(out).cols).toBe(dv + dl);
    expect(res.featureModality).toBe('multimodal_concat');

    // the leading block equals the standalone vision extraction
    const visOut = join(dir, 'v.ndm');
    extract({
      model: 'clip-vit-large-patch14',
      modality: 'vision',
      pooling: 'mean',
      manifest,
      outPath: visOut,
    });
    const mm = readMatrix(out);
    const v = readMatrix(visOut);
    expect(mm.values.slice(0, dv)).toEqual(v.values.slice(0, dv));
  });

  it('aborts with the offending stimulus id on bad input', () => {
    const dir = tmp();
    const manifest = parseManifest(writeManifest(dir, [['s9', join(dir, 'missing.bin'), '']]));
    expect(() =>
      extract({ model: 'vit-base', modality: 'vision', pooling: 'mean', manifest, outPath: join(dir, 'f.ndm') }),
    ).toThrow(InputDecodeError);
    try {
      extract({ model: 'vit-base', modality: 'vision', pooling: 'mean', manifest, outPath: join(dir, 'f.ndm') });
    } catch (err) {
      expect((err as Error).message).toContain('s9');
    }
  });

  it('rejects malformed manifests', () => {
    const dir = tmp();
    const path = join(dir, 'bad.tsv');
    writeFileSync(path, 'only_two\tcolumns\n');
    expect(() => parseManifest(path)).toThrow(InputDecodeError);
  });
});
