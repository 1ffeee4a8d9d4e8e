/**
 * NDM1 matrix files: 4 magic bytes "NDM1", little-endian u32 rows and cols,
 * a float32 row-major payload, then newline-separated UTF-8 row ids.
 */

import { readFileSync, writeFileSync } from 'fs';

export class FormatError extends Error {}

const MAGIC = Buffer.from('NDM1', 'ascii');
const HEADER_BYTES = MAGIC.length + 8;

export interface Matrix {
  rows: number;
  cols: number;
  values: Float32Array; // row-major, rows * cols entries
  rowIds: string[];
}

export function serializeMatrix(m: Matrix): Buffer {
  if (m.values.length !== m.rows * m.cols) {
    throw new FormatError(`payload has ${m.values.length} entries for ${m.rows}x${m.cols}`);
  }
  if (m.rowIds.length !== m.rows) {
    throw new FormatError(`${m.rowIds.length} row ids for ${m.rows} rows`);
  }
  for (const id of m.rowIds) {
    if (id.includes('\n')) throw new FormatError(`row id contains a newline: ${JSON.stringify(id)}`);
  }
  const header = Buffer.alloc(HEADER_BYTES);
  MAGIC.copy(header, 0);
  header.writeUInt32LE(m.rows, 4);
  header.writeUInt32LE(m.cols, 8);
  const payload = Buffer.alloc(m.values.length * 4);
  for (let i = 0; i < m.values.length; i++) payload.writeFloatLE(m.values[i], i * 4);
  const idBlock = Buffer.from(m.rowIds.join('\n'), 'utf-8');
  return Buffer.concat([header, payload, idBlock]);
}

export function writeMatrix(path: string, m: Matrix): void {
  writeFileSync(path, serializeMatrix(m));
}

/** Parse an NDM1 buffer. Written independently of the serializer so a
 * round-trip check exercises two code paths. */
export function parseMatrix(blob: Buffer, label = 'buffer'): Matrix {
  if (blob.length < HEADER_BYTES || !blob.subarray(0, 4).equals(MAGIC)) {
    throw new FormatError(`${label}: bad or missing NDM1 magic`);
  }
  const rows = blob.readUInt32LE(4);
  const cols = blob.readUInt32LE(8);
  const nbytes = rows * cols * 4;
  if (blob.length < HEADER_BYTES + nbytes) {
    throw new FormatError(
      `${label}: truncated payload (${blob.length - HEADER_BYTES} of ${nbytes} bytes)`,
    );
  }
  const values = new Float32Array(rows * cols);
  for (let i = 0; i < values.length; i++) values[i] = blob.readFloatLE(HEADER_BYTES + i * 4);
  const idBlock = blob.subarray(HEADER_BYTES + nbytes).toString('utf-8');
  let rowIds: string[];
  if (rows === 0) {
    if (idBlock.length > 0) throw new FormatError(`${label}: row ids present for empty matrix`);
    rowIds = [];
  } else {
    rowIds = idBlock.split('\n');
    if (rowIds.length !== rows) {
      throw new FormatError(`${label}: ${rowIds.length} row ids for ${rows} rows`);
    }
  }
  return { rows, cols, values, rowIds };
}

export function readMatrix(path: string): Matrix {
  return parseMatrix(readFileSync(path), path);
}

/**
 * Re-read a written file and check header/shape/id-block consistency and
 * finiteness. Returns the parsed matrix so callers can compare content.
 */
export function verifyRoundtrip(path: string): Matrix {
  const m = readMatrix(path);
  for (let i = 0; i < m.values.length; i++) {
    if (!Number.isFinite(m.values[i])) {
      throw new FormatError(`${path}: non-finite value at index ${i}`);
    }
  }
  const ids = new Set(m.rowIds);
  if (ids.size !== m.rowIds.length) {
    throw new FormatError(`${path}: duplicate row ids`);
  }
  return m;
}
