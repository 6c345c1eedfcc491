/**
 * Reader/writer for version-1 noise files (magic "NOFT").
 *
 * Layout, all little-endian:
 *   magic[4] | version u16 | rank u16 | dims u32 * rank
 *   | payload float32 * prod(dims), row-major | crc32(payload) u32
 *
 * This module is pinned to version 1 and refuses anything newer rather
 * than guessing; the payload is never transformed.
 */

export const NOISE_MAGIC = 'NOFT';
export const SUPPORTED_VERSION = 1;

export class NoiseFileError extends Error {}

export class BadMagicError extends NoiseFileError {}
export class UnsupportedVersionError extends NoiseFileError {}
export class ChecksumMismatchError extends NoiseFileError {}
export class TruncatedFileError extends NoiseFileError {}
export class LatentShapeError extends NoiseFileError {}

export interface NoiseFile {
  version: number;
  shape: number[];
  /** Raw little-endian float32 payload, exactly as stored. */
  data: Float32Array;
}

const CRC_TABLE = buildCrcTable();

function buildCrcTable(): Uint32Array {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
}

export function crc32(bytes: Uint8Array): number {
  let crc = 0xffffffff;
  for (let i = 0; i < bytes.length; i++) {
    crc = CRC_TABLE[(crc ^ bytes[i]) & 0xff] ^ (crc >>> 8);
  }
  return (crc ^ 0xffffffff) >>> 0;
}

class Cursor {
  pos = 0;
  constructor(private readonly view: DataView, private readonly bytes: Uint8Array) {}

  private need(n: number): void {
    if (this.pos + n > this.bytes.length) {
      throw new TruncatedFileError(
        `truncated noise file: needed ${n} bytes at offset ${this.pos}, file has ${this.bytes.length}`,
      );
    }
  }

  u16(): number {
    this.need(2);
    const v = this.view.getUint16(this.pos, true);
    this.pos += 2;
    return v;
  }

  u32(): number {
    this.need(4);
    const v = this.view.getUint32(this.pos, true);
    this.pos += 4;
    return v;
  }

  raw(n: number): Uint8Array {
    this.need(n);
    const out = this.bytes.subarray(this.pos, this.pos + n);
    this.pos += n;
    return out;
  }
}

export function parseNoiseFile(bytes: Uint8Array): NoiseFile {
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const cursor = new Cursor(view, bytes);

  const magic = new TextDecoder().decode(cursor.raw(4));
  if (magic !== NOISE_MAGIC) {
    throw new BadMagicError(`expected magic "${NOISE_MAGIC}", got "${magic}"`);
  }
  const version = cursor.u16();
  if (version !== SUPPORTED_VERSION) {
    throw new UnsupportedVersionError(
      `noise file version ${version} is not supported; this bridge is pinned to version ${SUPPORTED_VERSION}`,
    );
  }
  const rank = cursor.u16();
  const shape: number[] = [];
  for (let i = 0; i < rank; i++) {
    shape.push(cursor.u32());
  }
  const count = shape.reduce((a, b) => a * b, 1);
  const payload = cursor.raw(4 * count);
  const storedCrc = cursor.u32();
  if (cursor.pos !== bytes.length) {
    throw new NoiseFileError(`noise file has ${bytes.length - cursor.pos} trailing bytes`);
  }
  if (crc32(payload) !== storedCrc) {
    throw new ChecksumMismatchError('noise payload CRC32 mismatch');
  }

  // Copy into an aligned little-endian Float32Array without reinterpreting
  // a possibly unaligned buffer.
  const aligned = new Uint8Array(payload.length);
  aligned.set(payload);
  const data = new Float32Array(aligned.buffer);
  return { version, shape, data };
}

export function encodeNoiseFile(file: NoiseFile): Uint8Array {
  const count = file.shape.reduce((a, b) => a * b, 1);
  if (file.data.length !== count) {
    throw new LatentShapeError(
      `payload has ${file.data.length} values but shape [${file.shape.join(', ')}] needs ${count}`,
    );
  }
  const headerSize = 4 + 2 + 2 + 4 * file.shape.length;
  const out = new Uint8Array(headerSize + 4 * count + 4);
  const view = new DataView(out.buffer);
  out.set(new TextEncoder().encode(NOISE_MAGIC), 0);
  view.setUint16(4, file.version, true);
  view.setUint16(6, file.shape.length, true);
  file.shape.forEach((dim, i) => view.setUint32(8 + 4 * i, dim, true));
  const payload = new Uint8Array(file.data.buffer, file.data.byteOffset, 4 * count);
  out.set(payload, headerSize);
  view.setUint32(headerSize + 4 * count, crc32(payload), true);
  return out;
}

export function shapesEqual(a: number[], b: number[]): boolean {
  return a.length === b.length && a.every((d, i) => d === b[i]);
}
