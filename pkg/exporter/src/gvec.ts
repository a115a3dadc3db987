/**
 * GVEC binary format: precomputed sentence vectors consumed by the Python kit.
 *
 * Layout (little-endian): magic "GVEC", u32 version=1, u32 count, u32 dBase,
 * then per record a u32 byte length of the UTF-8 sentence text, the text
 * bytes, and dBase float32 values.
 */

import { promises as fs } from "node:fs";

export const GVEC_MAGIC = "GVEC";
export const GVEC_VERSION = 1;

export interface GvecRecord {
  text: string;
  vector: Float32Array;
}

export function encodeGvec(records: GvecRecord[], dBase: number): Buffer {
  const chunks: Buffer[] = [];
  const header = Buffer.alloc(16);
  header.write(GVEC_MAGIC, 0, "ascii");
  header.writeUInt32LE(GVEC_VERSION, 4);
  header.writeUInt32LE(records.length, 8);
  header.writeUInt32LE(dBase, 12);
  chunks.push(header);
  for (const record of records) {
    if (record.vector.length !== dBase) {
      throw new Error(
        `vector for ${JSON.stringify(record.text)} has dimension ${record.vector.length}, expected ${dBase}`,
      );
    }
    const textBytes = Buffer.from(record.text, "utf-8");
    const lengthField = Buffer.alloc(4);
    lengthField.writeUInt32LE(textBytes.length, 0);
    const vectorBytes = Buffer.alloc(4 * dBase);
    for (let i = 0; i < dBase; i++) {
      vectorBytes.writeFloatLE(record.vector[i], 4 * i);
    }
    chunks.push(lengthField, textBytes, vectorBytes);
  }
  return Buffer.concat(chunks);
}

export function decodeGvec(data: Buffer): { records: GvecRecord[]; dBase: number } {
  if (data.length < 16 || data.toString("ascii", 0, 4) !== GVEC_MAGIC) {
    throw new Error("not a GVEC file (bad magic)");
  }
  const version = data.readUInt32LE(4);
  if (version !== GVEC_VERSION) {
    throw new Error(`unsupported GVEC version ${version}`);
  }
  const count = data.readUInt32LE(8);
  const dBase = data.readUInt32LE(12);
  const records: GvecRecord[] = [];
  let offset = 16;
  for (let i = 0; i < count; i++) {
    if (offset + 4 > data.length) throw new Error(`truncated at record ${i}`);
    const textLength = data.readUInt32LE(offset);
    offset += 4;
    if (offset + textLength + 4 * dBase > data.length) {
      throw new Error(`truncated at record ${i}`);
    }
    const text = data.toString("utf-8", offset, offset + textLength);
    offset += textLength;
    const vector = new Float32Array(dBase);
    for (let k = 0; k < dBase; k++) {
      vector[k] = data.readFloatLE(offset + 4 * k);
    }
    offset += 4 * dBase;
    records.push({ text, vector });
  }
  if (offset !== data.length) {
    throw new Error(`trailing bytes after ${count} records`);
  }
  return { records, dBase };
}

export async function writeGvec(path: string, records: GvecRecord[], dBase: number): Promise<void> {
  await fs.writeFile(path, encodeGvec(records, dBase));
}

export async function readGvec(path: string): Promise<{ records: GvecRecord[]; dBase: number }> {
  return decodeGvec(await fs.readFile(path));
}
