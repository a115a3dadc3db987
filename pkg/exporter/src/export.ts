/**
 * Run an encoder over an NLI JSONL dataset and write the GVEC vector file.
 *
 * Every distinct sentence (premises and hypotheses together) is encoded
 * exactly once, in first-appearance order.
 */

import { promises as fs } from "node:fs";
import { loadEncoder, Pooling, SentenceEncoder } from "./encoders.js";
import { GvecRecord, writeGvec } from "./gvec.js";

export interface ExportManifest {
  model: string;
  dataset: string;
  d_base: number;
  count: number;
  pooling: Pooling;
  output: string;
}

export async function uniqueSentences(datasetPath: string): Promise<string[]> {
  const content = await fs.readFile(datasetPath, "utf-8");
  const seen = new Set<string>();
  const sentences: string[] = [];
  const lines = content.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    let record: unknown;
    try {
      record = JSON.parse(line);
    } catch (error) {
      throw new Error(`${datasetPath}: malformed JSON on line ${i + 1}: ${error}`);
    }
    const { premise, hypothesis } = record as { premise?: unknown; hypothesis?: unknown };
    if (typeof premise !== "string" || typeof hypothesis !== "string") {
      throw new Error(`${datasetPath}: line ${i + 1} lacks string premise/hypothesis fields`);
    }
    for (const sentence of [premise, hypothesis]) {
      if (!seen.has(sentence)) {
        seen.add(sentence);
        sentences.push(sentence);
      }
    }
  }
  return sentences;
}

export async function exportVectors(
  datasetPath: string,
  model: string | SentenceEncoder,
  pooling: Pooling,
  outPath: string,
  batchSize = 32,
): Promise<ExportManifest> {
  const encoder = typeof model === "string" ? await loadEncoder(model) : model;
  const sentences = await uniqueSentences(datasetPath);
  const records: GvecRecord[] = [];
  for (let start = 0; start < sentences.length; start += batchSize) {
    const batch = sentences.slice(start, start + batchSize);
    const vectors = await encoder.encodeBatch(batch, pooling);
    for (let i = 0; i < batch.length; i++) {
      if (vectors[i].length !== encoder.dBase) {
        throw new Error(
          `encoder returned dimension ${vectors[i].length} for ${JSON.stringify(batch[i])}, expected ${encoder.dBase}`,
        );
      }
      records.push({ text: batch[i], vector: vectors[i] });
    }
  }
  await writeGvec(outPath, records, encoder.dBase);
  return {
    model: encoder.model,
    dataset: datasetPath,
    d_base: encoder.dBase,
    count: records.length,
    pooling,
    output: outPath,
  };
}
