import { mkdtemp, rm, writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { decodeGvec, encodeGvec, readGvec, writeGvec } from "../src/gvec.js";

let dir: string;

beforeEach(async () => {
  dir = await mkdtemp(join(tmpdir(), "gvec-"));
});

afterEach(async () => {
  await rm(dir, { recursive: true, force: true });
});

describe("gvec encoding", () => {
  it("round-trips records bit-exactly", async () => {
    const records = [
      { text: "first sentence", vector: Float32Array.from([1.5, -2.25, 0.125]) },
      { text: "unicode café — ok", vector: Float32Array.from([0, 1e-7, 3.4e38]) },
    ];
    const path = join(dir, "out.gvec");
    await writeGvec(path, records, 3);
    const { records: loaded, dBase } = await readGvec(path);
    expect(dBase).toBe(3);
    expect(loaded.length).toBe(2);
    for (let i = 0; i < records.length; i++) {
      expect(loaded[i].text).toBe(records[i].text);
      expect(Array.from(loaded[i].vector)).toEqual(Array.from(records[i].vector));
    }
  });

  it("has the documented header layout", () => {
    const data = encodeGvec([{ text: "ab", vector: Float32Array.from([1]) }], 1);
    expect(data.toString("ascii", 0, 4)).toBe("GVEC");
    expect(data.readUInt32LE(4)).toBe(1); // version
    expect(data.readUInt32LE(8)).toBe(1); // count
    expect(data.readUInt32LE(12)).toBe(1); // d_base
    expect(data.readUInt32LE(16)).toBe(2); // text byte length
    expect(data.toString("utf-8", 20, 22)).toBe("ab");
    expect(data.readFloatLE(22)).toBe(1);
    expect(data.length).toBe(26);
  });

  it("rejects wrong magic", () => {
    expect(() => decodeGvec(Buffer.from("NOPE0000000000000000"))).toThrow(/magic/);
  });

  it("rejects truncated payloads", () => {
    const data = encodeGvec([{ text: "ab", vector: Float32Array.from([1, 2]) }], 2);
    expect(() => decodeGvec(data.subarray(0, data.length - 2))).toThrow(/truncated/);
  });

  it("rejects trailing bytes", () => {
    const data = encodeGvec([{ text: "ab", vector: Float32Array.from([1, 2]) }], 2);
    expect(() => decodeGvec(Buffer.concat([data, Buffer.from([0])]))).toThrow(/trailing/);
  });

  it("rejects dimension mismatches when encoding", () => {
    expect(() => encodeGvec([{ text: "x", vector: Float32Array.from([1]) }], 2)).toThrow(
      /dimension/,
    );
  });
});
