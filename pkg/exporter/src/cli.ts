#!/usr/bin/env node
/**
 * export-vectors --data pairs.jsonl --model hash:64 --out vectors.gvec
 *                [--pooling first-token|mean] [--batch-size 32]
 *
 * Prints the export manifest as JSON on success. Exit codes: 0 success,
 * 1 runtime failure, 2 usage error.
 */

import { exportVectors } from "./export.js";
import { Pooling } from "./encoders.js";

interface Args {
  data: string;
  model: string;
  out: string;
  pooling: Pooling;
  batchSize: number;
}

const USAGE =
  "usage: export-vectors --data <jsonl> --model <id|hash:dim> --out <gvec> " +
  "[--pooling first-token|mean] [--batch-size n]";

function usage(message?: string): never {
  if (message) console.error(`error: ${message}`);
  console.error(USAGE);
  process.exit(2);
}

function parseArgs(argv: string[]): Args {
  const args: Partial<Args> = { pooling: "first-token", batchSize: 32 };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const value = argv[i + 1];
    switch (flag) {
      case "--data":
        if (value === undefined) usage(`${flag} needs a value`);
        args.data = value;
        i++;
        break;
      case "--model":
        if (value === undefined) usage(`${flag} needs a value`);
        args.model = value;
        i++;
        break;
      case "--out":
        if (value === undefined) usage(`${flag} needs a value`);
        args.out = value;
        i++;
        break;
      case "--pooling":
        if (value !== "first-token" && value !== "mean") {
          usage(`--pooling must be first-token or mean, got ${value}`);
        }
        args.pooling = value;
        i++;
        break;
      case "--batch-size": {
        const parsed = parseInt(value ?? "", 10);
        if (!Number.isInteger(parsed) || parsed < 1) usage(`invalid --batch-size: ${value}`);
        args.batchSize = parsed;
        i++;
        break;
      }
      case "--help":
      case "-h":
        console.log(USAGE);
        process.exit(0);
        break;
      default:
        usage(`unknown flag: ${flag}`);
    }
  }
  if (!args.data) usage("--data is required");
  if (!args.model) usage("--model is required");
  if (!args.out) usage("--out is required");
  return args as Args;
}

async function main(): Promise<number> {
  const args = parseArgs(process.argv.slice(2));
  try {
    const manifest = await exportVectors(args.data, args.model, args.pooling, args.out, args.batchSize);
    console.log(JSON.stringify(manifest, null, 2));
    return 0;
  } catch (error) {
    console.error(`error: ${error instanceof Error ? error.message : error}`);
    return 1;
  }
}

main().then((code) => {
  process.exitCode = code;
});
