#!/usr/bin/env node
/** bnir-export <checkpoint.safetensors> <manifest.json> <out.bnir> */

import { readFileSync, writeFileSync } from "fs";

import { exportModel } from "./export";
import { parseManifest } from "./manifest";
import { readSafetensors } from "./tensors";

function main(argv: string[]): number {
  if (argv.length !== 3) {
    console.error("usage: bnir-export <checkpoint.safetensors> <manifest.json> <out.bnir>");
    return 1;
  }
  const [checkpointPath, manifestPath, outPath] = argv;
  try {
    const checkpoint = readSafetensors(readFileSync(checkpointPath));
    const manifest = parseManifest(JSON.parse(readFileSync(manifestPath, "utf-8")));
    writeFileSync(outPath, exportModel(checkpoint, manifest));
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 2;
  }
  return 0;
}

process.exit(main(process.argv.slice(2)));
