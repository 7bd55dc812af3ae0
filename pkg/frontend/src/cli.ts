#!/usr/bin/env node
/** Exporter CLI:
 *   fm-exporter export-emb <imageDir> <outDir> [--backend classical|model]
 *   fm-exporter export-bundle <img1> <img2> <outDir>
 *       [--backend classical|model] [--alignment pairwise|global]
 */

import { readdirSync } from "node:fs";
import { basename, extname, join } from "node:path";
import { embedImage, runModelBackend as runEmbedModel } from "./embed.js";
import { loadPng } from "./image.js";
import { readBundle, readEmbeddings, writeBundle, writeEmbeddings } from "./interchange.js";
import { estimateBundle, runModelBackend as runBundleModel } from "./twoview.js";

interface Options {
  positional: string[];
  backend: string;
  alignment: string;
}

function parseArgs(argv: string[]): { command: string; opts: Options } {
  const [command, ...rest] = argv;
  const opts: Options = { positional: [], backend: "classical", alignment: "pairwise" };
  for (let i = 0; i < rest.length; i++) {
    const arg = rest[i];
    if (arg === "--backend" || arg === "--alignment") {
      const value = rest[++i];
      if (!value) throw new UsageError(`${arg} needs a value`);
      if (arg === "--backend") opts.backend = value;
      else opts.alignment = value;
    } else if (arg.startsWith("--")) {
      throw new UsageError(`unknown flag ${arg}`);
    } else {
      opts.positional.push(arg);
    }
  }
  if (!["classical", "model"].includes(opts.backend)) {
    throw new UsageError(`unknown backend ${opts.backend}`);
  }
  if (!["pairwise", "global"].includes(opts.alignment)) {
    throw new UsageError(`unknown alignment ${opts.alignment}`);
  }
  return { command: command ?? "", opts };
}

class UsageError extends Error {}

export function exportEmbeddings(imageDir: string, outDir: string, backend = "classical"): void {
  if (backend === "model") {
    runEmbedModel(imageDir, outDir);
    readEmbeddings(outDir); // schema check on whatever the runner produced
    return;
  }
  const files = readdirSync(imageDir)
    .filter((f) => extname(f).toLowerCase() === ".png")
    .sort();
  if (files.length === 0) {
    throw new Error(`no PNG images in ${imageDir}`);
  }
  const viewIds: string[] = [];
  const rows: Float32Array[] = [];
  for (const file of files) {
    const img = loadPng(join(imageDir, file));
    rows.push(embedImage(img));
    viewIds.push(basename(file, extname(file)));
  }
  const dim = rows[0].length;
  const vectors = new Float32Array(rows.length * dim);
  rows.forEach((row, i) => vectors.set(row, i * dim));
  writeEmbeddings({ viewIds, vectors, dim }, outDir, { backend });
  readEmbeddings(outDir); // validate before declaring success
}

export function exportBundle(
  img1Path: string,
  img2Path: string,
  outDir: string,
  backend = "classical",
  alignment = "pairwise",
): void {
  if (backend === "model") {
    runBundleModel(img1Path, img2Path, outDir);
    readBundle(outDir);
    return;
  }
  const bundle = estimateBundle(loadPng(img1Path), loadPng(img2Path));
  writeBundle(bundle, outDir, { backend, alignment });
  readBundle(outDir); // validate before declaring success
}

export function main(argv: string[]): number {
  try {
    const { command, opts } = parseArgs(argv);
    if (command === "export-emb") {
      if (opts.positional.length !== 2) {
        throw new UsageError("export-emb needs <imageDir> <outDir>");
      }
      exportEmbeddings(opts.positional[0], opts.positional[1], opts.backend);
      return 0;
    }
    if (command === "export-bundle") {
      if (opts.positional.length !== 3) {
        throw new UsageError("export-bundle needs <img1> <img2> <outDir>");
      }
      exportBundle(opts.positional[0], opts.positional[1], opts.positional[2],
        opts.backend, opts.alignment);
      return 0;
    }
    throw new UsageError(
      "usage: fm-exporter export-emb <imageDir> <outDir> | " +
        "export-bundle <img1> <img2> <outDir>",
    );
  } catch (err) {
    const prefix = err instanceof UsageError ? "usage error" : "error";
    console.error(`${prefix}: ${err instanceof Error ? err.message : err}`);
    return err instanceof UsageError ? 2 : 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
