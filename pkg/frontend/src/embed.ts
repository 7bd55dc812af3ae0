/** Image embedding backends.
 *
 * The default backend is a deterministic classical descriptor (spatial color
 * means, gradient-orientation histograms, and global color histograms) that
 * preserves the ordering property the pipeline needs: views of one scene
 * embed closer to each other than to views of a different scene. A
 * checkpoint-backed model is resolved through FM_EMBED_MODEL, which names an
 * executable taking (imageDir, outDir); nothing is downloaded implicitly.
 */

import { execFileSync } from "node:child_process";
import { RgbImage, boxBlur, gradients, luminance, resize } from "./image.js";

const GRID = 4;
const ORIENT_BINS = 8;
const COLOR_BINS = 16;
const PATCH = 32;

function normalizeBlock(values: number[], from: number, to: number): void {
  let norm = 0;
  for (let i = from; i < to; i++) norm += values[i] * values[i];
  norm = Math.sqrt(norm);
  if (norm > 1e-12) {
    for (let i = from; i < to; i++) values[i] /= norm;
  }
}

/** Deterministic global image descriptor; unit L2 norm, never the zero vector. */
export function embedImage(img: RgbImage): Float32Array {
  const small = resize(img, PATCH, PATCH);
  const features: number[] = [];

  // per-cell mean color
  const cell = PATCH / GRID;
  const colorStart = features.length;
  for (let gy = 0; gy < GRID; gy++) {
    for (let gx = 0; gx < GRID; gx++) {
      let r = 0;
      let g = 0;
      let b = 0;
      for (let y = gy * cell; y < (gy + 1) * cell; y++) {
        for (let x = gx * cell; x < (gx + 1) * cell; x++) {
          const i = (y * PATCH + x) * 3;
          r += small.data[i];
          g += small.data[i + 1];
          b += small.data[i + 2];
        }
      }
      features.push(r / (cell * cell), g / (cell * cell), b / (cell * cell));
    }
  }
  normalizeBlock(features, colorStart, features.length);

  // per-cell gradient-orientation histograms on luma
  const luma = luminance(small);
  const { gx, gy } = gradients(luma, PATCH, PATCH);
  const orientStart = features.length;
  const hog = new Array(GRID * GRID * ORIENT_BINS).fill(0);
  for (let y = 0; y < PATCH; y++) {
    for (let x = 0; x < PATCH; x++) {
      const i = y * PATCH + x;
      const mag = Math.hypot(gx[i], gy[i]);
      if (mag < 1e-9) continue;
      const ang = Math.atan2(gy[i], gx[i]); // [-pi, pi]
      let bin = Math.floor(((ang + Math.PI) / (2 * Math.PI)) * ORIENT_BINS);
      if (bin >= ORIENT_BINS) bin = ORIENT_BINS - 1;
      const cellIdx = Math.floor(y / cell) * GRID + Math.floor(x / cell);
      hog[cellIdx * ORIENT_BINS + bin] += mag;
    }
  }
  features.push(...hog);
  normalizeBlock(features, orientStart, features.length);

  // global per-channel color histograms (always has mass)
  const histStart = features.length;
  const hist = new Array(3 * COLOR_BINS).fill(0);
  for (let i = 0; i < PATCH * PATCH; i++) {
    for (let ch = 0; ch < 3; ch++) {
      let bin = Math.floor(small.data[i * 3 + ch] * COLOR_BINS);
      if (bin >= COLOR_BINS) bin = COLOR_BINS - 1;
      hist[ch * COLOR_BINS + bin] += 1;
    }
  }
  features.push(...hist.map((v) => v / (PATCH * PATCH)));
  normalizeBlock(features, histStart, features.length);

  const out = new Float32Array(features);
  let norm = 0;
  for (const v of out) norm += v * v;
  norm = Math.sqrt(norm);
  for (let i = 0; i < out.length; i++) out[i] /= norm;
  return out;
}

export function cosine(a: Float32Array, b: Float32Array): number {
  let dot = 0;
  let na = 0;
  let nb = 0;
  for (let i = 0; i < a.length; i++) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / Math.sqrt(na * nb);
}

export type EmbedBackend = "classical" | "model";

/** Runs the checkpoint-backed exporter named by FM_EMBED_MODEL. */
export function runModelBackend(imageDir: string, outDir: string): void {
  const cmd = process.env.FM_EMBED_MODEL;
  if (!cmd) {
    throw new Error(
      "backend 'model' requires FM_EMBED_MODEL to point at the embedding model runner " +
        "(no checkpoints are downloaded implicitly)",
    );
  }
  execFileSync(cmd, [imageDir, outDir], { stdio: "inherit" });
}
