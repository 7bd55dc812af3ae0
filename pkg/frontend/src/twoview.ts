/** Classical two-view fallback: corner flow for the relative pose, block
 * matching for a depth proxy, texture energy for confidence.
 *
 * This backend stands in when no 3D model checkpoint is configured. Units
 * follow the usual monocular convention: depths are expressed relative to a
 * nominal unit distance, and the translation is reported in those units. A
 * checkpoint-backed model is resolved through FM_BUNDLE_MODEL (an executable
 * taking img1, img2, outDir); nothing is downloaded implicitly.
 */

import { execFileSync } from "node:child_process";
import { RgbImage, boxBlur, gradients, luminance } from "./image.js";
import { Bundle, RigidPose } from "./interchange.js";

const NOMINAL_DEPTH = 1.0;

export interface Corner {
  x: number;
  y: number;
}

export function harrisCorners(
  luma: Float64Array,
  width: number,
  height: number,
  maxCorners = 256,
): Corner[] {
  const { gx, gy } = gradients(luma, width, height);
  const xx = new Float64Array(width * height);
  const yy = new Float64Array(width * height);
  const xy = new Float64Array(width * height);
  for (let i = 0; i < xx.length; i++) {
    xx[i] = gx[i] * gx[i];
    yy[i] = gy[i] * gy[i];
    xy[i] = gx[i] * gy[i];
  }
  const sxx = boxBlur(xx, width, height, 2, 1);
  const syy = boxBlur(yy, width, height, 2, 1);
  const sxy = boxBlur(xy, width, height, 2, 1);
  const response = new Float64Array(width * height);
  for (let i = 0; i < response.length; i++) {
    const det = sxx[i] * syy[i] - sxy[i] * sxy[i];
    const tr = sxx[i] + syy[i];
    response[i] = det - 0.06 * tr * tr;
  }
  // best corner per 8x8 cell, above a relative threshold
  let peak = 0;
  for (const v of response) peak = Math.max(peak, v);
  const threshold = peak * 1e-4;
  const corners: { x: number; y: number; r: number }[] = [];
  const cellSize = 8;
  const margin = 6;
  for (let cy = 0; cy < Math.ceil(height / cellSize); cy++) {
    for (let cx = 0; cx < Math.ceil(width / cellSize); cx++) {
      let best = threshold;
      let bx = -1;
      let by = -1;
      const yEnd = Math.min((cy + 1) * cellSize, height - margin);
      const xEnd = Math.min((cx + 1) * cellSize, width - margin);
      for (let y = Math.max(cy * cellSize, margin); y < yEnd; y++) {
        for (let x = Math.max(cx * cellSize, margin); x < xEnd; x++) {
          const v = response[y * width + x];
          if (v > best) {
            best = v;
            bx = x;
            by = y;
          }
        }
      }
      if (bx >= 0) corners.push({ x: bx, y: by, r: best });
    }
  }
  corners.sort((a, b) => b.r - a.r);
  return corners.slice(0, maxCorners).map(({ x, y }) => ({ x, y }));
}

export interface FlowMatch {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

function ssdPatch(
  l1: Float64Array,
  l2: Float64Array,
  width: number,
  x1: number,
  y1: number,
  x2: number,
  y2: number,
  half: number,
): number {
  let ssd = 0;
  for (let dy = -half; dy <= half; dy++) {
    for (let dx = -half; dx <= half; dx++) {
      const d = l1[(y1 + dy) * width + (x1 + dx)] - l2[(y2 + dy) * width + (x2 + dx)];
      ssd += d * d;
    }
  }
  return ssd;
}

export function matchCorners(
  l1: Float64Array,
  l2: Float64Array,
  width: number,
  height: number,
  corners: Corner[],
  searchRadius = 24,
  half = 4,
): FlowMatch[] {
  const matches: FlowMatch[] = [];
  for (const { x, y } of corners) {
    if (x < half || y < half || x >= width - half || y >= height - half) continue;
    let best = Infinity;
    let bx = x;
    let by = y;
    const y0 = Math.max(half, y - searchRadius);
    const y1 = Math.min(height - half - 1, y + searchRadius);
    const x0 = Math.max(half, x - searchRadius);
    const x1 = Math.min(width - half - 1, x + searchRadius);
    for (let yy = y0; yy <= y1; yy++) {
      for (let xx = x0; xx <= x1; xx++) {
        const ssd = ssdPatch(l1, l2, width, x, y, xx, yy, half);
        if (ssd < best) {
          best = ssd;
          bx = xx;
          by = yy;
        }
      }
    }
    const patchArea = (2 * half + 1) ** 2;
    if (best / patchArea < 0.01) {
      matches.push({ x1: x, y1: y, x2: bx, y2: by });
    }
  }
  return matches;
}

export interface FlowModel {
  /** p2 ~= s R(theta) p1 + t, in image coordinates about the center */
  a: number;
  b: number;
  tx: number;
  ty: number;
}

/** Least-squares 2D similarity fit of the corner flow. */
export function fitSimilarityFlow(
  matches: FlowMatch[],
  cx: number,
  cy: number,
): FlowModel {
  if (matches.length === 0) return { a: 1, b: 0, tx: 0, ty: 0 };
  // normal equations for [a, b, tx, ty]
  let suu = 0;
  let su = 0;
  let sv = 0;
  let n = 0;
  let sux = 0;
  let svy = 0;
  let suy = 0;
  let svx = 0;
  let sx = 0;
  let sy = 0;
  for (const m of matches) {
    const u = m.x1 - cx;
    const v = m.y1 - cy;
    const x = m.x2 - cx;
    const y = m.y2 - cy;
    suu += u * u + v * v;
    su += u;
    sv += v;
    sux += u * x;
    svy += v * y;
    suy += u * y;
    svx += v * x;
    sx += x;
    sy += y;
    n++;
  }
  // closed form of the 4-parameter similarity LSQ
  const denom = suu - (su * su + sv * sv) / n;
  if (denom < 1e-9) return { a: 1, b: 0, tx: (sx - su) / n, ty: (sy - sv) / n };
  const a = (sux + svy - (su * sx + sv * sy) / n) / denom;
  const b = (suy - svx - (su * sy - sv * sx) / n) / denom;
  const tx = (sx - a * su + b * sv) / n;
  const ty = (sy - b * su - a * sv) / n;
  return { a, b, tx, ty };
}

export function poseFromFlow(model: FlowModel, width: number, height: number): RigidPose {
  const focal = Math.max(width, height); // nominal pinhole focal in pixels
  const theta = Math.atan2(model.b, model.a);
  const scale = Math.hypot(model.a, model.b);
  // dominant-baseline reading: uniform flow comes from translation, image
  // expansion from motion along the optical axis
  const tx = (-model.tx * NOMINAL_DEPTH) / focal;
  const ty = (-model.ty * NOMINAL_DEPTH) / focal;
  const tz = (scale - 1.0) * NOMINAL_DEPTH;
  return {
    qw: Math.cos(theta / 2),
    qx: 0,
    qy: 0,
    qz: Math.sin(theta / 2),
    tx,
    ty,
    tz,
  };
}

export function rotationAngleDeg(pose: RigidPose): number {
  const w = Math.min(1, Math.abs(pose.qw));
  return (2 * Math.acos(w) * 180) / Math.PI;
}

/** Disparity-based depth proxy along the dominant flow direction. */
export function depthProxy(
  l1: Float64Array,
  l2: Float64Array,
  width: number,
  height: number,
  model: FlowModel,
): Float32Array {
  const out = new Float32Array(width * height).fill(NOMINAL_DEPTH);
  const baseline = Math.hypot(model.tx, model.ty);
  if (baseline < 0.5) return out; // no measurable parallax: flat nominal depth
  const dirX = model.tx / baseline;
  const dirY = model.ty / baseline;
  const half = 4;
  const step = 4;
  const search = Math.min(48, Math.ceil(baseline * 2.5));
  const focal = Math.max(width, height);
  const disps: number[] = [];
  const grid: { x: number; y: number; depth: number }[] = [];
  for (let y = half; y < height - half; y += step) {
    for (let x = half; x < width - half; x += step) {
      let best = Infinity;
      let bestD = baseline;
      for (let k = 0; k <= search; k++) {
        const xx = Math.round(x + dirX * k);
        const yy = Math.round(y + dirY * k);
        if (xx < half || yy < half || xx >= width - half || yy >= height - half) break;
        const ssd = ssdPatch(l1, l2, width, x, y, xx, yy, half);
        if (ssd < best) {
          best = ssd;
          bestD = k;
        }
      }
      const disparity = Math.max(bestD, 0.25);
      // depth = f * B / d with the baseline in nominal units
      const depth = (focal * (baseline / focal) * NOMINAL_DEPTH) / disparity;
      disps.push(depth);
      grid.push({ x, y, depth });
    }
  }
  if (grid.length === 0) return out;
  disps.sort((p, q) => p - q);
  const median = disps[Math.floor(disps.length / 2)];
  const lo = 0.1 * NOMINAL_DEPTH;
  const hi = 10 * NOMINAL_DEPTH;
  // normalize the median to the nominal depth, then splat to full resolution
  for (const g of grid) {
    const d = Math.min(hi, Math.max(lo, (g.depth / median) * NOMINAL_DEPTH));
    for (let yy = g.y; yy < Math.min(g.y + step, height); yy++) {
      for (let xx = g.x; xx < Math.min(g.x + step, width); xx++) {
        out[yy * width + xx] = d;
      }
    }
  }
  return out;
}

/** Texture-energy confidence in [0, 1] (smoothed gradient magnitude). */
export function textureConfidence(
  luma: Float64Array,
  width: number,
  height: number,
): Float32Array {
  const { gx, gy } = gradients(luma, width, height);
  const mag = new Float64Array(width * height);
  for (let i = 0; i < mag.length; i++) mag[i] = Math.hypot(gx[i], gy[i]);
  const smooth = boxBlur(mag, width, height, 3, 2);
  const sorted = Float64Array.from(smooth).sort();
  const p95 = Math.max(sorted[Math.floor(sorted.length * 0.95)], 1e-9);
  const out = new Float32Array(width * height);
  for (let i = 0; i < out.length; i++) out[i] = Math.min(1, smooth[i] / p95);
  return out;
}

export function estimateBundle(img1: RgbImage, img2: RgbImage): Bundle {
  if (img1.width !== img2.width || img1.height !== img2.height) {
    throw new Error(
      `image sizes differ: ${img1.width}x${img1.height} vs ${img2.width}x${img2.height}`,
    );
  }
  const { width, height } = img1;
  const l1 = luminance(img1);
  const l2 = luminance(img2);
  const corners = harrisCorners(l1, width, height);
  const matches = matchCorners(l1, l2, width, height, corners);
  const model = fitSimilarityFlow(matches, width / 2, height / 2);
  const pose = poseFromFlow(model, width, height);
  const inverse: FlowModel = { a: model.a, b: -model.b, tx: -model.tx, ty: -model.ty };
  return {
    width,
    height,
    pose2to1: pose,
    depthFm1: depthProxy(l1, l2, width, height, model),
    depthFm2: depthProxy(l2, l1, width, height, inverse),
    conf1: textureConfidence(l1, width, height),
    conf2: textureConfidence(l2, width, height),
  };
}

/** Runs the checkpoint-backed exporter named by FM_BUNDLE_MODEL. */
export function runModelBackend(img1: string, img2: string, outDir: string): void {
  const cmd = process.env.FM_BUNDLE_MODEL;
  if (!cmd) {
    throw new Error(
      "backend 'model' requires FM_BUNDLE_MODEL to point at the two-view model runner " +
        "(no checkpoints are downloaded implicitly)",
    );
  }
  execFileSync(cmd, [img1, img2, outDir], { stdio: "inherit" });
}
