/** Image loading and pixel-level helpers shared by the exporter backends. */

import { readFileSync, writeFileSync } from "node:fs";
import { PNG } from "pngjs";

export interface RgbImage {
  width: number;
  height: number;
  /** row-major RGB triples in [0, 1] */
  data: Float64Array;
}

export function loadPng(path: string): RgbImage {
  const png = PNG.sync.read(readFileSync(path));
  const { width, height } = png;
  const data = new Float64Array(width * height * 3);
  for (let i = 0; i < width * height; i++) {
    data[i * 3] = png.data[i * 4] / 255;
    data[i * 3 + 1] = png.data[i * 4 + 1] / 255;
    data[i * 3 + 2] = png.data[i * 4 + 2] / 255;
  }
  return { width, height, data };
}

export function savePng(img: RgbImage, path: string): void {
  const png = new PNG({ width: img.width, height: img.height });
  for (let i = 0; i < img.width * img.height; i++) {
    png.data[i * 4] = Math.round(Math.min(1, Math.max(0, img.data[i * 3])) * 255);
    png.data[i * 4 + 1] = Math.round(Math.min(1, Math.max(0, img.data[i * 3 + 1])) * 255);
    png.data[i * 4 + 2] = Math.round(Math.min(1, Math.max(0, img.data[i * 3 + 2])) * 255);
    png.data[i * 4 + 3] = 255;
  }
  writeFileSync(path, PNG.sync.write(png));
}

export function luminance(img: RgbImage): Float64Array {
  const out = new Float64Array(img.width * img.height);
  for (let i = 0; i < out.length; i++) {
    out[i] =
      0.299 * img.data[i * 3] + 0.587 * img.data[i * 3 + 1] + 0.114 * img.data[i * 3 + 2];
  }
  return out;
}

/** Box-average resample to a fixed grid (used before feature extraction). */
export function resize(img: RgbImage, width: number, height: number): RgbImage {
  const out = new Float64Array(width * height * 3);
  for (let y = 0; y < height; y++) {
    const y0 = Math.floor((y * img.height) / height);
    const y1 = Math.max(y0 + 1, Math.floor(((y + 1) * img.height) / height));
    for (let x = 0; x < width; x++) {
      const x0 = Math.floor((x * img.width) / width);
      const x1 = Math.max(x0 + 1, Math.floor(((x + 1) * img.width) / width));
      let r = 0;
      let g = 0;
      let b = 0;
      let n = 0;
      for (let yy = y0; yy < y1; yy++) {
        for (let xx = x0; xx < x1; xx++) {
          const i = (yy * img.width + xx) * 3;
          r += img.data[i];
          g += img.data[i + 1];
          b += img.data[i + 2];
          n++;
        }
      }
      const o = (y * width + x) * 3;
      out[o] = r / n;
      out[o + 1] = g / n;
      out[o + 2] = b / n;
    }
  }
  return { width, height, data: out };
}

/** Central-difference gradients of a luma plane. */
export function gradients(
  luma: Float64Array,
  width: number,
  height: number,
): { gx: Float64Array; gy: Float64Array } {
  const gx = new Float64Array(width * height);
  const gy = new Float64Array(width * height);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = y * width + x;
      const xm = luma[y * width + Math.max(0, x - 1)];
      const xp = luma[y * width + Math.min(width - 1, x + 1)];
      const ym = luma[Math.max(0, y - 1) * width + x];
      const yp = luma[Math.min(height - 1, y + 1) * width + x];
      gx[i] = 0.5 * (xp - xm);
      gy[i] = 0.5 * (yp - ym);
    }
  }
  return { gx, gy };
}

/** Separable box blur, repeated for a roughly Gaussian response. */
export function boxBlur(
  plane: Float64Array,
  width: number,
  height: number,
  radius: number,
  passes = 2,
): Float64Array {
  let src = Float64Array.from(plane);
  let dst = new Float64Array(plane.length);
  for (let p = 0; p < passes; p++) {
    // horizontal
    for (let y = 0; y < height; y++) {
      for (let x = 0; x < width; x++) {
        let acc = 0;
        let n = 0;
        for (let k = -radius; k <= radius; k++) {
          const xx = x + k;
          if (xx >= 0 && xx < width) {
            acc += src[y * width + xx];
            n++;
          }
        }
        dst[y * width + x] = acc / n;
      }
    }
    [src, dst] = [dst, src];
    // vertical
    for (let y = 0; y < height; y++) {
      for (let x = 0; x < width; x++) {
        let acc = 0;
        let n = 0;
        for (let k = -radius; k <= radius; k++) {
          const yy = y + k;
          if (yy >= 0 && yy < height) {
            acc += src[yy * width + x];
            n++;
          }
        }
        dst[y * width + x] = acc / n;
      }
    }
    [src, dst] = [dst, src];
  }
  return src;
}
