/** Interchange files consumed by the registration pipeline: a human-readable
 * meta.json header plus raw little-endian float32 buffers in a directory. */

import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

export const SCHEMA_VERSION = 1;

export interface RigidPose {
  qw: number;
  qx: number;
  qy: number;
  qz: number;
  tx: number;
  ty: number;
  tz: number;
}

export interface Bundle {
  width: number;
  height: number;
  pose2to1: RigidPose;
  /** row-major (height x width) maps */
  depthFm1: Float32Array;
  depthFm2: Float32Array;
  conf1: Float32Array;
  conf2: Float32Array;
}

export interface Embeddings {
  viewIds: string[];
  /** (count x dim) row-major */
  vectors: Float32Array;
  dim: number;
}

export class SchemaError extends Error {}

function assertMap(name: string, map: Float32Array, pixels: number): void {
  if (map.length !== pixels) {
    throw new SchemaError(`${name} has ${map.length} values, expected ${pixels}`);
  }
  for (const v of map) {
    if (!Number.isFinite(v)) throw new SchemaError(`non-finite value in ${name}`);
  }
}

export function validateBundle(bundle: Bundle): void {
  const pixels = bundle.width * bundle.height;
  if (pixels <= 0) throw new SchemaError("bundle has empty dimensions");
  assertMap("depth_fm_1", bundle.depthFm1, pixels);
  assertMap("depth_fm_2", bundle.depthFm2, pixels);
  assertMap("conf_1", bundle.conf1, pixels);
  assertMap("conf_2", bundle.conf2, pixels);
  for (const [name, conf] of [["conf_1", bundle.conf1], ["conf_2", bundle.conf2]] as const) {
    let positive = false;
    for (const v of conf) {
      if (v < 0) throw new SchemaError(`negative confidence in ${name}`);
      if (v > 0) positive = true;
    }
    if (!positive) throw new SchemaError(`${name} has no positive entries`);
  }
  const q = [bundle.pose2to1.qw, bundle.pose2to1.qx, bundle.pose2to1.qy, bundle.pose2to1.qz];
  const norm = Math.hypot(...q);
  if (!Number.isFinite(norm) || Math.abs(norm - 1) > 1e-6) {
    throw new SchemaError(`pose quaternion norm ${norm} is not unit`);
  }
}

function f32Bytes(values: Float32Array): Buffer {
  const buf = Buffer.alloc(values.length * 4);
  for (let i = 0; i < values.length; i++) buf.writeFloatLE(values[i], i * 4);
  return buf;
}

function readF32(path: string, count: number, what: string): Float32Array {
  const raw = readFileSync(path);
  if (raw.length !== count * 4) {
    throw new SchemaError(`${what}: ${raw.length} bytes, expected ${count * 4} (dimension mismatch)`);
  }
  const out = new Float32Array(count);
  for (let i = 0; i < count; i++) out[i] = raw.readFloatLE(i * 4);
  return out;
}

function stableJson(value: unknown): string {
  const sortKeys = (v: unknown): unknown => {
    if (Array.isArray(v)) return v.map(sortKeys);
    if (v && typeof v === "object") {
      return Object.fromEntries(
        Object.entries(v as Record<string, unknown>)
          .sort(([a], [b]) => (a < b ? -1 : 1))
          .map(([k, vv]) => [k, sortKeys(vv)]),
      );
    }
    return v;
  };
  return JSON.stringify(sortKeys(value), null, 2) + "\n";
}

export interface ExporterInfo {
  backend: string;
  alignment?: string;
}

export function writeBundle(bundle: Bundle, dir: string, exporter?: ExporterInfo): void {
  validateBundle(bundle);
  mkdirSync(dir, { recursive: true });
  const meta = {
    schema_version: SCHEMA_VERSION,
    kind: "foundation_bundle",
    width: bundle.width,
    height: bundle.height,
    dtype: "float32",
    depth_convention: "z",
    pose_2_to_1: bundle.pose2to1,
    buffers: {
      depth_fm_1: "depth_fm_1.f32",
      depth_fm_2: "depth_fm_2.f32",
      conf_1: "conf_1.f32",
      conf_2: "conf_2.f32",
    },
    ...(exporter ? { exporter } : {}),
  };
  writeFileSync(join(dir, "meta.json"), stableJson(meta));
  writeFileSync(join(dir, "depth_fm_1.f32"), f32Bytes(bundle.depthFm1));
  writeFileSync(join(dir, "depth_fm_2.f32"), f32Bytes(bundle.depthFm2));
  writeFileSync(join(dir, "conf_1.f32"), f32Bytes(bundle.conf1));
  writeFileSync(join(dir, "conf_2.f32"), f32Bytes(bundle.conf2));
}

export function readBundle(dir: string): Bundle {
  const meta = JSON.parse(readFileSync(join(dir, "meta.json"), "utf-8"));
  if (meta.schema_version !== SCHEMA_VERSION) {
    throw new SchemaError(`unknown schema version ${meta.schema_version}`);
  }
  if (meta.kind !== "foundation_bundle") {
    throw new SchemaError(`expected foundation_bundle, got ${meta.kind}`);
  }
  const pixels = meta.width * meta.height;
  const bundle: Bundle = {
    width: meta.width,
    height: meta.height,
    pose2to1: meta.pose_2_to_1,
    depthFm1: readF32(join(dir, meta.buffers.depth_fm_1), pixels, "depth_fm_1"),
    depthFm2: readF32(join(dir, meta.buffers.depth_fm_2), pixels, "depth_fm_2"),
    conf1: readF32(join(dir, meta.buffers.conf_1), pixels, "conf_1"),
    conf2: readF32(join(dir, meta.buffers.conf_2), pixels, "conf_2"),
  };
  validateBundle(bundle);
  return bundle;
}

export function writeEmbeddings(emb: Embeddings, dir: string, exporter?: ExporterInfo): void {
  const count = emb.viewIds.length;
  if (count < 1 || emb.dim < 1 || emb.vectors.length !== count * emb.dim) {
    throw new SchemaError(
      `embeddings shape mismatch: ${count} ids, dim ${emb.dim}, ${emb.vectors.length} values`,
    );
  }
  for (let i = 0; i < count; i++) {
    let norm = 0;
    for (let j = 0; j < emb.dim; j++) norm += emb.vectors[i * emb.dim + j] ** 2;
    if (!(norm > 0)) throw new SchemaError(`zero-norm embedding for view ${emb.viewIds[i]}`);
  }
  mkdirSync(dir, { recursive: true });
  const meta = {
    schema_version: SCHEMA_VERSION,
    kind: "embedding_set",
    count,
    dim: emb.dim,
    dtype: "float32",
    view_ids: emb.viewIds,
    buffers: { vectors: "vectors.f32" },
    ...(exporter ? { exporter } : {}),
  };
  writeFileSync(join(dir, "meta.json"), stableJson(meta));
  writeFileSync(join(dir, "vectors.f32"), f32Bytes(emb.vectors));
}

export function readEmbeddings(dir: string): Embeddings {
  const meta = JSON.parse(readFileSync(join(dir, "meta.json"), "utf-8"));
  if (meta.schema_version !== SCHEMA_VERSION || meta.kind !== "embedding_set") {
    throw new SchemaError(`not an embedding set (${meta.kind} v${meta.schema_version})`);
  }
  const vectors = readF32(join(dir, meta.buffers.vectors), meta.count * meta.dim, "vectors");
  return { viewIds: meta.view_ids, vectors, dim: meta.dim };
}
