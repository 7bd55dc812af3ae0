import { execFileSync } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

/** Temp workspace for files produced during a test run. */
export function scratchDir(prefix: string): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

/** Invoke the registration pipeline's CLI (the exporter's only consumer). */
export function splatreg(...args: string[]): void {
  execFileSync("splatreg", args, { stdio: "pipe" });
}

export function python(code: string): string {
  return execFileSync("python3", ["-c", code], { stdio: "pipe" }).toString();
}

/** Render a ring of views of a synthetic scene; returns the render dir. */
export function renderScene(
  dir: string,
  name: string,
  seed: number,
  views = 8,
  size = 96,
  count = 500,
  extent = 1.0,
  viewRadius = 3.2,
): string {
  const cloud = join(dir, `${name}.ply`);
  const cams = join(dir, `${name}_views.json`);
  const out = join(dir, `${name}_renders`);
  splatreg(
    "synth", "--mode", "scene", "--count", String(count), "--seed", String(seed),
    "--extent", String(extent), "--out", cloud, "--views-out", cams,
    "--views", String(views), "--view-size", String(size),
    "--view-radius", String(viewRadius / extent),
  );
  splatreg("render", "--cloud", cloud, "--cams", cams, "--out", out);
  return out;
}

/** Render one scene from two cameras separated along x (a stereo-like pair). */
export function renderStereoPair(dir: string, seed: number, baseline = 0.5): string {
  const cloud = join(dir, "stereo.ply");
  const cams = join(dir, "stereo_views.json");
  const out = join(dir, "stereo_renders");
  splatreg("synth", "--mode", "scene", "--count", "500", "--seed", String(seed),
    "--out", cloud);
  python(`
from splatreg import look_at, save_views
views = [
    look_at(eye=(-${baseline} / 2, 0.0, -3.2), target=(0, 0, 0), width=96, height=96, view_id="left"),
    look_at(eye=(+${baseline} / 2, 0.0, -3.2), target=(0, 0, 0), width=96, height=96, view_id="right"),
]
save_views(views, ${JSON.stringify(join(dir, "stereo_views.json"))})
`);
  splatreg("render", "--cloud", cloud, "--cams", cams, "--out", out);
  return out;
}
