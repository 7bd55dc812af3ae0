"""Command-line entry point: each subcommand maps onto one pipeline stage."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from .camera import load_views, save_views
from .cloud import GaussianCloud
from .coarse import coarse_register
from .interchange import read_bundle, read_embeddings, write_bundle
from .matching import best_pair
from .merge import FusionPlan, fuse_many, merge
from .metrics import psnr, ssim
from .ply import load_ply, save_ply
from .refine import RefineConfig, refine, refinement_views_for
from .renderer import render
from .reports import (
    read_transform_report,
    write_coarse_report,
    write_loss_table,
    write_metrics_table,
    write_transform_report,
)
from .sim3 import Sim3
from .synth import make_ring_views, make_scene, make_synthetic_bundle, random_sim3, split_scene, SplitTruth

log = logging.getLogger("splatreg")


def _save_png(rgb: np.ndarray, path: Path) -> None:
    img = (np.clip(rgb, 0.0, 1.0) * 255.0).round().astype(np.uint8)
    Image.fromarray(img).save(path)


def _load_png(path: Path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("RGB"), dtype=np.float64) / 255.0


def _pick_views(views, ids_arg: str | None):
    if not ids_arg:
        return views
    wanted = ids_arg.split(",")
    by_id = {v.view_id: v for v in views}
    missing = [i for i in wanted if i not in by_id]
    if missing:
        raise ValueError(f"view ids not found: {missing}")
    return [by_id[i] for i in wanted]


def _view_by_id(views, view_id: str, what: str):
    by_id = {v.view_id: v for v in views}
    if view_id not in by_id:
        raise ValueError(f"{what}: no view with id {view_id!r}")
    return by_id[view_id]


# --- subcommand implementations --------------------------------------------

def cmd_synth(args) -> int:
    if args.mode == "scene":
        cloud = make_scene(args.count, extent=args.extent, seed=args.seed,
                           sh_degree=args.sh_degree)
        save_ply(cloud, args.out)
        log.info("wrote %d gaussians to %s", len(cloud), args.out)
        if args.views_out:
            views = make_ring_views(radius=args.view_radius * args.extent,
                                    count=args.views, width=args.view_size,
                                    height=args.view_size)
            save_views(views, args.views_out)
            log.info("wrote %d ring views to %s", len(views), args.views_out)
        return 0
    if args.mode == "split":
        cloud = load_ply(args.cloud)
        t_true = random_sim3(args.rot_deg, args.trans_frac * cloud.scene_diameter(),
                             args.scale, seed=args.seed)
        g1, g2, truth = split_scene(cloud, args.overlap, t_true, seed=args.seed)
        save_ply(g1, args.out1)
        save_ply(g2, args.out2)
        truth.save(args.truth)
        log.info("split %d -> %d + %d (overlap %d)", len(cloud), len(g1), len(g2),
                 truth.overlap_ids.size)
        return 0
    # bundle
    g1 = load_ply(args.g1)
    g2 = load_ply(args.g2)
    truth = SplitTruth.load(args.truth)
    views = load_views(args.cams)
    view1 = _view_by_id(views, args.cam_id, "--cam-id")
    bundle, view2 = make_synthetic_bundle(
        g1, g2, truth, view1,
        rot_noise_deg=args.rot_noise_deg, trans_noise_frac=args.trans_noise_frac,
        scale_noise_frac=args.scale_noise_frac, depth_noise=args.depth_noise,
        conf_profile=args.conf_profile, fm_scale=args.fm_scale, seed=args.seed,
    )
    write_bundle(bundle, args.out)
    if args.cam2_out:
        save_views([view2], args.cam2_out)
    log.info("wrote synthetic bundle to %s", args.out)
    return 0


def cmd_render(args) -> int:
    cloud = load_ply(args.cloud)
    views = _pick_views(load_views(args.cams), args.ids)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for v in views:
        out = render(cloud, v)
        name = v.view_id or f"view{views.index(v):03d}"
        _save_png(out.rgb, out_dir / f"{name}.png")
        if args.save_depth:
            (out_dir / f"{name}_depth.f32").write_bytes(
                out.depth.astype("<f4").tobytes())
        if args.save_alpha:
            (out_dir / f"{name}_alpha.f32").write_bytes(
                out.alpha.astype("<f4").tobytes())
    log.info("rendered %d views into %s", len(views), out_dir)
    return 0


def cmd_match(args) -> int:
    e1 = read_embeddings(args.emb1)
    e2 = read_embeddings(args.emb2)
    id1, id2, score = best_pair(e1, e2)
    print(f"{id1}\t{id2}\t{score:.6f}")
    if args.out:
        Path(args.out).write_text(json.dumps(
            {"kind": "match", "view_id_1": id1, "view_id_2": id2, "score": score},
            indent=2, sort_keys=True) + "\n")
    return 0


def cmd_coarse(args) -> int:
    g1 = load_ply(args.g1)
    g2 = load_ply(args.g2)
    view1 = _view_by_id(load_views(args.cams1), args.id1, "--id1")
    view2 = _view_by_id(load_views(args.cams2), args.id2, "--id2")
    bundle = read_bundle(args.bundle)
    est = coarse_register(g1, g2, view1, view2, bundle)
    write_coarse_report(est, args.out)
    log.info("coarse transform: %s (scale %.6g)", est.transform, est.scale_ratio)
    return 0


def cmd_refine(args) -> int:
    g1 = load_ply(args.g1)
    g2 = load_ply(args.g2)
    t_init = read_transform_report(args.init)
    view1 = _view_by_id(load_views(args.cams1), args.id1, "--id1")
    view2 = _view_by_id(load_views(args.cams2), args.id2, "--id2")
    pool = refinement_views_for(view1, view2, t_init, args.pool_views, seed=args.seed)
    cfg = RefineConfig(
        max_iters=args.max_iters, lr_rot=args.lr_rot, lr_trans=args.lr_trans,
        lr_logscale=args.lr_logscale, views_per_iter=args.views_per_iter,
        convergence_tol=args.tol, seed=args.seed, freeze_sh=not args.full_sh_grad,
    )
    result = refine(g1, g2, t_init, pool, cfg)
    write_transform_report(result.transform, args.out, extra={
        "final_loss": result.final_loss, "iterations": result.iterations,
        "converged": result.converged,
    })
    if args.loss_out:
        write_loss_table(result.loss_history, args.loss_out)
    log.info("refined transform: %s (loss %.6g after %d iters)",
             result.transform, result.final_loss, result.iterations)
    return 0


def cmd_transform(args) -> int:
    from .cloud import transform_cloud

    cloud = load_ply(args.cloud)
    t = read_transform_report(args.sim3)
    if args.inverse:
        t = t.inverse()
    save_ply(transform_cloud(cloud, t), args.out)
    return 0


def cmd_merge(args) -> int:
    g1 = load_ply(args.g1)
    g2 = load_ply(args.g2)
    t = read_transform_report(args.sim3)
    fused = merge(g1, g2, t)
    save_ply(fused, args.out)
    log.info("merged %d + %d -> %d gaussians", len(g1), len(g2), len(fused))
    return 0


def cmd_fuse_many(args) -> int:
    spec = json.loads(Path(args.plan).read_text())
    clouds = [load_ply(p) for p in spec["clouds"]]
    plan = FusionPlan.from_dict(spec)
    fused = fuse_many(clouds, plan)
    save_ply(fused, args.out)
    log.info("fused %d clouds -> %d gaussians", len(clouds), len(fused))
    return 0


def cmd_eval(args) -> int:
    rows = []
    if args.img_a:
        a = _load_png(Path(args.img_a))
        b = _load_png(Path(args.img_b))
        rows.append({"name": Path(args.img_a).stem, "psnr": psnr(a, b), "ssim": ssim(a, b)})
    else:
        cloud_a = load_ply(args.cloud_a)
        cloud_b = load_ply(args.cloud_b)
        views = _pick_views(load_views(args.cams), args.ids)
        for v in views:
            ra = render(cloud_a, v).rgb
            rb = render(cloud_b, v).rgb
            rows.append({"name": v.view_id, "psnr": psnr(ra, rb), "ssim": ssim(ra, rb)})
    for r in rows:
        print(f"{r['name']}\t{r['psnr']:.4f}\t{r['ssim']:.6f}")
    if args.out:
        write_metrics_table(rows, args.out)
    return 0


def cmd_pipeline(args) -> int:
    g1 = load_ply(args.g1)
    g2 = load_ply(args.g2)
    e1 = read_embeddings(args.emb1)
    e2 = read_embeddings(args.emb2)
    views1 = load_views(args.cams1)
    views2 = load_views(args.cams2)
    bundle = read_bundle(args.bundle)

    id1, id2, score = best_pair(e1, e2)
    log.info("matched pair %s / %s (score %.4f)", id1, id2, score)
    view1 = _view_by_id(views1, id1, "match")
    view2 = _view_by_id(views2, id2, "match")

    est = coarse_register(g1, g2, view1, view2, bundle)
    log.info("coarse: %s", est.transform)

    pool = refinement_views_for(view1, view2, est.transform, args.pool_views,
                                seed=args.seed)
    cfg = RefineConfig(
        max_iters=args.max_iters, lr_rot=args.lr_rot, lr_trans=args.lr_trans,
        lr_logscale=args.lr_logscale, views_per_iter=args.views_per_iter,
        convergence_tol=args.tol, seed=args.seed, freeze_sh=not args.full_sh_grad,
    )
    result = refine(g1, g2, est.transform, pool, cfg)
    log.info("refined: %s (loss %.6g)", result.transform, result.final_loss)

    fused = merge(g1, g2, result.transform)
    save_ply(fused, args.out)
    if args.report:
        write_transform_report(result.transform, args.report, extra={
            "pair": [id1, id2], "pair_score": score,
            "coarse": est.transform.to_dict(), "scale_ratio": est.scale_ratio,
            "final_loss": result.final_loss, "iterations": result.iterations,
        })
    if args.loss_out:
        write_loss_table(result.loss_history, args.loss_out)
    if args.metrics_out:
        rows = []
        for v in pool[: min(4, len(pool))]:
            ra = render(g1, v).rgb
            rb = render(g2, v, transform=result.transform).rgb
            rows.append({"name": v.view_id, "psnr": psnr(ra, rb), "ssim": ssim(ra, rb)})
        write_metrics_table(rows, args.metrics_out)
    log.info("wrote fused model to %s", args.out)
    return 0


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="splatreg",
        description="Align and fuse 3D Gaussian splatting models.",
    )
    p.add_argument("--log-level", default="info",
                   choices=["debug", "info", "warning", "error"])
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads (kernels are serial for determinism)")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate synthetic scenes, splits, bundles")
    sp.add_argument("--mode", choices=["scene", "split", "bundle"], default="scene")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--count", type=int, default=5000)
    sp.add_argument("--extent", type=float, default=1.0)
    sp.add_argument("--sh-degree", type=int, default=3)
    sp.add_argument("--out", help="output PLY (scene) or bundle dir (bundle)")
    sp.add_argument("--views-out", help="also write a ring of camera views")
    sp.add_argument("--views", type=int, default=8)
    sp.add_argument("--view-size", type=int, default=256)
    sp.add_argument("--view-radius", type=float, default=3.2)
    sp.add_argument("--cloud", help="input PLY for --mode split")
    sp.add_argument("--overlap", type=float, default=0.3)
    sp.add_argument("--rot-deg", type=float, default=20.0)
    sp.add_argument("--scale", type=float, default=1.7)
    sp.add_argument("--trans-frac", type=float, default=0.3)
    sp.add_argument("--out1")
    sp.add_argument("--out2")
    sp.add_argument("--truth")
    sp.add_argument("--g1")
    sp.add_argument("--g2")
    sp.add_argument("--cams")
    sp.add_argument("--cam-id")
    sp.add_argument("--cam2-out")
    sp.add_argument("--rot-noise-deg", type=float, default=0.0)
    sp.add_argument("--trans-noise-frac", type=float, default=0.0)
    sp.add_argument("--scale-noise-frac", type=float, default=0.0)
    sp.add_argument("--depth-noise", type=float, default=0.0)
    sp.add_argument("--conf-profile", choices=["uniform", "edge"], default="uniform")
    sp.add_argument("--fm-scale", type=float, default=1.0)
    sp.set_defaults(func=cmd_synth)

    rp = sub.add_parser("render", help="render views of a cloud to PNG")
    rp.add_argument("--cloud", required=True)
    rp.add_argument("--cams", required=True)
    rp.add_argument("--ids", help="comma-separated view ids (default: all)")
    rp.add_argument("--out", required=True)
    rp.add_argument("--save-depth", action="store_true")
    rp.add_argument("--save-alpha", action="store_true")
    rp.set_defaults(func=cmd_render)

    mp = sub.add_parser("match", help="best view pair by embedding similarity")
    mp.add_argument("--emb1", required=True)
    mp.add_argument("--emb2", required=True)
    mp.add_argument("--out")
    mp.set_defaults(func=cmd_match)

    cp = sub.add_parser("coarse", help="initial transform from a foundation bundle")
    cp.add_argument("--g1", required=True)
    cp.add_argument("--g2", required=True)
    cp.add_argument("--cams1", required=True)
    cp.add_argument("--cams2", required=True)
    cp.add_argument("--id1", required=True)
    cp.add_argument("--id2", required=True)
    cp.add_argument("--bundle", required=True)
    cp.add_argument("--out", required=True)
    cp.set_defaults(func=cmd_coarse)

    fp = sub.add_parser("refine", help="photometric refinement of a transform")
    fp.add_argument("--g1", required=True)
    fp.add_argument("--g2", required=True)
    fp.add_argument("--init", required=True, help="transform report JSON")
    fp.add_argument("--cams1", required=True)
    fp.add_argument("--cams2", required=True)
    fp.add_argument("--id1", required=True)
    fp.add_argument("--id2", required=True)
    fp.add_argument("--out", required=True)
    fp.add_argument("--loss-out")
    fp.add_argument("--max-iters", type=int, default=200)
    fp.add_argument("--pool-views", type=int, default=8)
    fp.add_argument("--views-per-iter", type=int, default=4)
    fp.add_argument("--lr-rot", type=float, default=1e-3)
    fp.add_argument("--lr-trans", type=float, default=None)
    fp.add_argument("--lr-logscale", type=float, default=1e-3)
    fp.add_argument("--tol", type=float, default=1e-7)
    fp.add_argument("--seed", type=int, default=0)
    fp.add_argument("--full-sh-grad", action="store_true",
                    help="propagate gradients through SH rotation (slower)")
    fp.set_defaults(func=cmd_refine)

    tp = sub.add_parser("transform", help="apply a transform report to a cloud")
    tp.add_argument("--cloud", "--in", dest="cloud", required=True)
    tp.add_argument("--sim3", required=True)
    tp.add_argument("--out", required=True)
    tp.add_argument("--inverse", action="store_true")
    tp.set_defaults(func=cmd_transform)

    gp = sub.add_parser("merge", help="apply transform to g2 and concatenate with g1")
    gp.add_argument("--g1", required=True)
    gp.add_argument("--g2", required=True)
    gp.add_argument("--sim3", required=True)
    gp.add_argument("--out", required=True)
    gp.set_defaults(func=cmd_merge)

    up = sub.add_parser("fuse-many", help="fold multiple clouds into a root frame")
    up.add_argument("--plan", required=True,
                    help='JSON: {"clouds": [...], "root": 0, "edges": [...]}')
    up.add_argument("--out", required=True)
    up.set_defaults(func=cmd_fuse_many)

    ep = sub.add_parser("eval", help="PSNR/SSIM between images or rendered clouds")
    ep.add_argument("--img-a")
    ep.add_argument("--img-b")
    ep.add_argument("--cloud-a")
    ep.add_argument("--cloud-b")
    ep.add_argument("--cams")
    ep.add_argument("--ids")
    ep.add_argument("--out")
    ep.set_defaults(func=cmd_eval)

    pp = sub.add_parser("pipeline", help="match -> coarse -> refine -> merge")
    pp.add_argument("--g1", required=True)
    pp.add_argument("--g2", required=True)
    pp.add_argument("--bundle", required=True)
    pp.add_argument("--emb1", required=True)
    pp.add_argument("--emb2", required=True)
    pp.add_argument("--cams1", required=True)
    pp.add_argument("--cams2", required=True)
    pp.add_argument("--out", required=True)
    pp.add_argument("--report")
    pp.add_argument("--loss-out")
    pp.add_argument("--metrics-out")
    pp.add_argument("--max-iters", type=int, default=200)
    pp.add_argument("--pool-views", type=int, default=8)
    pp.add_argument("--views-per-iter", type=int, default=4)
    pp.add_argument("--lr-rot", type=float, default=1e-3)
    pp.add_argument("--lr-trans", type=float, default=None)
    pp.add_argument("--lr-logscale", type=float, default=1e-3)
    pp.add_argument("--tol", type=float, default=1e-7)
    pp.add_argument("--seed", type=int, default=0)
    pp.add_argument("--full-sh-grad", action="store_true")
    pp.set_defaults(func=cmd_pipeline)

    return p


def _validate(args, parser) -> None:
    if args.command == "synth":
        need = {
            "scene": ["out"],
            "split": ["cloud", "out1", "out2", "truth"],
            "bundle": ["g1", "g2", "truth", "cams", "cam_id", "out"],
        }[args.mode]
        missing = [n for n in need if not getattr(args, n)]
        if missing:
            parser.error(f"synth --mode {args.mode} requires: "
                         + ", ".join("--" + n.replace("_", "-") for n in missing))
    if args.command == "eval":
        img_mode = bool(args.img_a or args.img_b)
        cloud_mode = bool(args.cloud_a or args.cloud_b)
        if img_mode == cloud_mode:
            parser.error("eval needs either --img-a/--img-b or --cloud-a/--cloud-b/--cams")
        if img_mode and not (args.img_a and args.img_b):
            parser.error("eval needs both --img-a and --img-b")
        if cloud_mode and not (args.cloud_a and args.cloud_b and args.cams):
            parser.error("eval needs --cloud-a, --cloud-b and --cams")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    _validate(args, parser)
    try:
        return args.func(args)
    except FileNotFoundError as exc:  # missing inputs are usage errors
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pipeline-stage failure -> exit 1, one parseable line
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        if args.log_level == "debug":
            raise
        return 1


if __name__ == "__main__":
    sys.exit(main())
