"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion lines.
Budgets and tolerances are fixed here; the end-to-end recovery uses the full
5000-splat instance at 256x256.
"""

import time

import numpy as np
import pytest

from splatreg import (
    FusionEdge,
    FusionPlan,
    GaussianCloud,
    RefineConfig,
    Sim3,
    coarse_register,
    fuse_many,
    icp_umeyama,
    look_at,
    make_ring_views,
    make_scene,
    make_synthetic_bundle,
    merge,
    perturb_sim3,
    psnr,
    random_sim3,
    refine,
    render,
    rotation_angle_between,
    split_scene,
    ssim,
    transform_cloud,
    view_through,
)
from splatreg.sh import sh_evaluate, sh_rotation_matrices
from splatreg.sim3 import quat_normalize, quat_to_matrix

from conftest import random_cloud
from test_gradients import check_gradients


def report(name: str, ok: bool, details: str) -> None:
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {details}")
    assert ok, f"{name}: {details}"


def _random_sim3(rng, sigma_rot=0.5, sigma_t=1.5, sigma_s=0.4) -> Sim3:
    return Sim3(float(np.exp(rng.normal(0, sigma_s))),
                quat_normalize(rng.normal(size=4)), rng.normal(0, sigma_t, 3))


def test_sim3_algebra_suite():
    t0 = time.time()
    rng = np.random.default_rng(100)
    worst_assoc = 0.0
    for _ in range(100):
        a, b, c = (_random_sim3(rng) for _ in range(3))
        left = a.compose(b.compose(c)).parameters()
        right = a.compose(b).compose(c).parameters()
        worst_assoc = max(worst_assoc, float(np.abs(left - right).max()))
    worst_inv = 0.0
    for _ in range(100):
        T = _random_sim3(rng)
        ident = T.compose(T.inverse()).parameters()
        worst_inv = max(worst_inv, float(np.abs(ident - Sim3.identity().parameters()).max()))
        pts = rng.normal(size=(50, 3))
        worst_inv = max(worst_inv, float(np.abs(T.inverse().apply(T.apply(pts)) - pts).max()))
    cloud = random_cloud(25, seed=101)
    worst_cloud = 0.0
    for _ in range(10):
        a, b = _random_sim3(rng, sigma_s=0.3), _random_sim3(rng, sigma_s=0.3)
        two = transform_cloud(transform_cloud(cloud, b), a)
        one = transform_cloud(cloud, a.compose(b))
        worst_cloud = max(
            worst_cloud,
            float(np.abs(two.mu - one.mu).max()),
            float(np.abs(two.rot - one.rot).max()),
            float(np.abs(two.log_scale - one.log_scale).max()),
            float(np.abs(two.sh - one.sh).max()),
        )
    elapsed = time.time() - t0
    ok = worst_assoc < 1e-10 and worst_inv < 1e-9 and worst_cloud < 1e-8 and elapsed < 10
    report("sim3-algebra",
           ok, f"assoc {worst_assoc:.2e} (<1e-10), inverse {worst_inv:.2e} (<1e-9), "
               f"cloud-compose {worst_cloud:.2e} (<1e-8), {elapsed:.1f}s (<10s)")


def test_sh_rotation_suite():
    t0 = time.time()
    rng = np.random.default_rng(200)
    worst_equiv = 0.0
    for trial in range(200):
        degree = int(rng.integers(0, 4))
        k = (degree + 1) ** 2
        R = quat_to_matrix(quat_normalize(rng.normal(size=4)))
        coeffs = rng.normal(size=(3, k))
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        blocks = sh_rotation_matrices(R, degree)
        rotated = coeffs.copy()
        for l in range(1, degree + 1):
            sl = slice(l * l, (l + 1) * (l + 1))
            rotated[:, sl] = coeffs[:, sl] @ blocks[l].T
        err = np.abs(sh_evaluate(rotated, d) - sh_evaluate(coeffs, R.T @ d)).max()
        worst_equiv = max(worst_equiv, float(err))
    worst_ortho = 0.0
    worst_homo = 0.0
    for _ in range(20):
        r1 = quat_to_matrix(quat_normalize(rng.normal(size=4)))
        r2 = quat_to_matrix(quat_normalize(rng.normal(size=4)))
        b1 = sh_rotation_matrices(r1, 3)
        b2 = sh_rotation_matrices(r2, 3)
        b12 = sh_rotation_matrices(r1 @ r2, 3)
        for l in range(4):
            worst_ortho = max(worst_ortho, float(np.abs(
                b1[l].T @ b1[l] - np.eye(2 * l + 1)).max()))
            worst_homo = max(worst_homo, float(np.abs(b12[l] - b1[l] @ b2[l]).max()))
    elapsed = time.time() - t0
    ok = worst_equiv < 1e-5 and worst_ortho < 1e-8 and worst_homo < 1e-8 and elapsed < 30
    report("sh-rotation",
           ok, f"equivariance {worst_equiv:.2e} (<1e-5) over 200 draws, "
               f"orthogonality {worst_ortho:.2e} (<1e-8), homomorphism {worst_homo:.2e} "
               f"(<1e-8), {elapsed:.1f}s (<30s)")


def test_renderer_gradient_check():
    t0 = time.time()
    worst = 0.0
    for seed in range(20):
        worst = max(worst, check_gradients(seed, size=128, h=1e-4, tol=1e-3))
    elapsed = time.time() - t0
    ok = worst < 1e-3 and elapsed < 300
    report("renderer-gradients",
           ok, f"worst relative error {worst:.2e} (<1e-3) across 20 scenes x 7 "
               f"partials at 128x128, {elapsed:.0f}s (<300s)")


def test_render_equivariance():
    cloud = random_cloud(300, seed=300)
    view = look_at(eye=(0.4, -0.3, -3.2), target=(0, 0, 0), width=128, height=128)
    base = render(cloud, view)
    rng = np.random.default_rng(301)
    worst = 0.0
    for _ in range(10):
        T = Sim3(1.0, quat_normalize(rng.normal(size=4)), rng.normal(0, 1.0, 3))
        out = render(transform_cloud(cloud, T), view_through(view, T))
        worst = max(worst, float(np.abs(out.rgb - base.rgb).max()))
    ok = worst < 1e-3
    report("render-equivariance",
           ok, f"worst per-pixel rgb deviation {worst:.2e} (<1e-3) over 10 rigid motions")


def test_scale_estimation():
    scene = make_scene(1200, extent=1.0, seed=400)
    view1 = make_ring_views(count=1, width=128, height=128)[0]
    worst_noiseless = 0.0
    for s_true in (0.5, 1.0, 2.0):
        t_true = random_sim3(12.0, 0.2 * scene.scene_diameter(), s_true, seed=401)
        g1, g2, truth = split_scene(scene, 0.4, t_true, seed=402)
        bundle, view2 = make_synthetic_bundle(g1, g2, truth, view1, fm_scale=1.3, seed=403)
        est = coarse_register(g1, g2, view1, view2, bundle)
        worst_noiseless = max(worst_noiseless, abs(est.scale_ratio - s_true))
    t_true = random_sim3(15.0, 0.25 * scene.scene_diameter(), 1.7, seed=404)
    g1, g2, truth = split_scene(scene, 0.4, t_true, seed=405)
    rel_errors = []
    for seed in range(20):
        bundle, view2 = make_synthetic_bundle(
            g1, g2, truth, view1, depth_noise=0.05, conf_profile="edge",
            fm_scale=1.3, seed=500 + seed)
        est = coarse_register(g1, g2, view1, view2, bundle)
        rel_errors.append(abs(est.scale_ratio - t_true.s) / t_true.s)
    median_rel = float(np.median(rel_errors))
    ok = worst_noiseless < 1e-6 and median_rel < 0.02
    report("scale-estimation",
           ok, f"noiseless worst |err| {worst_noiseless:.2e} (<1e-6) over s in "
               f"{{0.5,1,2}}; 5% noise + edge confidence median rel err "
               f"{median_rel:.4f} (<0.02, 20 seeds)")


@pytest.fixture(scope="module")
def e2e_scene():
    scene = make_scene(5000, extent=1.0, seed=7)
    diam = scene.scene_diameter()
    t_true = random_sim3(rot_deg=20.0, trans=0.3 * diam, scale=1.7, seed=3)
    return scene, diam, t_true


def test_end_to_end_synthetic_recovery(e2e_scene):
    t0 = time.time()
    scene, diam, t_true = e2e_scene
    g1, g2, _ = split_scene(scene, 0.30, t_true, seed=5)
    t_init = perturb_sim3(t_true, rot_deg=5.0, trans=0.03 * diam, scale_frac=0.10, seed=13)
    pool = make_ring_views(radius=3.2, count=4, width=256, height=256)
    cfg = RefineConfig(max_iters=150, views_per_iter=4, convergence_tol=0.0,
                       seed=4, freeze_sh=True)
    result = refine(g1, g2, t_init, pool, cfg)
    T = result.transform
    rot_err = float(np.degrees(rotation_angle_between(T, t_true)))
    trans_err = float(np.linalg.norm(T.t - t_true.t) / diam)
    scale_err = float(abs(T.s / t_true.s - 1.0))

    fused = merge(g1, g2, T)
    held_out = make_ring_views(radius=3.4, count=5, width=256, height=256,
                               elevation=0.45, prefix="held")
    psnrs, ssims = [], []
    for v in held_out:
        truth_rgb = render(scene, v).rgb
        fused_rgb = render(fused, v).rgb
        psnrs.append(psnr(truth_rgb, fused_rgb))
        ssims.append(ssim(truth_rgb, fused_rgb))
    elapsed = time.time() - t0
    ok = (result.iterations <= 500 and rot_err < 0.5 and trans_err < 0.005
          and scale_err < 0.01 and min(psnrs) > 30.0 and min(ssims) > 0.95
          and elapsed < 900)
    report("end-to-end-recovery",
           ok, f"{result.iterations} iters (<=500): rotation {rot_err:.3f} deg (<0.5), "
               f"translation {trans_err * 100:.3f}% of diameter (<0.5%), scale "
               f"{scale_err * 100:.3f}% (<1%); merged render vs truth over 5 held-out "
               f"poses: PSNR min {min(psnrs):.2f} dB (>30), SSIM min {min(ssims):.4f} "
               f"(>0.95); {elapsed / 60:.1f} min (<15)")


def test_low_overlap_beats_icp(e2e_scene):
    scene, diam, t_true = e2e_scene
    g1, g2, _ = split_scene(scene, 0.10, t_true, seed=5)
    t_init = perturb_sim3(t_true, rot_deg=5.0, trans=0.03 * diam, scale_frac=0.10, seed=13)

    def align_err(T: Sim3) -> float:
        return float(np.mean(np.linalg.norm(T.apply(g2.mu) - t_true.apply(g2.mu), axis=1)))

    icp_transform = icp_umeyama(g1.mu, g2.mu, t_init, iters=50)
    pool = make_ring_views(radius=3.2, count=4, width=256, height=256)
    cfg = RefineConfig(max_iters=150, views_per_iter=4, convergence_tol=0.0,
                       seed=4, freeze_sh=True)
    ours = refine(g1, g2, t_init, pool, cfg).transform
    err_icp = align_err(icp_transform)
    err_ours = align_err(ours)
    ok = err_ours < err_icp
    report("low-overlap-vs-icp",
           ok, f"10% overlap from one coarse init: photometric refinement error "
               f"{err_ours:.4f} ({err_ours / diam * 100:.2f}% diam) vs ICP-with-scale "
               f"{err_icp:.4f} ({err_icp / diam * 100:.2f}% diam); init was "
               f"{align_err(t_init):.4f}")


def test_multi_model_fusion():
    # three overlapping slabs of one scene, each re-expressed in its own frame;
    # pairwise transforms are refined from perturbed truth, then fused
    scene = make_scene(2400, extent=1.0, seed=800)
    diam = scene.scene_diameter()
    rng = np.random.default_rng(801)
    normal = rng.normal(size=3)
    normal /= np.linalg.norm(normal)
    proj = scene.mu @ normal
    qs = np.quantile(proj, [0.25, 0.45, 0.55, 0.75])
    ids = [np.flatnonzero(proj <= qs[1]),
           np.flatnonzero((proj >= qs[0]) & (proj <= qs[3])),
           np.flatnonzero(proj >= qs[2])]
    t_b = random_sim3(15.0, 0.25 * diam, 1.4, seed=802)
    t_c = random_sim3(12.0, 0.2 * diam, 0.8, seed=803)
    clouds = [scene.take(ids[0], frame_label="root"),
              transform_cloud(scene.take(ids[1]), t_b.inverse(), frame_label="m1"),
              transform_cloud(scene.take(ids[2]), t_c.inverse(), frame_label="m2")]

    pool = make_ring_views(radius=3.2, count=4, width=160, height=160)
    cfg = RefineConfig(max_iters=150, views_per_iter=4, convergence_tol=0.0, seed=5)
    est_b = refine(clouds[0], clouds[1],
                   perturb_sim3(t_b, 2.0, 0.015 * diam, 0.04, seed=804), pool, cfg).transform
    # model 2 registers against model 1, mirroring a chained mapping session
    t_c_in_b = t_b.inverse().compose(t_c)
    pool_b = [view_through(v, t_b.inverse()) for v in pool]
    est_c_in_b = refine(clouds[1], clouds[2],
                        perturb_sim3(t_c_in_b, 2.0, 0.015 * diam, 0.04, seed=805),
                        pool_b, cfg).transform

    plan = FusionPlan(root=0, edges=(FusionEdge(1, 0, est_b), FusionEdge(2, 1, est_c_in_b)))
    fused = fuse_many(clouds, plan)
    assert len(fused) == sum(len(c) for c in clouds)

    # geometric overlap oracle: shared splats from different source clouds
    # must land within 2% of the scene diameter of each other
    from scipy.spatial import cKDTree

    sizes = np.cumsum([0] + [len(c) for c in clouds])
    worst = 0.0
    pairs = [(0, 1, np.intersect1d(ids[0], ids[1])),
             (1, 2, np.intersect1d(ids[1], ids[2]))]
    for a, b, shared in pairs:
        assert shared.size > 0
        part_a = fused.mu[sizes[a]:sizes[a + 1]]
        part_b = fused.mu[sizes[b]:sizes[b + 1]]
        sel_a = np.searchsorted(ids[a], shared)
        dists, _ = cKDTree(part_b).query(part_a[sel_a], k=1)
        worst = max(worst, float(np.mean(dists)))
    ok = worst < 0.02 * diam
    report("multi-model-fusion",
           ok, f"three sub-scenes fused; worst overlap-region nearest-mean distance "
               f"{worst:.4f} = {worst / diam * 100:.2f}% of diameter (<2%)")


def test_metric_oracles():
    rng = np.random.default_rng(900)
    worst_psnr = 0.0
    worst_ssim = 0.0
    try:
        from skimage.metrics import structural_similarity
    except ImportError:
        structural_similarity = None
    from splatreg.metrics import to_luminance

    for _ in range(50):
        a = rng.uniform(size=(41, 37, 3))
        b = np.clip(a + rng.normal(0, rng.uniform(0.02, 0.3), a.shape), 0, 1)
        direct = 10.0 * np.log10(1.0 / np.mean((a - b) ** 2))
        worst_psnr = max(worst_psnr, abs(psnr(a, b) - direct))
        if structural_similarity is not None:
            ref = structural_similarity(
                to_luminance(a), to_luminance(b), data_range=1.0,
                gaussian_weights=True, sigma=1.5, use_sample_covariance=False)
            worst_ssim = max(worst_ssim, abs(ssim(a, b) - ref))
    ok = worst_psnr < 1e-9 and worst_ssim < 1e-4 and structural_similarity is not None
    report("metric-oracles",
           ok, f"50 random pairs: psnr vs direct formula {worst_psnr:.2e} (<1e-9), "
               f"ssim vs independent implementation {worst_ssim:.2e} (<1e-4)")
