"""Synthetic scenes, overlapping splits, and simulated foundation bundles,
so the full registration pipeline is testable without ML dependencies."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .camera import CameraView, look_at, view_through
from .cloud import GaussianCloud, transform_cloud
from .interchange import FoundationBundle
from .renderer import render
from .sh import SH_C0, num_coeffs
from .sim3 import Sim3, quat_multiply, quat_normalize, rotvec_to_quat


def _f32_grid(a: np.ndarray) -> np.ndarray:
    # keep generated values exactly representable in the float32 file format
    return a.astype(np.float32).astype(np.float64)


def make_scene(count: int, extent: float = 1.0, seed: int = 0,
               sh_degree: int = 3, frame_label: str = "world") -> GaussianCloud:
    """Seeded random cloud: means in a box, anisotropic scales, random SH,
    opacities in (0.3, 0.95)."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    mu = rng.uniform(-extent, extent, (count, 3))
    q = quat_normalize(rng.normal(size=(count, 4)))
    log_scale = np.log(rng.uniform(0.05, 0.18, (count, 3)) * extent)
    op = rng.uniform(0.3, 0.95, count)
    logit = np.log(op / (1.0 - op))
    k = num_coeffs(sh_degree)
    sh = np.zeros((count, 3, k))
    sh[:, :, 0] = (rng.uniform(0.08, 0.92, (count, 3)) - 0.5) / SH_C0
    if k > 1:
        sh[:, :, 1:] = rng.normal(0.0, 0.06, (count, 3, k - 1))
    return GaussianCloud(
        mu=_f32_grid(mu), rot=_f32_grid(q), log_scale=_f32_grid(log_scale),
        opacity_logit=_f32_grid(logit), sh=_f32_grid(sh),
        sh_degree=sh_degree, frame_label=frame_label,
    )


def make_ring_views(center=(0.0, 0.0, 0.0), radius: float = 3.2, count: int = 8,
                    width: int = 256, height: int = 256, fov_deg: float = 60.0,
                    elevation: float = 0.25, prefix: str = "v") -> list[CameraView]:
    """Deterministic ring of inward-looking cameras around a scene."""
    center = np.asarray(center, dtype=np.float64)
    views = []
    for i in range(count):
        ang = 2.0 * np.pi * i / count
        eye = center + radius * np.array([np.sin(ang), elevation, -np.cos(ang)])
        views.append(look_at(eye, center, fov_deg=fov_deg, width=width,
                             height=height, view_id=f"{prefix}{i:03d}"))
    return views


def random_sim3(rot_deg: float, trans: float, scale: float, seed: int = 0) -> Sim3:
    """Transform with an exact rotation angle about a random axis, a random
    translation direction of exact length, and the given scale."""
    rng = np.random.default_rng(seed)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    tdir = rng.normal(size=3)
    tdir /= np.linalg.norm(tdir)
    return Sim3(scale, rotvec_to_quat(axis * np.radians(rot_deg)), tdir * trans)


def perturb_sim3(transform: Sim3, rot_deg: float, trans: float,
                 scale_frac: float, seed: int = 0) -> Sim3:
    """Perturb by exact magnitudes in random directions (left-composed rotation)."""
    rng = np.random.default_rng(seed)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    tdir = rng.normal(size=3)
    tdir /= np.linalg.norm(tdir)
    sign = 1.0 if rng.random() < 0.5 else -1.0
    q = quat_multiply(rotvec_to_quat(axis * np.radians(rot_deg)), transform.q)
    return Sim3(transform.s * (1.0 + sign * scale_frac), q, transform.t + tdir * trans)


@dataclass(frozen=True)
class SplitTruth:
    """Ground truth of a synthetic split: the o2->o1 transform and index sets."""

    transform: Sim3
    ids1: np.ndarray
    ids2: np.ndarray
    overlap_ids: np.ndarray

    def save(self, path: str | Path) -> None:
        payload = {
            "kind": "split_truth",
            "schema_version": 1,
            "transform": self.transform.to_dict(),
            "ids1": [int(i) for i in self.ids1],
            "ids2": [int(i) for i in self.ids2],
            "overlap_ids": [int(i) for i in self.overlap_ids],
        }
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SplitTruth":
        d = json.loads(Path(path).read_text())
        if d.get("kind") != "split_truth":
            raise ValueError(f"{path}: not a split-truth file")
        return cls(
            transform=Sim3.from_dict(d["transform"]),
            ids1=np.asarray(d["ids1"], dtype=np.int64),
            ids2=np.asarray(d["ids2"], dtype=np.int64),
            overlap_ids=np.asarray(d["overlap_ids"], dtype=np.int64),
        )


def split_scene(cloud: GaussianCloud, overlap_fraction: float, t_true: Sim3,
                seed: int = 0) -> tuple[GaussianCloud, GaussianCloud, SplitTruth]:
    """Split along a seeded plane with an overlap slab shared by both halves.

    The second half is re-expressed in its own frame via the inverse of
    t_true, so recovering t_true realigns it with the first half.
    """
    if not 0.0 <= overlap_fraction <= 1.0:
        raise ValueError(f"overlap_fraction must be in [0, 1], got {overlap_fraction}")
    if len(cloud) < 2:
        raise ValueError("need at least 2 gaussians to split")
    rng = np.random.default_rng(seed)
    normal = rng.normal(size=3)
    normal /= np.linalg.norm(normal)
    proj = cloud.mu @ normal
    f = overlap_fraction
    for attempt in range(2):
        lo = float(np.quantile(proj, 0.5 - f / 2.0))
        hi = float(np.quantile(proj, 0.5 + f / 2.0))
        if f == 0.0:
            ids1 = np.flatnonzero(proj <= lo)
            ids2 = np.flatnonzero(proj > lo)
            overlap = np.zeros(0, dtype=np.int64)
        else:
            ids1 = np.flatnonzero(proj <= hi)
            ids2 = np.flatnonzero(proj >= lo)
            overlap = np.flatnonzero((proj >= lo) & (proj <= hi))
        if f == 0.0 or overlap.size > 0:
            break
        f = min(1.0, f * 1.5)  # widen once before giving up
    else:
        raise ValueError("overlap slab is empty at the requested fraction")
    if ids1.size == 0 or ids2.size == 0:
        raise ValueError("degenerate split: one side is empty")
    g1 = cloud.take(ids1, frame_label="o1")
    g2 = transform_cloud(cloud.take(ids2), t_true.inverse(), frame_label="o2")
    return g1, g2, SplitTruth(transform=t_true, ids1=ids1, ids2=ids2, overlap_ids=overlap)


def _confidence(profile: str, height: int, width: int) -> np.ndarray:
    if profile == "uniform":
        return np.ones((height, width), dtype=np.float64)
    if profile == "edge":
        # distance-to-border ramp, mimicking low-confidence image boundaries
        i = np.arange(height)[:, None]
        j = np.arange(width)[None, :]
        d = np.minimum(np.minimum(i, height - 1 - i), np.minimum(j, width - 1 - j))
        peak = max(1.0, float(d.max()))
        return (d / peak).astype(np.float64)
    raise ValueError(f"unknown confidence profile {profile!r}")


def make_synthetic_bundle(
    g1: GaussianCloud, g2: GaussianCloud, truth: SplitTruth, view1: CameraView,
    *,
    rot_noise_deg: float = 0.0,
    trans_noise_frac: float = 0.0,
    scale_noise_frac: float = 0.0,
    depth_noise: float = 0.0,
    conf_profile: str = "uniform",
    fm_scale: float = 1.0,
    seed: int = 0,
) -> tuple[FoundationBundle, CameraView]:
    """Simulate foundation-model outputs for the matched pair seen from view1.

    The relative pose is the truth-chain pose perturbed by the stated noise;
    foundation depths are the rendered ground-truth depths divided by each
    model's scale relative to the foundation frame, with optional
    multiplicative noise. Returns the bundle and the o2-frame camera.
    """
    rng = np.random.default_rng(seed)
    t_true = truth.transform
    # the physical camera of view1, expressed in g2's own frame
    view2 = view_through(view1, t_true.inverse())

    out1 = render(g1, view1)
    out2 = render(g2, view2)
    a = float(fm_scale)
    b = a / t_true.s
    if scale_noise_frac:
        a *= 1.0 + rng.uniform(-scale_noise_frac, scale_noise_frac)
        b *= 1.0 + rng.uniform(-scale_noise_frac, scale_noise_frac)
    d1 = out1.depth / a
    d2 = out2.depth / b
    if depth_noise:
        d1 = d1 * np.clip(1.0 + rng.normal(0.0, depth_noise, d1.shape), 0.1, None)
        d2 = d2 * np.clip(1.0 + rng.normal(0.0, depth_noise, d2.shape), 0.1, None)

    chain = view1.world_to_cam.compose(t_true).compose(view2.world_to_cam.inverse())
    pose = Sim3(1.0, chain.q, chain.t)
    if rot_noise_deg or trans_noise_frac:
        baseline = g1.scene_diameter()
        pose = perturb_sim3(pose, rot_noise_deg, trans_noise_frac * baseline, 0.0,
                            seed=int(rng.integers(2 ** 31)))
        pose = Sim3(1.0, pose.q, pose.t)

    conf = _confidence(conf_profile, view1.height, view1.width)
    bundle = FoundationBundle(
        pose_2_to_1=pose,
        depth_fm_1=d1.astype(np.float32), depth_fm_2=d2.astype(np.float32),
        conf_1=conf.astype(np.float32), conf_2=conf.astype(np.float32),
    )
    return bundle, view2
