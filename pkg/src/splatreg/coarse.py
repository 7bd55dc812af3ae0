"""Coarse registration: scale from confidence-weighted depth ratios, then the
initial similarity transform composed through the camera chain."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import CameraView
from .cloud import GaussianCloud
from .interchange import FoundationBundle
from .renderer import MASK_ALPHA, render
from .sim3 import Sim3

DEPTH_FLOOR = 1e-6


class InsufficientDepthError(ValueError):
    """All pixels of one image were excluded from the scale estimate."""


@dataclass(frozen=True)
class CoarseEstimate:
    """Initial alignment of model 2 into model 1's frame."""

    transform: Sim3
    scale_ratio: float
    pair: tuple[str, str]
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.scale_ratio > 0:
            raise ValueError(f"scale ratio must be positive, got {self.scale_ratio}")


def _weighted_ratio_sum(rendered: np.ndarray, fm: np.ndarray, conf: np.ndarray,
                        alpha: np.ndarray | None, depth_floor: float,
                        alpha_gate: float, label: str) -> tuple[float, dict]:
    rendered = np.asarray(rendered, dtype=np.float64)
    fm = np.asarray(fm, dtype=np.float64)
    conf = np.asarray(conf, dtype=np.float64)
    if rendered.shape != fm.shape or conf.shape != fm.shape:
        raise ValueError(
            f"{label}: shapes differ (rendered {rendered.shape}, fm {fm.shape}, conf {conf.shape})"
        )
    valid = fm > depth_floor
    if alpha is not None:
        alpha = np.asarray(alpha, dtype=np.float64)
        if alpha.shape != fm.shape:
            raise ValueError(f"{label}: alpha shape {alpha.shape} differs from {fm.shape}")
        valid &= alpha > alpha_gate
    weight = np.where(valid, conf, 0.0)
    mass = float(weight.sum())
    used = int(np.count_nonzero(weight))
    if used == 0 or mass == 0.0:
        raise InsufficientDepthError(
            f"insufficient depth support in {label}: every pixel excluded"
        )
    ratio = np.where(valid, rendered / np.where(valid, fm, 1.0), 0.0)
    total = float((weight * ratio).sum())
    diag = {
        "pixels_used": used,
        "confidence_mass": mass,
        "mean_depth_ratio": total / mass,
        "ratio_weighted_sum": total,
    }
    return total, diag


def estimate_scale(
    d1: np.ndarray, dfm1: np.ndarray, c1: np.ndarray,
    d2: np.ndarray, dfm2: np.ndarray, c2: np.ndarray,
    *,
    alpha1: np.ndarray | None = None,
    alpha2: np.ndarray | None = None,
    depth_floor: float = DEPTH_FLOOR,
    alpha_gate: float = MASK_ALPHA,
    diagnostics: dict | None = None,
) -> float:
    """Scale of model 2 relative to model 1 from per-image depth ratios.

    Returns the quotient of the two confidence-weighted mean
    rendered/foundation depth ratios. Normalizing each sum by its own
    confidence mass keeps the estimate correct when the two images gate out
    different pixel counts (coverage differs between partial models) and when
    the confidence maps are not on a common scale; with equal masses it
    coincides with the plain ratio of weighted sums. Pixels with foundation
    depth at or below the floor, or with rendered coverage below the alpha
    gate, contribute zero confidence.
    """
    num, diag1 = _weighted_ratio_sum(d1, dfm1, c1, alpha1, depth_floor, alpha_gate, "image 1")
    den, diag2 = _weighted_ratio_sum(d2, dfm2, c2, alpha2, depth_floor, alpha_gate, "image 2")
    num /= diag1["confidence_mass"]
    den /= diag2["confidence_mass"]
    if den == 0.0:
        raise InsufficientDepthError("insufficient depth support in image 2: zero ratio sum")
    s = num / den
    if diagnostics is not None:
        diagnostics["image_1"] = diag1
        diagnostics["image_2"] = diag2
    if not np.isfinite(s) or s <= 0:
        raise InsufficientDepthError(f"non-positive scale estimate {s}")
    return float(s)


def compose_initial_transform(w2c_1: Sim3, w2c_2: Sim3, pose_2_to_1: Sim3,
                              s: float) -> Sim3:
    """(w2c_1)^-1 o Sim3(s, R_2to1, t_2to1) o w2c_2.

    The relative pose supplies rotation and translation; only its (unknown)
    scale is replaced by the estimate, so the result's scale equals s exactly.
    """
    for name, pose in (("w2c_1", w2c_1), ("w2c_2", w2c_2), ("pose_2_to_1", pose_2_to_1)):
        if abs(pose.s - 1.0) > 1e-9:
            raise ValueError(f"{name} must be rigid (scale 1), got scale {pose.s}")
    if not s > 0:
        raise ValueError(f"scale must be positive, got {s}")
    middle = Sim3(s=float(s), q=pose_2_to_1.q, t=pose_2_to_1.t)
    return w2c_1.inverse().compose(middle).compose(w2c_2)


def coarse_register(
    g1: GaussianCloud, g2: GaussianCloud,
    view1: CameraView, view2: CameraView,
    bundle: FoundationBundle,
    *,
    depth_floor: float = DEPTH_FLOOR,
    alpha_gate: float = MASK_ALPHA,
) -> CoarseEstimate:
    """Full coarse stage: render depths at the matched views, estimate the
    scale against the bundle's foundation depths, compose the chain."""
    for name, view in (("view1", view1), ("view2", view2)):
        if (view.height, view.width) != (bundle.height, bundle.width):
            raise ValueError(
                f"{name} size {view.width}x{view.height} does not match bundle "
                f"{bundle.width}x{bundle.height}"
            )
    out1 = render(g1, view1)
    out2 = render(g2, view2)
    diagnostics: dict = {}
    s = estimate_scale(
        out1.depth, bundle.depth_fm_1, bundle.conf_1,
        out2.depth, bundle.depth_fm_2, bundle.conf_2,
        alpha1=out1.alpha, alpha2=out2.alpha,
        depth_floor=depth_floor, alpha_gate=alpha_gate,
        diagnostics=diagnostics,
    )
    transform = compose_initial_transform(view1.world_to_cam, view2.world_to_cam,
                                          bundle.pose_2_to_1, s)
    return CoarseEstimate(
        transform=transform, scale_ratio=s,
        pair=(view1.view_id, view2.view_id), diagnostics=diagnostics,
    )
