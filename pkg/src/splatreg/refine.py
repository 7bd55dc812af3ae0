"""Gradient refinement of the seven similarity parameters on the masked
photometric loss, with adaptive per-parameter moments."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import CameraView, interpolate_views, view_through
from .cloud import GaussianCloud
from .renderer import NoOverlapError, RenderOutput, render, render_pair_loss_grad
from .sim3 import Sim3, quat_multiply, quat_normalize, rotvec_to_quat

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
CONVERGENCE_WINDOW = 10


class RefinementError(RuntimeError):
    """Raised when refinement cannot proceed (no overlap, non-finite loss)."""


@dataclass(frozen=True)
class RefineConfig:
    max_iters: int = 200
    lr_rot: float = 1e-3
    lr_trans: float | None = None  # defaults to 1e-3 * scene diameter
    lr_logscale: float = 1e-3
    views_per_iter: int = 4
    convergence_tol: float = 1e-7
    seed: int = 0
    freeze_sh: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        for name in ("lr_rot", "lr_logscale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.lr_trans is not None and not self.lr_trans > 0:
            raise ValueError("lr_trans must be positive")
        if self.views_per_iter < 1:
            raise ValueError(f"views_per_iter must be >= 1, got {self.views_per_iter}")
        if not self.convergence_tol >= 0:
            raise ValueError("convergence_tol must be non-negative")


@dataclass(frozen=True)
class RefineResult:
    transform: Sim3
    loss_history: np.ndarray
    views_used: tuple[CameraView, ...]
    converged: bool
    final_loss: float
    iterations: int

    def __post_init__(self):
        if len(self.loss_history) == 0:
            raise ValueError("loss history must be non-empty")


def select_refinement_views(c1: CameraView, c2: CameraView, k: int, seed: int = 0,
                            rot_jitter_deg: float = 10.0,
                            trans_jitter_frac: float = 0.1) -> list[CameraView]:
    """Deterministic pool of views around the matched pair.

    The first pose is the rigid-interpolation midpoint; the rest perturb it
    by at most `rot_jitter_deg` and `trans_jitter_frac` of the inter-camera
    distance.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    mid = interpolate_views(c1, c2, 0.5)
    views = [mid.with_pose(mid.q, mid.t, view_id="refine000")]
    if k == 1:
        return views
    rng = np.random.default_rng(seed)
    baseline = float(np.linalg.norm(c1.center - c2.center))
    for i in range(1, k):
        axis = rng.normal(size=3)
        axis /= max(np.linalg.norm(axis), 1e-12)
        ang = np.radians(rng.uniform(0.0, rot_jitter_deg))
        q = quat_normalize(quat_multiply(rotvec_to_quat(axis * ang), mid.q))
        offset = rng.normal(size=3)
        offset /= max(np.linalg.norm(offset), 1e-12)
        center = mid.center + offset * rng.uniform(0.0, trans_jitter_frac * baseline)
        from .sim3 import quat_to_matrix

        t = -(quat_to_matrix(q) @ center)
        views.append(mid.with_pose(q, t, view_id=f"refine{i:03d}"))
    return views


def _adam_lrs(cfg: RefineConfig, scene_diameter: float) -> np.ndarray:
    lr_t = cfg.lr_trans if cfg.lr_trans is not None else 1e-3 * max(scene_diameter, 1e-6)
    return np.array([cfg.lr_logscale, cfg.lr_rot, cfg.lr_rot, cfg.lr_rot, lr_t, lr_t, lr_t])


def refine(g1: GaussianCloud, g2: GaussianCloud, t_init: Sim3,
           views: list[CameraView], cfg: RefineConfig | None = None) -> RefineResult:
    """Minimize the masked photometric loss over scale, rotation, translation.

    Parameters update on the product manifold (log scale, rotation tangent
    retraction, additive translation) with first-order adaptive moments. Views
    are sampled per iteration from the pool; the returned transform is the
    best-loss iterate observed.
    """
    cfg = RefineConfig() if cfg is None else cfg
    if not views:
        raise RefinementError("refinement needs at least one candidate view")
    rng = np.random.default_rng(cfg.seed)
    lrs = _adam_lrs(cfg, g1.scene_diameter())

    references: dict[int, RenderOutput] = {}

    def reference(i: int) -> RenderOutput:
        if i not in references:
            references[i] = render(g1, views[i])
        return references[i]

    n_pool = len(views)
    k = min(cfg.views_per_iter, n_pool)
    # one cycle of iterations covers the whole pool; losses are only
    # comparable at cycle granularity when k < n_pool
    cycle = (n_pool + k - 1) // k
    schedule = rng.permutation(n_pool)
    cursor = 0

    current = t_init
    best_t = t_init
    best_loss = np.inf
    losses: list[float] = []
    smoothed_hist: list[float] = []
    m = np.zeros(7)
    v = np.zeros(7)
    converged = False

    for it in range(1, cfg.max_iters + 1):
        if k == n_pool:
            chosen = np.arange(n_pool)
        else:
            if cursor + k > n_pool:
                schedule = rng.permutation(n_pool)
                cursor = 0
            chosen = schedule[cursor:cursor + k]
            cursor += k
        grad = np.zeros(7)
        loss_sum = 0.0
        used = 0
        for vi in chosen:
            try:
                loss_i, grads_i, _ = render_pair_loss_grad(
                    g1, g2, current, views[vi], freeze_sh=cfg.freeze_sh,
                    reference=reference(int(vi)),
                )
            except NoOverlapError:
                continue
            grad += grads_i.d_loss_d_sim3
            loss_sum += loss_i
            used += 1
        if used == 0:
            raise RefinementError(
                "every sampled view had empty mask overlap; the initial "
                "transform is too far off, improve the coarse estimate"
            )
        grad /= used
        loss = loss_sum / used
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise RefinementError(f"non-finite loss/gradient at iteration {it}")
        losses.append(loss)
        smoothed = float(np.mean(losses[-cycle:])) if len(losses) >= cycle else np.inf
        if np.isfinite(smoothed):
            smoothed_hist.append(smoothed)
        if smoothed < best_loss:
            best_loss = smoothed
            best_t = current
        if loss <= 1e-12:  # at float noise: a perfect alignment, stop here
            converged = True
            break

        m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * grad
        v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * grad * grad
        m_hat = m / (1.0 - ADAM_BETA1 ** it)
        v_hat = v / (1.0 - ADAM_BETA2 ** it)
        step = lrs * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        current = Sim3(
            s=current.s * float(np.exp(-step[0])),
            q=quat_multiply(rotvec_to_quat(-step[1:4]), current.q),
            t=current.t - step[4:7],
        )

        # stop once every recent cycle-smoothed loss move is below tolerance
        if cfg.convergence_tol > 0 and len(smoothed_hist) > CONVERGENCE_WINDOW:
            deltas = np.abs(np.diff(smoothed_hist[-1 - CONVERGENCE_WINDOW:]))
            if float(np.max(deltas)) < cfg.convergence_tol:
                converged = True
                break

    if not losses:
        raise RefinementError("no iterations ran")
    if not np.isfinite(best_loss):
        best_loss = losses[-1]
        best_t = current
    return RefineResult(
        transform=best_t, loss_history=np.asarray(losses),
        views_used=tuple(views), converged=converged,
        final_loss=float(best_loss), iterations=len(losses),
    )


def refinement_views_for(c1: CameraView, c2: CameraView, t_init: Sim3, k: int,
                         seed: int = 0) -> list[CameraView]:
    """Pool of refinement views with c2 first mapped into model 1's frame."""
    c2_in_1 = view_through(c2, t_init)
    return select_refinement_views(c1, c2_in_1, k, seed=seed)
