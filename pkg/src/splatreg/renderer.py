"""Splat rasterizer: EWA projection, tile compositing, and analytic gradients
of a masked photometric loss with respect to the seven similarity parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _raster
from .camera import CameraView
from .cloud import GaussianCloud
from .sh import sh_basis, sh_basis_gradient, sh_rotation_matrices, sh_rotation_matrices_with_tangent
from .sim3 import Sim3

Z_NEAR = 0.01
DILATION = 0.3  # pixel-space low-pass added to projected covariances
FOV_CLAMP = 1.3  # clamp x/z used in the projection Jacobian, in tan-fov units
MASK_ALPHA = 0.5


class NoOverlapError(RuntimeError):
    """Raised when two renders share no covered pixels at a view."""


@dataclass(frozen=True)
class RenderOutput:
    """Color in [0,1], expected z-depth (scene units), accumulated alpha."""

    rgb: np.ndarray
    depth: np.ndarray
    alpha: np.ndarray

    def mask(self, threshold: float = MASK_ALPHA) -> np.ndarray:
        return self.alpha > threshold


@dataclass(frozen=True)
class SplatGradients:
    """dL/d(log s, rotation tangent xyz, translation xyz) as a 7-vector."""

    d_loss_d_sim3: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.d_loss_d_sim3, dtype=np.float64).reshape(7)
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite gradient")
        object.__setattr__(self, "d_loss_d_sim3", v)

    @classmethod
    def zero(cls) -> "SplatGradients":
        return cls(np.zeros(7))


def _hat(w: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])


@dataclass
class _RenderContext:
    """Everything the backward pass needs, on visibility-compacted arrays."""

    view: CameraView
    transform: Sim3
    sh_degree: int
    n: int
    mu_w: np.ndarray
    cov_w: np.ndarray
    sh_orig: np.ndarray
    sh_rot: np.ndarray
    basis: np.ndarray
    dirn: np.ndarray
    dir_len: np.ndarray
    p_cam: np.ndarray
    xu: np.ndarray
    yu: np.ndarray
    clamp_x: np.ndarray
    clamp_y: np.ndarray
    jmat: np.ndarray
    cov_cam: np.ndarray
    conic: np.ndarray
    means2d: np.ndarray
    color: np.ndarray
    raw_color: np.ndarray
    opacity: np.ndarray
    entries: np.ndarray
    tile_start: np.ndarray
    tiles_x: int
    raw_rgb: np.ndarray
    trans: np.ndarray
    last_e: np.ndarray


def _preprocess(cloud: GaussianCloud, view: CameraView, transform: Sim3,
                need_grad: bool):
    """Project splats, build tile lists, run the forward kernel."""
    W, H = view.width, view.height
    rgb = np.zeros((H, W, 3))
    dsum = np.zeros((H, W))
    trans = np.ones((H, W))
    last = np.full((H, W), -1, dtype=np.int64)
    if len(cloud) == 0:
        return rgb, dsum, trans, last, None

    s, R_t, t_t = transform.s, transform.rotation, transform.t
    mu_w = cloud.mu @ (s * R_t).T + t_t
    cov_w = (s * s) * np.einsum("ij,njk,lk->nil", R_t, cloud.covariances(), R_t)
    sh_rot = cloud.sh
    if cloud.sh_degree >= 1:
        blocks = sh_rotation_matrices(R_t, cloud.sh_degree)
        sh_rot = cloud.sh.copy()
        for l in range(1, cloud.sh_degree + 1):
            sl = slice(l * l, (l + 1) * (l + 1))
            sh_rot[:, :, sl] = cloud.sh[:, :, sl] @ blocks[l].T

    R_wc = view.rotation
    p_cam = mu_w @ R_wc.T + view.t
    idx = np.flatnonzero(p_cam[:, 2] > Z_NEAR)
    if idx.size == 0:
        return rgb, dsum, trans, last, None

    p = p_cam[idx]
    x, y, z = p[:, 0], p[:, 1], p[:, 2]
    fx, fy = view.fx, view.fy
    u = fx * x / z + view.cx
    v = fy * y / z + view.cy

    cov_cam = np.einsum("ij,njk,lk->nil", R_wc, cov_w[idx], R_wc)
    lim_x = FOV_CLAMP * (W / (2.0 * fx))
    lim_y = FOV_CLAMP * (H / (2.0 * fy))
    rx, ry = x / z, y / z
    clamp_x = np.abs(rx) > lim_x
    clamp_y = np.abs(ry) > lim_y
    xu = np.clip(rx, -lim_x, lim_x) * z
    yu = np.clip(ry, -lim_y, lim_y) * z
    n0 = idx.size
    jmat = np.zeros((n0, 2, 3))
    jmat[:, 0, 0] = fx / z
    jmat[:, 0, 2] = -fx * xu / (z * z)
    jmat[:, 1, 1] = fy / z
    jmat[:, 1, 2] = -fy * yu / (z * z)
    m2 = np.einsum("nab,nbc,ndc->nad", jmat, cov_cam, jmat)
    m2[:, 0, 0] += DILATION
    m2[:, 1, 1] += DILATION
    det = m2[:, 0, 0] * m2[:, 1, 1] - m2[:, 0, 1] ** 2
    ok = np.isfinite(det) & (det > 0.0)

    mid = 0.5 * (m2[:, 0, 0] + m2[:, 1, 1])
    lam = mid + np.sqrt(np.clip(mid * mid - det, 0.0, None))
    radius = np.ceil(3.0 * np.sqrt(np.clip(lam, 0.0, None)))
    inside = (u + radius >= 0) & (u - radius <= W - 1) & \
             (v + radius >= 0) & (v - radius <= H - 1) & (radius >= 1.0)
    keep = ok & inside
    if not np.any(keep):
        return rgb, dsum, trans, last, None

    kidx = idx[keep]
    sel = np.flatnonzero(keep)
    u, v, z = u[sel], v[sel], z[sel]
    x, y = x[sel], y[sel]
    xu, yu = xu[sel], yu[sel]
    clamp_x, clamp_y = clamp_x[sel], clamp_y[sel]
    jmat = jmat[sel]
    cov_cam = cov_cam[sel]
    m2 = m2[sel]
    det = det[sel]
    radius = radius[sel]

    inv_det = 1.0 / det
    conic = np.stack([m2[:, 1, 1] * inv_det, -m2[:, 0, 1] * inv_det,
                      m2[:, 0, 0] * inv_det], axis=1)

    dirs = mu_w[kidx] - view.center
    dir_len = np.maximum(np.linalg.norm(dirs, axis=1), 1e-12)
    dirn = dirs / dir_len[:, None]
    basis = sh_basis(dirn, cloud.sh_degree)
    raw_color = np.einsum("nck,nk->nc", sh_rot[kidx], basis) + 0.5
    color = np.maximum(raw_color, 0.0)
    opacity = 1.0 / (1.0 + np.exp(-cloud.opacity_logit[kidx]))

    # tile lists sorted by (tile, depth, insertion) for deterministic order
    tiles_x = (W + _raster.TILE - 1) // _raster.TILE
    tiles_y = (H + _raster.TILE - 1) // _raster.TILE
    tx0 = np.clip(np.floor((u - radius) / _raster.TILE), 0, tiles_x - 1).astype(np.int64)
    tx1 = np.clip(np.floor((u + radius) / _raster.TILE), 0, tiles_x - 1).astype(np.int64)
    ty0 = np.clip(np.floor((v - radius) / _raster.TILE), 0, tiles_y - 1).astype(np.int64)
    ty1 = np.clip(np.floor((v + radius) / _raster.TILE), 0, tiles_y - 1).astype(np.int64)
    wspan = tx1 - tx0 + 1
    counts = wspan * (ty1 - ty0 + 1)
    total = int(counts.sum())
    gidx = np.repeat(np.arange(u.shape[0]), counts)
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
    within = np.arange(total) - np.repeat(offsets, counts)
    row = within // np.repeat(wspan, counts)
    colo = within - row * np.repeat(wspan, counts)
    tile_of = (np.repeat(ty0, counts) + row) * tiles_x + np.repeat(tx0, counts) + colo
    order = np.lexsort((gidx, z[gidx], tile_of))
    entries = np.ascontiguousarray(gidx[order], dtype=np.int64)
    tile_start = np.ascontiguousarray(
        np.searchsorted(tile_of[order], np.arange(tiles_x * tiles_y + 1)), dtype=np.int64)

    means2d = np.ascontiguousarray(np.stack([u, v], axis=1))
    _raster.forward_kernel(entries, tile_start, tiles_x, means2d, conic, color,
                           opacity, z, W, H, rgb, dsum, trans, last)

    ctx = None
    if need_grad:
        ctx = _RenderContext(
            view=view, transform=transform, sh_degree=cloud.sh_degree,
            n=u.shape[0], mu_w=mu_w[kidx], cov_w=cov_w[kidx],
            sh_orig=cloud.sh[kidx], sh_rot=sh_rot[kidx], basis=basis,
            dirn=dirn, dir_len=dir_len, p_cam=np.stack([x, y, z], axis=1),
            xu=xu, yu=yu, clamp_x=clamp_x, clamp_y=clamp_y,
            jmat=jmat, cov_cam=cov_cam, conic=conic, means2d=means2d,
            color=color, raw_color=raw_color, opacity=opacity,
            entries=entries, tile_start=tile_start, tiles_x=tiles_x,
            raw_rgb=rgb, trans=trans, last_e=last,
        )
    return rgb, dsum, trans, last, ctx


def _finalize(rgb_raw: np.ndarray, dsum: np.ndarray, trans: np.ndarray) -> RenderOutput:
    alpha = 1.0 - trans
    depth = np.where(alpha > 1e-12, dsum / np.maximum(alpha, 1e-12), 0.0)
    return RenderOutput(rgb=np.clip(rgb_raw, 0.0, 1.0), depth=depth, alpha=alpha)


def render(cloud: GaussianCloud, view: CameraView,
           transform: Sim3 | None = None) -> RenderOutput:
    """Render a cloud (optionally pushed through `transform`) at a camera view."""
    transform = Sim3.identity() if transform is None else transform
    rgb, dsum, trans, _last, _ctx = _preprocess(cloud, view, transform, need_grad=False)
    return _finalize(rgb, dsum, trans)


def _backward(ctx: _RenderContext | None, grad_rgb: np.ndarray,
              freeze_sh: bool) -> np.ndarray:
    """Chain per-pixel color gradients back to the 7 transform parameters."""
    if ctx is None or ctx.n == 0:
        return np.zeros(7)
    view, transform = ctx.view, ctx.transform
    n = ctx.n
    # the loss sees the clamped image; zero the gradient where the clamp binds
    pass_through = (ctx.raw_rgb > 0.0) & (ctx.raw_rgb < 1.0)
    grad_raw = np.where(pass_through, grad_rgb, 0.0)

    d_means2d = np.zeros((n, 2))
    d_conic = np.zeros((n, 3))
    d_color = np.zeros((n, 3))
    _raster.backward_kernel(ctx.entries, ctx.tile_start, ctx.tiles_x, ctx.means2d,
                            ctx.conic, ctx.color, ctx.opacity,
                            view.width, view.height, grad_raw, ctx.trans, ctx.last_e,
                            d_means2d, d_conic, d_color)

    x, y, z = ctx.p_cam[:, 0], ctx.p_cam[:, 1], ctx.p_cam[:, 2]
    fx, fy = view.fx, view.fy
    R_wc = view.rotation

    # conic -> projected covariance: Q = M^-1 gives dL/dM = -Q gQ Q
    q_mat = np.empty((n, 2, 2))
    q_mat[:, 0, 0] = ctx.conic[:, 0]
    q_mat[:, 0, 1] = q_mat[:, 1, 0] = ctx.conic[:, 1]
    q_mat[:, 1, 1] = ctx.conic[:, 2]
    g_q = np.empty((n, 2, 2))
    g_q[:, 0, 0] = d_conic[:, 0]
    g_q[:, 0, 1] = g_q[:, 1, 0] = 0.5 * d_conic[:, 1]
    g_q[:, 1, 1] = d_conic[:, 2]
    g_m = -np.einsum("nab,nbc,ncd->nad", q_mat, g_q, q_mat)

    g_cov_cam = np.einsum("nba,nbc,ncd->nad", ctx.jmat, g_m, ctx.jmat)
    g_j = 2.0 * np.einsum("nab,nbc,ncd->nad", g_m, ctx.jmat, ctx.cov_cam)

    inv_z2 = 1.0 / (z * z)
    g_x = d_means2d[:, 0] * fx / z
    g_y = d_means2d[:, 1] * fy / z
    g_z = -d_means2d[:, 0] * fx * x * inv_z2 - d_means2d[:, 1] * fy * y * inv_z2
    g_xu = g_j[:, 0, 2] * (-fx * inv_z2)
    g_yu = g_j[:, 1, 2] * (-fy * inv_z2)
    g_z += (g_j[:, 0, 0] * (-fx * inv_z2) + g_j[:, 0, 2] * (2.0 * fx * ctx.xu * inv_z2 / z)
            + g_j[:, 1, 1] * (-fy * inv_z2) + g_j[:, 1, 2] * (2.0 * fy * ctx.yu * inv_z2 / z))
    # xu = clamp(x/z) * z: d/dx passes when unclamped, d/dz = xu/z when clamped
    g_x += np.where(ctx.clamp_x, 0.0, g_xu)
    g_z += np.where(ctx.clamp_x, g_xu * ctx.xu / z, 0.0)
    g_y += np.where(ctx.clamp_y, 0.0, g_yu)
    g_z += np.where(ctx.clamp_y, g_yu * ctx.yu / z, 0.0)

    g_p = np.stack([g_x, g_y, g_z], axis=1)
    g_mu = g_p @ R_wc
    g_cov_w = np.einsum("ba,nbc,cd->nad", R_wc, g_cov_cam, R_wc)

    sh_rot_term = np.zeros(3)
    if not freeze_sh:
        d_color = np.where(ctx.raw_color > 0.0, d_color, 0.0)
        if np.any(d_color):
            # color depends on the view direction through the splat position
            b_grad = sh_basis_gradient(ctx.dirn, ctx.sh_degree)
            g_dir = np.einsum("nc,nck,nkd->nd", d_color, ctx.sh_rot, b_grad)
            g_mu += (g_dir - ctx.dirn * np.sum(g_dir * ctx.dirn, axis=1, keepdims=True)) \
                / ctx.dir_len[:, None]
            if ctx.sh_degree >= 1:
                R_t = transform.rotation
                d_rs = [_hat(e) @ R_t for e in np.eye(3)]
                _, dblocks = sh_rotation_matrices_with_tangent(R_t, d_rs, ctx.sh_degree)
                for k in range(3):
                    acc = 0.0
                    for l in range(1, ctx.sh_degree + 1):
                        sl = slice(l * l, (l + 1) * (l + 1))
                        rotated = ctx.sh_orig[:, :, sl] @ dblocks[k][l].T
                        acc += np.einsum("nc,ncm,nm->", d_color, rotated, ctx.basis[:, sl])
                    sh_rot_term[k] = acc

    a = ctx.mu_w - transform.t
    g_t = g_mu.sum(axis=0)
    g_lambda = float(np.sum(g_mu * a) + 2.0 * np.sum(g_cov_w * ctx.cov_w))
    comm = (np.einsum("nab,nbc->nac", ctx.cov_w, g_cov_w)
            - np.einsum("nab,nbc->nac", g_cov_w, ctx.cov_w))
    g_omega = (np.cross(a, g_mu).sum(axis=0)
               + 2.0 * np.stack([comm[:, 1, 2], comm[:, 2, 0], comm[:, 0, 1]]).sum(axis=1)
               + sh_rot_term)
    return np.concatenate([[g_lambda], g_omega, g_t])


def render_pair_loss_grad(
    g1: GaussianCloud,
    g2: GaussianCloud,
    transform: Sim3,
    view: CameraView,
    freeze_sh: bool = False,
    reference: RenderOutput | None = None,
    mask: np.ndarray | None = None,
) -> tuple[float, SplatGradients, tuple[RenderOutput, RenderOutput]]:
    """Masked photometric L1 between renders of g1 and transform(g2), plus
    analytic gradients of the loss w.r.t. the transform's tangent parameters.

    The mask defaults to the intersection of both coverage masks and is
    treated as a constant (no gradient through mask boundaries); callers
    probing the loss, e.g. by finite differences, pass a fixed `mask`.
    `reference` may carry a precomputed render of g1 at this view (g1
    receives no gradient, so callers optimizing the transform cache it).
    """
    out1 = render(g1, view) if reference is None else reference
    rgb, dsum, trans, _last, ctx = _preprocess(g2, view, transform, need_grad=True)
    out2 = _finalize(rgb, dsum, trans)
    if mask is None:
        mask = out1.mask() & out2.mask()
    m = int(mask.sum())
    if m == 0:
        raise NoOverlapError("renders share no covered pixels at this view")
    diff = out1.rgb - out2.rgb
    loss = float(np.abs(diff[mask]).mean())
    grad_rgb2 = np.zeros_like(diff)
    grad_rgb2[mask] = -np.sign(diff[mask]) / (3.0 * m)
    grads = SplatGradients(_backward(ctx, grad_rgb2, freeze_sh))
    return loss, grads, (out1, out2)
