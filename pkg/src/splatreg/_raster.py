"""Serial numba kernels for tile-based splat compositing (forward and backward).

The splat response is exp(-q/2) tapered by a C1 smoothstep that reaches zero
exactly at the 3-sigma extent (q = 9), so pixel values are continuously
differentiable in the splat parameters; a hard cutoff would make the
photometric loss jump under infinitesimal motion and break gradient checks.
Kernels iterate tiles, pixels, then depth-sorted entries; everything is
single-threaded so outputs are bit-reproducible for identical inputs.
"""

from __future__ import annotations

import numpy as np
from numba import njit

TILE = 16
ALPHA_CLAMP = 0.99
ALPHA_MIN = 1e-9
T_STOP = 1e-4
Q_TAPER = 6.25  # smoothstep starts at 2.5 sigma
Q_CUT = 9.0  # and ends at the 3 sigma extent


@njit(cache=True, inline="always")
def _window(q):
    """C1 taper value and its derivative dw/dq."""
    if q <= Q_TAPER:
        return 1.0, 0.0
    u = (q - Q_TAPER) / (Q_CUT - Q_TAPER)
    w = 1.0 - u * u * (3.0 - 2.0 * u)
    wp = -6.0 * u * (1.0 - u) / (Q_CUT - Q_TAPER)
    return w, wp


@njit(cache=True)
def forward_kernel(entries, tile_start, tiles_x, means2d, conic, color, opacity, depth,
                   width, height, out_rgb, out_depthsum, out_trans, out_laste):
    n_tiles = tile_start.shape[0] - 1
    for tile in range(n_tiles):
        e0 = tile_start[tile]
        e1 = tile_start[tile + 1]
        if e1 == e0:
            continue
        ty = tile // tiles_x
        tx = tile - ty * tiles_x
        y_end = min((ty + 1) * TILE, height)
        x_end = min((tx + 1) * TILE, width)
        for py in range(ty * TILE, y_end):
            for px in range(tx * TILE, x_end):
                trans = 1.0
                r = 0.0
                g = 0.0
                b = 0.0
                dsum = 0.0
                last = np.int64(-1)
                for e in range(e0, e1):
                    gi = entries[e]
                    dx = px - means2d[gi, 0]
                    dy = py - means2d[gi, 1]
                    q = (conic[gi, 0] * dx * dx + 2.0 * conic[gi, 1] * dx * dy
                         + conic[gi, 2] * dy * dy)
                    if q >= Q_CUT or q < 0.0:
                        continue
                    w, _ = _window(q)
                    alpha = opacity[gi] * np.exp(-0.5 * q) * w
                    if alpha > ALPHA_CLAMP:
                        alpha = ALPHA_CLAMP
                    if alpha < ALPHA_MIN:
                        continue
                    test_t = trans * (1.0 - alpha)
                    if test_t < T_STOP:
                        break
                    wgt = alpha * trans
                    r += color[gi, 0] * wgt
                    g += color[gi, 1] * wgt
                    b += color[gi, 2] * wgt
                    dsum += depth[gi] * wgt
                    trans = test_t
                    last = e
                out_rgb[py, px, 0] = r
                out_rgb[py, px, 1] = g
                out_rgb[py, px, 2] = b
                out_depthsum[py, px] = dsum
                out_trans[py, px] = trans
                out_laste[py, px] = last


@njit(cache=True)
def backward_kernel(entries, tile_start, tiles_x, means2d, conic, color, opacity,
                    width, height, grad_rgb, out_trans, out_laste,
                    d_means2d, d_conic, d_color):
    n_tiles = tile_start.shape[0] - 1
    for tile in range(n_tiles):
        e0 = tile_start[tile]
        ty = tile // tiles_x
        tx = tile - ty * tiles_x
        y_end = min((ty + 1) * TILE, height)
        x_end = min((tx + 1) * TILE, width)
        for py in range(ty * TILE, y_end):
            for px in range(tx * TILE, x_end):
                last = out_laste[py, px]
                if last < 0:
                    continue
                gr0 = grad_rgb[py, px, 0]
                gr1 = grad_rgb[py, px, 1]
                gr2 = grad_rgb[py, px, 2]
                if gr0 == 0.0 and gr1 == 0.0 and gr2 == 0.0:
                    continue
                trans = out_trans[py, px]
                s0 = 0.0
                s1 = 0.0
                s2 = 0.0
                for e in range(last, e0 - 1, -1):
                    gi = entries[e]
                    dx = px - means2d[gi, 0]
                    dy = py - means2d[gi, 1]
                    q = (conic[gi, 0] * dx * dx + 2.0 * conic[gi, 1] * dx * dy
                         + conic[gi, 2] * dy * dy)
                    if q >= Q_CUT or q < 0.0:
                        continue
                    w, wp = _window(q)
                    og = opacity[gi] * np.exp(-0.5 * q)
                    raw_alpha = og * w
                    clamped = raw_alpha > ALPHA_CLAMP
                    alpha = ALPHA_CLAMP if clamped else raw_alpha
                    if alpha < ALPHA_MIN:
                        continue
                    # transmittance in front of this splat
                    trans = trans / (1.0 - alpha)
                    wgt = alpha * trans
                    c0 = color[gi, 0]
                    c1 = color[gi, 1]
                    c2 = color[gi, 2]
                    d_color[gi, 0] += gr0 * wgt
                    d_color[gi, 1] += gr1 * wgt
                    d_color[gi, 2] += gr2 * wgt
                    # dC/dalpha_i = c_i T_i - (sum of later contributions) / (1 - alpha_i)
                    inv = 1.0 / (1.0 - alpha)
                    dald = (gr0 * (c0 * trans - s0 * inv)
                            + gr1 * (c1 * trans - s1 * inv)
                            + gr2 * (c2 * trans - s2 * inv))
                    s0 += c0 * wgt
                    s1 += c1 * wgt
                    s2 += c2 * wgt
                    if not clamped:
                        # alpha = o exp(-q/2) w(q): dalpha/dq = o exp(-q/2)(wp - w/2)
                        dldq = dald * og * (wp - 0.5 * w)
                        gx = 2.0 * (conic[gi, 0] * dx + conic[gi, 1] * dy)
                        gy = 2.0 * (conic[gi, 1] * dx + conic[gi, 2] * dy)
                        d_means2d[gi, 0] += -dldq * gx
                        d_means2d[gi, 1] += -dldq * gy
                        d_conic[gi, 0] += dldq * dx * dx
                        d_conic[gi, 1] += dldq * 2.0 * dx * dy
                        d_conic[gi, 2] += dldq * dy * dy
