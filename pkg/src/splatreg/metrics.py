"""Image-quality metrics and the ICP-with-scale baseline."""

from __future__ import annotations

import numpy as np
from scipy.signal import convolve2d
from scipy.spatial import cKDTree

from .sim3 import Sim3

PSNR_CAP = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
LUMA = np.array([0.299, 0.587, 0.114])


def _check_image(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim not in (2, 3) or (a.ndim == 3 and a.shape[2] != 3):
        raise ValueError(f"{name} must be (H, W) or (H, W, 3), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"non-finite values in {name}")
    if a.min() < -1e-9 or a.max() > 1.0 + 1e-9:
        raise ValueError(f"{name} values must lie in [0, 1], got [{a.min()}, {a.max()}]")
    return a


def psnr(a: np.ndarray, b: np.ndarray, cap: float = PSNR_CAP) -> float:
    """10 log10(1 / MSE) for unit-range images; identical images hit the cap."""
    a = _check_image(a, "a")
    b = _check_image(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return cap
    return min(cap, 10.0 * np.log10(1.0 / mse))


def to_luminance(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        return img
    return img @ LUMA


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r * r) / (2.0 * sigma * sigma))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Windowed structural similarity on luminance, dynamic range 1.

    11x11 Gaussian window (sigma 1.5), k1 = 0.01, k2 = 0.03; the mean is
    taken over fully valid windows.
    """
    a = to_luminance(_check_image(a, "a"))
    b = to_luminance(_check_image(b, "b"))
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"image {a.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    w = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)

    def f(x):
        return convolve2d(x, w, mode="valid")

    mu_a = f(a)
    mu_b = f(b)
    var_a = f(a * a) - mu_a * mu_a
    var_b = f(b * b) - mu_b * mu_b
    cov = f(a * b) - mu_a * mu_b
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def umeyama_fit(src: np.ndarray, dst: np.ndarray) -> Sim3:
    """Closed-form least-squares similarity mapping src points onto dst."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 3:
        raise ValueError(f"point sets must be matching (N, 3), got {src.shape} and {dst.shape}")
    n = src.shape[0]
    if n < 4:
        raise ValueError(f"need at least 4 points, got {n}")
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    xs = src - mu_s
    xd = dst - mu_d
    var_s = float(np.mean(np.sum(xs * xs, axis=1)))
    cov = (xd.T @ xs) / n
    U, D, Vt = np.linalg.svd(cov)
    if var_s <= 0 or D[1] < 1e-12 * max(D[0], 1e-300):
        raise ValueError("degenerate point configuration (rank-deficient)")
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt
    s = float(np.trace(np.diag(D) @ S) / var_s)
    if s <= 0:
        raise ValueError("degenerate point configuration (non-positive scale)")
    t = mu_d - s * (R @ mu_s)
    return Sim3.from_matrix(s, R, t)


def icp_umeyama(means1: np.ndarray, means2: np.ndarray, t_init: Sim3,
                iters: int = 50) -> Sim3:
    """Iterated nearest-neighbor + similarity fit aligning means2 onto means1.

    Stops when the correspondence set stabilizes or `iters` is exhausted.
    """
    means1 = np.asarray(means1, dtype=np.float64)
    means2 = np.asarray(means2, dtype=np.float64)
    if means1.ndim != 2 or means1.shape[1] != 3 or means2.ndim != 2 or means2.shape[1] != 3:
        raise ValueError("point sets must be (N, 3)")
    if means1.shape[0] < 4 or means2.shape[0] < 4:
        raise ValueError("need at least 4 points per set")
    tree = cKDTree(means1)
    transform = t_init
    prev = None
    for _ in range(max(1, int(iters))):
        moved = transform.apply(means2)
        _, idx = tree.query(moved, k=1)
        if prev is not None and np.array_equal(idx, prev):
            break
        transform = umeyama_fit(means2, means1[idx])
        prev = idx
    return transform
