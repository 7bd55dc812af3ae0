"""Real spherical harmonics: basis evaluation and per-band rotation matrices.

Basis constants and ordering follow the de-facto Gaussian-splatting color
convention (band 1 ordered y, z, x with alternating signs). Rotation of a
coefficient vector uses one orthogonal block per band; band k is built by
recurrence from band k-1 and the band-1 block through constant coupling
matrices, so arbitrary degrees up to 3 need only the analytic band-1 form.
"""

from __future__ import annotations

import numpy as np

MAX_DEGREE = 3

SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
         -1.0925484305920792, 0.5462742152960396)
SH_C3 = (-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
         0.3731763325901154, -0.4570457994644658, 1.445305721320277,
         -0.5900435899266435)

# band-1 basis is (-y, z, -x) times SH_C1: signs relative to coordinate order (y, z, x)
_BAND1_SIGNS = np.array([-1.0, 1.0, -1.0])
_BAND1_PERM = np.array([1, 2, 0])


def num_coeffs(degree: int) -> int:
    return (degree + 1) ** 2


def check_degree(degree: int) -> int:
    degree = int(degree)
    if not 0 <= degree <= MAX_DEGREE:
        raise ValueError(f"SH degree must be in [0, {MAX_DEGREE}], got {degree}")
    return degree


def sh_basis(dirs: np.ndarray, degree: int = MAX_DEGREE) -> np.ndarray:
    """Basis values at unit directions (N, 3) -> (N, (degree+1)^2)."""
    degree = check_degree(degree)
    d = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    x, y, z = d[:, 0], d[:, 1], d[:, 2]
    out = np.empty((d.shape[0], num_coeffs(degree)), dtype=np.float64)
    out[:, 0] = SH_C0
    if degree >= 1:
        out[:, 1] = -SH_C1 * y
        out[:, 2] = SH_C1 * z
        out[:, 3] = -SH_C1 * x
    if degree >= 2:
        xx, yy, zz = x * x, y * y, z * z
        out[:, 4] = SH_C2[0] * x * y
        out[:, 5] = SH_C2[1] * y * z
        out[:, 6] = SH_C2[2] * (2.0 * zz - xx - yy)
        out[:, 7] = SH_C2[3] * x * z
        out[:, 8] = SH_C2[4] * (xx - yy)
    if degree >= 3:
        out[:, 9] = SH_C3[0] * y * (3.0 * xx - yy)
        out[:, 10] = SH_C3[1] * x * y * z
        out[:, 11] = SH_C3[2] * y * (4.0 * zz - xx - yy)
        out[:, 12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy)
        out[:, 13] = SH_C3[4] * x * (4.0 * zz - xx - yy)
        out[:, 14] = SH_C3[5] * z * (xx - yy)
        out[:, 15] = SH_C3[6] * x * (xx - 3.0 * yy)
    return out


def sh_basis_gradient(dirs: np.ndarray, degree: int = MAX_DEGREE) -> np.ndarray:
    """d basis / d direction at (N, 3) -> (N, (degree+1)^2, 3)."""
    degree = check_degree(degree)
    d = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    x, y, z = d[:, 0], d[:, 1], d[:, 2]
    zero = np.zeros_like(x)
    g = np.zeros((d.shape[0], num_coeffs(degree), 3), dtype=np.float64)
    if degree >= 1:
        g[:, 1, 1] = -SH_C1
        g[:, 2, 2] = SH_C1
        g[:, 3, 0] = -SH_C1
    if degree >= 2:
        g[:, 4] = SH_C2[0] * np.stack([y, x, zero], axis=-1)
        g[:, 5] = SH_C2[1] * np.stack([zero, z, y], axis=-1)
        g[:, 6] = SH_C2[2] * np.stack([-2 * x, -2 * y, 4 * z], axis=-1)
        g[:, 7] = SH_C2[3] * np.stack([z, zero, x], axis=-1)
        g[:, 8] = SH_C2[4] * np.stack([2 * x, -2 * y, zero], axis=-1)
    if degree >= 3:
        xx, yy, zz = x * x, y * y, z * z
        g[:, 9] = SH_C3[0] * np.stack([6 * x * y, 3 * xx - 3 * yy, zero], axis=-1)
        g[:, 10] = SH_C3[1] * np.stack([y * z, x * z, x * y], axis=-1)
        g[:, 11] = SH_C3[2] * np.stack([-2 * x * y, 4 * zz - xx - 3 * yy, 8 * y * z], axis=-1)
        g[:, 12] = SH_C3[3] * np.stack([-6 * x * z, -6 * y * z, 6 * zz - 3 * xx - 3 * yy], axis=-1)
        g[:, 13] = SH_C3[4] * np.stack([4 * zz - 3 * xx - yy, -2 * x * y, 8 * x * z], axis=-1)
        g[:, 14] = SH_C3[5] * np.stack([2 * x * z, -2 * y * z, xx - yy], axis=-1)
        g[:, 15] = SH_C3[6] * np.stack([3 * xx - 3 * yy, -6 * x * y, zero], axis=-1)
    return g


def sh_evaluate(sh: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Evaluate per-channel coefficients (3, K) at a unit direction -> rgb (3,).

    Includes the conventional +0.5 offset applied to splat colors.
    """
    sh = np.asarray(sh, dtype=np.float64)
    if sh.ndim != 2 or sh.shape[0] != 3:
        raise ValueError(f"expected coefficients shaped (3, K), got {sh.shape}")
    k = sh.shape[1]
    degree = int(round(np.sqrt(k))) - 1
    if num_coeffs(check_degree(degree)) != k:
        raise ValueError(f"coefficient count {k} is not a square up to degree {MAX_DEGREE}")
    d = np.asarray(direction, dtype=np.float64).reshape(3)
    if abs(np.linalg.norm(d) - 1.0) > 1e-6:
        raise ValueError(f"direction must be unit length, |d| = {np.linalg.norm(d):.8f}")
    basis = sh_basis(d[None, :], degree)[0]
    return sh @ basis + 0.5


# --- rotation blocks -------------------------------------------------------

def _band1_block(R: np.ndarray) -> np.ndarray:
    """Band-1 block: permutation-conjugated rotation in (y, z, x) ordering,
    sign-conjugated to match the alternating basis signs."""
    M = R[np.ix_(_BAND1_PERM, _BAND1_PERM)]
    return np.outer(_BAND1_SIGNS, _BAND1_SIGNS) * M


def _fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n, dtype=np.float64) + 0.5
    phi = np.pi * (3.0 - np.sqrt(5.0)) * i
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


def _coupling_matrices() -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Constant matrices (G_l, W_l) expressing band-l basis values as linear
    combinations of band-1 x band-(l-1) products: b_l = G_l (b_1 kron b_{l-1}),
    W_l = (G_l G_l^T)^-1 G_l. Exact up to solver roundoff."""
    dirs = _fibonacci_sphere(256)
    full = sh_basis(dirs, MAX_DEGREE)
    bands = {l: full[:, l * l:(l + 1) * (l + 1)] for l in range(MAX_DEGREE + 1)}
    out = {}
    for l in (2, 3):
        prod = np.einsum("ni,nj->nij", bands[1], bands[l - 1]).reshape(len(dirs), -1)
        gt, *_ = np.linalg.lstsq(prod, bands[l], rcond=None)
        G = gt.T
        W = np.linalg.solve(G @ G.T, G)
        out[l] = (G, W)
    return out


_COUPLING = _coupling_matrices()


def sh_rotation_matrices(R: np.ndarray, degree: int) -> list[np.ndarray]:
    """Per-band orthogonal blocks rotating coefficient vectors, sizes 1..2*degree+1."""
    degree = check_degree(degree)
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        raise ValueError(f"expected (3, 3) rotation, got {R.shape}")
    blocks = [np.ones((1, 1))]
    if degree >= 1:
        blocks.append(_band1_block(R))
    for l in range(2, degree + 1):
        G, W = _COUPLING[l]
        blocks.append(W @ np.kron(blocks[1], blocks[l - 1]) @ G.T)
    return blocks


def sh_rotation_matrices_with_tangent(
    R: np.ndarray, dRs: list[np.ndarray], degree: int
) -> tuple[list[np.ndarray], list[list[np.ndarray]]]:
    """Blocks plus their directional derivatives for each rotation tangent dR.

    dRs are derivatives of the rotation matrix itself (e.g. hat(e_k) @ R for a
    left perturbation); the returned dblocks[k][l] matches block l.
    """
    degree = check_degree(degree)
    blocks = sh_rotation_matrices(R, degree)
    dblocks = []
    for dR in dRs:
        d = [np.zeros((1, 1))]
        if degree >= 1:
            d.append(_band1_block(np.asarray(dR, dtype=np.float64)))
        for l in range(2, degree + 1):
            G, W = _COUPLING[l]
            term = np.kron(d[1], blocks[l - 1]) + np.kron(blocks[1], d[l - 1])
            d.append(W @ term @ G.T)
        dblocks.append(d)
    return blocks, dblocks


def rotate_sh(sh: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Rotate coefficients (..., K) so the represented color field co-rotates."""
    sh = np.asarray(sh, dtype=np.float64)
    k = sh.shape[-1]
    degree = int(round(np.sqrt(k))) - 1
    if num_coeffs(check_degree(degree)) != k:
        raise ValueError(f"coefficient count {k} is not a square up to degree {MAX_DEGREE}")
    blocks = sh_rotation_matrices(R, degree)
    out = sh.copy()
    for l in range(1, degree + 1):
        sl = slice(l * l, (l + 1) * (l + 1))
        out[..., sl] = sh[..., sl] @ blocks[l].T
    return out
