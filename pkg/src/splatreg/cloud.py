"""Gaussian-cloud data model and its transformation under similarity transforms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sh import check_degree, num_coeffs, sh_rotation_matrices
from .sim3 import Sim3, quat_canonical, quat_multiply, quat_normalize

# file-borne quaternions are float32 and only approximately unit; algebra
# outputs are normalized exactly
_QUAT_NORM_TOL = 1e-3


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Gaussian:
    """Single anisotropic 3D Gaussian with opacity and SH color."""

    mu: np.ndarray
    rot: np.ndarray
    log_scale: np.ndarray
    opacity_logit: float
    sh: np.ndarray  # (3, (L+1)^2), channel-major

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64).reshape(3)
        rot = np.asarray(self.rot, dtype=np.float64).reshape(4)
        log_scale = np.asarray(self.log_scale, dtype=np.float64).reshape(3)
        sh = np.asarray(self.sh, dtype=np.float64)
        if sh.ndim != 2 or sh.shape[0] != 3:
            raise ValueError(f"sh must be (3, K), got {sh.shape}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "rot", rot)
        object.__setattr__(self, "log_scale", log_scale)
        object.__setattr__(self, "opacity_logit", float(self.opacity_logit))
        object.__setattr__(self, "sh", sh)

    @property
    def sh_degree(self) -> int:
        return int(round(np.sqrt(self.sh.shape[1]))) - 1


@dataclass(frozen=True)
class GaussianCloud:
    """Ordered set of Gaussians stored as column arrays.

    mu (N, 3), rot (N, 4) scalar-first, log_scale (N, 3), opacity_logit (N,),
    sh (N, 3, K) with K = (sh_degree + 1)^2. Arrays are immutable after
    construction, so a cloud can be shared freely across workers.
    """

    mu: np.ndarray
    rot: np.ndarray
    log_scale: np.ndarray
    opacity_logit: np.ndarray
    sh: np.ndarray
    sh_degree: int = 3
    frame_label: str = "world"

    def __post_init__(self):
        mu = _readonly(np.atleast_2d(self.mu))
        rot = _readonly(np.atleast_2d(self.rot))
        log_scale = _readonly(np.atleast_2d(self.log_scale))
        opacity = _readonly(np.atleast_1d(self.opacity_logit))
        sh = _readonly(self.sh)
        n = mu.shape[0]
        degree = check_degree(self.sh_degree)
        k = num_coeffs(degree)
        if mu.shape != (n, 3):
            raise ValueError(f"mu must be (N, 3), got {mu.shape}")
        if rot.shape != (n, 4):
            raise ValueError(f"rot must be (N, 4), got {rot.shape}")
        if log_scale.shape != (n, 3):
            raise ValueError(f"log_scale must be (N, 3), got {log_scale.shape}")
        if opacity.shape != (n,):
            raise ValueError(f"opacity_logit must be (N,), got {opacity.shape}")
        if sh.shape != (n, 3, k):
            raise ValueError(f"sh must be (N, 3, {k}) for degree {degree}, got {sh.shape}")
        for name, a in (("mu", mu), ("rot", rot), ("log_scale", log_scale),
                        ("opacity_logit", opacity), ("sh", sh)):
            if not np.all(np.isfinite(a)):
                raise ValueError(f"non-finite values in {name}")
        if n > 0:
            norms = np.linalg.norm(rot, axis=1)
            bad = np.abs(norms - 1.0) > _QUAT_NORM_TOL
            if np.any(bad):
                raise ValueError(
                    f"{int(bad.sum())} rotation quaternions deviate from unit norm "
                    f"by more than {_QUAT_NORM_TOL}"
                )
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "rot", rot)
        object.__setattr__(self, "log_scale", log_scale)
        object.__setattr__(self, "opacity_logit", opacity)
        object.__setattr__(self, "sh", sh)
        object.__setattr__(self, "sh_degree", degree)

    def __len__(self) -> int:
        return self.mu.shape[0]

    def __getitem__(self, i: int) -> Gaussian:
        return Gaussian(self.mu[i], self.rot[i], self.log_scale[i],
                        float(self.opacity_logit[i]), self.sh[i])

    @classmethod
    def empty(cls, sh_degree: int = 3, frame_label: str = "world") -> "GaussianCloud":
        k = num_coeffs(check_degree(sh_degree))
        return cls(
            mu=np.zeros((0, 3)), rot=np.zeros((0, 4)), log_scale=np.zeros((0, 3)),
            opacity_logit=np.zeros(0), sh=np.zeros((0, 3, k)),
            sh_degree=sh_degree, frame_label=frame_label,
        )

    @classmethod
    def from_gaussians(cls, gaussians: list[Gaussian], frame_label: str = "world") -> "GaussianCloud":
        if not gaussians:
            return cls.empty(frame_label=frame_label)
        degree = gaussians[0].sh_degree
        if any(g.sh_degree != degree for g in gaussians):
            raise ValueError("all gaussians must share one SH degree")
        return cls(
            mu=np.stack([g.mu for g in gaussians]),
            rot=np.stack([g.rot for g in gaussians]),
            log_scale=np.stack([g.log_scale for g in gaussians]),
            opacity_logit=np.array([g.opacity_logit for g in gaussians]),
            sh=np.stack([g.sh for g in gaussians]),
            sh_degree=degree,
            frame_label=frame_label,
        )

    def opacity(self) -> np.ndarray:
        """Opacities in (0, 1) from the stored logits."""
        return 1.0 / (1.0 + np.exp(-self.opacity_logit))

    def covariances(self) -> np.ndarray:
        """Dense (N, 3, 3) covariances R S^2 R^T from the factored storage."""
        from .sim3 import quat_to_matrix

        R = quat_to_matrix(self.rot)
        s2 = np.exp(2.0 * self.log_scale)
        return np.einsum("nij,nj,nkj->nik", R, s2, R)

    def scene_diameter(self) -> float:
        """Diagonal of the bounding box of the means."""
        if len(self) == 0:
            return 0.0
        span = self.mu.max(axis=0) - self.mu.min(axis=0)
        return float(np.linalg.norm(span))

    def take(self, indices: np.ndarray, frame_label: str | None = None) -> "GaussianCloud":
        return GaussianCloud(
            mu=self.mu[indices], rot=self.rot[indices], log_scale=self.log_scale[indices],
            opacity_logit=self.opacity_logit[indices], sh=self.sh[indices],
            sh_degree=self.sh_degree,
            frame_label=self.frame_label if frame_label is None else frame_label,
        )

    def with_sh_degree(self, degree: int) -> "GaussianCloud":
        """Zero-pad coefficients up to `degree` (no-op when equal)."""
        degree = check_degree(degree)
        if degree < self.sh_degree:
            raise ValueError("cannot lower the SH degree of a cloud")
        if degree == self.sh_degree:
            return self
        k_new = num_coeffs(degree)
        sh = np.zeros((len(self), 3, k_new))
        sh[:, :, : self.sh.shape[2]] = self.sh
        return GaussianCloud(
            mu=self.mu, rot=self.rot, log_scale=self.log_scale,
            opacity_logit=self.opacity_logit, sh=sh,
            sh_degree=degree, frame_label=self.frame_label,
        )


def transform_cloud(cloud: GaussianCloud, transform: Sim3,
                    frame_label: str | None = None) -> GaussianCloud:
    """Push a cloud through x' = s R x + t.

    Means map affinely; covariances follow the similarity push-forward
    s^2 R Sigma R^T, which in factored storage is a left quaternion product
    plus log(s) added to every log-scale axis. Opacities are untouched and SH
    coefficients rotate per band so view-dependent color co-rotates.
    """
    if len(cloud) == 0:
        return GaussianCloud.empty(cloud.sh_degree,
                                   cloud.frame_label if frame_label is None else frame_label)
    if (transform.s == 1.0 and np.array_equal(transform.q, [1.0, 0.0, 0.0, 0.0])
            and not transform.t.any() and frame_label is None):
        return cloud
    mu = cloud.mu @ (transform.s * transform.rotation).T + transform.t
    rot = quat_canonical(quat_normalize(quat_multiply(transform.q, cloud.rot)))
    log_scale = cloud.log_scale + np.log(transform.s)
    sh = cloud.sh
    if cloud.sh_degree >= 1:
        blocks = sh_rotation_matrices(transform.rotation, cloud.sh_degree)
        sh = sh.copy()
        for l in range(1, cloud.sh_degree + 1):
            sl = slice(l * l, (l + 1) * (l + 1))
            sh[:, :, sl] = cloud.sh[:, :, sl] @ blocks[l].T
    return GaussianCloud(
        mu=mu, rot=rot, log_scale=log_scale,
        opacity_logit=cloud.opacity_logit, sh=sh,
        sh_degree=cloud.sh_degree,
        frame_label=cloud.frame_label if frame_label is None else frame_label,
    )


def concatenate(a: GaussianCloud, b: GaussianCloud) -> GaussianCloud:
    """Concatenate two clouds of equal SH degree, keeping a's frame label."""
    if a.sh_degree != b.sh_degree:
        raise ValueError("clouds must share one SH degree (pad first)")
    return GaussianCloud(
        mu=np.concatenate([a.mu, b.mu]),
        rot=np.concatenate([a.rot, b.rot]),
        log_scale=np.concatenate([a.log_scale, b.log_scale]),
        opacity_logit=np.concatenate([a.opacity_logit, b.opacity_logit]),
        sh=np.concatenate([a.sh, b.sh]),
        sh_degree=a.sh_degree,
        frame_label=a.frame_label,
    )
