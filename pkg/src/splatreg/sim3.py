"""Similarity-transform (scale, rotation, translation) algebra on quaternions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

QUAT_TOL = 1e-9


def quat_normalize(q: np.ndarray) -> np.ndarray:
    """Normalize quaternion(s) (..., 4), scalar-first."""
    q = np.asarray(q, dtype=np.float64)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(norm == 0.0):
        raise ValueError("zero-norm quaternion")
    return q / norm


def quat_canonical(q: np.ndarray) -> np.ndarray:
    """Flip sign so the scalar part is non-negative (reproducible serialization)."""
    q = np.asarray(q, dtype=np.float64)
    sign = np.where(q[..., :1] < 0.0, -1.0, 1.0)
    return q * sign


def quat_multiply(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Hamilton product, scalar-first, broadcasting over leading axes."""
    w1, x1, y1, z1 = np.moveaxis(np.asarray(q1, dtype=np.float64), -1, 0)
    w2, x2, y2, z2 = np.moveaxis(np.asarray(q2, dtype=np.float64), -1, 0)
    return np.stack(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ],
        axis=-1,
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Unit quaternion(s) (..., 4) to rotation matrix (..., 3, 3)."""
    q = quat_normalize(q)
    w, x, y, z = np.moveaxis(q, -1, 0)
    R = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    R[..., 0, 0] = 1 - 2 * (y * y + z * z)
    R[..., 0, 1] = 2 * (x * y - w * z)
    R[..., 0, 2] = 2 * (x * z + w * y)
    R[..., 1, 0] = 2 * (x * y + w * z)
    R[..., 1, 1] = 1 - 2 * (x * x + z * z)
    R[..., 1, 2] = 2 * (y * z - w * x)
    R[..., 2, 0] = 2 * (x * z - w * y)
    R[..., 2, 1] = 2 * (y * z + w * x)
    R[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def matrix_to_quat(R: np.ndarray) -> np.ndarray:
    """3x3 rotation matrix to unit quaternion (w, x, y, z), non-negative scalar part."""
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        raise ValueError(f"expected (3, 3) rotation matrix, got {R.shape}")
    trace = R[0, 0] + R[1, 1] + R[2, 2]
    if trace > 0:
        s = 0.5 / np.sqrt(trace + 1.0)
        q = np.array([0.25 / s, (R[2, 1] - R[1, 2]) * s, (R[0, 2] - R[2, 0]) * s, (R[1, 0] - R[0, 1]) * s])
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = np.array([(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s])
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = np.array([(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s])
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = np.array([(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s])
    return quat_canonical(quat_normalize(q))


def quat_from_axis_angle(axis: np.ndarray, angle_rad: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if n == 0.0:
        return np.array([1.0, 0.0, 0.0, 0.0])
    half = 0.5 * angle_rad
    return np.concatenate([[np.cos(half)], np.sin(half) * axis / n])


def rotvec_to_quat(w: np.ndarray) -> np.ndarray:
    """Axis-angle 3-vector (angle = norm) to unit quaternion."""
    w = np.asarray(w, dtype=np.float64)
    angle = np.linalg.norm(w)
    if angle < 1e-14:
        # first-order expansion keeps the map smooth through zero
        q = np.concatenate([[1.0], 0.5 * w])
        return quat_normalize(q)
    return quat_from_axis_angle(w / angle, angle)


def quat_rotation_angle(q: np.ndarray) -> float:
    """Rotation angle in radians of a unit quaternion."""
    q = quat_normalize(q)
    w = min(1.0, abs(float(q[0])))
    return 2.0 * float(np.arccos(w))


def quat_slerp(q0: np.ndarray, q1: np.ndarray, u: float) -> np.ndarray:
    """Spherical interpolation between unit quaternions (shortest arc)."""
    q0 = quat_normalize(q0)
    q1 = quat_normalize(q1)
    dot = float(np.dot(q0, q1))
    if dot < 0.0:
        q1 = -q1
        dot = -dot
    if dot > 1.0 - 1e-12:
        return quat_normalize(q0 + u * (q1 - q0))
    theta = np.arccos(min(1.0, dot))
    s = np.sin(theta)
    return quat_normalize((np.sin((1 - u) * theta) / s) * q0 + (np.sin(u * theta) / s) * q1)


def _as_vec3(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite")
    return v


@dataclass(frozen=True)
class Sim3:
    """Similarity transform x' = s * R(q) * x + t, quaternion scalar-first."""

    s: float = 1.0
    q: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        s = float(self.s)
        if not np.isfinite(s) or s <= 0.0:
            raise ValueError(f"scale must be positive and finite, got {s}")
        q = np.asarray(self.q, dtype=np.float64).reshape(-1)
        if q.shape != (4,):
            raise ValueError(f"quaternion must have 4 components, got shape {q.shape}")
        norm = np.linalg.norm(q)
        if not np.isfinite(norm) or norm == 0.0:
            raise ValueError("quaternion must be finite and non-zero")
        q = quat_canonical(q / norm)
        t = _as_vec3(self.t, "translation")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "t", t)
        self.q.flags.writeable = False
        self.t.flags.writeable = False

    @classmethod
    def identity(cls) -> "Sim3":
        return cls()

    @classmethod
    def from_matrix(cls, s: float, R: np.ndarray, t: np.ndarray) -> "Sim3":
        return cls(s=s, q=matrix_to_quat(R), t=t)

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.q)

    @property
    def is_rigid(self) -> bool:
        return abs(self.s - 1.0) < 1e-12

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Apply to (3,) or (N, 3) points."""
        p = np.asarray(points, dtype=np.float64)
        single = p.ndim == 1
        p = np.atleast_2d(p)
        out = self.s * (p @ self.rotation.T) + self.t
        return out[0] if single else out

    def compose(self, other: "Sim3") -> "Sim3":
        """Transform equal to applying `other` first, then `self`."""
        s = self.s * other.s
        q = quat_canonical(quat_normalize(quat_multiply(self.q, other.q)))
        t = self.s * (self.rotation @ other.t) + self.t
        return Sim3(s=s, q=q, t=t)

    def inverse(self) -> "Sim3":
        R_inv = self.rotation.T
        s_inv = 1.0 / self.s
        return Sim3(s=s_inv, q=quat_conjugate(self.q), t=-s_inv * (R_inv @ self.t))

    def rigid(self) -> "Sim3":
        """Drop the scale, keeping rotation and translation as-is."""
        return Sim3(s=1.0, q=self.q, t=self.t)

    def parameters(self) -> np.ndarray:
        """(s, qw, qx, qy, qz, tx, ty, tz) as a flat array."""
        return np.concatenate([[self.s], self.q, self.t])

    def to_dict(self) -> dict:
        return {
            "s": float(self.s),
            "qw": float(self.q[0]),
            "qx": float(self.q[1]),
            "qy": float(self.q[2]),
            "qz": float(self.q[3]),
            "tx": float(self.t[0]),
            "ty": float(self.t[1]),
            "tz": float(self.t[2]),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Sim3":
        missing = {"s", "qw", "qx", "qy", "qz", "tx", "ty", "tz"} - set(d)
        if missing:
            raise ValueError(f"transform record missing fields: {sorted(missing)}")
        return cls(
            s=float(d["s"]),
            q=np.array([d["qw"], d["qx"], d["qy"], d["qz"]], dtype=np.float64),
            t=np.array([d["tx"], d["ty"], d["tz"]], dtype=np.float64),
        )

    def __repr__(self) -> str:
        q = ", ".join(f"{v:.6g}" for v in self.q)
        t = ", ".join(f"{v:.6g}" for v in self.t)
        return f"Sim3(s={self.s:.6g}, q=({q}), t=({t}))"


def rotation_angle_between(a: Sim3, b: Sim3) -> float:
    """Relative rotation angle in radians between two transforms."""
    dq = quat_multiply(quat_conjugate(a.q), b.q)
    return quat_rotation_angle(dq)
