"""Pinhole camera views: world-to-camera rigid pose plus intrinsics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .sim3 import Sim3, quat_slerp, quat_to_matrix


@dataclass(frozen=True)
class CameraView:
    """x_cam = R(q) x_world + t; x right, y down, z forward (OpenCV-style)."""

    q: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))
    fx: float = 400.0
    fy: float = 400.0
    cx: float = 200.0
    cy: float = 200.0
    width: int = 400
    height: int = 400
    view_id: str = ""

    def __post_init__(self):
        pose = Sim3(1.0, np.asarray(self.q, dtype=np.float64),
                    np.asarray(self.t, dtype=np.float64))
        object.__setattr__(self, "q", pose.q)
        object.__setattr__(self, "t", pose.t)
        for name in ("fx", "fy", "cx", "cy"):
            object.__setattr__(self, name, float(getattr(self, name)))
        for name in ("width", "height"):
            v = int(getattr(self, name))
            if v < 1:
                raise ValueError(f"{name} must be >= 1, got {v}")
            object.__setattr__(self, name, v)
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 <= self.cx < self.width) or not (0 <= self.cy < self.height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside image {self.width}x{self.height}"
            )

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.q)

    @property
    def world_to_cam(self) -> Sim3:
        return Sim3(1.0, self.q, self.t)

    @property
    def center(self) -> np.ndarray:
        """Camera optical center in world coordinates."""
        return -(self.rotation.T @ self.t)

    def with_pose(self, q: np.ndarray, t: np.ndarray, view_id: str | None = None) -> "CameraView":
        return CameraView(q=q, t=t, fx=self.fx, fy=self.fy, cx=self.cx, cy=self.cy,
                          width=self.width, height=self.height,
                          view_id=self.view_id if view_id is None else view_id)

    def to_dict(self) -> dict:
        d = {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
             "width": self.width, "height": self.height, "view_id": self.view_id}
        d.update({k: v for k, v in Sim3(1.0, self.q, self.t).to_dict().items() if k != "s"})
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CameraView":
        return cls(
            q=np.array([d["qw"], d["qx"], d["qy"], d["qz"]], dtype=np.float64),
            t=np.array([d["tx"], d["ty"], d["tz"]], dtype=np.float64),
            fx=d["fx"], fy=d["fy"], cx=d["cx"], cy=d["cy"],
            width=d["width"], height=d["height"], view_id=d.get("view_id", ""),
        )


def look_at(eye, target, up=(0.0, 1.0, 0.0), fov_deg: float = 60.0,
            width: int = 400, height: int = 400, view_id: str = "") -> CameraView:
    """Camera at `eye` looking toward `target`, principal point centered."""
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    up = np.asarray(up, dtype=np.float64)
    forward = target - eye
    n = np.linalg.norm(forward)
    if n < 1e-12:
        raise ValueError("eye and target coincide")
    forward = forward / n
    right = np.cross(up, forward)
    if np.linalg.norm(right) < 1e-8:
        right = np.cross(np.array([1.0, 0.0, 0.0]), forward)
        if np.linalg.norm(right) < 1e-8:
            right = np.cross(np.array([0.0, 1.0, 0.0]), forward)
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    R = np.stack([right, down, forward])
    fx = 0.5 * width / np.tan(np.radians(fov_deg) / 2.0)
    return CameraView(
        q=Sim3.from_matrix(1.0, R, np.zeros(3)).q, t=-(R @ eye),
        fx=fx, fy=fx, cx=width / 2.0, cy=height / 2.0,
        width=width, height=height, view_id=view_id,
    )


def view_through(view: CameraView, transform: Sim3) -> CameraView:
    """Camera that sees the `transform`-mapped scene exactly as `view` sees the original.

    The composed pose w2c o T^-1 carries scale 1/s; projection is invariant to
    a uniform scaling of camera coordinates, so the rigid equivalent divides
    the translation by that scale.
    """
    pose = view.world_to_cam.compose(transform.inverse())
    return view.with_pose(pose.q, pose.t / pose.s)


def interpolate_views(a: CameraView, b: CameraView, u: float) -> CameraView:
    """Rigid interpolation: slerp rotation, lerp optical centers."""
    q = quat_slerp(a.q, b.q, u)
    center = (1.0 - u) * a.center + u * b.center
    R = quat_to_matrix(q)
    return a.with_pose(q, -(R @ center))


def save_views(views: list[CameraView], path: str | Path) -> None:
    payload = {"schema_version": 1, "kind": "camera_views",
               "views": [v.to_dict() for v in views]}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_views(path: str | Path) -> list[CameraView]:
    payload = json.loads(Path(path).read_text())
    if payload.get("kind") != "camera_views":
        raise ValueError(f"{path}: not a camera-views file")
    return [CameraView.from_dict(d) for d in payload["views"]]
