"""File interchange for foundation-model outputs (poses, depth, confidence, embeddings).

A bundle is a directory with a human-readable meta.json header and raw
little-endian float32 buffers, so producers need no ML-ecosystem or binary
container dependency. Depth maps use z-depth along the camera axis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sim3 import Sim3

SCHEMA_VERSION = 1
_BUNDLE_BUFFERS = ("depth_fm_1", "depth_fm_2", "conf_1", "conf_2")


class SchemaError(ValueError):
    """Raised when interchange files are missing fields or inconsistent."""


def _as_map(a: np.ndarray, name: str, shape: tuple[int, int] | None) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float32)
    if a.ndim != 2:
        raise SchemaError(f"{name} must be a 2D map, got shape {a.shape}")
    if shape is not None and a.shape != shape:
        raise SchemaError(f"{name} shape {a.shape} does not match {shape}")
    if not np.all(np.isfinite(a)):
        raise SchemaError(f"non-finite values in {name}")
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class FoundationBundle:
    """Per-image-pair foundation-model outputs.

    pose_2_to_1 maps camera-2 coordinates into the camera-1 frame (rigid);
    depth/confidence maps are (height, width), row-major.
    """

    pose_2_to_1: Sim3
    depth_fm_1: np.ndarray
    depth_fm_2: np.ndarray
    conf_1: np.ndarray
    conf_2: np.ndarray

    def __post_init__(self):
        if not isinstance(self.pose_2_to_1, Sim3):
            raise SchemaError("pose_2_to_1 must be a Sim3")
        if abs(self.pose_2_to_1.s - 1.0) > 1e-9:
            raise SchemaError(f"pose_2_to_1 must be rigid, scale = {self.pose_2_to_1.s}")
        d1 = _as_map(self.depth_fm_1, "depth_fm_1", None)
        shape = d1.shape
        d2 = _as_map(self.depth_fm_2, "depth_fm_2", shape)
        c1 = _as_map(self.conf_1, "conf_1", shape)
        c2 = _as_map(self.conf_2, "conf_2", shape)
        for name, c in (("conf_1", c1), ("conf_2", c2)):
            if np.any(c < 0):
                raise SchemaError(f"negative confidence in {name}")
            if not np.any(c > 0):
                raise SchemaError(f"{name} has no positive entries")
        object.__setattr__(self, "depth_fm_1", d1)
        object.__setattr__(self, "depth_fm_2", d2)
        object.__setattr__(self, "conf_1", c1)
        object.__setattr__(self, "conf_2", c2)

    @property
    def height(self) -> int:
        return self.depth_fm_1.shape[0]

    @property
    def width(self) -> int:
        return self.depth_fm_1.shape[1]


def write_bundle(bundle: FoundationBundle, path: str | Path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    pose = bundle.pose_2_to_1.to_dict()
    pose.pop("s")
    meta = {
        "schema_version": SCHEMA_VERSION,
        "kind": "foundation_bundle",
        "width": bundle.width,
        "height": bundle.height,
        "dtype": "float32",
        "depth_convention": "z",
        "pose_2_to_1": pose,
        "buffers": {name: f"{name}.f32" for name in _BUNDLE_BUFFERS},
    }
    (path / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    for name in _BUNDLE_BUFFERS:
        arr: np.ndarray = getattr(bundle, name)
        (path / f"{name}.f32").write_bytes(arr.astype("<f4").tobytes())


def _read_meta(path: Path, kind: str) -> dict:
    meta_path = path / "meta.json"
    if not meta_path.is_file():
        raise SchemaError(f"{path}: missing meta.json")
    meta = json.loads(meta_path.read_text())
    version = meta.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"{path}: unknown schema version {version!r}")
    if meta.get("kind") != kind:
        raise SchemaError(f"{path}: expected kind {kind!r}, got {meta.get('kind')!r}")
    return meta


def _read_buffer(path: Path, rel: str, count: int, what: str) -> np.ndarray:
    buf_path = path / rel
    if not buf_path.is_file():
        raise SchemaError(f"{path}: missing buffer file {rel!r}")
    raw = buf_path.read_bytes()
    if len(raw) != 4 * count:
        raise SchemaError(
            f"{path}: {what} has {len(raw)} bytes, expected {4 * count} (dimension mismatch)"
        )
    return np.frombuffer(raw, dtype="<f4").copy()


def read_bundle(path: str | Path) -> FoundationBundle:
    path = Path(path)
    meta = _read_meta(path, "foundation_bundle")
    for key in ("width", "height", "pose_2_to_1", "buffers"):
        if key not in meta:
            raise SchemaError(f"{path}: meta.json missing field {key!r}")
    w, h = int(meta["width"]), int(meta["height"])
    pose_d = dict(meta["pose_2_to_1"])
    pose_d["s"] = 1.0
    pose = Sim3.from_dict(pose_d)
    maps = {}
    for name in _BUNDLE_BUFFERS:
        if name not in meta["buffers"]:
            raise SchemaError(f"{path}: buffers missing entry {name!r}")
        maps[name] = _read_buffer(path, meta["buffers"][name], w * h, name).reshape(h, w)
    return FoundationBundle(pose_2_to_1=pose, **maps)


@dataclass(frozen=True)
class EmbeddingSet:
    """Image embeddings aligned with camera-view identifiers."""

    vectors: np.ndarray  # (N, d) float32
    view_ids: tuple[str, ...]

    def __post_init__(self):
        v = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise SchemaError(f"vectors must be (N>=1, d>=1), got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise SchemaError("non-finite embedding values")
        norms = np.linalg.norm(v.astype(np.float64), axis=1)
        if np.any(norms == 0.0):
            raise SchemaError("zero-norm embedding vector")
        ids = tuple(str(i) for i in self.view_ids)
        if len(ids) != v.shape[0]:
            raise SchemaError(f"{len(ids)} view ids for {v.shape[0]} vectors")
        v.flags.writeable = False
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "view_ids", ids)

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def write_embeddings(embeddings: EmbeddingSet, path: str | Path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "schema_version": SCHEMA_VERSION,
        "kind": "embedding_set",
        "count": len(embeddings),
        "dim": embeddings.dim,
        "dtype": "float32",
        "view_ids": list(embeddings.view_ids),
        "buffers": {"vectors": "vectors.f32"},
    }
    (path / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    (path / "vectors.f32").write_bytes(embeddings.vectors.astype("<f4").tobytes())


def read_embeddings(path: str | Path) -> EmbeddingSet:
    path = Path(path)
    meta = _read_meta(path, "embedding_set")
    for key in ("count", "dim", "view_ids", "buffers"):
        if key not in meta:
            raise SchemaError(f"{path}: meta.json missing field {key!r}")
    n, d = int(meta["count"]), int(meta["dim"])
    if len(meta["view_ids"]) != n:
        raise SchemaError(f"{path}: {len(meta['view_ids'])} view ids for count {n}")
    vec = _read_buffer(path, meta["buffers"].get("vectors", "vectors.f32"), n * d, "vectors")
    return EmbeddingSet(vectors=vec.reshape(n, d), view_ids=tuple(meta["view_ids"]))
