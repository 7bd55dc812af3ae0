"""Input validation helpers shared by the estimator-style API."""

from __future__ import annotations

import numpy as np

from .camera import CameraView
from .cloud import GaussianCloud
from .interchange import EmbeddingSet, FoundationBundle
from .sim3 import Sim3


def check_cloud(obj, name: str = "cloud") -> GaussianCloud:
    if not isinstance(obj, GaussianCloud):
        raise TypeError(f"{name} must be a GaussianCloud, got {type(obj).__name__}")
    return obj


def check_view(obj, name: str = "view") -> CameraView:
    if not isinstance(obj, CameraView):
        raise TypeError(f"{name} must be a CameraView, got {type(obj).__name__}")
    return obj


def check_views(objs, name: str = "views") -> list[CameraView]:
    views = list(objs)
    if not views:
        raise ValueError(f"{name} must be non-empty")
    for i, v in enumerate(views):
        check_view(v, f"{name}[{i}]")
    return views


def check_sim3(obj, name: str = "transform") -> Sim3:
    if not isinstance(obj, Sim3):
        raise TypeError(f"{name} must be a Sim3, got {type(obj).__name__}")
    return obj


def check_bundle(obj, name: str = "bundle") -> FoundationBundle:
    if not isinstance(obj, FoundationBundle):
        raise TypeError(f"{name} must be a FoundationBundle, got {type(obj).__name__}")
    return obj


def check_embeddings(obj, name: str = "embeddings") -> EmbeddingSet:
    if not isinstance(obj, EmbeddingSet):
        raise TypeError(f"{name} must be an EmbeddingSet, got {type(obj).__name__}")
    return obj


def check_image(a, name: str = "image") -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim not in (2, 3):
        raise ValueError(f"{name} must be 2D or 3D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"non-finite values in {name}")
    return a
