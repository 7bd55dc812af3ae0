"""View-pair selection by cosine similarity of image embeddings."""

from __future__ import annotations

import numpy as np

from .camera import CameraView
from .cloud import GaussianCloud
from .interchange import EmbeddingSet
from .renderer import render

MAX_CANDIDATE_VIEWS = 32


def best_pair(e1: EmbeddingSet, e2: EmbeddingSet) -> tuple[str, str, float]:
    """Most similar cross-set pair by cosine similarity.

    Exhaustive over all N1*N2 pairs; ties break to the lexicographically
    lowest index pair.
    """
    if e1.dim != e2.dim:
        raise ValueError(f"embedding dims differ: {e1.dim} vs {e2.dim}")
    v1 = e1.vectors.astype(np.float64)
    v2 = e2.vectors.astype(np.float64)
    v1 = v1 / np.linalg.norm(v1, axis=1, keepdims=True)
    v2 = v2 / np.linalg.norm(v2, axis=1, keepdims=True)
    scores = v1 @ v2.T
    flat = int(np.argmax(scores))  # C-order argmax = lexicographic tie-break
    i, j = divmod(flat, scores.shape[1])
    return e1.view_ids[i], e2.view_ids[j], float(np.clip(scores[i, j], -1.0, 1.0))


def subsample_views(views: list[CameraView], limit: int = MAX_CANDIDATE_VIEWS) -> list[CameraView]:
    """Uniform deterministic subsample down to at most `limit` views."""
    if len(views) <= limit:
        return list(views)
    idx = np.linspace(0, len(views) - 1, limit).round().astype(int)
    return [views[i] for i in idx]


def render_candidate_views(cloud: GaussianCloud, views: list[CameraView]) -> list[np.ndarray]:
    """One RGB image per view, for the embedding exporter to consume."""
    if not views:
        raise ValueError("views must be non-empty")
    return [render(cloud, v).rgb for v in views]
