"""Report documents: transform records, coarse diagnostics, loss tables."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .coarse import CoarseEstimate
from .sim3 import Sim3


def write_transform_report(transform: Sim3, path: str | Path,
                           extra: dict | None = None) -> None:
    """Labeled scalars (s, qw..qz scalar-first canonical sign, tx..tz)."""
    payload = {"kind": "sim3_transform", "schema_version": 1}
    payload.update(transform.to_dict())
    if extra:
        payload["extra"] = extra
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_transform_report(path: str | Path) -> Sim3:
    d = json.loads(Path(path).read_text())
    if d.get("kind") not in ("sim3_transform", "coarse_estimate"):
        raise ValueError(f"{path}: not a transform report")
    return Sim3.from_dict(d)


def write_coarse_report(estimate: CoarseEstimate, path: str | Path) -> None:
    payload = {"kind": "coarse_estimate", "schema_version": 1}
    payload.update(estimate.transform.to_dict())
    payload["scale_ratio"] = estimate.scale_ratio
    payload["pair"] = list(estimate.pair)
    payload["diagnostics"] = estimate.diagnostics
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_loss_table(history: np.ndarray, path: str | Path) -> None:
    lines = ["iter\tloss"]
    lines += [f"{i}\t{v:.10g}" for i, v in enumerate(np.asarray(history))]
    Path(path).write_text("\n".join(lines) + "\n")


def write_metrics_table(rows: list[dict], path: str | Path) -> None:
    """Delimited table of per-view metrics, one row per rendered comparison."""
    lines = ["name\tpsnr_db\tssim"]
    lines += [f"{r['name']}\t{r['psnr']:.6f}\t{r['ssim']:.6f}" for r in rows]
    Path(path).write_text("\n".join(lines) + "\n")
