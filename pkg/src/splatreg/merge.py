"""Fusing aligned Gaussian clouds: pairwise merge and multi-model plans."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .cloud import GaussianCloud, concatenate, transform_cloud
from .sim3 import Sim3


def merge(g1: GaussianCloud, g2: GaussianCloud, transform: Sim3) -> GaussianCloud:
    """g1 followed by transform(g2), in g1's frame.

    Clouds of different SH degree are zero-padded to the higher degree
    (zero higher-band coefficients render identically to their absence).
    Inputs are never mutated; the first len(g1) entries are g1 verbatim.
    """
    degree = max(g1.sh_degree, g2.sh_degree)
    g1p = g1.with_sh_degree(degree)
    g2p = g2.with_sh_degree(degree)
    moved = transform_cloud(g2p, transform, frame_label=g1.frame_label)
    return concatenate(g1p, moved)


@dataclass(frozen=True)
class FusionEdge:
    """Child cloud index, parent cloud index, and the child->parent transform."""

    child: int
    parent: int
    transform: Sim3


@dataclass(frozen=True)
class FusionPlan:
    """Tree of pairwise transforms with a single root frame."""

    root: int
    edges: tuple[FusionEdge, ...]

    @classmethod
    def from_dict(cls, d: dict) -> "FusionPlan":
        edges = tuple(
            FusionEdge(int(e["child"]), int(e["parent"]), Sim3.from_dict(e["sim3"]))
            for e in d["edges"]
        )
        return cls(root=int(d["root"]), edges=edges)

    def to_dict(self) -> dict:
        return {
            "root": self.root,
            "edges": [
                {"child": e.child, "parent": e.parent, "sim3": e.transform.to_dict()}
                for e in self.edges
            ],
        }

    @classmethod
    def load(cls, path: str | Path) -> "FusionPlan":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def _to_root_transforms(n: int, plan: FusionPlan) -> list[Sim3]:
    parent: dict[int, tuple[int, Sim3]] = {}
    for e in plan.edges:
        if e.child in parent:
            raise ValueError(f"cloud {e.child} has two parents in the fusion plan")
        parent[e.child] = (e.parent, e.transform)
    out = []
    for i in range(n):
        t = Sim3.identity()
        node = i
        hops = 0
        while node != plan.root:
            if node not in parent:
                raise ValueError(f"cloud {node} is not connected to root {plan.root}")
            nxt, edge_t = parent[node]
            t = edge_t.compose(t)
            node = nxt
            hops += 1
            if hops > n:
                raise ValueError("fusion plan contains a cycle")
        out.append(t)
    return out


def fuse_many(clouds: list[GaussianCloud], plan: FusionPlan) -> GaussianCloud:
    """Left-fold of merge over the input order, everything in the root frame."""
    if not clouds:
        raise ValueError("need at least one cloud")
    if not 0 <= plan.root < len(clouds):
        raise ValueError(f"root index {plan.root} out of range")
    to_root = _to_root_transforms(len(clouds), plan)
    degree = max(c.sh_degree for c in clouds)
    result = transform_cloud(clouds[0].with_sh_degree(degree), to_root[0],
                             frame_label=clouds[plan.root].frame_label)
    for i in range(1, len(clouds)):
        result = merge(result, clouds[i], to_root[i])
    return result
