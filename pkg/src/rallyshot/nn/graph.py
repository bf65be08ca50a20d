"""Skeleton graph operand for graph convolution: symmetric adjacency over the
COCO joint edges with self-loops, degree-normalized."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ..coco import EDGES, N_KEYPOINTS
from ..errors import ValidationError


@dataclass(frozen=True)
class SkeletonGraph:
    adjacency: np.ndarray  # (n, n) symmetric 0/1, no self-loops
    normalized: np.ndarray  # D^{-1/2} (A + I) D^{-1/2}

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[int, int]] = EDGES,
                   n_nodes: int = N_KEYPOINTS) -> "SkeletonGraph":
        adj = np.zeros((n_nodes, n_nodes))
        for a, b in edges:
            if not (0 <= a < n_nodes and 0 <= b < n_nodes) or a == b:
                raise ValidationError(f"bad edge ({a}, {b})", field="edges")
            adj[a, b] = adj[b, a] = 1.0
        a_hat = adj + np.eye(n_nodes)
        d_inv_sqrt = 1.0 / np.sqrt(a_hat.sum(axis=1))
        normalized = a_hat * d_inv_sqrt[:, None] * d_inv_sqrt[None, :]
        return cls(adjacency=adj, normalized=normalized)
