"""Density-based clustering of 2-D points with deterministic labeling.

Semantics: a core point has at least `min_samples` neighbors at Euclidean
distance strictly below `eps` (itself included). Clusters are the
connected components of core points under that neighbor relation; border
points (non-core within eps of a core) join the lowest-numbered reachable
cluster; everything else is noise. Cluster numbers follow the order of
each cluster's first core point in the input, so output is a pure
function of input order.

The strict `< eps` neighbor rule follows the operational configuration
this pipeline replicates; for integer pixel coordinates the boundary is
unreachable anyway.
"""

from __future__ import annotations

from typing import Dict, List, Tuple

import numpy as np

NOISE = -1


def dbscan_labels(points: np.ndarray, eps: float, min_samples: int) -> np.ndarray:
    """Label each point with its cluster index, or -1 for noise.

    points: (n, 2) array; eps > 0; min_samples >= 1.
    """
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    labels = np.full(n, NOISE, dtype=np.int64)
    if n == 0:
        return labels
    if eps <= 0:
        raise ValueError("eps must be positive")
    if min_samples < 1:
        raise ValueError("min_samples must be >= 1")

    grid = _build_grid(points, eps)
    eps2 = eps * eps

    neighbor_lists: List[np.ndarray] = [None] * n  # type: ignore[assignment]
    core = np.zeros(n, dtype=bool)
    for i in range(n):
        nbrs = _neighbors(points, grid, eps, eps2, i)
        neighbor_lists[i] = nbrs
        core[i] = len(nbrs) >= min_samples

    # Phase 1: flood-fill clusters over core points only.
    next_label = 0
    for i in range(n):
        if not core[i] or labels[i] != NOISE:
            continue
        labels[i] = next_label
        stack = [i]
        while stack:
            p = stack.pop()
            for q in neighbor_lists[p]:
                if core[q] and labels[q] == NOISE:
                    labels[q] = next_label
                    stack.append(int(q))
        next_label += 1

    # Phase 2: border points attach to the lowest reachable cluster.
    for i in range(n):
        if core[i]:
            continue
        core_nbrs = [int(labels[q]) for q in neighbor_lists[i] if core[q]]
        if core_nbrs:
            labels[i] = min(core_nbrs)
    return labels


def dbscan(points, eps: float, min_samples: int
           ) -> Tuple[List[List[int]], List[int]]:
    """Convenience wrapper returning (clusters as index lists, noise indices)."""
    labels = dbscan_labels(np.asarray(points, dtype=np.float64).reshape(-1, 2),
                           eps, min_samples)
    n_clusters = int(labels.max()) + 1 if len(labels) else 0
    clusters: List[List[int]] = [[] for _ in range(n_clusters)]
    noise: List[int] = []
    for i, lab in enumerate(labels):
        if lab == NOISE:
            noise.append(i)
        else:
            clusters[lab].append(i)
    return clusters, noise


def _build_grid(points: np.ndarray, eps: float) -> Dict[Tuple[int, int], List[int]]:
    cells = np.floor(points / eps).astype(np.int64)
    grid: Dict[Tuple[int, int], List[int]] = {}
    for i, (cx, cy) in enumerate(cells):
        grid.setdefault((int(cx), int(cy)), []).append(i)
    return grid


def _neighbors(points: np.ndarray, grid, eps: float, eps2: float, i: int) -> np.ndarray:
    x, y = points[i]
    cx, cy = int(np.floor(x / eps)), int(np.floor(y / eps))
    candidates: List[int] = []
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            candidates.extend(grid.get((cx + dx, cy + dy), ()))
    cand = np.fromiter(candidates, dtype=np.int64, count=len(candidates))
    diffs = points[cand] - points[i]
    d2 = diffs[:, 0] ** 2 + diffs[:, 1] ** 2
    return cand[d2 < eps2]
