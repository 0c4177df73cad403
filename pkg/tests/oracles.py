"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written against different primitives than
the library code: dense matrices instead of grids, closed-form inverses
instead of factorizations, exhaustive sweeps instead of incremental
updates. Slow is fine; these only run in tests.
"""

from __future__ import annotations

from typing import Dict, List, Sequence, Tuple

import numpy as np

NOISE = -1


def dbscan_oracle(points: np.ndarray, eps: float,
                  min_samples: int) -> np.ndarray:
    """Dense O(n^2) DBSCAN.

    Neighborhoods use strict distance < eps. Clusters are numbered by the
    index order of their first core point; border points (non-core with a
    core neighbor) take the lowest cluster label among their core
    neighbors; everything else is noise.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    labels = np.full(n, NOISE, dtype=np.int64)
    if n == 0:
        return labels
    diff = pts[:, None, :] - pts[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    adjacency = d2 < eps * eps  # includes self (distance 0)
    is_core = adjacency.sum(axis=1) >= min_samples
    next_label = 0
    for i in range(n):
        if not is_core[i] or labels[i] != NOISE:
            continue
        frontier = [i]
        labels[i] = next_label
        while frontier:
            j = frontier.pop()
            for k in np.nonzero(adjacency[j] & is_core)[0]:
                if labels[k] == NOISE:
                    labels[k] = next_label
                    frontier.append(int(k))
        next_label += 1
    for i in range(n):
        if is_core[i]:
            continue
        core_neighbors = np.nonzero(adjacency[i] & is_core)[0]
        if len(core_neighbors):
            labels[i] = labels[core_neighbors].min()
    return labels


def _inverse_3x3(m: np.ndarray) -> np.ndarray:
    """Closed-form adjugate inverse, no linear-algebra library calls."""
    a, b, c = m[0]
    d, e, f = m[1]
    g, h, i = m[2]
    det = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
    adj = np.array([
        [e * i - f * h, c * h - b * i, b * f - c * e],
        [f * g - d * i, a * i - c * g, c * d - a * f],
        [d * h - e * g, b * g - a * h, a * e - b * d],
    ])
    return adj / det


def mahalanobis_oracle(pixels: np.ndarray, ridge: float) -> np.ndarray:
    """Per-pixel Mahalanobis distance via the explicit 3x3 inverse."""
    x = pixels.reshape(-1, 3).astype(np.float64)
    if np.issubdtype(pixels.dtype, np.integer):
        x = x / 255.0
    mu = x.mean(axis=0)
    z = x - mu
    cov = (z.T @ z) / (len(x) - 1)
    inv = _inverse_3x3(cov + ridge * np.eye(3))
    d2 = np.einsum("ij,jk,ik->i", z, inv, z)
    return np.sqrt(np.maximum(d2, 0.0)).reshape(pixels.shape[:2])


def ap_threshold_oracle(scores: Sequence[float], tp_flags: Sequence[bool],
                        new_matches: Sequence[int], total_gt: int) -> float:
    """AP by evaluating precision/recall at every distinct score threshold
    and integrating with all-points interpolation."""
    scores = np.asarray(scores, dtype=np.float64)
    tps = np.asarray(tp_flags, dtype=np.float64)
    news = np.asarray(new_matches, dtype=np.float64)
    if total_gt <= 0 or scores.size == 0:
        return 0.0
    points = []
    for t in sorted(set(scores.tolist()), reverse=True):
        keep = scores >= t
        points.append((news[keep].sum() / total_gt,
                       tps[keep].sum() / keep.sum()))
    ap = 0.0
    prev_recall = 0.0
    for recall in sorted(set(r for r, _ in points)):
        best = max(p for r, p in points if r >= recall)
        ap += (recall - prev_recall) * best
        prev_recall = recall
    return ap


Box = Tuple[float, float, float, float]


def _strictly_overlap(a: Box, b: Box) -> bool:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    return (min(ax + aw, bx + bw) - max(ax, bx) > 0
            and min(ay + ah, by + bh) - max(ay, by) > 0)


def merge_oracle(items: Sequence[Tuple[Box, float, int]]
                 ) -> List[Tuple[Box, float, int]]:
    """Union-find over the strict-overlap graph, hulled, to fixpoint.

    Items are (box, score, contributors); merged score is the member max
    and contributors add up.
    """
    current = list(items)
    changed = True
    while changed:
        changed = False
        n = len(current)
        parent = list(range(n))

        def find(i: int) -> int:
            while parent[i] != i:
                i = parent[i]
            return i

        for i in range(n):
            for j in range(i + 1, n):
                if _strictly_overlap(current[i][0], current[j][0]):
                    ri, rj = find(i), find(j)
                    if ri != rj:
                        parent[rj] = ri
                        changed = True
        groups: Dict[int, List[Tuple[Box, float, int]]] = {}
        for i in range(n):
            groups.setdefault(find(i), []).append(current[i])
        merged = []
        for root in sorted(groups):
            members = groups[root]
            if len(members) == 1:
                merged.append(members[0])
                continue
            x0 = min(b[0] for b, _, _ in members)
            y0 = min(b[1] for b, _, _ in members)
            x1 = max(b[0] + b[2] for b, _, _ in members)
            y1 = max(b[1] + b[3] for b, _, _ in members)
            merged.append(((x0, y0, x1 - x0, y1 - y0),
                           max(s for _, s, _ in members),
                           sum(c for _, _, c in members)))
        current = merged
    return current


def tiles_cover_everything(tiles, width: int, height: int) -> bool:
    """Pixel-coverage check for a tile grid."""
    mask = np.zeros((height, width), dtype=bool)
    for tile in tiles:
        mask[tile.y:tile.y + tile.size, tile.x:tile.x + tile.size] = True
    return bool(mask.all())


def rasterize_box(box, size: int) -> np.ndarray:
    """Boolean mask of the integer pixels a box covers inside a square."""
    mask = np.zeros((size, size), dtype=bool)
    x0 = int(round(box.x))
    y0 = int(round(box.y))
    x1 = int(round(box.x + box.w))
    y1 = int(round(box.y + box.h))
    mask[max(0, y0):max(0, y1), max(0, x0):max(0, x1)] = True
    return mask
