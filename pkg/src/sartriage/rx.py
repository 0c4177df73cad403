"""Unsupervised spectral anomaly screening.

Per image: resize to a fixed square, score every pixel by Mahalanobis
distance from the image's own color statistics, keep the extreme upper
tail, cluster the surviving pixels with DBSCAN, and call the image a
candidate when the number of sufficiently large clusters falls inside a
configured band. Defaults reproduce the operational configuration:
resize 1024, p < 0.0001, eps 14.4815, minimum cluster size 209 pixels,
1 to 4 clusters.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from PIL import Image
from scipy.stats import chi2, norm

from .dbscan import dbscan_labels
from .geometry import BoundingBox, clamp_box

log = logging.getLogger(__name__)


class SingularCovarianceError(Exception):
    """Channel covariance stayed singular even after the ridge."""


@dataclass
class RxConfig:
    resize_to: int = 1024
    p_threshold: float = 0.0001
    dbscan_eps: float = 14.4815
    min_cluster_pixels: int = 209
    min_clusters: int = 1
    max_clusters: int = 4
    covariance_ridge: float = 1e-6
    # "zscore": upper-tail normal p-value of the z-scored distances.
    # "chi2": chi-square(3) tail of the squared distances.
    score_mode: str = "zscore"

    def __post_init__(self):
        if self.resize_to < 1:
            raise ValueError("resize_to must be at least 1")
        if not (0 < self.p_threshold < 1):
            raise ValueError("p_threshold must be in (0, 1)")
        if self.dbscan_eps <= 0:
            raise ValueError("dbscan_eps must be positive")
        if self.min_clusters > self.max_clusters:
            raise ValueError("min_clusters must not exceed max_clusters")
        if self.score_mode not in ("zscore", "chi2"):
            raise ValueError(f"unknown score_mode: {self.score_mode}")


@dataclass
class AnomalyField:
    width: int
    height: int
    distances: np.ndarray  # (height, width) float64
    mask: np.ndarray       # (height, width) bool


@dataclass
class PixelCluster:
    member_pixels: np.ndarray       # (n, 2) int (x, y) in resized coordinates
    bbox: BoundingBox               # tight, resized frame
    centroid: Tuple[float, float]   # resized coordinates


@dataclass
class RxResult:
    image_id: str
    clusters: List[PixelCluster]
    is_candidate: bool
    scale_factors: Tuple[float, float]  # resized -> native multipliers (sx, sy)
    native_size: Tuple[int, int]
    error: Optional[str] = None


def rx_distances(pixels: np.ndarray, ridge: float) -> np.ndarray:
    """Per-pixel Mahalanobis distance from the image's mean color.

    pixels: (h, w, 3); integer arrays are normalized to [0, 1] first.
    Uses the exact two-pass mean/covariance (sample covariance, n-1) and a
    ridge on the diagonal so constant images stay invertible.
    """
    pixels = np.asarray(pixels)
    if pixels.ndim != 3 or pixels.shape[2] != 3 or pixels.size == 0:
        raise ValueError("expected a nonempty (h, w, 3) pixel array")
    h, w, _ = pixels.shape
    x = pixels.reshape(-1, 3).astype(np.float64)
    if np.issubdtype(pixels.dtype, np.integer):
        x /= 255.0

    mu = x.mean(axis=0)
    z = x - mu
    n = len(z)
    denom = max(n - 1, 1)
    cov = (z.T @ z) / denom
    a = cov + ridge * np.eye(3)
    try:
        # Cholesky: fails exactly when a is not positive definite.
        lower = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise SingularCovarianceError(
            "channel covariance singular after ridge") from exc
    y = np.linalg.solve(lower, z.T)
    d2 = np.einsum("ij,ij->j", y, y)
    d = np.sqrt(np.maximum(d2, 0.0))
    if not np.all(np.isfinite(d)):
        raise SingularCovarianceError("non-finite Mahalanobis distances")
    return d.reshape(h, w)


def anomaly_mask(distances: np.ndarray, p_threshold: float,
                 score_mode: str = "zscore") -> np.ndarray:
    """Flag pixels whose tail probability falls below p_threshold.

    zscore mode standardizes the distance field and thresholds the
    one-sided upper-tail normal p-value; a zero-variance field flags
    nothing. chi2 mode tests squared distances against chi-square(3).
    """
    d = np.asarray(distances, dtype=np.float64)
    if score_mode == "chi2":
        return d * d > chi2.isf(p_threshold, df=3)
    std = d.std()
    if std == 0:
        return np.zeros_like(d, dtype=bool)
    z = (d - d.mean()) / std
    # sf(z) < p  <=>  z > isf(p); for p = 1e-4 the cut is ~3.719
    return z > norm.isf(p_threshold)


def cluster_anomalies(mask: np.ndarray, cfg: RxConfig) -> List[PixelCluster]:
    """DBSCAN over flagged pixel coordinates, row-major order."""
    ys, xs = np.nonzero(mask)
    points = np.column_stack([xs, ys]).astype(np.float64)
    if len(points) == 0:
        return []
    labels = dbscan_labels(points, cfg.dbscan_eps, cfg.min_cluster_pixels)
    clusters: List[PixelCluster] = []
    for lab in range(int(labels.max()) + 1 if labels.size else 0):
        members = np.column_stack([xs, ys])[labels == lab]
        x0, y0 = members.min(axis=0)
        x1, y1 = members.max(axis=0)
        bbox = BoundingBox(float(x0), float(y0),
                           float(x1 - x0 + 1), float(y1 - y0 + 1), frame="image")
        cx, cy = members.mean(axis=0)
        clusters.append(PixelCluster(member_pixels=members, bbox=bbox,
                                     centroid=(float(cx), float(cy))))
    return clusters


def filter_clusters(clusters: List[PixelCluster], cfg: RxConfig
                    ) -> Tuple[List[PixelCluster], bool]:
    """Drop undersized clusters; candidacy needs a cluster count inside
    [min_clusters, max_clusters]."""
    kept = [c for c in clusters if len(c.member_pixels) >= cfg.min_cluster_pixels]
    is_candidate = cfg.min_clusters <= len(kept) <= cfg.max_clusters
    return kept, is_candidate


def resize_square(pixels: np.ndarray, size: int) -> np.ndarray:
    """Bilinear resize to size x size; aspect ratio deliberately not kept."""
    img = Image.fromarray(np.asarray(pixels, dtype=np.uint8))
    return np.asarray(img.resize((size, size), Image.BILINEAR))


def rx_pipeline(image_id: str, pixels: np.ndarray, cfg: RxConfig) -> RxResult:
    """Full per-image pass: resize, score, threshold, cluster, filter."""
    native_h, native_w = pixels.shape[:2]
    sx = native_w / cfg.resize_to
    sy = native_h / cfg.resize_to
    resized = resize_square(pixels, cfg.resize_to)
    try:
        distances = rx_distances(resized, cfg.covariance_ridge)
    except SingularCovarianceError as exc:
        log.warning("%s: %s; treating as no anomalies", image_id, exc)
        return RxResult(image_id=image_id, clusters=[],
                        is_candidate=(cfg.min_clusters == 0),
                        scale_factors=(sx, sy), native_size=(native_w, native_h),
                        error=str(exc))
    mask = anomaly_mask(distances, cfg.p_threshold, cfg.score_mode)
    clusters = cluster_anomalies(mask, cfg)
    kept, is_candidate = filter_clusters(clusters, cfg)
    return RxResult(image_id=image_id, clusters=kept, is_candidate=is_candidate,
                    scale_factors=(sx, sy), native_size=(native_w, native_h))


def native_bbox(cluster: PixelCluster, result: RxResult) -> BoundingBox:
    """Map a cluster box from resized to native coordinates, clamped."""
    sx, sy = result.scale_factors
    box = BoundingBox(cluster.bbox.x * sx, cluster.bbox.y * sy,
                      cluster.bbox.w * sx, cluster.bbox.h * sy, frame="image")
    clamped = clamp_box(box, *result.native_size)
    return clamped if clamped is not None else box


# -- results file --------------------------------------------------------------

def result_to_dict(result: RxResult) -> dict:
    sx, sy = result.scale_factors
    clusters = []
    for c in result.clusters:
        b = native_bbox(c, result)
        clusters.append({
            "bbox_native": [b.x, b.y, b.w, b.h],
            "pixel_count": int(len(c.member_pixels)),
            "centroid": [c.centroid[0] * sx, c.centroid[1] * sy],
        })
    doc = {"image_id": result.image_id,
           "is_candidate": result.is_candidate,
           "clusters": clusters}
    if result.error is not None:
        doc["error"] = result.error
    return doc


def write_results(results, path: str) -> None:
    with open(path, "w") as fh:
        for r in results:
            fh.write(json.dumps(result_to_dict(r)) + "\n")


def read_results(path: str) -> List[dict]:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows
