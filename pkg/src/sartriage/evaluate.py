"""Detection scoring against ground truth.

Two matching schemes are provided: strict greedy one-to-one IoU matching
(the VOC2012 convention) and a relaxed SAR-APD-style scheme where a
detection counts if it covers enough of a ground-truth box and
many-to-one matches are allowed in both directions.

Average precision uses all-points interpolation with precision/recall
evaluated at every distinct score boundary, which makes it exactly equal
to an exhaustive sweep over score thresholds even when scores tie.

Counting conventions: in a report, tp counts matched ground-truth boxes,
fp counts detections that matched nothing, fn counts unmatched ground
truth. Under one-to-one matching tp also equals the matched-detection
count; under the relaxed scheme the two can differ and both cumulative
series feed the PR curve (precision from detections, recall from ground
truth).
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .detect import DetectResult
from .geometry import BoundingBox, intersection_area, iou

log = logging.getLogger(__name__)

SCHEMES = ("voc2012", "sar_apd")


@dataclass(frozen=True)
class GroundTruthBox:
    image_id: str
    box: BoundingBox
    label: str = "person"


@dataclass(frozen=True)
class EvalDetection:
    image_id: str
    box: BoundingBox
    score: float
    label: str = "person"


@dataclass(frozen=True)
class MatchPolicy:
    scheme: str = "voc2012"
    iou_threshold: float = 0.5
    gt_coverage_threshold: float = 0.25
    allow_many_to_one: Optional[bool] = None

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not (0.0 < self.iou_threshold < 1.0):
            raise ValueError("iou_threshold must lie in (0, 1)")
        if not (0.0 < self.gt_coverage_threshold < 1.0):
            raise ValueError("gt_coverage_threshold must lie in (0, 1)")
        if self.allow_many_to_one is None:
            object.__setattr__(self, "allow_many_to_one",
                               self.scheme == "sar_apd")


@dataclass
class MatchResult:
    """Per-detection outcomes in deterministic descending-score order."""
    ordered: List[EvalDetection]
    is_tp: List[bool]
    new_matches: List[int]  # ground-truth boxes first matched by this det
    gt_matched: List[bool]  # aligned with the input ground-truth order


@dataclass
class EvalReport:
    precision: float
    recall: float
    average_precision: float
    operating_threshold: float
    scheme: str
    per_image: List[Tuple[str, int, int, int]]  # (image_id, tp, fp, fn)
    precision_flagged: bool = False  # 0/0 reported as 1.0
    recall_flagged: bool = False  # 0/0 reported as 0.0
    policy: Optional[MatchPolicy] = None


def _sort_key(det: EvalDetection):
    return (-det.score, det.image_id, det.box.x, det.box.y,
            det.box.w, det.box.h)


def match_detections(dets: Sequence[EvalDetection],
                     gts: Sequence[GroundTruthBox],
                     policy: MatchPolicy) -> MatchResult:
    """Label every detection TP/FP and every ground-truth box matched.

    voc2012: each detection, in descending-score order, takes the
    unmatched GT of the same image with the highest IoU when that IoU
    reaches the threshold. sar_apd: a detection is TP when it covers at
    least gt_coverage_threshold of some GT's area; it marks every GT it
    covers, already-matched GTs included.
    """
    ordered = sorted(dets, key=_sort_key)
    gt_matched = [False] * len(gts)
    gt_index: Dict[str, List[int]] = {}
    for j, gt in enumerate(gts):
        gt_index.setdefault(gt.image_id, []).append(j)
    is_tp: List[bool] = []
    new_matches: List[int] = []
    for det in ordered:
        candidates = gt_index.get(det.image_id, [])
        if policy.scheme == "voc2012":
            best_iou, best_j = 0.0, -1
            for j in candidates:
                if gt_matched[j]:
                    continue
                value = iou(det.box, gts[j].box)
                if value > best_iou:
                    best_iou, best_j = value, j
            if best_j >= 0 and best_iou >= policy.iou_threshold:
                gt_matched[best_j] = True
                is_tp.append(True)
                new_matches.append(1)
            else:
                is_tp.append(False)
                new_matches.append(0)
        else:
            covered = [
                j for j in candidates
                if intersection_area(det.box, gts[j].box) / gts[j].box.area
                >= policy.gt_coverage_threshold
            ]
            fresh = sum(1 for j in covered if not gt_matched[j])
            for j in covered:
                gt_matched[j] = True
            is_tp.append(bool(covered))
            new_matches.append(fresh)
    return MatchResult(ordered=ordered, is_tp=is_tp,
                       new_matches=new_matches, gt_matched=gt_matched)


def _ap_from_series(scores: np.ndarray, tp_flags: np.ndarray,
                    new_matches: np.ndarray, total_gt: int) -> float:
    """All-points interpolated AP from pre-matched series.

    PR points are taken only at distinct-score boundaries, so the result
    equals evaluating precision/recall at every possible score threshold.
    """
    if total_gt <= 0 or scores.size == 0:
        return 0.0
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    tp_cum = np.cumsum(tp_flags[order])
    match_cum = np.cumsum(new_matches[order])
    det_cum = np.arange(1, s.size + 1)
    boundary = np.flatnonzero(np.diff(s) != 0)
    boundary = np.append(boundary, s.size - 1)
    recall = match_cum[boundary] / total_gt
    precision = tp_cum[boundary] / det_cum[boundary]
    p_interp = np.maximum.accumulate(precision[::-1])[::-1]
    prev = np.concatenate(([0.0], recall[:-1]))
    return float(np.sum((recall - prev) * p_interp))


def average_precision(flagged: Sequence[Tuple[float, bool]],
                      total_gt: int) -> float:
    """AP from (score, is_tp) pairs under one-to-one matching semantics
    (each TP corresponds to one newly matched ground-truth box)."""
    scores = np.array([s for s, _ in flagged], dtype=float)
    flags = np.array([f for _, f in flagged], dtype=float)
    return _ap_from_series(scores, flags, flags, total_gt)


def evaluation_series(dets: Sequence[EvalDetection],
                      gts: Sequence[GroundTruthBox], policy: MatchPolicy
                      ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    result = match_detections(dets, gts, policy)
    scores = np.array([d.score for d in result.ordered], dtype=float)
    return (scores, np.array(result.is_tp, dtype=float),
            np.array(result.new_matches, dtype=float))


def dump_average_precision(dets: Sequence[EvalDetection],
                           gts: Sequence[GroundTruthBox],
                           policy: MatchPolicy) -> float:
    scores, tp_flags, new_matches = evaluation_series(dets, gts, policy)
    return _ap_from_series(scores, tp_flags, new_matches, len(gts))


def precision_recall_at(dets: Sequence[EvalDetection],
                        gts: Sequence[GroundTruthBox], policy: MatchPolicy,
                        threshold: float
                        ) -> Tuple[float, float, bool, bool]:
    """(precision, recall, precision_flagged, recall_flagged) with
    detections below the threshold dropped.

    0/0 precision is reported as 1.0 and 0/0 recall as 0.0, each with its
    flag raised.
    """
    kept = [d for d in dets if d.score >= threshold]
    result = match_detections(kept, gts, policy)
    tp = sum(result.gt_matched)
    fp = sum(1 for f in result.is_tp if not f)
    fn = len(gts) - tp
    precision_flagged = (tp + fp) == 0
    recall_flagged = (tp + fn) == 0
    precision = 1.0 if precision_flagged else tp / (tp + fp)
    recall = 0.0 if recall_flagged else tp / (tp + fn)
    return precision, recall, precision_flagged, recall_flagged


def evaluate_dump(dets: Sequence[EvalDetection],
                  gts: Sequence[GroundTruthBox], policy: MatchPolicy,
                  threshold: float = 0.5) -> EvalReport:
    """Full report: AP over all detections, PR at the operating
    threshold, and per-image counts at that threshold."""
    ap = dump_average_precision(dets, gts, policy)
    precision, recall, p_flag, r_flag = precision_recall_at(
        dets, gts, policy, threshold)
    image_ids = sorted({d.image_id for d in dets} | {g.image_id for g in gts})
    per_image = []
    for image_id in image_ids:
        img_dets = [d for d in dets
                    if d.image_id == image_id and d.score >= threshold]
        img_gts = [g for g in gts if g.image_id == image_id]
        result = match_detections(img_dets, img_gts, policy)
        tp = sum(result.gt_matched)
        fp = sum(1 for f in result.is_tp if not f)
        per_image.append((image_id, tp, fp, len(img_gts) - tp))
    return EvalReport(precision=precision, recall=recall,
                      average_precision=ap, operating_threshold=threshold,
                      scheme=policy.scheme, per_image=per_image,
                      precision_flagged=p_flag, recall_flagged=r_flag,
                      policy=policy)


def bootstrap_ap_difference(dets_a: Sequence[EvalDetection],
                            dets_b: Sequence[EvalDetection],
                            gts: Sequence[GroundTruthBox],
                            policy: MatchPolicy, resamples: int = 10000,
                            level: float = 0.95, seed: int = 0
                            ) -> Tuple[float, float, float]:
    """Percentile bootstrap CI for AP(A) - AP(B) over resampled images.

    Matching is per-image, so each image's matched series is computed
    once and resamples only re-weight images.
    """
    image_ids = sorted({d.image_id for d in dets_a}
                       | {d.image_id for d in dets_b}
                       | {g.image_id for g in gts})
    if not image_ids:
        raise ValueError("bootstrap requires a non-empty image set")

    def per_image_series(dets):
        series = {}
        for image_id in image_ids:
            img_dets = [d for d in dets if d.image_id == image_id]
            img_gts = [g for g in gts if g.image_id == image_id]
            series[image_id] = (*evaluation_series(img_dets, img_gts, policy),
                                len(img_gts))
        return series

    series_a = per_image_series(dets_a)
    series_b = per_image_series(dets_b)

    def ap_for(series, chosen) -> float:
        scores = np.concatenate([series[i][0] for i in chosen])
        tps = np.concatenate([series[i][1] for i in chosen])
        news = np.concatenate([series[i][2] for i in chosen])
        total_gt = sum(series[i][3] for i in chosen)
        return _ap_from_series(scores, tps, news, total_gt)

    delta = ap_for(series_a, image_ids) - ap_for(series_b, image_ids)
    rng = np.random.default_rng(seed)
    deltas = np.empty(resamples)
    n = len(image_ids)
    for r in range(resamples):
        chosen = [image_ids[k] for k in rng.integers(0, n, size=n)]
        deltas[r] = ap_for(series_a, chosen) - ap_for(series_b, chosen)
    alpha = (1.0 - level) / 2.0
    ci_low, ci_high = np.percentile(deltas, [100 * alpha, 100 * (1 - alpha)])
    return delta, float(ci_low), float(ci_high)


def detections_for_eval(results: Iterable[DetectResult]) -> List[EvalDetection]:
    out = []
    for result in results:
        for det in result.detections:
            out.append(EvalDetection(image_id=result.image_id, box=det.box,
                                     score=det.score, label=det.label))
    return out


def read_ground_truth(path) -> List[GroundTruthBox]:
    """Load gt.json: {"images":[{"image_id":str,"boxes":[[x,y,w,h],...]}]}."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    out = []
    for image in doc["images"]:
        for x, y, w, h in image["boxes"]:
            out.append(GroundTruthBox(image_id=image["image_id"],
                                      box=BoundingBox(x, y, w, h)))
    return out


def write_ground_truth(path, gts: Sequence[GroundTruthBox]) -> None:
    images: Dict[str, List[List[float]]] = {}
    for gt in gts:
        images.setdefault(gt.image_id, []).append(
            [gt.box.x, gt.box.y, gt.box.w, gt.box.h])
    doc = {"images": [{"image_id": image_id, "boxes": boxes}
                      for image_id, boxes in sorted(images.items())]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)


def report_to_dict(report: EvalReport) -> dict:
    doc = {
        "precision": report.precision,
        "recall": report.recall,
        "average_precision": report.average_precision,
        "operating_threshold": report.operating_threshold,
        "scheme": report.scheme,
        "precision_flagged": report.precision_flagged,
        "recall_flagged": report.recall_flagged,
        "per_image": [
            {"image_id": image_id, "tp": tp, "fp": fp, "fn": fn}
            for image_id, tp, fp, fn in report.per_image
        ],
    }
    if report.policy is not None:
        doc["policy"] = {
            "scheme": report.policy.scheme,
            "iou_threshold": report.policy.iou_threshold,
            "gt_coverage_threshold": report.policy.gt_coverage_threshold,
            "allow_many_to_one": report.policy.allow_many_to_one,
        }
    return doc


def write_report(path, report: EvalReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report), fh, indent=2)


def write_pr_curve_csv(path, dets: Sequence[EvalDetection],
                       gts: Sequence[GroundTruthBox],
                       policy: MatchPolicy) -> None:
    """PR points at each distinct score boundary, highest score first."""
    scores, tp_flags, new_matches = evaluation_series(dets, gts, policy)
    total_gt = len(gts)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["score", "precision", "recall"])
        tp_cum = match_cum = 0.0
        for i in range(scores.size):
            tp_cum += tp_flags[i]
            match_cum += new_matches[i]
            if i + 1 < scores.size and scores[i + 1] == scores[i]:
                continue
            precision = tp_cum / (i + 1)
            recall = match_cum / total_gt if total_gt else 0.0
            writer.writerow([scores[i], precision, recall])
