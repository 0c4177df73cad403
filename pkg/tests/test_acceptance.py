"""Release acceptance gate: one test per operational criterion.

Each test exercises a whole criterion end to end at its stated tolerance
and prints a single pass/fail line under pytest. Per-module suites cover
the same ground at finer grain; this file is the go/no-go summary.
"""

from __future__ import annotations

import dataclasses
import inspect
import json
import time
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from sartriage import evaluate as eval_mod
from sartriage import ingest as ingest_mod
from sartriage import trainprep as prep_mod
from sartriage.backends import RawBox, SyntheticBackend
from sartriage.cli import main as cli_main
from sartriage.dbscan import dbscan_labels
from sartriage.detect import DetectConfig, detect_pipeline
from sartriage.evaluate import (
    MatchPolicy,
    bootstrap_ap_difference,
    dump_average_precision,
    evaluation_series,
    match_detections,
)
from sartriage.geometry import BoundingBox
from sartriage.rx import RxConfig, native_bbox, rx_pipeline
from sartriage.server import create_app
from sartriage.trainprep import (
    _flip_lr,
    _flip_ud,
    rotate90_box,
    sample_crop,
    sample_rng,
)
from sartriage.triage import CandidateStore, ReviewVerdict

from helpers import green_field, magenta_scene, save_png
from oracles import (
    ap_threshold_oracle,
    dbscan_oracle,
    mahalanobis_oracle,
    rasterize_box,
)

VOC = MatchPolicy(scheme="voc2012")
SAR = MatchPolicy(scheme="sar_apd")


# -- 1. operational constants -------------------------------------------------------


def test_operational_constants_are_pinned():
    started = time.monotonic()
    rx = RxConfig()
    assert rx.resize_to == 1024
    assert rx.p_threshold == 0.0001
    assert rx.dbscan_eps == 14.4815
    assert rx.min_cluster_pixels == 209
    assert (rx.min_clusters, rx.max_clusters) == (1, 4)
    assert DetectConfig().tile_size == 512
    assert prep_mod.CROP_SIZE == 512
    assert prep_mod.NORMALIZE_MEANS == (0.485, 0.456, 0.406)
    assert prep_mod.NORMALIZE_STDS == (0.229, 0.224, 0.225)
    split_default = inspect.signature(
        prep_mod.split_train_val).parameters["val_fraction"].default
    assert split_default == 0.10
    train, val = prep_mod.split_train_val([f"i{k}" for k in range(10)],
                                          split_default, seed=0)
    assert (len(train), len(val)) == (9, 1)
    assert ingest_mod.DEFAULT_SAMPLE_RATE_HZ == 2.0
    assert time.monotonic() - started < 1.0


# -- 2. anomaly sweep end to end ----------------------------------------------------


def test_anomaly_sweep_flags_exactly_the_patched_images():
    rng = np.random.default_rng(2024)
    planted = {}
    for i in range(10):
        # Even x/w and multiple-of-three y/h land on the 2:1 and 3:2
        # resample grids, keeping edge blur symmetric.
        w = 2 * int(rng.integers(16, 33))
        h = 3 * int(rng.integers(11, 22))
        x = 2 * int(rng.integers(32, (2048 - 64 - w) // 2))
        y = 3 * int(rng.integers(22, (1536 - 66 - h) // 3))
        planted[f"img-{i:02d}"] = (x, y, w, h)

    started = time.monotonic()
    results = {}
    for i in range(50):
        image_id = f"img-{i:02d}"
        field = green_field(1536, 2048, seed=100 + i)
        if image_id in planted:
            x, y, w, h = planted[image_id]
            field[y:y + h, x:x + w] = (220, 30, 40)
        results[image_id] = rx_pipeline(image_id, field, RxConfig())
    elapsed = time.monotonic() - started

    flagged = {i for i, r in results.items() if r.is_candidate}
    assert flagged == set(planted)
    for image_id, (x, y, w, h) in planted.items():
        result = results[image_id]
        assert len(result.clusters) == 1
        box = native_bbox(result.clusters[0], result)
        assert abs(box.x - x) <= 2
        assert abs(box.y - y) <= 2
        assert abs(box.x + box.w - (x + w)) <= 2
        assert abs(box.y + box.h - (y + h)) <= 2
    assert elapsed < 60.0, f"50-image sweep took {elapsed:.1f}s"


# -- 3. clustering vs quadratic reference --------------------------------------------


def test_clustering_matches_quadratic_reference_on_200_random_sets():
    rng = np.random.default_rng(77)
    started = time.monotonic()
    for trial in range(200):
        n = int(rng.integers(20, 2001))
        pts = rng.uniform(0, 200, size=(n, 2))
        eps = float(rng.uniform(2.0, 25.0))
        min_samples = int(rng.integers(2, 20))
        got = dbscan_labels(pts, eps, min_samples)
        want = dbscan_oracle(pts, eps, min_samples)
        np.testing.assert_array_equal(got, want, err_msg=f"trial {trial}")
    elapsed = time.monotonic() - started
    assert elapsed < 30.0, f"200 clustering trials took {elapsed:.1f}s"


# -- 4. distance scores vs dense-inverse reference -----------------------------------


def test_distance_scores_match_dense_inverse_reference():
    rng = np.random.default_rng(41)
    worst = 0.0
    for _ in range(100):
        h, w = rng.integers(4, 48, size=2)
        if rng.random() < 0.5:
            pixels = rng.random((h, w, 3))
        else:
            pixels = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
        got = rx_distances_like(pixels)
        want = mahalanobis_oracle(pixels, ridge=1e-6)
        denom = np.maximum(np.abs(want), 1e-12)
        worst = max(worst, float(np.max(np.abs(got - want) / denom)))
    assert worst <= 1e-9, f"max relative error {worst:.3e}"


def rx_distances_like(pixels):
    from sartriage.rx import rx_distances
    return rx_distances(pixels, ridge=1e-6)


# -- 5. tiled detection end to end ---------------------------------------------------


class _ScoredBackend:
    """Preset raw boxes by tile id, for threshold sweeps."""

    def __init__(self, boxes_by_tile):
        self.boxes_by_tile = boxes_by_tile

    def detect(self, tiles):
        return {tile_id: self.boxes_by_tile.get(tile_id, [])
                for tile_id, _ in tiles}


def _boxes_of(result):
    return sorted((d.box.x, d.box.y, d.box.w, d.box.h)
                  for d in result.detections)


def test_detection_merges_straddlers_equivariantly_and_monotonically():
    # Patches sit across the 480..512 tile-overlap seams; with a 32 px
    # overlap at least one tile sees each patch whole, so the seam
    # fragments merge back into exactly the planted box.
    cfg = DetectConfig(tile_overlap=32)
    backend = SyntheticBackend()
    scenes = {
        "one": [(500, 100, 24, 24), (100, 500, 24, 24)],
        "two": [(500, 500, 24, 24)],
        "three": [(200, 200, 20, 20), (1000, 500, 20, 20)],
    }
    for image_id, patches in scenes.items():
        scene = magenta_scene(1024, 1024, patches, seed=11)
        result = detect_pipeline(image_id, scene, cfg, backend)
        assert _boxes_of(result) == sorted(patches), image_id
        assert all(d.score == 1.0 for d in result.detections)

    # Shifting the scene shifts every detection by the same offset.
    base = [(500, 100, 24, 24), (100, 500, 24, 24)]
    dx, dy = 7, 5
    shifted = [(x + dx, y + dy, w, h) for x, y, w, h in base]
    got = _boxes_of(detect_pipeline(
        "shifted", magenta_scene(1024, 1024, shifted, seed=11), cfg, backend))
    want = _boxes_of(detect_pipeline(
        "base", magenta_scene(1024, 1024, base, seed=11), cfg, backend))
    for (gx, gy, gw, gh), (wx, wy, ww, wh) in zip(got, want):
        assert abs(gx - (wx + dx)) <= 1
        assert abs(gy - (wy + dy)) <= 1
        assert abs(gw - ww) <= 1
        assert abs(gh - wh) <= 1

    # Raising the confidence threshold only ever removes detections.
    scores = [round(0.15 + 0.1 * k, 2) for k in range(9)]
    scripted = _ScoredBackend({"mono:0": [
        RawBox(10 + 50 * k, 10, 20, 20, score) for k, score in enumerate(scores)
    ]})
    blank = np.zeros((512, 512, 3), dtype=np.uint8)
    previous = None
    for threshold in [round(0.1 * k, 1) for k in range(1, 10)]:
        result = detect_pipeline(
            "mono", blank, DetectConfig(confidence_threshold=threshold),
            scripted)
        survivors = {(d.box.x, d.score) for d in result.detections}
        assert len(survivors) == sum(s >= threshold for s in scores)
        if previous is not None:
            assert survivors <= previous
        previous = survivors


# -- 6. average precision vs exhaustive thresholds -----------------------------------


def _random_dump(rng, n_images=3, max_gts=4, max_dets=12):
    gts, dets = [], []
    for i in range(n_images):
        image_id = f"img-{i}"
        for g in range(rng.integers(0, max_gts + 1)):
            gts.append(eval_mod.GroundTruthBox(
                image_id=image_id, box=BoundingBox(40 * g, 40 * i, 20, 20)))
    for _ in range(rng.integers(0, max_dets + 1)):
        i = rng.integers(0, n_images)
        g = rng.integers(0, max_gts)
        jx, jy = rng.integers(-8, 9, size=2)
        score = float(rng.choice([0.3, 0.5, 0.5, 0.7, 0.9]))
        dets.append(eval_mod.EvalDetection(
            image_id=f"img-{i}",
            box=BoundingBox(40 * g + jx, 40 * i + jy, 20, 20), score=score))
    return dets, gts


def test_average_precision_matches_exhaustive_threshold_reference():
    rng = np.random.default_rng(17)
    checked = 0
    for _ in range(500):
        dets, gts = _random_dump(rng)
        if not dets:
            continue
        for policy in (VOC, SAR):
            scores, tps, news = evaluation_series(dets, gts, policy)
            got = dump_average_precision(dets, gts, policy)
            want = ap_threshold_oracle(scores, tps.astype(bool),
                                       news.astype(int), len(gts))
            assert got == pytest.approx(want, abs=1e-12)
        # Coverage matching accepts every detection IoU matching does.
        voc = match_detections(dets, gts, VOC)
        sar = match_detections(dets, gts, SAR)
        assert sum(sar.is_tp) >= sum(voc.is_tp)
        assert sum(sar.gt_matched) >= sum(voc.gt_matched)
        checked += 1
    assert checked > 400  # empty dumps are rare


# -- 7. bootstrap confidence intervals -----------------------------------------------


def _split_fixture(n_images=50, seed=5):
    """Detector A finds ~80% of targets, B ~45%; misses become far FPs."""
    rng = np.random.default_rng(seed)
    gts, dets_a, dets_b = [], [], []
    for i in range(n_images):
        image_id = f"img-{i:03d}"
        gts.append(eval_mod.GroundTruthBox(
            image_id=image_id, box=BoundingBox(0, 0, 20, 20)))
        for dets, hit_rate in ((dets_a, 0.8), (dets_b, 0.45)):
            x = 0 if rng.random() < hit_rate else 500
            dets.append(eval_mod.EvalDetection(
                image_id=image_id, box=BoundingBox(x, x, 20, 20),
                score=float(rng.uniform(0.5, 1.0))))
    return dets_a, dets_b, gts


def test_bootstrap_intervals_and_seed_stability():
    dets_a, dets_b, gts = _split_fixture()

    delta, lo, hi = bootstrap_ap_difference(dets_a, dets_a, gts, VOC,
                                            resamples=10000, seed=3)
    assert (delta, lo, hi) == (0.0, 0.0, 0.0)

    delta, lo, hi = bootstrap_ap_difference(dets_a, dets_b, gts, VOC,
                                            resamples=10000, seed=3)
    assert delta > 0.0
    assert lo > 0.0 and hi >= lo

    one = bootstrap_ap_difference(dets_a, dets_b, gts, VOC,
                                  resamples=10000, seed=101)
    two = bootstrap_ap_difference(dets_a, dets_b, gts, VOC,
                                  resamples=10000, seed=202)
    assert one[0] == two[0]  # the point estimate is not resampled
    assert abs(one[1] - two[1]) <= 0.005
    assert abs(one[2] - two[2]) <= 0.005


# -- 8. crop sampling and geometric consistency --------------------------------------


def test_crop_branch_fraction_and_all_eight_symmetries():
    img = green_field(735, 735, seed=8)
    boxes = [BoundingBox(400, 400, 30, 30)]
    guided = 0
    for i in range(10000):
        sample = sample_crop(img, boxes, sample_rng(42, i), "img-g")
        assert sample is not None
        guided += sample.provenance == "box_guided_crop"
    fraction = guided / 10000
    assert abs(fraction - 0.5) <= 0.02, f"box-guided fraction {fraction}"

    # Every square symmetry: flip (none/lr/ud) then 0..3 quarter turns.
    # Box transforms must commute with the same transforms of the mask.
    size = 96
    rng = np.random.default_rng(19)
    for _ in range(10):
        x, y = rng.integers(0, 60, size=2)
        w, h = rng.integers(1, 30, size=2)
        box = BoundingBox(int(x), int(y), int(w), int(h))
        mask = rasterize_box(box, size)
        for flip in ("none", "lr", "ud"):
            if flip == "lr":
                flipped_box = _flip_lr([box], size)[0]
                flipped_mask = mask[:, ::-1]
            elif flip == "ud":
                flipped_box = _flip_ud([box], size)[0]
                flipped_mask = mask[::-1, :]
            else:
                flipped_box, flipped_mask = box, mask
            turned_box = flipped_box
            for k in range(4):
                np.testing.assert_array_equal(
                    rasterize_box(turned_box, size),
                    np.rot90(flipped_mask, k),
                    err_msg=f"box={box} flip={flip} k={k}")
                turned_box = rotate90_box(turned_box, size)


# -- 9. review store crash safety and HTTP round trip --------------------------------


def _review_fixture(tmp_path):
    images_root = tmp_path / "images"
    img = green_field(768, 1024, seed=1)
    img[100:130, 200:230] = (220, 30, 30)
    save_png(images_root / "a.png", img)
    save_png(images_root / "b.png", green_field(768, 1024, seed=2))
    records = [
        ingest_mod.ImageRecord(id="img-a", source_path="a.png",
                               source_kind="photo", parent_video=None,
                               frame_time_s=None, width_px=1024,
                               height_px=768, gps=(44.5, -121.9),
                               captured_at=None),
        ingest_mod.ImageRecord(id="img-b", source_path="b.png",
                               source_kind="photo", parent_video=None,
                               frame_time_s=None, width_px=1024,
                               height_px=768, gps=None, captured_at=None),
    ]
    manifest = ingest_mod.CorpusManifest(
        records=records, sample_rate_hz=2.0,
        created_at="2026-01-01T00:00:00+00:00", root=str(images_root))
    rx_rows = [{"image_id": "img-a", "is_candidate": True, "clusters": [
        {"bbox_native": [200, 100, 30, 30], "pixel_count": 300,
         "centroid": [215, 115]},
        {"bbox_native": [600, 400, 20, 20], "pixel_count": 250,
         "centroid": [610, 410]},
    ]}]
    detect_rows = [{"image_id": "img-b", "is_candidate": True,
                    "detections": [{"x": 50, "y": 60, "w": 24, "h": 24,
                                    "score": 0.9, "label": "person",
                                    "contributors": 2}]}]
    store = CandidateStore(tmp_path / "store", images_root=images_root)
    store.ingest_candidates(manifest, rx_rows, detect_rows)
    return store


def test_review_store_survives_truncation_and_http_round_trip(tmp_path):
    store = _review_fixture(tmp_path)
    rows, _ = store.list_candidates()
    cids = [r.candidate_id for r in rows]
    decisions = ["dismissed", "elevated", "unsure"]
    for k in range(20):
        store.record_verdict(ReviewVerdict(
            candidate_id=cids[k % len(cids)], decision=decisions[k % 3],
            reviewer=f"r{k}", notes="x" * (k % 5)))
    raw = store.log_path.read_bytes()
    assert len(raw.split(b"\n")[:-1]) == 20
    for offset in range(len(raw) + 1):
        store.log_path.write_bytes(raw[:offset])
        recovered = CandidateStore(store.store_dir)
        surviving = raw[:offset].split(b"\n")[:-1]
        assert recovered.verdict_count == len(surviving)
        expect = {}
        for piece in surviving:
            doc = json.loads(piece)
            expect[doc["candidate_id"]] = doc["decision"]
        for cid in cids:
            assert recovered.get(cid).status == expect.get(cid, "pending")
    store.log_path.write_bytes(raw)

    fresh = _review_fixture(tmp_path / "http")
    http = TestClient(create_app(fresh))
    listing = http.get("/api/candidates", params={"status": "pending"}).json()
    assert listing["total"] == 3
    for row in listing["candidates"]:
        cid = row["candidate_id"]
        crop = http.get(f"/api/candidates/{cid}/crop")
        assert crop.status_code == 200
        assert crop.headers["content-type"] == "image/png"
        verdict = http.post(f"/api/candidates/{cid}/verdict",
                            json={"decision": "elevated", "reviewer": "ops"})
        assert verdict.status_code == 200
    stats = http.get("/api/stats").json()
    assert stats["by_status"]["pending"] == 0
    assert stats["by_status"]["elevated"] == 3
    exported = http.get("/api/export/elevated").json()
    assert exported["type"] == "FeatureCollection"
    assert len(exported["features"]) + len(exported["no_location"]) == 3


# -- 10. determinism across worker counts --------------------------------------------


def _determinism_corpus(tmp_path):
    root = tmp_path / "corpus"
    img = green_field(768, 1024, seed=3)
    img[100:130, 200:230] = (220, 30, 40)
    img[500:524, 700:724] = (255, 0, 255)
    save_png(root / "field_patch.png", img)
    save_png(root / "field_plain.png", green_field(768, 1024, seed=4))
    return root


def test_stage_outputs_identical_across_worker_counts(runner, tmp_path):
    root = _determinism_corpus(tmp_path)

    scan_1 = ingest_mod.scan_corpus(
        str(root), ingest_mod.ScanConfig(workers=1))
    scan_8 = ingest_mod.scan_corpus(
        str(root), ingest_mod.ScanConfig(workers=8))
    assert scan_1.manifest.records == scan_8.manifest.records
    assert scan_1.videos == scan_8.videos and scan_1.skipped == scan_8.skipped
    # The scan timestamp is wall-clock provenance; align it so the files
    # compare byte for byte.
    scan_8.manifest.created_at = scan_1.manifest.created_at
    m1, m8 = tmp_path / "m1.json", tmp_path / "m8.json"
    ingest_mod.write_manifest(scan_1.manifest, str(m1))
    ingest_mod.write_manifest(scan_8.manifest, str(m8))
    assert m1.read_bytes() == m8.read_bytes()

    outputs = {}
    for workers in (1, 8):
        out = tmp_path / f"rx-{workers}.jsonl"
        result = runner.invoke(cli_main, [
            "rx", "--manifest", str(m1), "--out", str(out),
            "--workers", str(workers)], catch_exceptions=False)
        assert result.exit_code == 0, result.output
        outputs[workers] = out.read_bytes()
    assert outputs[1] == outputs[8]

    runs = []
    for name in ("det-a.jsonl", "det-b.jsonl"):
        out = tmp_path / name
        result = runner.invoke(cli_main, [
            "detect", "--manifest", str(m1), "--out", str(out)],
            catch_exceptions=False)
        assert result.exit_code == 0, result.output
        runs.append(out.read_bytes())
    assert runs[0] == runs[1]

    images = [("img-a", root / "field_patch.png",
               [BoundingBox(200, 100, 30, 30)]),
              ("img-b", root / "field_plain.png", [])]
    crops = []
    for name in ("crops-a", "crops-b"):
        out = tmp_path / name
        prep_mod.prep_training_set(images, out, seed=3, samples_per_image=2)
        crops.append({p.relative_to(out).as_posix(): p.read_bytes()
                      for p in sorted(out.rglob("*")) if p.is_file()})
    assert crops[0] == crops[1]
