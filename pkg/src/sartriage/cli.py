"""Command-line entry point wiring all pipeline stages.

Subcommands compose through files only: ingest writes a manifest, rx and
detect write JSONL result dumps, eval scores a dump against ground truth,
prep-train emits training crops, triage-ingest loads dumps into a review
store, serve exposes the store over HTTP, and report aggregates
everything.

Every subcommand that writes an output also writes `<out>.run.json` with
the effective config echo, counts, timing, and the seed used by any
randomized stage. Option precedence: command-line flag, then the config
file (`sartriage.toml` in the working directory or `--config PATH`), then
the built-in default. Exit codes: 0 success, 1 when some items were
skipped, 2 on usage or config errors.
"""

from __future__ import annotations

import dataclasses
import datetime as _dt
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional

import click
import numpy as np
from PIL import Image

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from . import detect as detect_mod
from . import evaluate as eval_mod
from . import ingest as ingest_mod
from . import report as report_mod
from . import rx as rx_mod
from . import trainprep as prep_mod
from .backends import AdapterBackend, BackendUnavailable, ProtocolError, \
    SyntheticBackend
from .geometry import BoundingBox
from .triage import CandidateStore

log = logging.getLogger(__name__)

DEFAULT_CONFIG_NAME = "sartriage.toml"


def _load_config_doc(config_path: Optional[str]) -> dict:
    path = Path(config_path) if config_path else Path(DEFAULT_CONFIG_NAME)
    if not path.exists():
        if config_path:
            raise click.UsageError(f"config file not found: {config_path}")
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise click.UsageError(f"cannot parse {path}: {exc}")


def _pick(flag_value, doc: dict, section: str, key: str, default):
    """Precedence: explicit flag, then config file, then default."""
    if flag_value is not None:
        return flag_value
    sec = doc.get(section, {})
    if isinstance(sec, dict) and key in sec:
        return sec[key]
    if key in doc:
        return doc[key]
    return default


def _setup_logging(flag_value, doc: dict) -> None:
    level = _pick(flag_value, doc, "logging", "log_level", "INFO")
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format="%(levelname)s %(name)s: %(message)s")


def _ensure_seed(seed: Optional[int]) -> int:
    """Randomized stages always run under a recorded seed."""
    if seed is not None:
        return seed
    return int.from_bytes(os.urandom(4), "big")


def _write_summary(out_path, subcommand: str, config_echo: dict,
                   counts: Dict[str, int], started_monotonic: float,
                   started_at: str, seed: Optional[int] = None,
                   inputs: Optional[dict] = None) -> dict:
    summary = {
        "subcommand": subcommand,
        "started_at": started_at,
        "finished_at": _now_iso(),
        "duration_s": time.monotonic() - started_monotonic,
        "config": config_echo,
        "counts": counts,
    }
    if seed is not None:
        summary["seed"] = seed
    if inputs:
        summary["inputs"] = inputs
    path = str(out_path) + ".run.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
    return summary


def _now_iso() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _read_jsonl(path) -> List[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(json.loads(line))
    return out


def common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(),
                      default=None,
                      help="TOML config file (default: ./sartriage.toml "
                           "when present).")(fn)
    fn = click.option("--log-level", default=None,
                      help="DEBUG, INFO, WARNING or ERROR.")(fn)
    return fn


@click.group()
def main() -> None:
    """Drone-imagery triage pipeline for wilderness search and rescue."""


# -- ingest ---------------------------------------------------------------

@main.command(name="ingest")
@common_options
@click.option("--root", required=True,
              type=click.Path(exists=True, file_okay=False),
              help="Corpus directory to scan.")
@click.option("--out", required=True, type=click.Path(),
              help="Manifest JSON output path.")
@click.option("--videos-out", type=click.Path(), default=None,
              help="Video census output (default <out>.videos.json).")
@click.option("--sample-rate", type=float, default=None,
              help="Video frame sampling rate in Hz.")
@click.option("--sidecar", type=click.Path(), default=None,
              help="CSV with path,lat,lon,captured_at columns.")
@click.option("--frame-cmd", default=None,
              help="Frame extraction command template with {input} {rate} "
                   "{outdir} placeholders.")
@click.option("--workers", type=int, default=None)
@click.pass_context
def cmd_ingest(ctx, config_path, log_level, root, out, videos_out,
               sample_rate, sidecar, frame_cmd, workers) -> None:
    """Scan photos and videos into a corpus manifest."""
    doc = _load_config_doc(config_path)
    _setup_logging(log_level, doc)
    started = time.monotonic()
    started_at = _now_iso()
    config = ingest_mod.ScanConfig(
        sample_rate_hz=_pick(sample_rate, doc, "ingest", "sample_rate_hz",
                             ingest_mod.DEFAULT_SAMPLE_RATE_HZ),
        sidecar_csv=_pick(sidecar, doc, "ingest", "sidecar_csv", None),
        frame_cmd=_pick(frame_cmd, doc, "ingest", "frame_cmd", None),
        workers=_pick(workers, doc, "ingest", "workers", 1))
    result = ingest_mod.scan_corpus(root, config)
    ingest_mod.write_manifest(result.manifest, out)
    videos_path = videos_out or str(out) + ".videos.json"
    ingest_mod.write_videos(result.videos, videos_path)
    counts = {"processed": len(result.manifest.records),
              "videos": len(result.videos),
              "skipped": len(result.skipped)}
    _write_summary(out, "ingest", dataclasses.asdict(config), counts,
                   started, started_at, inputs={"root": str(root)})
    click.echo(f"manifest: {len(result.manifest.records)} images, "
               f"{len(result.videos)} videos, {len(result.skipped)} skipped")
    if result.skipped:
        ctx.exit(1)


# -- rx -------------------------------------------------------------------

@main.command(name="rx")
@common_options
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--images-root", type=click.Path(), default=None,
              help="Override the manifest root when the corpus moved.")
@click.option("--resize-to", type=int, default=None)
@click.option("--p-threshold", type=float, default=None)
@click.option("--eps", type=float, default=None,
              help="Clustering neighborhood radius in resized pixels.")
@click.option("--min-cluster-pixels", type=int, default=None)
@click.option("--min-clusters", type=int, default=None)
@click.option("--max-clusters", type=int, default=None)
@click.option("--ridge", type=float, default=None)
@click.option("--score-mode", type=click.Choice(["zscore", "chi2"]),
              default=None)
@click.option("--workers", type=int, default=None)
@click.pass_context
def cmd_rx(ctx, config_path, log_level, manifest_path, out, images_root,
           resize_to, p_threshold, eps, min_cluster_pixels, min_clusters,
           max_clusters, ridge, score_mode, workers) -> None:
    """Spectral anomaly sweep over every manifest image."""
    doc = _load_config_doc(config_path)
    _setup_logging(log_level, doc)
    started = time.monotonic()
    started_at = _now_iso()
    defaults = rx_mod.RxConfig()
    try:
        cfg = rx_mod.RxConfig(
            resize_to=_pick(resize_to, doc, "rx", "resize_to",
                            defaults.resize_to),
            p_threshold=_pick(p_threshold, doc, "rx", "p_threshold",
                              defaults.p_threshold),
            dbscan_eps=_pick(eps, doc, "rx", "dbscan_eps",
                             defaults.dbscan_eps),
            min_cluster_pixels=_pick(min_cluster_pixels, doc, "rx",
                                     "min_cluster_pixels",
                                     defaults.min_cluster_pixels),
            min_clusters=_pick(min_clusters, doc, "rx", "min_clusters",
                               defaults.min_clusters),
            max_clusters=_pick(max_clusters, doc, "rx", "max_clusters",
                               defaults.max_clusters),
            covariance_ridge=_pick(ridge, doc, "rx", "covariance_ridge",
                                   defaults.covariance_ridge),
            score_mode=_pick(score_mode, doc, "rx", "score_mode",
                             defaults.score_mode))
    except ValueError as exc:
        raise click.UsageError(str(exc))
    n_workers = int(_pick(workers, doc, "rx", "workers", 1))

    manifest = ingest_mod.read_manifest(manifest_path)
    if images_root:
        manifest.root = str(images_root)

    def work(record):
        path = ingest_mod.record_image_path(manifest, record)
        try:
            pixels = np.asarray(Image.open(path).convert("RGB"))
        except (OSError, ValueError) as exc:
            log.warning("skipping unreadable %s: %s", path, exc)
            return None
        return rx_mod.rx_pipeline(record.id, pixels, cfg)

    with ThreadPoolExecutor(max_workers=max(1, n_workers)) as pool:
        outcomes = list(pool.map(work, manifest.records))

    results = [r for r in outcomes if r is not None]
    skipped = sum(1 for r in outcomes if r is None)
    rx_mod.write_results(results, out)
    counts = {"processed": len(results), "skipped": skipped,
              "candidates": sum(1 for r in results if r.is_candidate),
              "errors": sum(1 for r in results if r.error)}
    _write_summary(out, "rx", dataclasses.asdict(cfg), counts, started,
                   started_at, inputs={"manifest": str(manifest_path)})
    click.echo(f"rx: {counts['processed']} processed, "
               f"{counts['candidates']} candidates, {skipped} skipped")
    if skipped:
        ctx.exit(1)


# -- detect ---------------------------------------------------------------

@main.command(name="detect")
@common_options
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--images-root", type=click.Path(), default=None)
@click.option("--backend", "backend_name",
              type=click.Choice(["synthetic", "adapter"]), default=None)
@click.option("--adapter-cmd", default=None,
              help="Command line of an external detector adapter.")
@click.option("--workdir", type=click.Path(), default=None,
              help="Where tile crops for the adapter are written.")
@click.option("--adapter-timeout", type=float, default=None)
@click.option("--tile-size", type=int, default=None)
@click.option("--tile-overlap", type=int, default=None)
@click.option("--wbf-iou", type=float, default=None)
@click.option("--confidence-threshold", type=float, default=None)
@click.option("--max-detections", type=int, default=None)
@click.pass_context
def cmd_detect(ctx, config_path, log_level, manifest_path, out, images_root,
               backend_name, adapter_cmd, workdir, adapter_timeout,
               tile_size, tile_overlap, wbf_iou, confidence_threshold,
               max_detections) -> None:
    """Tiled detection over every manifest image."""
    doc = _load_config_doc(config_path)
    _setup_logging(log_level, doc)
    started = time.monotonic()
    started_at = _now_iso()
    defaults = detect_mod.DetectConfig()
    try:
        cfg = detect_mod.DetectConfig(
            tile_size=_pick(tile_size, doc, "detect", "tile_size",
                            defaults.tile_size),
            tile_overlap=_pick(tile_overlap, doc, "detect", "tile_overlap",
                               defaults.tile_overlap),
            wbf_iou=_pick(wbf_iou, doc, "detect", "wbf_iou",
                          defaults.wbf_iou),
            confidence_threshold=_pick(confidence_threshold, doc, "detect",
                                       "confidence_threshold",
                                       defaults.confidence_threshold),
            max_detections_per_image=_pick(max_detections, doc, "detect",
                                           "max_detections_per_image",
                                           defaults.max_detections_per_image))
    except ValueError as exc:
        raise click.UsageError(str(exc))
    backend_name = _pick(backend_name, doc, "detect", "backend", "synthetic")
    adapter_cmd = _pick(adapter_cmd, doc, "detect", "adapter_cmd", None)
    if backend_name == "adapter":
        if not adapter_cmd:
            raise click.UsageError("--backend adapter requires --adapter-cmd")
        backend = AdapterBackend(
            adapter_cmd,
            _pick(workdir, doc, "detect", "workdir", str(out) + ".tiles"),
            timeout_s=_pick(adapter_timeout, doc, "detect",
                            "adapter_timeout", 30.0))
    else:
        backend = SyntheticBackend()

    manifest = ingest_mod.read_manifest(manifest_path)
    if images_root:
        manifest.root = str(images_root)
    results = []
    skipped = 0
    try:
        for record in manifest.records:
            path = ingest_mod.record_image_path(manifest, record)
            try:
                pixels = np.asarray(Image.open(path).convert("RGB"))
                results.append(detect_mod.detect_pipeline(record.id, pixels,
                                                          cfg, backend))
            except (OSError, ValueError, BackendUnavailable,
                    ProtocolError) as exc:
                log.warning("detect failed on %s: %s", record.id, exc)
                results.append(detect_mod.DetectResult(
                    image_id=record.id, error=str(exc)))
                skipped += 1
    finally:
        backend.close()
    detect_mod.write_detections(out, results)
    counts = {"processed": len(results) - skipped, "skipped": skipped,
              "candidates": sum(1 for r in results if r.is_candidate),
              "detections": sum(len(r.detections) for r in results)}
    echo = dataclasses.asdict(cfg)
    echo["backend"] = backend_name
    _write_summary(out, "detect", echo, counts, started, started_at,
                   inputs={"manifest": str(manifest_path)})
    click.echo(f"detect: {counts['processed']} processed, "
               f"{counts['detections']} detections, {skipped} skipped")
    if skipped:
        ctx.exit(1)


# -- eval -----------------------------------------------------------------

@main.command(name="eval")
@common_options
@click.option("--detections", "det_path", required=True,
              type=click.Path(exists=True))
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--scheme", type=click.Choice(list(eval_mod.SCHEMES)),
              default=None)
@click.option("--iou-threshold", type=float, default=None)
@click.option("--coverage-threshold", type=float, default=None)
@click.option("--threshold", type=float, default=None,
              help="Operating confidence threshold for precision/recall.")
@click.option("--pr-csv", type=click.Path(), default=None,
              help="Optional PR-curve CSV output.")
@click.option("--compare", "compare_path", type=click.Path(exists=True),
              default=None,
              help="Second detections dump for a bootstrap AP difference.")
@click.option("--resamples", type=int, default=None)
@click.option("--level", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.pass_context
def cmd_eval(ctx, config_path, log_level, det_path, gt_path, out, scheme,
             iou_threshold, coverage_threshold, threshold, pr_csv,
             compare_path, resamples, level, seed) -> None:
    """Score a detection dump against ground truth."""
    doc = _load_config_doc(config_path)
    _setup_logging(log_level, doc)
    started = time.monotonic()
    started_at = _now_iso()
    try:
        policy = eval_mod.MatchPolicy(
            scheme=_pick(scheme, doc, "eval", "scheme", "voc2012"),
            iou_threshold=_pick(iou_threshold, doc, "eval", "iou_threshold",
                                0.5),
            gt_coverage_threshold=_pick(coverage_threshold, doc, "eval",
                                        "gt_coverage_threshold", 0.25))
    except ValueError as exc:
        raise click.UsageError(str(exc))
    operating = _pick(threshold, doc, "eval", "threshold", 0.5)
    dets = eval_mod.detections_for_eval(detect_mod.read_detections(det_path))
    gts = eval_mod.read_ground_truth(gt_path)
    eval_report = eval_mod.evaluate_dump(dets, gts, policy, operating)
    out_doc = eval_mod.report_to_dict(eval_report)
    used_seed = None
    if compare_path:
        used_seed = _ensure_seed(seed)
        dets_b = eval_mod.detections_for_eval(
            detect_mod.read_detections(compare_path))
        delta, ci_low, ci_high = eval_mod.bootstrap_ap_difference(
            dets, dets_b, gts, policy,
            resamples=_pick(resamples, doc, "eval", "resamples", 10000),
            level=_pick(level, doc, "eval", "level", 0.95), seed=used_seed)
        out_doc["ap_difference"] = {"delta": delta, "ci_low": ci_low,
                                    "ci_high": ci_high, "seed": used_seed}
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(out_doc, fh, indent=2)
    if pr_csv:
        eval_mod.write_pr_curve_csv(pr_csv, dets, gts, policy)
    echo = {"scheme": policy.scheme, "iou_threshold": policy.iou_threshold,
            "gt_coverage_threshold": policy.gt_coverage_threshold,
            "operating_threshold": operating}
    _write_summary(out, "eval", echo,
                   {"detections": len(dets), "ground_truth": len(gts)},
                   started, started_at, seed=used_seed,
                   inputs={"detections": str(det_path), "gt": str(gt_path)})
    click.echo(f"eval[{policy.scheme}]: precision {eval_report.precision:.4f}"
               f" recall {eval_report.recall:.4f}"
               f" AP {eval_report.average_precision:.4f}")


# -- prep-train -----------------------------------------------------------

@main.command(name="prep-train")
@common_options
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True),
              help="gt.json whose image_id values are paths relative to "
                   "--images.")
@click.option("--images", "images_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--samples-per-image", type=int, default=None)
@click.option("--val-fraction", type=float, default=None)
@click.pass_context
def cmd_prep_train(ctx, config_path, log_level, gt_path, images_dir, out,
                   seed, samples_per_image, val_fraction) -> None:
    """Generate augmented training crops from ground-truth images."""
    doc = _load_config_doc(config_path)
    _setup_logging(log_level, doc)
    started = time.monotonic()
    started_at = _now_iso()
    used_seed = _ensure_seed(
        seed if seed is not None else doc.get("trainprep", {}).get("seed"))
    per_image = _pick(samples_per_image, doc, "trainprep",
                      "samples_per_image", 1)
    fraction = _pick(val_fraction, doc, "trainprep", "val_fraction", 0.10)
    with open(gt_path, encoding="utf-8") as fh:
        gt_doc = json.load(fh)
    images = []
    missing = 0
    for entry in gt_doc["images"]:
        path = Path(images_dir) / entry["image_id"]
        if not path.exists():
            log.warning("missing image %s", path)
            missing += 1
            continue
        boxes = [BoundingBox(x, y, w, h) for x, y, w, h in entry["boxes"]]
        images.append((entry["image_id"], path, boxes))
    try:
        summary = prep_mod.prep_training_set(
            images, Path(out), seed=used_seed, samples_per_image=per_image,
            val_fraction=fraction)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    counts = {"processed": summary.written,
              "skipped": summary.skipped + missing}
    echo = {"samples_per_image": per_image, "val_fraction": fraction,
            "crop_size": prep_mod.CROP_SIZE,
            "resize_factor_range": [0.7, 1.1],
            "normalize_means": list(prep_mod.NORMALIZE_MEANS),
            "normalize_stds": list(prep_mod.NORMALIZE_STDS)}
    _write_summary(out, "prep-train", echo, counts, started, started_at,
                   seed=used_seed, inputs={"gt": str(gt_path),
                                           "images": str(images_dir)})
    click.echo(f"prep-train: {summary.written} crops written, "
               f"{counts['skipped']} skipped")
    if counts["skipped"]:
        ctx.exit(1)


# -- triage-ingest --------------------------------------------------------

@main.command(name="triage-ingest")
@common_options
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True))
@click.option("--store", "store_dir", required=True, type=click.Path())
@click.option("--rx", "rx_path", type=click.Path(exists=True), default=None)
@click.option("--detections", "det_path", type=click.Path(exists=True),
              default=None)
@click.pass_context
def cmd_triage_ingest(ctx, config_path, log_level, manifest_path, store_dir,
                      rx_path, det_path) -> None:
    """Load pipeline candidates into a review store."""
    doc = _load_config_doc(config_path)
    _setup_logging(log_level, doc)
    started = time.monotonic()
    started_at = _now_iso()
    manifest = ingest_mod.read_manifest(manifest_path)
    known = {record.id for record in manifest.records}
    rx_results = _read_jsonl(rx_path) if rx_path else []
    detect_results = _read_jsonl(det_path) if det_path else []
    skipped = sum(
        len(row.get("clusters", [])) for row in rx_results
        if row.get("is_candidate") and row["image_id"] not in known)
    skipped += sum(
        len(row.get("detections", [])) for row in detect_results
        if row["image_id"] not in known)
    store = CandidateStore(store_dir)
    added = store.ingest_candidates(manifest, rx_results, detect_results)
    counts = {"added": added, "skipped": skipped,
              "total": store.stats()["total"]}
    _write_summary(Path(store_dir) / "triage-ingest", "triage-ingest", {},
                   counts, started, started_at,
                   inputs={"manifest": str(manifest_path),
                           "rx": rx_path, "detections": det_path})
    click.echo(f"triage-ingest: {added} added, {skipped} skipped, "
               f"{counts['total']} total")
    if skipped:
        ctx.exit(1)


# -- serve ----------------------------------------------------------------

@main.command(name="serve")
@common_options
@click.option("--store", "store_dir", required=True, type=click.Path())
@click.option("--images", "images_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--bind", default=None, help="HOST:PORT (default 127.0.0.1:8675).")
@click.option("--ui", "ui_dir", type=click.Path(), default=None,
              help="Directory with a built single-page UI to serve at /.")
def cmd_serve(config_path, log_level, store_dir, images_dir, bind,
              ui_dir) -> None:
    """Serve the review API (and optionally the UI) over HTTP."""
    import uvicorn

    from .server import create_app
    doc = _load_config_doc(config_path)
    _setup_logging(log_level, doc)
    bind = _pick(bind, doc, "serve", "bind", "127.0.0.1:8675")
    try:
        host, port_text = bind.rsplit(":", 1)
        port = int(port_text)
    except ValueError:
        raise click.UsageError(f"--bind must be HOST:PORT, got {bind!r}")
    store = CandidateStore(store_dir, images_root=images_dir)
    app = create_app(store, ui_dir=_pick(ui_dir, doc, "serve", "ui", None))
    uvicorn.run(app, host=host, port=port, log_level="warning")


# -- report ---------------------------------------------------------------

@main.command(name="report")
@common_options
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True))
@click.option("--videos", "videos_path", type=click.Path(), default=None,
              help="Video census JSON (default <manifest>.videos.json).")
@click.option("--rx", "rx_path", type=click.Path(exists=True), default=None)
@click.option("--detections", "det_path", type=click.Path(exists=True),
              default=None)
@click.option("--store", "store_dir", type=click.Path(), default=None)
@click.option("--out", required=True, type=click.Path())
@click.option("--csv", "csv_path", type=click.Path(), default=None,
              help="CSV output (default <out>.csv).")
def cmd_report(config_path, log_level, manifest_path, videos_path, rx_path,
               det_path, store_dir, out, csv_path) -> None:
    """Aggregate censuses, candidate counts, sweep, and throughput."""
    doc = _load_config_doc(config_path)
    _setup_logging(log_level, doc)
    started = time.monotonic()
    started_at = _now_iso()
    manifest = ingest_mod.read_manifest(manifest_path)
    videos_file = videos_path or str(manifest_path) + ".videos.json"
    videos = (ingest_mod.read_videos(videos_file)
              if Path(videos_file).exists() else [])
    rx_results = _read_jsonl(rx_path) if rx_path else []
    detect_results = _read_jsonl(det_path) if det_path else []
    stats = CandidateStore(store_dir).stats() if store_dir else None
    built = report_mod.build_report(
        manifest, videos=videos, rx_results=rx_results,
        detect_results=detect_results, triage_stats=stats,
        rx_summary=report_mod.load_run_summary(rx_path) if rx_path else None,
        detect_summary=(report_mod.load_run_summary(det_path)
                        if det_path else None))
    report_mod.write_report_json(out, built)
    report_mod.write_report_csv(csv_path or str(out) + ".csv", built)
    _write_summary(out, "report", {},
                   {"images": built["counts"]["images"]},
                   started, started_at, inputs={"manifest": str(manifest_path)})
    click.echo(f"report: {built['counts']['images']} images, "
               f"{built['counts']['rx_candidates']} rx candidates, "
               f"{built['counts']['detect_candidates']} detect candidates")


if __name__ == "__main__":
    main()
