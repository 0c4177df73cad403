"""Detector backends for tiled inference.

Two implementations: an in-process synthetic detector used by tests and
demos (finds connected components of saturated magenta pixels), and a
subprocess adapter speaking a line-delimited JSON protocol so any model
runtime can be plugged in.

Adapter protocol (UTF-8, one JSON object per line, flushed per response):
  adapter -> orchestrator, first line:   {"protocol": 1, "capacity": N}
  orchestrator -> adapter, per tile:     {"tile_id": str, "image_path": str}
  adapter -> orchestrator, per tile:     {"tile_id": str, "boxes": [
      {"x": num, "y": num, "w": num, "h": num, "score": num, "label": str}]}
The image_path names a PNG crop the orchestrator has written to a work
directory. Responses may arrive in any order within a pipelined window of
`capacity` outstanding requests.
"""

from __future__ import annotations

import json
import logging
import queue
import shlex
import subprocess
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image
from scipy import ndimage

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
MAGENTA = (255, 0, 255)


class ProtocolError(Exception):
    """Adapter emitted a line that violates the protocol contract."""


class BackendUnavailable(Exception):
    """Adapter process died or timed out (after the retry)."""


@dataclass(frozen=True)
class RawBox:
    x: float
    y: float
    w: float
    h: float
    score: float
    label: str = "person"


def parse_handshake_line(line: str) -> int:
    """Validate the handshake and return the declared capacity."""
    try:
        doc = json.loads(line)
    except json.JSONDecodeError:
        raise ProtocolError(f"handshake is not JSON: {line!r}")
    if not isinstance(doc, dict) or doc.get("protocol") != PROTOCOL_VERSION:
        raise ProtocolError(f"unsupported handshake: {line!r}")
    capacity = doc.get("capacity", 1)
    if not isinstance(capacity, int) or capacity < 1:
        raise ProtocolError(f"handshake capacity must be a positive int: {line!r}")
    return capacity


def parse_response_line(line: str) -> Tuple[str, List[RawBox]]:
    """Parse and validate one adapter response line."""
    try:
        doc = json.loads(line)
    except json.JSONDecodeError:
        raise ProtocolError(f"response is not JSON: {line!r}")
    if not isinstance(doc, dict) or "tile_id" not in doc or "boxes" not in doc:
        raise ProtocolError(f"response missing tile_id/boxes: {line!r}")
    boxes = []
    for raw in doc["boxes"]:
        try:
            box = RawBox(x=float(raw["x"]), y=float(raw["y"]),
                         w=float(raw["w"]), h=float(raw["h"]),
                         score=float(raw["score"]),
                         label=str(raw.get("label", "person")))
        except (KeyError, TypeError, ValueError):
            raise ProtocolError(f"malformed box in response: {line!r}")
        if not (0.0 <= box.score <= 1.0):
            raise ProtocolError(
                f"score {box.score} outside [0, 1] in response: {line!r}")
        boxes.append(box)
    if doc.get("error"):
        log.warning("adapter reported error for tile %s: %s",
                    doc["tile_id"], doc["error"])
    return str(doc["tile_id"]), boxes


class SyntheticBackend:
    """Finds connected components of pixels exactly equal to saturated
    magenta (255, 0, 255); each component becomes a box with score 1.0."""

    capacity = 1

    def detect(self, tiles: Sequence[Tuple[str, np.ndarray]]
               ) -> Dict[str, List[RawBox]]:
        out: Dict[str, List[RawBox]] = {}
        for tile_id, pixels in tiles:
            out[tile_id] = self._detect_one(np.asarray(pixels))
        return out

    @staticmethod
    def _detect_one(pixels: np.ndarray) -> List[RawBox]:
        hit = np.all(pixels == np.array(MAGENTA, dtype=pixels.dtype), axis=-1)
        if not hit.any():
            return []
        labels, count = ndimage.label(hit)
        boxes = []
        for sl_y, sl_x in ndimage.find_objects(labels):
            boxes.append(RawBox(x=float(sl_x.start), y=float(sl_y.start),
                                w=float(sl_x.stop - sl_x.start),
                                h=float(sl_y.stop - sl_y.start),
                                score=1.0, label="person"))
        boxes.sort(key=lambda b: (b.x, b.y))
        return boxes

    def close(self) -> None:
        pass


class AdapterBackend:
    """Runs an external detector process and speaks the line protocol.

    Tile crops are written as PNGs under `workdir`; requests are pipelined
    up to the capacity the adapter declared in its handshake.
    """

    def __init__(self, command: str, workdir: str, timeout_s: float = 30.0):
        self.command = command
        self.workdir = Path(workdir)
        self.workdir.mkdir(parents=True, exist_ok=True)
        self.timeout_s = timeout_s
        self._proc: Optional[subprocess.Popen] = None
        self._lines: "queue.Queue[Optional[str]]" = queue.Queue()
        self.capacity = 1
        self._start()

    def _start(self) -> None:
        self._proc = subprocess.Popen(
            shlex.split(self.command), stdin=subprocess.PIPE,
            stdout=subprocess.PIPE, text=True, bufsize=1)
        self._lines = queue.Queue()
        threading.Thread(target=self._pump, args=(self._proc, self._lines),
                         daemon=True).start()
        self.capacity = parse_handshake_line(self._read_line())

    @staticmethod
    def _pump(proc: subprocess.Popen, lines: "queue.Queue[Optional[str]]") -> None:
        for line in proc.stdout:  # type: ignore[union-attr]
            lines.put(line)
        lines.put(None)

    def _read_line(self) -> str:
        try:
            line = self._lines.get(timeout=self.timeout_s)
        except queue.Empty:
            raise BackendUnavailable(
                f"adapter silent for {self.timeout_s}s: {self.command}")
        if line is None:
            raise BackendUnavailable(f"adapter exited: {self.command}")
        return line

    def detect(self, tiles: Sequence[Tuple[str, np.ndarray]]
               ) -> Dict[str, List[RawBox]]:
        if self._proc is None or self._proc.poll() is not None:
            self.restart()
        results: Dict[str, List[RawBox]] = {}
        pending = 0
        stdin = self._proc.stdin  # type: ignore[union-attr]
        try:
            todo = list(tiles)
            sent = 0
            while sent < len(todo) or pending:
                while sent < len(todo) and pending < self.capacity:
                    tile_id, pixels = todo[sent]
                    path = self.workdir / f"{_safe_name(tile_id)}.png"
                    Image.fromarray(np.asarray(pixels, dtype=np.uint8)).save(path)
                    stdin.write(json.dumps(
                        {"tile_id": tile_id, "image_path": str(path)}) + "\n")
                    stdin.flush()
                    sent += 1
                    pending += 1
                tile_id, boxes = parse_response_line(self._read_line())
                results[tile_id] = boxes
                pending -= 1
        except BrokenPipeError:
            raise BackendUnavailable(f"adapter pipe closed: {self.command}")
        return results

    def restart(self) -> None:
        self.close()
        self._start()

    def close(self) -> None:
        if self._proc is not None:
            try:
                self._proc.stdin.close()  # type: ignore[union-attr]
            except OSError:
                pass
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
            self._proc = None


def _safe_name(tile_id: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in tile_id)
