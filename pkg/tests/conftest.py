"""Pytest fixtures shared across the suite."""

from __future__ import annotations

import pytest
from click.testing import CliRunner

from sartriage import ingest as ingest_mod

from helpers import green_field, magenta_scene, save_png


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def tiny_corpus(tmp_path):
    """Two photos: one with a red anomaly patch and a magenta patch, one
    plain. Returns (root, manifest)."""
    root = tmp_path / "corpus"
    img = green_field(768, 1024, seed=3)
    img[100:130, 200:230] = (220, 30, 40)
    img[500:524, 700:724] = (255, 0, 255)
    save_png(root / "field_patch.png", img)
    save_png(root / "field_plain.png", green_field(768, 1024, seed=4))
    result = ingest_mod.scan_corpus(str(root))
    return root, result.manifest


@pytest.fixture
def magenta_corpus(tmp_path):
    """One 1024x1024 image with a magenta patch straddling the boundary
    of the first two 512-px tiles."""
    root = tmp_path / "mcorpus"
    scene = magenta_scene(1024, 1024, [(500, 100, 24, 24)], seed=5)
    save_png(root / "straddle.png", scene)
    result = ingest_mod.scan_corpus(str(root))
    return root, result.manifest
