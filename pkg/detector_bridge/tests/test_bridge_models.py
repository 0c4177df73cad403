"""Bundled model behavior."""

import numpy as np
import pytest

from detector_bridge.models import (MagentaStubModel, ModelLoadError,
                                    NullModel, load_model)


def _field(height: int = 48, width: int = 64) -> np.ndarray:
    tile = np.zeros((height, width, 3), np.uint8)
    tile[:] = (34, 120, 40)
    return tile


def test_null_model_finds_nothing():
    tile = _field()
    tile[10:20, 10:20] = (255, 0, 255)
    assert NullModel().detect(tile) == []


def test_magenta_stub_boxes_one_component_exactly():
    tile = _field()
    tile[10:22, 30:46] = (255, 0, 255)
    assert MagentaStubModel().detect(tile) == [
        {"x": 30.0, "y": 10.0, "w": 16.0, "h": 12.0,
         "score": 1.0, "label": "person"}]


def test_magenta_stub_separates_components_and_sorts():
    tile = _field()
    tile[30:34, 50:55] = (255, 0, 255)
    tile[5:9, 3:7] = (255, 0, 255)
    got = MagentaStubModel().detect(tile)
    assert [(b["x"], b["y"], b["w"], b["h"]) for b in got] == [
        (3.0, 5.0, 4.0, 4.0), (50.0, 30.0, 5.0, 4.0)]


def test_magenta_stub_uses_four_connectivity():
    tile = _field(8, 8)
    tile[2, 2] = (255, 0, 255)
    tile[3, 3] = (255, 0, 255)
    assert len(MagentaStubModel().detect(tile)) == 2


def test_magenta_stub_ignores_near_magenta():
    tile = _field()
    tile[10:20, 10:20] = (254, 0, 255)
    assert MagentaStubModel().detect(tile) == []


def test_load_model_dispatch():
    assert isinstance(load_model(None), NullModel)
    assert isinstance(load_model(""), NullModel)
    assert isinstance(load_model("null"), NullModel)
    assert isinstance(load_model("magenta"), MagentaStubModel)


def test_load_model_rejects_weights_paths():
    with pytest.raises(ModelLoadError, match="no bundled runtime"):
        load_model("weights/detector.onnx")
