"""Metadata extraction from PNG and JPEG headers."""

import numpy as np
import pytest
from PIL import Image

from sartriage.exif import MetadataError, read_metadata

from helpers import green_field, save_jpeg_with_gps, save_png


def test_png_dimensions(tmp_path):
    path = save_png(tmp_path / "a.png", green_field(24, 48))
    meta = read_metadata(path.read_bytes(), source=str(path))
    assert (meta.width, meta.height) == (48, 24)
    assert meta.gps is None
    assert meta.captured_at is None


def test_jpeg_dimensions_without_exif(tmp_path):
    path = tmp_path / "plain.jpg"
    Image.fromarray(green_field(30, 40)).save(path, format="JPEG")
    meta = read_metadata(path.read_bytes())
    assert (meta.width, meta.height) == (40, 30)
    assert meta.gps is None


def test_jpeg_gps_matches_pillow_reference(tmp_path):
    lat, lon = 34.6431, 135.9876
    path = save_jpeg_with_gps(tmp_path / "gps.jpg", green_field(20, 20),
                              lat=lat, lon=lon)
    meta = read_metadata(path.read_bytes())
    # Decode the same file with Pillow as an independent reference.
    gps_ifd = Image.open(path).getexif().get_ifd(0x8825)
    ref_lat = float(sum(float(v) / 60 ** i
                        for i, v in enumerate(gps_ifd[2])))
    ref_lon = float(sum(float(v) / 60 ** i
                        for i, v in enumerate(gps_ifd[4])))
    assert meta.gps == pytest.approx((ref_lat, ref_lon), abs=1e-9)
    assert meta.gps == pytest.approx((lat, lon), abs=1e-4)


def test_jpeg_gps_southern_western_hemispheres(tmp_path):
    path = save_jpeg_with_gps(tmp_path / "sw.jpg", green_field(20, 20),
                              lat=-33.8688, lon=-151.2093)
    # Helper writes S/W reference letters for negative coordinates.
    meta = read_metadata(path.read_bytes())
    assert meta.gps[0] == pytest.approx(-33.8688, abs=1e-4)
    assert meta.gps[1] == pytest.approx(-151.2093, abs=1e-4)


def test_jpeg_datetime_converted_to_iso(tmp_path):
    path = save_jpeg_with_gps(tmp_path / "dt.jpg", green_field(20, 20),
                              datetime_str="2023:06:01 10:20:30")
    meta = read_metadata(path.read_bytes())
    assert meta.captured_at == "2023-06-01T10:20:30"


def test_incomplete_gps_pair_yields_none(tmp_path):
    # Latitude present, longitude absent: no usable position.
    from PIL.TiffImagePlugin import IFDRational
    img = Image.fromarray(green_field(16, 16))
    exif = Image.Exif()
    exif[0x8825] = {1: "N", 2: (IFDRational(34, 1), IFDRational(0, 1),
                                IFDRational(0, 1))}
    path = tmp_path / "half.jpg"
    img.save(path, format="JPEG", exif=exif)
    meta = read_metadata(path.read_bytes())
    assert meta.gps is None
    assert (meta.width, meta.height) == (16, 16)


def test_malformed_exif_still_returns_dimensions(tmp_path, caplog):
    path = tmp_path / "broken.jpg"
    Image.fromarray(green_field(18, 22)).save(path, format="JPEG")
    data = bytearray(path.read_bytes())
    # Splice a garbage APP1 Exif segment right after SOI.
    garbage = b"\xff\xe1\x00\x10Exif\x00\x00GARBAGE!"
    data = data[:2] + garbage + data[2:]
    meta = read_metadata(bytes(data))
    assert (meta.width, meta.height) == (22, 18)
    assert meta.gps is None


def test_unrecognized_container_raises():
    with pytest.raises(MetadataError):
        read_metadata(b"not an image at all")


def test_truncated_png_raises():
    with pytest.raises(MetadataError):
        read_metadata(b"\x89PNG\r\n\x1a\n\x00\x00")
