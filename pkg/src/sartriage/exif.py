"""Minimal embedded-metadata reader: image dimensions plus the GPS and
capture-time tags. Understands JPEG (SOF dimensions, EXIF APP1 segment)
and PNG (IHDR dimensions, no positional metadata).

Deliberately small: a full EXIF library is not needed because the rest of
the pipeline only consumes width/height, latitude/longitude, and an
optional timestamp, and field imagery frequently lacks everything else.
A sidecar CSV (see ingest) can supply or override any of these values.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from typing import Optional, Tuple

log = logging.getLogger(__name__)


class MetadataError(Exception):
    """The byte stream is not a parsable image container."""

    def __init__(self, message: str, source: str = "<bytes>"):
        super().__init__(f"{source}: {message}")
        self.source = source


@dataclass(frozen=True)
class ImageMeta:
    width: int
    height: int
    gps: Optional[Tuple[float, float]] = None  # (lat_deg, lon_deg), S/W negative
    captured_at: Optional[str] = None  # ISO 8601 when parsed from EXIF


# JPEG markers that carry frame dimensions (SOF0..SOF15 minus DHT/JPG/DAC).
_SOF_MARKERS = frozenset(
    [0xC0, 0xC1, 0xC2, 0xC3, 0xC5, 0xC6, 0xC7, 0xC9, 0xCA, 0xCB, 0xCD, 0xCE, 0xCF]
)

_TAG_GPS_IFD = 0x8825
_TAG_EXIF_IFD = 0x8769
_TAG_DATETIME = 0x0132
_TAG_DATETIME_ORIGINAL = 0x9003
_GPS_LAT_REF, _GPS_LAT, _GPS_LON_REF, _GPS_LON = 1, 2, 3, 4

# TIFF field type -> byte size (only the types we ever touch).
_TYPE_SIZES = {1: 1, 2: 1, 3: 2, 4: 4, 5: 8, 7: 1, 9: 4, 10: 8}


def read_metadata(data: bytes, source: str = "<bytes>") -> ImageMeta:
    """Parse dimensions and, when present, GPS/timestamp metadata.

    Dimensions are always returned for a parsable container. A malformed
    metadata block inside a valid image yields a warning and absent GPS,
    never an error.
    """
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        return _read_png(data, source)
    if data[:2] == b"\xff\xd8":
        return _read_jpeg(data, source)
    raise MetadataError("not a recognized image container (JPEG/PNG)", source)


def _read_png(data: bytes, source: str) -> ImageMeta:
    # IHDR is required to be the first chunk.
    if len(data) < 24 or data[12:16] != b"IHDR":
        raise MetadataError("PNG missing IHDR chunk", source)
    width, height = struct.unpack(">II", data[16:24])
    if width <= 0 or height <= 0:
        raise MetadataError("PNG declares non-positive dimensions", source)
    return ImageMeta(width=width, height=height)


def _read_jpeg(data: bytes, source: str) -> ImageMeta:
    dims: Optional[Tuple[int, int]] = None
    exif_blob: Optional[bytes] = None
    pos = 2
    n = len(data)
    while pos + 4 <= n:
        if data[pos] != 0xFF:
            raise MetadataError("corrupt JPEG segment stream", source)
        marker = data[pos + 1]
        if marker == 0xD9:  # EOI
            break
        if 0xD0 <= marker <= 0xD7 or marker == 0x01:  # standalone
            pos += 2
            continue
        (seg_len,) = struct.unpack(">H", data[pos + 2:pos + 4])
        if seg_len < 2 or pos + 2 + seg_len > n:
            raise MetadataError("JPEG segment overruns file", source)
        body = data[pos + 4:pos + 2 + seg_len]
        if marker in _SOF_MARKERS and len(body) >= 5:
            height, width = struct.unpack(">HH", body[1:5])
            dims = (width, height)
        elif marker == 0xE1 and body[:6] == b"Exif\x00\x00":
            exif_blob = body[6:]
        if marker == 0xDA:  # start of scan; headers are all before it
            break
        pos += 2 + seg_len
    if dims is None:
        raise MetadataError("JPEG has no SOF frame header", source)

    gps = None
    captured_at = None
    if exif_blob is not None:
        try:
            gps, captured_at = _parse_tiff(exif_blob)
        except Exception as exc:  # malformed block: keep dimensions, warn
            log.warning("%s: malformed EXIF block ignored (%s)", source, exc)
    return ImageMeta(width=dims[0], height=dims[1], gps=gps, captured_at=captured_at)


def _parse_tiff(blob: bytes):
    """Walk IFD0 (+ EXIF/GPS sub-IFDs) for the handful of tags we keep."""
    if blob[:2] == b"II":
        bo = "<"
    elif blob[:2] == b"MM":
        bo = ">"
    else:
        raise ValueError("bad TIFF byte-order mark")
    (magic,) = struct.unpack(bo + "H", blob[2:4])
    if magic != 42:
        raise ValueError("bad TIFF magic")
    (ifd0_off,) = struct.unpack(bo + "I", blob[4:8])

    ifd0 = _read_ifd(blob, ifd0_off, bo)
    gps = None
    captured_at = None

    if _TAG_DATETIME in ifd0:
        captured_at = _decode_datetime(_entry_ascii(blob, ifd0[_TAG_DATETIME], bo))
    if _TAG_EXIF_IFD in ifd0:
        exif_ifd = _read_ifd(blob, _entry_long(blob, ifd0[_TAG_EXIF_IFD], bo), bo)
        if _TAG_DATETIME_ORIGINAL in exif_ifd:
            original = _decode_datetime(
                _entry_ascii(blob, exif_ifd[_TAG_DATETIME_ORIGINAL], bo))
            captured_at = original or captured_at
    if _TAG_GPS_IFD in ifd0:
        gps_ifd = _read_ifd(blob, _entry_long(blob, ifd0[_TAG_GPS_IFD], bo), bo)
        gps = _decode_gps(blob, gps_ifd, bo)
    return gps, captured_at


def _read_ifd(blob: bytes, offset: int, bo: str) -> dict:
    (count,) = struct.unpack(bo + "H", blob[offset:offset + 2])
    entries = {}
    for i in range(count):
        base = offset + 2 + 12 * i
        tag, ftype, n = struct.unpack(bo + "HHI", blob[base:base + 8])
        entries[tag] = (ftype, n, blob[base + 8:base + 12])
    return entries


def _entry_payload(blob: bytes, entry, bo: str) -> bytes:
    ftype, n, inline = entry
    size = _TYPE_SIZES.get(ftype, 1) * n
    if size <= 4:
        return inline[:size]
    (off,) = struct.unpack(bo + "I", inline)
    return blob[off:off + size]


def _entry_ascii(blob: bytes, entry, bo: str) -> str:
    return _entry_payload(blob, entry, bo).split(b"\x00", 1)[0].decode(
        "ascii", errors="replace")


def _entry_long(blob: bytes, entry, bo: str) -> int:
    (value,) = struct.unpack(bo + "I", _entry_payload(blob, entry, bo))
    return value


def _entry_rationals(blob: bytes, entry, bo: str) -> list:
    ftype, n, _ = entry
    payload = _entry_payload(blob, entry, bo)
    values = []
    for i in range(n):
        num, den = struct.unpack(bo + "II", payload[8 * i:8 * i + 8])
        values.append(num / den if den else 0.0)
    return values


def _decode_gps(blob: bytes, gps_ifd: dict, bo: str) -> Optional[Tuple[float, float]]:
    # Incomplete pair rule: all four tags or nothing.
    needed = (_GPS_LAT_REF, _GPS_LAT, _GPS_LON_REF, _GPS_LON)
    if not all(tag in gps_ifd for tag in needed):
        return None
    lat = _dms_to_degrees(_entry_rationals(blob, gps_ifd[_GPS_LAT], bo))
    lon = _dms_to_degrees(_entry_rationals(blob, gps_ifd[_GPS_LON], bo))
    if lat is None or lon is None:
        return None
    if _entry_ascii(blob, gps_ifd[_GPS_LAT_REF], bo).strip().upper() == "S":
        lat = -lat
    if _entry_ascii(blob, gps_ifd[_GPS_LON_REF], bo).strip().upper() == "W":
        lon = -lon
    return (lat, lon)


def _dms_to_degrees(values: list) -> Optional[float]:
    if len(values) != 3:
        return None
    d, m, s = values
    return d + m / 60.0 + s / 3600.0


def _decode_datetime(raw: str) -> Optional[str]:
    # EXIF format "YYYY:MM:DD HH:MM:SS" -> ISO 8601.
    raw = raw.strip()
    if len(raw) == 19 and raw[4] == ":" and raw[7] == ":":
        return f"{raw[0:4]}-{raw[5:7]}-{raw[8:10]}T{raw[11:19]}"
    return raw or None
