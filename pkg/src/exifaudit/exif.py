"""EXIF parsing, planting, detection, and stripping for JPEG images.

A JPEG is a marker stream: SOI, a run of length-prefixed segments, then from
SOS onward entropy-coded pixel data up to EOI. Camera metadata rides in an
APP1 segment whose payload is "Exif\\0\\0" followed by a little TIFF file:

    TIFF header: 2 bytes order ("II" little / "MM" big), u16 42, u32 offset
    of the first IFD. An IFD is u16 entry count, then 12-byte entries
    (u16 tag, u16 value type, u32 count, 4 value bytes holding either the
    value itself when it fits or an offset into the TIFF blob), then a u32
    next-IFD offset.

The primary IFD can point at two sub-IFDs we follow: the Exif IFD (pointer
tag 0x8769) and the GPS IFD (pointer tag 0x8825). Those three directories
hold every tag this audit treats as sensitive.

The writer exists so tests and the corpus builder can plant exact metadata:
it emits a fresh little-endian TIFF blob and splices it into a JPEG as the
APP1 segment right after SOI. The stripper removes Exif APP1 segments and
nothing else; bytes from SOS to the end of the image are never touched.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from fractions import Fraction

from .errors import MalformedExif, NotJpeg
from .metadata import MetadataType

SOI = b"\xff\xd8"
EXIF_HEADER = b"Exif\x00\x00"

MARKER_APP1 = 0xE1
MARKER_SOS = 0xDA
MARKER_EOI = 0xD9

# TIFF value types and their byte widths.
TYPE_BYTE = 1
TYPE_ASCII = 2
TYPE_SHORT = 3
TYPE_LONG = 4
TYPE_RATIONAL = 5
TYPE_UNDEFINED = 7
TYPE_SLONG = 9
TYPE_SRATIONAL = 10

_TYPE_SIZES = {
    TYPE_BYTE: 1,
    TYPE_ASCII: 1,
    TYPE_SHORT: 2,
    TYPE_LONG: 4,
    TYPE_RATIONAL: 8,
    TYPE_UNDEFINED: 1,
    TYPE_SLONG: 4,
    TYPE_SRATIONAL: 8,
}

TAG_MAKE = 0x010F
TAG_MODEL = 0x0110
TAG_DATETIME = 0x0132
TAG_EXIF_IFD_POINTER = 0x8769
TAG_GPS_IFD_POINTER = 0x8825
TAG_DATETIME_ORIGINAL = 0x9003
TAG_DATETIME_DIGITIZED = 0x9004
TAG_BODY_SERIAL_NUMBER = 0xA431

TAG_GPS_LATITUDE_REF = 0x0001
TAG_GPS_LATITUDE = 0x0002
TAG_GPS_LONGITUDE_REF = 0x0003
TAG_GPS_LONGITUDE = 0x0004


class Ifd(enum.Enum):
    PRIMARY = "Primary"
    EXIF = "Exif"
    GPS = "Gps"


@dataclass(frozen=True)
class ExifRecord:
    """One decoded directory entry: where it sat, what it is, what it held."""

    ifd: Ifd
    tag_id: int
    value_type: int
    value: object


# Tag ids that (in any of the walked IFDs) name a value of a sensitive
# category; GPS needs no tag table because every GPS-IFD child qualifies.
_SENSITIVE_TAGS: dict[int, MetadataType] = {
    TAG_DATETIME: MetadataType.DATETIME,
    TAG_DATETIME_ORIGINAL: MetadataType.DATETIME,
    TAG_DATETIME_DIGITIZED: MetadataType.DATETIME,
    TAG_MAKE: MetadataType.SMARTPHONE_BRAND,
    TAG_MODEL: MetadataType.SMARTPHONE_MODEL,
    TAG_BODY_SERIAL_NUMBER: MetadataType.DEVICE_SERIAL_NUMBER,
}


@dataclass(frozen=True)
class SensitiveFindings:
    """Detected sensitive categories plus the records that prove each one."""

    types: frozenset[MetadataType]
    evidence: dict[MetadataType, tuple[ExifRecord, ...]]


def _iter_segments(data: bytes):
    """Yield (marker, start, end) for each segment between SOI and SOS.

    Ends by yielding ("scan", start, len) for everything from SOS onward,
    or ("eoi", ...) if EOI arrives without a scan.
    """
    if not data.startswith(SOI):
        raise NotJpeg("missing JPEG start-of-image marker")
    pos = 2
    n = len(data)
    while True:
        if pos + 2 > n:
            raise MalformedExif("marker stream ended without start-of-scan")
        if data[pos] != 0xFF:
            raise MalformedExif(f"expected marker byte at offset {pos}")
        # fill bytes: any number of 0xFF may pad before the marker id
        while pos + 1 < n and data[pos + 1] == 0xFF:
            pos += 1
        marker = data[pos + 1]
        if marker == MARKER_SOS:
            yield ("scan", pos, n)
            return
        if marker == MARKER_EOI:
            yield ("scan", pos, n)
            return
        if 0xD0 <= marker <= 0xD7 or marker == 0x01:
            yield (marker, pos, pos + 2)
            pos += 2
            continue
        if pos + 4 > n:
            raise MalformedExif("segment header truncated")
        length = struct.unpack_from(">H", data, pos + 2)[0]
        end = pos + 2 + length
        if length < 2 or end > n:
            raise MalformedExif(f"segment at {pos} overruns the file")
        yield (marker, pos, end)
        pos = end


def _find_exif_blob(data: bytes) -> bytes | None:
    for marker, start, end in _iter_segments(data):
        if marker == MARKER_APP1 and data[start + 4 : start + 10] == EXIF_HEADER:
            return data[start + 10 : end]
    return None


def parse_exif(image_bytes: bytes) -> list[ExifRecord]:
    """Decode the Exif APP1 segment of a JPEG into directory records.

    Walks the primary IFD plus the Exif and GPS sub-IFDs it points to. The
    two pointer tags are structural and do not appear as records. A JPEG
    without an Exif segment parses to an empty list. Duplicate tags within
    one directory keep their first occurrence.
    """
    blob = _find_exif_blob(image_bytes)
    if blob is None:
        return []
    return _parse_tiff(blob)


def _parse_tiff(blob: bytes) -> list[ExifRecord]:
    if len(blob) < 8:
        raise MalformedExif("TIFF header truncated")
    order = blob[0:2]
    if order == b"II":
        endian = "<"
    elif order == b"MM":
        endian = ">"
    else:
        raise MalformedExif(f"unknown TIFF byte order {order!r}")
    magic, first_ifd = struct.unpack_from(endian + "HI", blob, 2)
    if magic != 42:
        raise MalformedExif(f"TIFF magic is {magic}, expected 42")

    records: list[ExifRecord] = []
    seen: set[tuple[Ifd, int]] = set()
    pointers: dict[Ifd, int] = {}

    def walk(offset: int, ifd: Ifd) -> None:
        if offset + 2 > len(blob):
            raise MalformedExif(f"{ifd.value} IFD offset {offset} outside segment")
        (count,) = struct.unpack_from(endian + "H", blob, offset)
        entries_end = offset + 2 + 12 * count
        if entries_end + 4 > len(blob):
            raise MalformedExif(f"{ifd.value} IFD with {count} entries overruns segment")
        for i in range(count):
            at = offset + 2 + 12 * i
            tag, vtype, vcount = struct.unpack_from(endian + "HHI", blob, at)
            value_field = blob[at + 8 : at + 12]
            if ifd is Ifd.PRIMARY and tag in (TAG_EXIF_IFD_POINTER, TAG_GPS_IFD_POINTER):
                (ptr,) = struct.unpack(endian + "I", value_field)
                pointers[Ifd.EXIF if tag == TAG_EXIF_IFD_POINTER else Ifd.GPS] = ptr
                continue
            value = _decode_value(blob, endian, vtype, vcount, value_field)
            key = (ifd, tag)
            if key in seen:
                continue
            seen.add(key)
            records.append(ExifRecord(ifd=ifd, tag_id=tag, value_type=vtype, value=value))

    walk(first_ifd, Ifd.PRIMARY)
    for sub_ifd in (Ifd.EXIF, Ifd.GPS):
        if sub_ifd in pointers:
            walk(pointers[sub_ifd], sub_ifd)
    return records


def _decode_value(blob: bytes, endian: str, vtype: int, count: int, field: bytes):
    size = _TYPE_SIZES.get(vtype)
    if size is None:
        # exotic type: preserve the raw 4-byte field rather than guessing
        return bytes(field)
    total = size * count
    if total <= 4:
        raw = field[:total]
    else:
        (offset,) = struct.unpack(endian + "I", field)
        if offset + total > len(blob):
            raise MalformedExif(
                f"value of type {vtype} x{count} at offset {offset} overruns segment"
            )
        raw = blob[offset : offset + total]

    if vtype == TYPE_ASCII:
        text = raw.split(b"\x00", 1)[0]
        return text.decode("utf-8", errors="replace")
    if vtype in (TYPE_BYTE, TYPE_UNDEFINED):
        return bytes(raw)
    if vtype == TYPE_SHORT:
        vals = struct.unpack(f"{endian}{count}H", raw)
    elif vtype == TYPE_LONG:
        vals = struct.unpack(f"{endian}{count}I", raw)
    elif vtype == TYPE_SLONG:
        vals = struct.unpack(f"{endian}{count}i", raw)
    elif vtype == TYPE_RATIONAL:
        parts = struct.unpack(f"{endian}{2 * count}I", raw)
        vals = tuple((parts[2 * i], parts[2 * i + 1]) for i in range(count))
    elif vtype == TYPE_SRATIONAL:
        parts = struct.unpack(f"{endian}{2 * count}i", raw)
        vals = tuple((parts[2 * i], parts[2 * i + 1]) for i in range(count))
    else:  # unreachable given the size table
        return bytes(raw)
    return vals[0] if count == 1 else vals


def detect_sensitive_types(records: list[ExifRecord]) -> SensitiveFindings:
    """Map parsed records to the sensitive categories they disclose.

    Named tags match by tag id in any walked IFD; every record living in the
    GPS IFD counts as GPS evidence regardless of tag.
    """
    evidence: dict[MetadataType, list[ExifRecord]] = {}
    for record in records:
        mtype = MetadataType.GPS if record.ifd is Ifd.GPS else _SENSITIVE_TAGS.get(record.tag_id)
        if mtype is not None:
            evidence.setdefault(mtype, []).append(record)
    return SensitiveFindings(
        types=frozenset(evidence),
        evidence={k: tuple(v) for k, v in evidence.items()},
    )


def strip_metadata(image_bytes: bytes) -> bytes:
    """Return the JPEG with every Exif APP1 segment removed.

    All other segments pass through verbatim, and everything from the
    start-of-scan marker to the end of the file is copied untouched, so
    pixel data can never change. Stripping an already-clean image returns
    it byte-for-byte; stripping twice equals stripping once.
    """
    out = bytearray(SOI)
    for marker, start, end in _iter_segments(image_bytes):
        if marker == "scan":
            out += image_bytes[start:end]
            break
        if marker == MARKER_APP1 and image_bytes[start + 4 : start + 10] == EXIF_HEADER:
            continue
        out += image_bytes[start:end]
    return bytes(out)


# ---------------------------------------------------------------------------
# writer


def _encode_value(vtype: int, value) -> tuple[int, bytes]:
    """Encode a python value to (count, raw bytes) little-endian."""
    if vtype == TYPE_ASCII:
        raw = str(value).encode("utf-8") + b"\x00"
        return len(raw), raw
    if vtype in (TYPE_BYTE, TYPE_UNDEFINED):
        raw = bytes(value)
        return len(raw), raw
    items = value if isinstance(value, (list, tuple)) else [value]
    if vtype == TYPE_RATIONAL:
        flat: list[int] = []
        for item in items:
            num, den = item
            flat.extend((num, den))
        return len(items), struct.pack(f"<{len(flat)}I", *flat)
    if vtype == TYPE_SHORT:
        return len(items), struct.pack(f"<{len(items)}H", *items)
    if vtype == TYPE_LONG:
        return len(items), struct.pack(f"<{len(items)}I", *items)
    raise ValueError(f"writer does not encode TIFF type {vtype}")


def build_exif_blob(
    primary: list[tuple[int, int, object]],
    exif: list[tuple[int, int, object]] = (),
    gps: list[tuple[int, int, object]] = (),
) -> bytes:
    """Build a little-endian TIFF blob holding the given (tag, type, value)
    entries per directory. Sub-IFD pointer entries are added automatically
    when the corresponding directory has entries."""

    primary = sorted(primary)
    exif = sorted(exif)
    gps = sorted(gps)

    n0 = len(primary) + (1 if exif else 0) + (1 if gps else 0)
    ifd0_off = 8
    ifd0_size = 2 + 12 * n0 + 4
    exif_off = ifd0_off + ifd0_size if exif else 0
    exif_size = (2 + 12 * len(exif) + 4) if exif else 0
    gps_off = ifd0_off + ifd0_size + exif_size if gps else 0
    gps_size = (2 + 12 * len(gps) + 4) if gps else 0
    heap_off = ifd0_off + ifd0_size + exif_size + gps_size

    heap = bytearray()

    def entry(tag: int, vtype: int, value) -> bytes:
        count, raw = _encode_value(vtype, value)
        if len(raw) <= 4:
            field = raw + b"\x00" * (4 - len(raw))
        else:
            field = struct.pack("<I", heap_off + len(heap))
            heap.extend(raw)
            if len(raw) % 2:
                heap.append(0)  # keep value offsets even
        return struct.pack("<HHI", tag, vtype, count) + field

    def table(entries: list[tuple[int, int, object]], extra: list[bytes]) -> bytes:
        packed = [entry(*e) for e in entries] + extra
        packed.sort(key=lambda raw: struct.unpack("<H", raw[:2])[0])
        return (
            struct.pack("<H", len(packed)) + b"".join(packed) + struct.pack("<I", 0)
        )

    pointer_entries: list[bytes] = []
    if exif:
        pointer_entries.append(
            struct.pack("<HHI", TAG_EXIF_IFD_POINTER, TYPE_LONG, 1)
            + struct.pack("<I", exif_off)
        )
    if gps:
        pointer_entries.append(
            struct.pack("<HHI", TAG_GPS_IFD_POINTER, TYPE_LONG, 1)
            + struct.pack("<I", gps_off)
        )

    out = bytearray(b"II" + struct.pack("<HI", 42, ifd0_off))
    out += table(primary, pointer_entries)
    if exif:
        out += table(exif, [])
    if gps:
        out += table(gps, [])
    out += heap
    return bytes(out)


def _degrees_to_dms(value: float) -> list[tuple[int, int]]:
    frac = Fraction(abs(value)).limit_denominator(10**6)
    degrees = int(frac)
    rem = (frac - degrees) * 60
    minutes = int(rem)
    seconds = (rem - minutes) * 60
    sec_frac = seconds.limit_denominator(10**4)
    return [(degrees, 1), (minutes, 1), (sec_frac.numerator, sec_frac.denominator)]


def build_planted_exif(
    datetime: str | None = None,
    make: str | None = None,
    model: str | None = None,
    serial: str | None = None,
    gps: tuple[float, float] | None = None,
) -> bytes:
    """Build a TIFF blob carrying exactly the requested sensitive values."""
    primary: list[tuple[int, int, object]] = []
    exif: list[tuple[int, int, object]] = []
    gps_entries: list[tuple[int, int, object]] = []
    if datetime is not None:
        primary.append((TAG_DATETIME, TYPE_ASCII, datetime))
    if make is not None:
        primary.append((TAG_MAKE, TYPE_ASCII, make))
    if model is not None:
        primary.append((TAG_MODEL, TYPE_ASCII, model))
    if serial is not None:
        exif.append((TAG_BODY_SERIAL_NUMBER, TYPE_ASCII, serial))
    if gps is not None:
        lat, lon = gps
        gps_entries.append((TAG_GPS_LATITUDE_REF, TYPE_ASCII, "N" if lat >= 0 else "S"))
        gps_entries.append((TAG_GPS_LATITUDE, TYPE_RATIONAL, _degrees_to_dms(lat)))
        gps_entries.append((TAG_GPS_LONGITUDE_REF, TYPE_ASCII, "E" if lon >= 0 else "W"))
        gps_entries.append((TAG_GPS_LONGITUDE, TYPE_RATIONAL, _degrees_to_dms(lon)))
    return build_exif_blob(primary, exif, gps_entries)


def insert_exif_segment(image_bytes: bytes, tiff_blob: bytes) -> bytes:
    """Splice a TIFF blob into a JPEG as the APP1 segment right after SOI.

    Any Exif segment already present is removed first so the planted values
    are the only metadata.
    """
    clean = strip_metadata(image_bytes)
    payload = EXIF_HEADER + tiff_blob
    if len(payload) + 2 > 0xFFFF:
        raise MalformedExif("EXIF payload too large for one APP1 segment")
    segment = bytes([0xFF, MARKER_APP1]) + struct.pack(">H", len(payload) + 2) + payload
    return clean[:2] + segment + clean[2:]
