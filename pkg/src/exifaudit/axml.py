"""Android binary XML manifest parsing and generation.

Android does not ship AndroidManifest.xml as text inside an APK; aapt compiles
it to a chunked binary form. Everything this module reads or writes is built
from one chunk grammar (integers little-endian):

    chunk header:   u16 type, u16 header_size, u32 size (size covers header)

    0x0003  document     header_size 8; child chunks follow back to back
    0x0001  string pool  header: u32 string_count, u32 style_count, u32 flags,
                         u32 strings_start, u32 styles_start; then
                         string_count u32 offsets (relative to strings_start);
                         flag 1<<0 = sorted, flag 1<<8 = strings are UTF-8
    0x0180  resource map u32 attribute-resource ids, index-aligned with the
                         first pool strings
    0x0100  namespace start  header 16 (u32 line, u32 comment); u32 prefix,
                             u32 uri (pool indexes)
    0x0101  namespace end    same body as start
    0x0102  element start    header 16; u32 ns, u32 name, u16 attr_start,
                             u16 attr_size, u16 attr_count, u16 id_index,
                             u16 class_index, u16 style_index; then attr_count
                             attribute records of attr_size (20) bytes each:
                             u32 ns, u32 name, u32 raw_value, u16 typed_size,
                             u8 zero, u8 data_type, u32 data
    0x0103  element end      header 16; u32 ns, u32 name
    0x0104  cdata            skipped

    string encoding, UTF-16 pool: u16 char count (bit 15 set = high word of a
    two-word length), UTF-16LE bytes, u16 terminator.
    string encoding, UTF-8 pool: UTF-16 char count then byte count (each one
    byte, or two with bit 7 set in the first), raw bytes, one 0x00 terminator.

Attribute values we care about are strings: data_type 0x03 means `data` is a
pool index; otherwise the raw_value index is used when present.

The builder exists because tests and the corpus synthesizer need real binary
manifests without an Android toolchain; it emits exactly the subset above,
which is also what production manifests use for the elements the gate reads.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .errors import MalformedAxml, UnsupportedEncoding

CHUNK_DOCUMENT = 0x0003
CHUNK_STRING_POOL = 0x0001
CHUNK_RESOURCE_MAP = 0x0180
CHUNK_NS_START = 0x0100
CHUNK_NS_END = 0x0101
CHUNK_ELEMENT_START = 0x0102
CHUNK_ELEMENT_END = 0x0103
CHUNK_CDATA = 0x0104

FLAG_SORTED = 1 << 0
FLAG_UTF8 = 1 << 8
_KNOWN_POOL_FLAGS = FLAG_SORTED | FLAG_UTF8

TYPE_STRING = 0x03
NO_INDEX = 0xFFFFFFFF

ANDROID_NS_URI = "http://schemas.android.com/apk/res/android"

# Attribute-name fallback for pools that blank out names covered by the
# resource map; these two are the only ids the gate needs.
_RESOURCE_ID_NAMES = {
    0x01010003: "name",
    0x01010026: "mimeType",
}


@dataclass(frozen=True)
class ManifestInfo:
    """What the gate needs from a manifest: identity, permissions, the mime
    types its intent filters accept, and how many activities it declares."""

    package_name: str
    requested_permissions: frozenset[str]
    intent_mime_types: frozenset[str]
    activity_count: int


def _valid_permission(value: str) -> bool:
    return bool(value) and not any(ch.isspace() for ch in value)


def _valid_mime(value: str) -> bool:
    if not value or any(ch.isspace() for ch in value):
        return False
    head, sep, tail = value.partition("/")
    return bool(sep) and bool(head) and bool(tail) and "/" not in tail


class _StringPool:
    def __init__(self, strings: list[str]):
        self.strings = strings

    def get(self, index: int) -> str:
        if index == NO_INDEX:
            return ""
        if index < 0 or index >= len(self.strings):
            raise MalformedAxml(f"string index {index} outside pool of {len(self.strings)}")
        return self.strings[index]


def _parse_string_pool(data: bytes, start: int, header_size: int, size: int) -> _StringPool:
    if header_size < 28 or size < header_size:
        raise MalformedAxml("string pool header too small")
    count, style_count, flags, strings_start, _styles_start = struct.unpack_from(
        "<IIIII", data, start + 8
    )
    if flags & ~_KNOWN_POOL_FLAGS:
        raise UnsupportedEncoding(
            f"string pool flags {flags:#010x} include bits outside sorted/utf8; "
            "cannot trust the declared encoding"
        )
    utf8 = bool(flags & FLAG_UTF8)
    offsets_at = start + header_size
    if offsets_at + 4 * count > start + size:
        raise MalformedAxml("string pool offset array overruns its chunk")
    offsets = struct.unpack_from(f"<{count}I", data, offsets_at) if count else ()
    data_start = start + strings_start
    data_end = start + size
    if strings_start < header_size or data_start > data_end:
        raise MalformedAxml("string data start outside string pool chunk")
    del style_count  # styles carry display spans; the manifest never needs them

    strings: list[str] = []
    for off in offsets:
        pos = data_start + off
        if pos < data_start or pos >= data_end:
            raise MalformedAxml(f"string offset {off} outside pool data region")
        if utf8:
            strings.append(_read_utf8_string(data, pos, data_end))
        else:
            strings.append(_read_utf16_string(data, pos, data_end))
    return _StringPool(strings)


def _read_length8(data: bytes, pos: int, end: int) -> tuple[int, int]:
    if pos >= end:
        raise MalformedAxml("truncated UTF-8 string length")
    first = data[pos]
    if first & 0x80:
        if pos + 1 >= end:
            raise MalformedAxml("truncated two-byte UTF-8 string length")
        return ((first & 0x7F) << 8) | data[pos + 1], pos + 2
    return first, pos + 1


def _read_utf8_string(data: bytes, pos: int, end: int) -> str:
    _chars, pos = _read_length8(data, pos, end)  # UTF-16 length, unused here
    nbytes, pos = _read_length8(data, pos, end)
    if pos + nbytes > end:
        raise MalformedAxml("UTF-8 string data overruns pool")
    try:
        return data[pos : pos + nbytes].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedAxml(f"string pool bytes not valid UTF-8: {exc}") from exc


def _read_utf16_string(data: bytes, pos: int, end: int) -> str:
    if pos + 2 > end:
        raise MalformedAxml("truncated UTF-16 string length")
    chars = struct.unpack_from("<H", data, pos)[0]
    pos += 2
    if chars & 0x8000:
        if pos + 2 > end:
            raise MalformedAxml("truncated four-byte UTF-16 string length")
        low = struct.unpack_from("<H", data, pos)[0]
        chars = ((chars & 0x7FFF) << 16) | low
        pos += 2
    nbytes = chars * 2
    if pos + nbytes > end:
        raise MalformedAxml("UTF-16 string data overruns pool")
    return data[pos : pos + nbytes].decode("utf-16-le")


def parse_binary_manifest(data: bytes) -> ManifestInfo:
    """Extract gate-relevant facts from binary AndroidManifest.xml bytes.

    Raises MalformedAxml when the chunk structure contradicts its declared
    sizes and UnsupportedEncoding when the string pool claims an encoding
    this parser cannot interpret. Permission and mime values that violate
    their own grammar (whitespace, missing subtype) are dropped rather than
    poisoning the gate sets.
    """
    if len(data) < 8:
        raise MalformedAxml("input shorter than one chunk header")
    doc_type, doc_header, doc_size = struct.unpack_from("<HHI", data, 0)
    if doc_type != CHUNK_DOCUMENT:
        raise MalformedAxml(f"first chunk type {doc_type:#06x} is not a binary XML document")
    if doc_header < 8 or doc_size < doc_header or doc_size > len(data):
        raise MalformedAxml("document chunk sizes inconsistent with input length")

    pool: _StringPool | None = None
    resource_map: tuple[int, ...] = ()
    package_name = ""
    permissions: set[str] = set()
    mime_types: set[str] = set()
    activity_count = 0

    pos = doc_header
    while pos < doc_size:
        if pos + 8 > doc_size:
            raise MalformedAxml("trailing bytes too short for a chunk header")
        ctype, cheader, csize = struct.unpack_from("<HHI", data, pos)
        if cheader < 8 or csize < cheader or pos + csize > doc_size:
            raise MalformedAxml(
                f"chunk {ctype:#06x} at {pos} declares sizes outside the document"
            )
        if ctype == CHUNK_STRING_POOL:
            pool = _parse_string_pool(data, pos, cheader, csize)
        elif ctype == CHUNK_RESOURCE_MAP:
            count = (csize - cheader) // 4
            resource_map = struct.unpack_from(f"<{count}I", data, pos + cheader)
        elif ctype == CHUNK_ELEMENT_START:
            if pool is None:
                raise MalformedAxml("element chunk before any string pool")
            name, attrs = _parse_element(data, pos, cheader, csize, pool, resource_map)
            if name == "manifest":
                package_name = attrs.get(("", "package"), package_name)
            elif name == "uses-permission":
                value = _android_attr(attrs, "name")
                if _valid_permission(value):
                    permissions.add(value)
            elif name == "activity":
                activity_count += 1
            elif name == "data":
                value = _android_attr(attrs, "mimeType")
                if _valid_mime(value):
                    mime_types.add(value)
        elif ctype in (CHUNK_ELEMENT_END, CHUNK_NS_START, CHUNK_NS_END, CHUNK_CDATA):
            pass
        # unknown chunk types are skipped by their declared size
        pos += csize

    if pool is None:
        raise MalformedAxml("document contains no string pool")
    return ManifestInfo(
        package_name=package_name,
        requested_permissions=frozenset(permissions),
        intent_mime_types=frozenset(mime_types),
        activity_count=activity_count,
    )


def _android_attr(attrs: dict[tuple[str, str], str], name: str) -> str:
    value = attrs.get((ANDROID_NS_URI, name))
    if value is None:
        value = attrs.get(("", name), "")
    return value


def _parse_element(
    data: bytes,
    pos: int,
    header_size: int,
    size: int,
    pool: _StringPool,
    resource_map: tuple[int, ...],
) -> tuple[str, dict[tuple[str, str], str]]:
    body = pos + header_size
    if body + 20 > pos + size:
        raise MalformedAxml("element chunk too small for its fixed fields")
    _ns, name_idx, attr_start, attr_size, attr_count, _id_i, _cls_i, _sty_i = (
        struct.unpack_from("<IIHHHHHH", data, body)
    )
    name = pool.get(name_idx)
    attrs: dict[tuple[str, str], str] = {}
    attr_pos = body + attr_start
    if attr_size < 20 or attr_pos + attr_size * attr_count > pos + size:
        raise MalformedAxml(f"element <{name}> attributes overrun their chunk")
    for i in range(attr_count):
        at = attr_pos + i * attr_size
        a_ns, a_name, a_raw, _tsize, _zero, a_type, a_data = struct.unpack_from(
            "<IIIHBBI", data, at
        )
        attr_name = pool.get(a_name)
        if not attr_name and a_name < len(resource_map):
            attr_name = _RESOURCE_ID_NAMES.get(resource_map[a_name], "")
        if not attr_name:
            continue
        if a_type == TYPE_STRING:
            value = pool.get(a_data)
        elif a_raw != NO_INDEX:
            value = pool.get(a_raw)
        else:
            value = str(a_data)
        attrs[(pool.get(a_ns) if a_ns != NO_INDEX else "", attr_name)] = value
    return name, attrs


# ---------------------------------------------------------------------------
# builder


class _PoolBuilder:
    """Accumulates unique strings; emit() packs them in either encoding."""

    def __init__(self, utf8: bool):
        self.utf8 = utf8
        self._index: dict[str, int] = {}
        self._strings: list[str] = []

    def add(self, value: str) -> int:
        if value not in self._index:
            self._index[value] = len(self._strings)
            self._strings.append(value)
        return self._index[value]

    def emit(self) -> bytes:
        blob = bytearray()
        offsets: list[int] = []
        for s in self._strings:
            offsets.append(len(blob))
            if self.utf8:
                raw = s.encode("utf-8")
                blob += _pack_length8(len(s)) + _pack_length8(len(raw)) + raw + b"\x00"
            else:
                raw = s.encode("utf-16-le")
                blob += _pack_length16(len(s)) + raw + b"\x00\x00"
        while len(blob) % 4:
            blob += b"\x00"
        count = len(self._strings)
        header_size = 28
        strings_start = header_size + 4 * count
        total = strings_start + len(blob)
        flags = FLAG_UTF8 if self.utf8 else 0
        out = bytearray(struct.pack("<HHI", CHUNK_STRING_POOL, header_size, total))
        out += struct.pack("<IIIII", count, 0, flags, strings_start, 0)
        out += struct.pack(f"<{count}I", *offsets) if count else b""
        out += blob
        return bytes(out)


def _pack_length8(n: int) -> bytes:
    if n < 0x80:
        return bytes([n])
    if n >= 0x8000:
        raise ValueError("string too long for builder")
    return bytes([0x80 | (n >> 8), n & 0xFF])


def _pack_length16(n: int) -> bytes:
    if n >= 0x8000:
        raise ValueError("string too long for builder")
    return struct.pack("<H", n)


def _chunk(ctype: int, header_extra: bytes, body: bytes) -> bytes:
    header = struct.pack("<HHI", ctype, 8 + len(header_extra), 8 + len(header_extra) + len(body))
    return header + header_extra + body


_NODE_EXTRA = struct.pack("<II", 0, NO_INDEX)  # line number, comment


def _element_start(
    pool: _PoolBuilder,
    name: str,
    attrs: list[tuple[str, str, str]],
) -> bytes:
    """attrs: (namespace uri or "", attribute name, string value)."""
    name_idx = pool.add(name)
    records = bytearray()
    for ns_uri, attr_name, value in attrs:
        ns_idx = pool.add(ns_uri) if ns_uri else NO_INDEX
        value_idx = pool.add(value)
        records += struct.pack(
            "<IIIHBBI",
            ns_idx,
            pool.add(attr_name),
            value_idx,
            8,
            0,
            TYPE_STRING,
            value_idx,
        )
    body = struct.pack(
        "<IIHHHHHH", NO_INDEX, name_idx, 20, 20, len(attrs), 0, 0, 0
    ) + bytes(records)
    return _chunk(CHUNK_ELEMENT_START, _NODE_EXTRA, body)


def _element_end(pool: _PoolBuilder, name: str) -> bytes:
    return _chunk(
        CHUNK_ELEMENT_END, _NODE_EXTRA, struct.pack("<II", NO_INDEX, pool.add(name))
    )


def build_manifest(
    package_name: str,
    permissions=(),
    mime_types=(),
    activity_count: int = 1,
    utf8: bool = False,
) -> bytes:
    """Build binary AndroidManifest.xml bytes declaring the given facts.

    The layout is the documented chunk grammar at the top of this module:
    a document chunk holding string pool, resource map, one android namespace,
    and manifest / uses-permission / application / activity / intent-filter /
    data elements. Intent filters (with an android.intent.action.SEND action
    and one data element per mime type) hang off the first activity. Output is
    deterministic for equal arguments: permission and mime sets are emitted
    sorted and the string pool is insertion-ordered.
    """
    if activity_count < 0:
        raise ValueError("activity_count must be >= 0")
    perms = sorted(set(permissions))
    mimes = sorted(set(mime_types))
    pool = _PoolBuilder(utf8=utf8)

    # Resource-map alignment: the mapped attribute names must occupy the
    # first pool slots, in map order.
    pool.add("name")
    pool.add("mimeType")
    resource_map = _chunk(
        CHUNK_RESOURCE_MAP, b"", struct.pack("<II", 0x01010003, 0x01010026)
    )

    chunks: list[bytes] = []
    ns_body = struct.pack("<II", pool.add("android"), pool.add(ANDROID_NS_URI))
    chunks.append(_chunk(CHUNK_NS_START, _NODE_EXTRA, ns_body))
    chunks.append(
        _element_start(pool, "manifest", [("", "package", package_name)])
    )
    for perm in perms:
        chunks.append(
            _element_start(pool, "uses-permission", [(ANDROID_NS_URI, "name", perm)])
        )
        chunks.append(_element_end(pool, "uses-permission"))
    chunks.append(_element_start(pool, "application", []))
    for i in range(activity_count):
        chunks.append(
            _element_start(pool, "activity", [(ANDROID_NS_URI, "name", f".Share{i}")])
        )
        if i == 0 and mimes:
            chunks.append(_element_start(pool, "intent-filter", []))
            chunks.append(
                _element_start(
                    pool, "action", [(ANDROID_NS_URI, "name", "android.intent.action.SEND")]
                )
            )
            chunks.append(_element_end(pool, "action"))
            for mime in mimes:
                chunks.append(
                    _element_start(pool, "data", [(ANDROID_NS_URI, "mimeType", mime)])
                )
                chunks.append(_element_end(pool, "data"))
            chunks.append(_element_end(pool, "intent-filter"))
        chunks.append(_element_end(pool, "activity"))
    chunks.append(_element_end(pool, "application"))
    chunks.append(_element_end(pool, "manifest"))
    chunks.append(_chunk(CHUNK_NS_END, _NODE_EXTRA, ns_body))

    body = pool.emit() + resource_map + b"".join(chunks)
    return struct.pack("<HHI", CHUNK_DOCUMENT, 8, 8 + len(body)) + body
