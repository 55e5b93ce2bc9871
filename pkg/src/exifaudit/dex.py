"""DEX bytecode container scanning for metadata-related references.

When no decompiled source tree is available, the audit falls back to the
app's classes*.dex entries. We do not decompile; we read the reference
tables (strings, types, fields, methods), walk each defined method's
instruction stream, and collect what it references: invoked method names,
accessed field names, and string literals. A method that references a
catalog keyword becomes one code block whose text lists those symbols.

DEX layout facts used here (all integers little-endian):

    header (0x70 bytes): magic "dex\\n0NN\\0", adler32 checksum, sha-1
    signature, file size, header size, endian tag 0x12345678, then
    (size, offset) pairs for the string/type/proto/field/method/class-def
    tables and the data region.

    string_id:  u32 offset -> uleb128 UTF-16 length, MUTF-8 bytes, 0x00
    type_id:    u32 descriptor string index
    proto_id:   u32 shorty, u32 return type, u32 parameters offset
    field_id:   u16 class, u16 type, u32 name
    method_id:  u16 class, u16 proto, u32 name
    class_def:  8 u32: class, access, superclass, interfaces, source file,
                annotations, class_data offset, static values
    class_data: uleb128 counts for static/instance fields and direct/virtual
                methods, then per method (index diff, access, code offset)
    code item:  u16 registers/ins/outs/tries, u32 debug info, u32 insn count
                in 16-bit units, then the instruction stream

The instruction walk needs only each opcode's width plus the three payload
pseudo-instruction sizes; operand indexes for const-string, field access,
and invoke opcodes all sit in the second 16-bit unit (const-string/jumbo
uses units 2-3). An opcode outside the published table stops the walk for
that method rather than guessing at alignment.
"""

from __future__ import annotations

import hashlib
import struct
import zlib
from dataclasses import dataclass, field

from .apk import ApkPackage
from .errors import MalformedDex, NoDexEntries
from .extract import KIND_METHOD, CodeBlock, KeywordCatalog

DEX_MAGIC_PREFIX = b"dex\n"
HEADER_SIZE = 0x70
ENDIAN_TAG = 0x12345678
NO_INDEX = 0xFFFFFFFF


def _build_width_table() -> list[int]:
    w = [0] * 256

    def fill(ops, width):
        for op in ops:
            w[op] = width

    fill([0x00, 0x01, 0x04, 0x07], 1)
    fill([0x02, 0x05, 0x08], 2)
    fill([0x03, 0x06, 0x09], 3)
    fill(range(0x0A, 0x12), 1)        # move-result*, return*
    fill([0x12], 1)
    fill([0x13, 0x15, 0x16, 0x19], 2)
    fill([0x14, 0x17], 3)
    fill([0x18], 5)
    fill([0x1A], 2)                   # const-string
    fill([0x1B], 3)                   # const-string/jumbo
    fill([0x1C, 0x1F, 0x20, 0x22, 0x23], 2)
    fill([0x1D, 0x1E, 0x21, 0x27, 0x28], 1)
    fill([0x24, 0x25, 0x26, 0x2A, 0x2B, 0x2C], 3)
    fill([0x29], 2)
    fill(range(0x2D, 0x3E), 2)        # cmp, if-test, if-testz
    fill(range(0x44, 0x52), 2)        # aget/aput
    fill(range(0x52, 0x60), 2)        # iget/iput
    fill(range(0x60, 0x6E), 2)        # sget/sput
    fill(range(0x6E, 0x73), 3)        # invoke-kind
    fill(range(0x74, 0x79), 3)        # invoke-kind/range
    fill(range(0x7B, 0x90), 1)        # unop
    fill(range(0x90, 0xB0), 2)        # binop
    fill(range(0xB0, 0xD0), 1)        # binop/2addr
    fill(range(0xD0, 0xE3), 2)        # binop/lit16, binop/lit8
    return w


_WIDTHS = _build_width_table()

_OP_CONST_STRING = 0x1A
_OP_CONST_STRING_JUMBO = 0x1B
_FIELD_OPS = range(0x52, 0x6E)
_INVOKE_OPS = (*range(0x6E, 0x73), *range(0x74, 0x79))


def _read_uleb128(data: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(data):
            raise MalformedDex("uleb128 runs off the end of the file")
        byte = data[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7
        if shift > 35:
            raise MalformedDex("uleb128 longer than five bytes")


def _encode_mutf8(text: str) -> tuple[int, bytes]:
    """Encode as modified UTF-8: per UTF-16 code unit, NUL as C0 80.

    Returns (utf16 length, bytes) since the string item stores the former.
    """
    units: list[int] = []
    for ch in text:
        cp = ord(ch)
        if cp >= 0x10000:
            cp -= 0x10000
            units.append(0xD800 + (cp >> 10))
            units.append(0xDC00 + (cp & 0x3FF))
        else:
            units.append(cp)
    out = bytearray()
    for u in units:
        if u == 0:
            out += b"\xc0\x80"
        elif u < 0x80:
            out.append(u)
        elif u < 0x800:
            out.append(0xC0 | (u >> 6))
            out.append(0x80 | (u & 0x3F))
        else:
            out.append(0xE0 | (u >> 12))
            out.append(0x80 | ((u >> 6) & 0x3F))
            out.append(0x80 | (u & 0x3F))
    return len(units), bytes(out)


def _decode_mutf8(raw: bytes) -> str:
    units: list[int] = []
    i = 0
    n = len(raw)
    while i < n:
        b = raw[i]
        if b & 0x80 == 0:
            units.append(b)
            i += 1
        elif b & 0xE0 == 0xC0:
            if i + 1 >= n:
                raise MalformedDex("truncated MUTF-8 sequence")
            units.append(((b & 0x1F) << 6) | (raw[i + 1] & 0x3F))
            i += 2
        elif b & 0xF0 == 0xE0:
            if i + 2 >= n:
                raise MalformedDex("truncated MUTF-8 sequence")
            units.append(((b & 0x0F) << 12) | ((raw[i + 1] & 0x3F) << 6) | (raw[i + 2] & 0x3F))
            i += 3
        else:
            raise MalformedDex(f"invalid MUTF-8 lead byte {b:#04x}")
    out: list[str] = []
    j = 0
    while j < len(units):
        u = units[j]
        if 0xD800 <= u <= 0xDBFF and j + 1 < len(units) and 0xDC00 <= units[j + 1] <= 0xDFFF:
            out.append(chr(0x10000 + ((u - 0xD800) << 10) + (units[j + 1] - 0xDC00)))
            j += 2
        else:
            out.append(chr(u))
            j += 1
    return "".join(out)


@dataclass
class _DexFile:
    strings: list[str]
    type_descriptors: list[str]
    fields: list[tuple[str, str]]      # (class descriptor, field name)
    methods: list[tuple[str, str]]     # (class descriptor, method name)
    class_defs: list[tuple[str, int]]  # (class descriptor, class_data offset)
    data: bytes = field(repr=False)


def parse_dex(data: bytes) -> _DexFile:
    """Parse the reference tables of one DEX file."""
    if len(data) < HEADER_SIZE:
        raise MalformedDex(f"file of {len(data)} bytes cannot hold a DEX header")
    if data[:4] != DEX_MAGIC_PREFIX or data[7] != 0:
        raise MalformedDex(f"bad DEX magic {data[:8]!r}")
    version = data[4:7]
    if not version.isdigit():
        raise MalformedDex(f"bad DEX version bytes {version!r}")
    (file_size, header_size, endian) = struct.unpack_from("<III", data, 0x20)
    if header_size < HEADER_SIZE:
        raise MalformedDex(f"header size {header_size:#x} below the fixed layout")
    if endian != ENDIAN_TAG:
        raise MalformedDex(f"endian tag {endian:#010x}; only little-endian DEX is readable")
    if file_size != len(data):
        raise MalformedDex(f"header says {file_size} bytes, file has {len(data)}")

    def table(off_at: int) -> tuple[int, int]:
        size, off = struct.unpack_from("<II", data, off_at)
        return size, off

    str_count, str_off = table(0x38)
    type_count, type_off = table(0x40)
    proto_count, proto_off = table(0x48)
    field_count, field_off = table(0x50)
    method_count, method_off = table(0x58)
    class_count, class_off = table(0x60)

    def bounds(name: str, off: int, need: int) -> None:
        if off + need > len(data):
            raise MalformedDex(f"{name} table at {off:#x} overruns the file")

    bounds("string_ids", str_off, 4 * str_count)
    bounds("type_ids", type_off, 4 * type_count)
    bounds("proto_ids", proto_off, 12 * proto_count)
    bounds("field_ids", field_off, 8 * field_count)
    bounds("method_ids", method_off, 8 * method_count)
    bounds("class_defs", class_off, 32 * class_count)

    strings: list[str] = []
    for i in range(str_count):
        (off,) = struct.unpack_from("<I", data, str_off + 4 * i)
        if off >= len(data):
            raise MalformedDex(f"string {i} data offset {off:#x} outside file")
        _utf16_len, pos = _read_uleb128(data, off)
        end = data.find(b"\x00", pos)
        if end == -1:
            raise MalformedDex(f"string {i} is not null-terminated")
        strings.append(_decode_mutf8(data[pos:end]))

    def read_string(idx: int, what: str) -> str:
        if idx >= len(strings):
            raise MalformedDex(f"{what} references string {idx} of {len(strings)}")
        return strings[idx]

    type_descriptors = []
    for i in range(type_count):
        (desc_idx,) = struct.unpack_from("<I", data, type_off + 4 * i)
        type_descriptors.append(read_string(desc_idx, f"type {i}"))

    def read_type(idx: int, what: str) -> str:
        if idx >= len(type_descriptors):
            raise MalformedDex(f"{what} references type {idx} of {len(type_descriptors)}")
        return type_descriptors[idx]

    fields = []
    for i in range(field_count):
        class_idx, _type_idx, name_idx = struct.unpack_from("<HHI", data, field_off + 8 * i)
        fields.append((read_type(class_idx, f"field {i}"), read_string(name_idx, f"field {i}")))

    methods = []
    for i in range(method_count):
        class_idx, _proto_idx, name_idx = struct.unpack_from("<HHI", data, method_off + 8 * i)
        methods.append((read_type(class_idx, f"method {i}"), read_string(name_idx, f"method {i}")))

    class_defs = []
    for i in range(class_count):
        class_idx, _access, _sup, _ifaces, _src, _ann, class_data_off, _sv = struct.unpack_from(
            "<8I", data, class_off + 32 * i
        )
        class_defs.append((read_type(class_idx, f"class_def {i}"), class_data_off))

    return _DexFile(
        strings=strings,
        type_descriptors=type_descriptors,
        fields=fields,
        methods=methods,
        class_defs=class_defs,
        data=data,
    )


@dataclass(frozen=True)
class MethodReferences:
    """Symbols one defined method's instruction stream references."""

    class_descriptor: str
    method_name: str
    method_index: int
    invoked: tuple[tuple[str, str], ...]
    fields_accessed: tuple[tuple[str, str], ...]
    string_literals: tuple[str, ...]


def iter_method_references(dex: _DexFile):
    """Yield MethodReferences for every method with a code item."""
    data = dex.data
    for class_desc, class_data_off in dex.class_defs:
        if class_data_off == 0:
            continue
        pos = class_data_off
        static_fields, pos = _read_uleb128(data, pos)
        instance_fields, pos = _read_uleb128(data, pos)
        direct_methods, pos = _read_uleb128(data, pos)
        virtual_methods, pos = _read_uleb128(data, pos)
        for _ in range(static_fields + instance_fields):
            _idx, pos = _read_uleb128(data, pos)
            _access, pos = _read_uleb128(data, pos)
        # direct and virtual method lists each restart the index-diff chain
        for count in (direct_methods, virtual_methods):
            method_idx = 0
            for i in range(count):
                diff, pos = _read_uleb128(data, pos)
                _access, pos = _read_uleb128(data, pos)
                code_off, pos = _read_uleb128(data, pos)
                method_idx = diff if i == 0 else method_idx + diff
                if code_off == 0:
                    continue
                if method_idx >= len(dex.methods):
                    raise MalformedDex(
                        f"class data references method {method_idx} of {len(dex.methods)}"
                    )
                name = dex.methods[method_idx][1]
                yield _scan_code_item(dex, class_desc, name, method_idx, code_off)


def _scan_code_item(
    dex: _DexFile, class_desc: str, method_name: str, method_idx: int, code_off: int
) -> MethodReferences:
    data = dex.data
    if code_off + 16 > len(data):
        raise MalformedDex(f"code item at {code_off:#x} overruns the file")
    insns_size = struct.unpack_from("<I", data, code_off + 12)[0]
    insns_off = code_off + 16
    if insns_off + 2 * insns_size > len(data):
        raise MalformedDex(f"instruction stream at {insns_off:#x} overruns the file")

    invoked: list[tuple[str, str]] = []
    fields_accessed: list[tuple[str, str]] = []
    literals: list[str] = []

    unit = 0
    while unit < insns_size:
        at = insns_off + 2 * unit
        op = data[at]
        high = data[at + 1]
        if op == 0x00 and high != 0:
            # switch/array payload pseudo-instructions
            if high == 0x01:
                size = struct.unpack_from("<H", data, at + 2)[0]
                width = size * 2 + 4
            elif high == 0x02:
                size = struct.unpack_from("<H", data, at + 2)[0]
                width = size * 4 + 2
            elif high == 0x03:
                elem = struct.unpack_from("<H", data, at + 2)[0]
                size = struct.unpack_from("<I", data, at + 4)[0]
                width = (size * elem + 1) // 2 + 4
            else:
                break
            unit += width
            continue
        width = _WIDTHS[op]
        if width == 0:
            break  # unknown opcode: stop attributing rather than misalign
        if op == _OP_CONST_STRING:
            idx = struct.unpack_from("<H", data, at + 2)[0]
            if idx < len(dex.strings):
                literals.append(dex.strings[idx])
        elif op == _OP_CONST_STRING_JUMBO:
            (idx,) = struct.unpack_from("<I", data, at + 2)
            if idx < len(dex.strings):
                literals.append(dex.strings[idx])
        elif op in _FIELD_OPS:
            idx = struct.unpack_from("<H", data, at + 2)[0]
            if idx < len(dex.fields):
                fields_accessed.append(dex.fields[idx])
        elif op in _INVOKE_OPS:
            idx = struct.unpack_from("<H", data, at + 2)[0]
            if idx < len(dex.methods):
                invoked.append(dex.methods[idx])
        unit += width

    return MethodReferences(
        class_descriptor=class_desc,
        method_name=method_name,
        method_index=method_idx,
        invoked=tuple(invoked),
        fields_accessed=tuple(fields_accessed),
        string_literals=tuple(literals),
    )


def _match_symbols(refs: MethodReferences, catalog: KeywordCatalog):
    symbols: list[str] = [name for _cls, name in refs.invoked]
    symbols += [name for _cls, name in refs.fields_accessed]
    symbols += list(refs.string_literals)
    matched = []
    for entry in catalog:
        if entry.kind == KIND_METHOD:
            needle = entry.keyword.lower()
            hit = any(needle in sym.lower() for sym in symbols)
        else:
            hit = any(entry.keyword in sym for sym in symbols)
        if hit:
            matched.append(entry)
    return matched


def _render_block_text(refs: MethodReferences) -> str:
    lines = [f"class {refs.class_descriptor}", f"method {refs.method_name}", "references:"]
    for cls, name in refs.invoked:
        lines.append(f"  invoke {cls}->{name}")
    for cls, name in refs.fields_accessed:
        lines.append(f"  field {cls}->{name}")
    for lit in refs.string_literals:
        lines.append(f'  string "{lit}"')
    return "\n".join(lines)


def scan_dex_bytes(entry_name: str, data: bytes, catalog: KeywordCatalog) -> list[CodeBlock]:
    """Scan one DEX file's methods for catalog references."""
    dex = parse_dex(data)
    blocks: list[CodeBlock] = []
    for refs in iter_method_references(dex):
        matched = _match_symbols(refs, catalog)
        if not matched:
            continue
        blocks.append(
            CodeBlock(
                source_id=f"{entry_name}:{refs.class_descriptor}->{refs.method_name}",
                span=(refs.method_index, refs.method_index + 1),
                text=_render_block_text(refs),
                matched_keywords=frozenset(e.keyword for e in matched),
                implicated_types=frozenset().union(*(e.types for e in matched)),
                truncated=False,
            )
        )
    return blocks


def scan_dex_references(package: ApkPackage, catalog: KeywordCatalog) -> list[CodeBlock]:
    """Scan every classes*.dex entry of an APK for catalog references.

    Raises NoDexEntries when the package ships no bytecode at all. Blocks
    come back sorted by (source_id, span start) like source-mode extraction.
    """
    entries = sorted(
        name
        for name in package.entries
        if name.startswith("classes") and name.endswith(".dex") and "/" not in name
    )
    if not entries:
        raise NoDexEntries(f"{package.path} contains no classes*.dex entry")
    blocks: list[CodeBlock] = []
    for name in entries:
        blocks.extend(scan_dex_bytes(name, package.read_entry(name), catalog))
    blocks.sort(key=lambda b: (b.source_id, b.span[0]))
    return blocks


# ---------------------------------------------------------------------------
# builder


@dataclass(frozen=True)
class DexMethodSpec:
    """A method to define: what it invokes, reads, and loads as literals."""

    name: str
    invokes: tuple[tuple[str, str], ...] = ()
    field_reads: tuple[tuple[str, str], ...] = ()
    const_strings: tuple[str, ...] = ()


@dataclass(frozen=True)
class DexClassSpec:
    descriptor: str
    methods: tuple[DexMethodSpec, ...]


def build_dex(classes: list[DexClassSpec]) -> bytes:
    """Assemble a minimal valid DEX defining the given classes.

    Every defined method is emitted as a static void method whose body is
    const-string / sget-object / invoke-static instructions for its declared
    references, then return-void. Checksum and signature are computed the
    way the format requires so other tooling accepts the file.
    """
    strings: dict[str, int] = {}

    def intern(s: str) -> int:
        if s not in strings:
            strings[s] = 0  # index assigned after sorting
        return 0

    intern("V")
    object_desc = "Ljava/lang/Object;"
    string_desc = "Ljava/lang/String;"
    intern(object_desc)
    intern(string_desc)
    for cls in classes:
        intern(cls.descriptor)
        for m in cls.methods:
            intern(m.name)
            for target_cls, target_name in m.invokes:
                intern(target_cls)
                intern(target_name)
            for target_cls, field_name in m.field_reads:
                intern(target_cls)
                intern(field_name)
            for lit in m.const_strings:
                intern(lit)

    ordered_strings = sorted(strings)
    string_index = {s: i for i, s in enumerate(ordered_strings)}

    type_descs = sorted(
        {s for s in ordered_strings if s.startswith("L") and s.endswith(";")}
        | {"V"}
    , key=lambda s: string_index[s])
    type_index = {d: i for i, d in enumerate(type_descs)}

    # single proto: ()V with shorty "V"
    protos = [(string_index["V"], type_index["V"], 0)]

    field_ids: dict[tuple[str, str], int] = {}
    for cls in classes:
        for m in cls.methods:
            for target_cls, field_name in m.field_reads:
                field_ids.setdefault((target_cls, field_name), 0)
    ordered_fields = sorted(field_ids, key=lambda cf: (type_index[cf[0]], string_index[cf[1]]))
    for i, key in enumerate(ordered_fields):
        field_ids[key] = i

    method_ids: dict[tuple[str, str], int] = {}
    for cls in classes:
        for m in cls.methods:
            method_ids.setdefault((cls.descriptor, m.name), 0)
            for target in m.invokes:
                method_ids.setdefault(target, 0)
    ordered_methods = sorted(method_ids, key=lambda cn: (type_index[cn[0]], string_index[cn[1]]))
    for i, key in enumerate(ordered_methods):
        method_ids[key] = i

    def uleb(n: int) -> bytes:
        out = bytearray()
        while True:
            b = n & 0x7F
            n >>= 7
            if n:
                out.append(b | 0x80)
            else:
                out.append(b)
                return bytes(out)

    # --- layout ---
    off = HEADER_SIZE
    string_ids_off = off
    off += 4 * len(ordered_strings)
    type_ids_off = off
    off += 4 * len(type_descs)
    proto_ids_off = off
    off += 12 * len(protos)
    field_ids_off = off
    off += 8 * len(ordered_fields)
    method_ids_off = off
    off += 8 * len(ordered_methods)
    class_defs_off = off
    off += 32 * len(classes)
    data_off = off

    # data section: string data, then aligned code items, then class_data.
    # Absolute offsets are known because data_off is fixed before encoding.
    data = bytearray()
    string_offsets: list[int] = []
    for s in ordered_strings:
        string_offsets.append(data_off + len(data))
        utf16_len, encoded = _encode_mutf8(s)
        data += uleb(utf16_len) + encoded + b"\x00"
    code_offsets: dict[tuple[str, str], int] = {}
    for cls in classes:
        for m in cls.methods:
            while (data_off + len(data)) % 4:
                data += b"\x00"
            code_offsets[(cls.descriptor, m.name)] = data_off + len(data)
            insns = bytearray()
            for lit in m.const_strings:
                idx = string_index[lit]
                if idx > 0xFFFF:
                    raise ValueError("string table too large for const-string")
                insns += struct.pack("<HH", 0x1A, idx)
            for target in m.field_reads:
                insns += struct.pack("<HH", 0x62, field_ids[target])  # sget-object
            for target in m.invokes:
                insns += struct.pack("<HHH", 0x71, method_ids[target], 0)  # invoke-static
            insns += struct.pack("<H", 0x000E)  # return-void
            data += struct.pack("<HHHHII", 1, 0, 0, 0, 0, len(insns) // 2) + insns
    class_data_offsets: dict[str, int] = {}
    for cls in classes:
        class_data_offsets[cls.descriptor] = data_off + len(data)
        data += uleb(0) + uleb(0) + uleb(len(cls.methods)) + uleb(0)
        # class_data methods must come in ascending method-id order (the
        # index-diff encoding cannot express a decrease)
        ordered = sorted(cls.methods, key=lambda m: method_ids[(cls.descriptor, m.name)])
        prev_idx = 0
        for i, m in enumerate(ordered):
            idx = method_ids[(cls.descriptor, m.name)]
            diff = idx if i == 0 else idx - prev_idx
            prev_idx = idx
            data += uleb(diff) + uleb(0x0009)  # public static
            data += uleb(code_offsets[(cls.descriptor, m.name)])

    total_size = data_off + len(data)

    out = bytearray(total_size)
    out[0:8] = b"dex\n035\x00"
    struct.pack_into("<III", out, 0x20, total_size, HEADER_SIZE, ENDIAN_TAG)
    struct.pack_into("<II", out, 0x2C, 0, 0)  # link
    struct.pack_into("<I", out, 0x34, 0)      # map_off: no map emitted
    struct.pack_into("<II", out, 0x38, len(ordered_strings), string_ids_off)
    struct.pack_into("<II", out, 0x40, len(type_descs), type_ids_off)
    struct.pack_into("<II", out, 0x48, len(protos), proto_ids_off)
    struct.pack_into("<II", out, 0x50, len(ordered_fields), field_ids_off if ordered_fields else 0)
    struct.pack_into("<II", out, 0x58, len(ordered_methods), method_ids_off)
    struct.pack_into("<II", out, 0x60, len(classes), class_defs_off)
    struct.pack_into("<II", out, 0x68, len(data), data_off)

    for i, s_off in enumerate(string_offsets):
        struct.pack_into("<I", out, string_ids_off + 4 * i, s_off)
    for i, desc in enumerate(type_descs):
        struct.pack_into("<I", out, type_ids_off + 4 * i, string_index[desc])
    for i, (shorty, ret, params) in enumerate(protos):
        struct.pack_into("<III", out, proto_ids_off + 12 * i, shorty, ret, params)
    for i, (cls_desc, name) in enumerate(ordered_fields):
        struct.pack_into(
            "<HHI", out, field_ids_off + 8 * i,
            type_index[cls_desc], type_index[string_desc], string_index[name],
        )
    for i, (cls_desc, name) in enumerate(ordered_methods):
        struct.pack_into(
            "<HHI", out, method_ids_off + 8 * i,
            type_index[cls_desc], 0, string_index[name],
        )
    for i, cls in enumerate(classes):
        struct.pack_into(
            "<8I", out, class_defs_off + 32 * i,
            type_index[cls.descriptor], 0x0001, type_index[object_desc],
            0, NO_INDEX, 0, class_data_offsets[cls.descriptor], 0,
        )
    out[data_off:] = data

    signature = hashlib.sha1(out[32:]).digest()
    out[12:32] = signature
    checksum = zlib.adler32(bytes(out[12:])) & 0xFFFFFFFF
    struct.pack_into("<I", out, 8, checksum)
    return bytes(out)
