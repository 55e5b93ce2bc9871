"""Keyword catalog and source-mode code block extraction.

The audit does not understand program semantics; it finds the places where
code touches image metadata by keyword evidence and hands those places to the
summarization stage. Two keyword kinds exist because the evidence differs:
method names (matched case-insensitively, decompilers vary casing) and tag
constants (matched case-sensitively, they are exact identifiers).

Catalog file format, one entry per line, tab-separated:

    keyword <TAB> kind <TAB> comma-separated-types

where kind is "method-name" or "tag-constant" and each type is one of the
stable MetadataType names. Lines starting with "#" and blank lines are
ignored. The default catalog below ships in code; auditors extend it by
pointing the config at their own file.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import UnreadableSource
from .metadata import MetadataType

KIND_METHOD = "method-name"
KIND_TAG = "tag-constant"

DEFAULT_MAX_BLOCK_CHARS = 4000
_FALLBACK_LINES = 40

SOURCE_SUFFIXES = (".java", ".kt", ".smali")


@dataclass(frozen=True)
class CatalogEntry:
    keyword: str
    kind: str
    types: frozenset[MetadataType]

    def __post_init__(self) -> None:
        if not self.keyword:
            raise ValueError("catalog keyword must be non-empty")
        if self.kind not in (KIND_METHOD, KIND_TAG):
            raise ValueError(f"unknown catalog kind {self.kind!r}")
        if not self.types:
            raise ValueError(f"catalog entry {self.keyword!r} implicates no types")


class KeywordCatalog:
    """Validated, order-preserving collection of catalog entries."""

    def __init__(self, entries):
        self.entries: tuple[CatalogEntry, ...] = tuple(entries)
        seen: set[str] = set()
        for entry in self.entries:
            if entry.keyword in seen:
                raise ValueError(f"duplicate catalog keyword {entry.keyword!r}")
            seen.add(entry.keyword)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def occurrences(self, text: str) -> list[tuple[CatalogEntry, int, int]]:
        """Every (entry, start, end) occurrence in the text, in text order."""
        lowered = text.lower()
        found: list[tuple[CatalogEntry, int, int]] = []
        for entry in self.entries:
            haystack = lowered if entry.kind == KIND_METHOD else text
            needle = entry.keyword.lower() if entry.kind == KIND_METHOD else entry.keyword
            at = haystack.find(needle)
            while at != -1:
                found.append((entry, at, at + len(needle)))
                at = haystack.find(needle, at + 1)
        found.sort(key=lambda item: (item[1], item[2]))
        return found


def _entry(keyword: str, kind: str, *types: MetadataType) -> CatalogEntry:
    return CatalogEntry(keyword=keyword, kind=kind, types=frozenset(types))


DEFAULT_CATALOG = KeywordCatalog(
    [
        _entry("getDateTime", KIND_METHOD, MetadataType.DATETIME),
        _entry("getGPS", KIND_METHOD, MetadataType.GPS),
        _entry("getLatLong", KIND_METHOD, MetadataType.GPS),
        _entry("setLatLong", KIND_METHOD, MetadataType.GPS),
        _entry("TAG_DATETIME", KIND_TAG, MetadataType.DATETIME),
        _entry("TAG_MAKE", KIND_TAG, MetadataType.SMARTPHONE_BRAND),
        _entry("TAG_MODEL", KIND_TAG, MetadataType.SMARTPHONE_MODEL),
        _entry("TAG_BODY_SERIAL_NUMBER", KIND_TAG, MetadataType.DEVICE_SERIAL_NUMBER),
        _entry("BodySerialNumber", KIND_TAG, MetadataType.DEVICE_SERIAL_NUMBER),
        _entry("TAG_GPS_LATITUDE", KIND_TAG, MetadataType.GPS),
        _entry("TAG_GPS_LONGITUDE", KIND_TAG, MetadataType.GPS),
        # prefix entry: any TAG_GPS_* constant contains it, covering the
        # long tail of GPS tags without listing each one
        _entry("TAG_GPS_", KIND_TAG, MetadataType.GPS),
    ]
)


def load_catalog(path) -> KeywordCatalog:
    """Parse a catalog file in the tab-separated format above."""
    entries: list[CatalogEntry] = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields")
        keyword, kind, type_names = parts
        types = frozenset(
            MetadataType.from_name(name.strip()) for name in type_names.split(",") if name.strip()
        )
        entries.append(CatalogEntry(keyword=keyword, kind=kind, types=types))
    return KeywordCatalog(entries)


def dump_catalog(catalog: KeywordCatalog, path) -> None:
    lines = [
        "\t".join(
            (e.keyword, e.kind, ",".join(sorted(t.value for t in e.types)))
        )
        for e in catalog
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def classify_block_keywords(
    block_text: str, catalog: KeywordCatalog = DEFAULT_CATALOG
) -> set[MetadataType]:
    """Union of implicated types over all catalog keywords in the text."""
    types: set[MetadataType] = set()
    for entry, _start, _end in catalog.occurrences(block_text):
        types |= entry.types
    return types


@dataclass(frozen=True)
class CodeBlock:
    """A code region worth summarizing, with the evidence that selected it.

    text always equals the source slice [span[0]:span[1]) of source_id, so a
    truncated block's span is the kept window, not the whole method.
    """

    source_id: str
    span: tuple[int, int]
    text: str
    matched_keywords: frozenset[str]
    implicated_types: frozenset[MetadataType]
    truncated: bool


def _brace_pairs(text: str) -> list[tuple[int, int]]:
    stack: list[int] = []
    pairs: list[tuple[int, int]] = []
    for i, ch in enumerate(text):
        if ch == "{":
            stack.append(i)
        elif ch == "}" and stack:
            pairs.append((stack.pop(), i))
    return pairs


def _unit_span(
    text: str,
    pairs: list[tuple[int, int]],
    line_starts: list[int],
    start: int,
    end: int,
) -> tuple[int, int]:
    """Smallest brace-balanced body enclosing [start, end), pulled back to the
    start of its signature; +/-40 source lines when no pair encloses it."""
    best: tuple[int, int] | None = None
    for open_pos, close_pos in pairs:
        if open_pos <= start and close_pos >= end - 1:
            if best is None or open_pos > best[0]:
                best = (open_pos, close_pos)
    if best is not None:
        open_pos, close_pos = best
        sig = 0
        for j in range(open_pos - 1, -1, -1):
            if text[j] in "{};":
                sig = j + 1
                break
        while sig < open_pos and text[sig] in " \t\r\n":
            sig += 1
        return (sig, close_pos + 1)

    # fallback window in lines
    line = _line_of(line_starts, start)
    lo = line_starts[max(0, line - _FALLBACK_LINES)]
    hi_line = min(len(line_starts) - 1, line + _FALLBACK_LINES)
    hi = (
        len(text)
        if hi_line + 1 >= len(line_starts)
        else line_starts[hi_line + 1]
    )
    return (lo, hi)


def _line_of(line_starts: list[int], pos: int) -> int:
    import bisect

    return bisect.bisect_right(line_starts, pos) - 1


def _window(span: tuple[int, int], matches, max_chars: int) -> tuple[int, int, bool]:
    s, e = span
    if e - s <= max_chars:
        return s, e, False
    m_start = min(m[1] for m in matches)
    m_end = max(m[2] for m in matches)
    if m_end - m_start <= max_chars:
        mid = (m_start + m_end) // 2
        w_start = max(s, min(mid - max_chars // 2, e - max_chars))
    else:
        w_start = max(s, min(m_start, e - max_chars))
    w_end = min(e, w_start + max_chars)
    if not (w_start <= m_start and m_start + 1 <= w_end):
        w_start = m_start
        w_end = min(e, m_start + max_chars)
    return w_start, w_end, True


def extract_code_blocks(
    source_root,
    catalog: KeywordCatalog = DEFAULT_CATALOG,
    max_block_chars: int = DEFAULT_MAX_BLOCK_CHARS,
    on_error=None,
) -> list[CodeBlock]:
    """Extract keyword-bearing code blocks from a source tree.

    Scans .java/.kt/.smali files under source_root. For every keyword hit the
    enclosing method body (by brace matching, falling back to +/-40 lines) is
    taken; hits whose regions overlap merge into one block with the union of
    keywords; regions longer than max_block_chars keep a window centered on
    the matched text and mark the block truncated.

    A file that cannot be read is reported through on_error(path, exception)
    as an UnreadableSource and skipped; extraction itself never fails on it.
    Blocks come back sorted by (source_id, span start).
    """
    if max_block_chars < 64:
        raise ValueError("max_block_chars too small to hold any match context")
    root = Path(source_root)
    blocks: list[CodeBlock] = []
    files = sorted(
        p for p in root.rglob("*") if p.is_file() and p.suffix in SOURCE_SUFFIXES
    )
    for path in files:
        source_id = path.relative_to(root).as_posix()
        try:
            text = path.read_bytes().decode("utf-8", errors="replace")
        except OSError as exc:
            if on_error is not None:
                on_error(source_id, UnreadableSource(f"{source_id}: {exc}"))
            continue
        hits = catalog.occurrences(text)
        if not hits:
            continue
        pairs = _brace_pairs(text)
        line_starts = [0] + [i + 1 for i, ch in enumerate(text) if ch == "\n"]

        located = [
            (_unit_span(text, pairs, line_starts, start, end), entry, start, end)
            for entry, start, end in hits
        ]
        located.sort(key=lambda item: item[0])

        merged: list[list] = []  # [unit_start, unit_end, [(entry, s, e), ...]]
        for span, entry, start, end in located:
            if merged and span[0] < merged[-1][1] and span[1] > merged[-1][0]:
                merged[-1][1] = max(merged[-1][1], span[1])
                merged[-1][2].append((entry, start, end))
            else:
                merged.append([span[0], span[1], [(entry, start, end)]])

        for unit_start, unit_end, matches in merged:
            w_start, w_end, truncated = _window(
                (unit_start, unit_end), matches, max_block_chars
            )
            block_text = text[w_start:w_end]
            # keywords are re-scanned over the kept text so every reported
            # keyword is verbatim present even after truncation
            present = catalog.occurrences(block_text)
            keywords = frozenset(entry.keyword for entry, _s, _e in present)
            types = frozenset().union(*(entry.types for entry, _s, _e in present)) if present else frozenset()
            if not keywords:
                continue
            blocks.append(
                CodeBlock(
                    source_id=source_id,
                    span=(w_start, w_end),
                    text=block_text,
                    matched_keywords=keywords,
                    implicated_types=types,
                    truncated=truncated,
                )
            )
    blocks.sort(key=lambda b: (b.source_id, b.span[0]))
    return blocks
