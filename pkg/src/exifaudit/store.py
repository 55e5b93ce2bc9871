"""Vector store: build, query, and persist embedded corpus records.

Retrieval is an exact scan: every stored vector is scored against the query by
cosine similarity and the top k survive. Store sizes here are small (labeled
ground-truth snippets, not web corpora), so there is no approximate index to
drift from the scores the tests pin down.

Persistence file layout (all integers little-endian):

    offset  size  field
    0       8     magic b"EXAVSTOR"
    8       2     format version (currently 1)
    10      4     dim (vector length)
    14      2+n   embedding version tag (u16 length + UTF-8 bytes)
    ..      4     record count
    then per record:
            2+n   id     (u16 length + UTF-8 bytes)
            4+n   text   (u32 length + UTF-8 bytes)
            2+n   label  (u16 length + UTF-8 bytes)
            1     norm flag (0 or 1)
            8*dim vector values, float64
    last    4     CRC32 of every preceding byte

Loading verifies the checksum and the embedding version, and round-trips
vector values bit-exactly (raw float64 bytes, no text formatting).
"""

from __future__ import annotations

import os
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .embedding import EMBEDDING_VERSION, EmbeddingVector, embed_text, rank_by_cosine
from .errors import CorruptStore, DuplicateId, VersionMismatch

MAGIC = b"EXAVSTOR"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class CorpusRecord:
    """One labeled text with its embedded vector."""

    record_id: str
    text: str
    label: str
    vector: EmbeddingVector


@dataclass(frozen=True)
class RetrievalResult:
    """A retrieved record with its similarity and 1-based rank."""

    record: CorpusRecord
    similarity: float
    rank: int


@dataclass
class VectorStore:
    """In-memory store of embedded records, all sharing one dimension."""

    dim: int
    embedding_version: str = EMBEDDING_VERSION
    records: list[CorpusRecord] = field(default_factory=list)

    @property
    def is_empty(self) -> bool:
        return not self.records

    def __len__(self) -> int:
        return len(self.records)


def index_corpus(records, dim: int) -> VectorStore:
    """Embed and index (id, text, label) triples into a fresh store.

    Accepts triples or dicts with id/text/label keys. Ids must be unique;
    a duplicate raises DuplicateId and indexes nothing further.
    """
    store = VectorStore(dim=dim)
    seen: set[str] = set()
    for item in records:
        if isinstance(item, dict):
            record_id, text, label = item["id"], item["text"], item.get("label", "")
        else:
            record_id, text, label = item
        if record_id in seen:
            raise DuplicateId(f"corpus record id repeated: {record_id!r}")
        seen.add(record_id)
        store.records.append(
            CorpusRecord(
                record_id=record_id,
                text=text,
                label=label,
                vector=embed_text(text, dim=dim),
            )
        )
    return store


def retrieve_similar(
    store: VectorStore,
    query_text: str,
    k: int,
    min_similarity: float = 0.0,
) -> list[RetrievalResult]:
    """Return the top-min(k, len(store)) records for a query by cosine.

    An empty store yields an empty list (the store's is_empty flag is the
    signal; retrieval itself never fails on emptiness). A query with no
    tokens embeds to the zero vector and scores 0.0 against everything,
    which the default min_similarity of 0.0 still admits.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if store.is_empty or k == 0:
        return []
    query = embed_text(query_text, dim=store.dim)
    ranked = rank_by_cosine(query.values, [r.vector.values for r in store.records])
    results: list[RetrievalResult] = []
    for index, similarity in ranked:
        if len(results) == k:
            break
        if similarity < min_similarity:
            continue
        results.append(
            RetrievalResult(
                record=store.records[index],
                similarity=similarity,
                rank=len(results) + 1,
            )
        )
    return results


def _pack_str(value: str, width: str) -> bytes:
    raw = value.encode("utf-8")
    return struct.pack(f"<{width}", len(raw)) + raw


def save_store(store: VectorStore, path) -> None:
    """Serialize the store to its binary file atomically."""
    parts = [MAGIC, struct.pack("<H", FORMAT_VERSION), struct.pack("<I", store.dim)]
    parts.append(_pack_str(store.embedding_version, "H"))
    parts.append(struct.pack("<I", len(store.records)))
    for record in store.records:
        parts.append(_pack_str(record.record_id, "H"))
        parts.append(_pack_str(record.text, "I"))
        parts.append(_pack_str(record.label, "H"))
        parts.append(struct.pack("<B", 1 if record.vector.norm_flag else 0))
        values = np.ascontiguousarray(record.vector.values, dtype="<f8")
        parts.append(values.tobytes())
    body = b"".join(parts)
    body += struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(body)
    os.replace(tmp, path)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptStore("store file truncated")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def string(self, width: str) -> str:
        length = self.u16() if width == "H" else self.u32()
        try:
            return self.take(length).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptStore(f"store string not valid UTF-8: {exc}") from exc


def load_store(path, expected_dim: int | None = None) -> VectorStore:
    """Read a store file back, verifying checksum, version, and dimension.

    expected_dim lets a pipeline configured for one dimension refuse a file
    written with another (VersionMismatch) instead of failing later on a
    shape error mid-retrieval.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < len(MAGIC) + 4:
        raise CorruptStore("store file shorter than its own header")
    declared_crc = struct.unpack("<I", data[-4:])[0]
    actual_crc = zlib.crc32(data[:-4]) & 0xFFFFFFFF
    if declared_crc != actual_crc:
        raise CorruptStore(
            f"store checksum mismatch: file says {declared_crc:#010x}, "
            f"content hashes to {actual_crc:#010x}"
        )
    reader = _Reader(data[:-4])
    if reader.take(len(MAGIC)) != MAGIC:
        raise CorruptStore("store magic bytes missing")
    fmt = reader.u16()
    if fmt != FORMAT_VERSION:
        raise VersionMismatch(f"store format version {fmt} unsupported")
    dim = reader.u32()
    version = reader.string("H")
    if version != EMBEDDING_VERSION:
        raise VersionMismatch(
            f"store embedded with {version!r}, this build embeds {EMBEDDING_VERSION!r}"
        )
    if expected_dim is not None and dim != expected_dim:
        raise VersionMismatch(
            f"store dim {dim} does not match configured dim {expected_dim}"
        )
    count = reader.u32()
    store = VectorStore(dim=dim, embedding_version=version)
    for _ in range(count):
        record_id = reader.string("H")
        text = reader.string("I")
        label = reader.string("H")
        norm_flag = reader.u8() != 0
        raw = reader.take(8 * dim)
        values = np.frombuffer(raw, dtype="<f8").astype(np.float64, copy=True)
        store.records.append(
            CorpusRecord(
                record_id=record_id,
                text=text,
                label=label,
                vector=EmbeddingVector(dim=dim, values=values, norm_flag=norm_flag),
            )
        )
    if reader.pos != len(reader.data):
        raise CorruptStore(
            f"{len(reader.data) - reader.pos} trailing bytes after last record"
        )
    return store
