"""Deterministic text embedding used by the retrieval store.

The default embedder is a token-hash bag of words: lowercase the text, split on
every non-alphanumeric character, hash each token with 64-bit FNV-1a into one
of `dim` buckets, count occurrences, then L2-normalize. It needs no model
download, produces the same vector on every platform and interpreter run, and
two texts sharing vocabulary land on shared buckets, which is all cosine
retrieval over labeled code snippets requires.

An optional remote embedding backend speaks a one-endpoint wire contract
(POST JSON {"text": str} -> {"vector": [float, ...]}) for deployments that
want a learned model behind the same interface. It is disabled by default.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np
import requests

from .errors import BackendRejected, BackendTimeout

# Version tag stored in every persisted vector store. Bump when tokenization,
# hashing, or normalization changes in any observable way.
EMBEDDING_VERSION = "bow-fnv1a64-v1"

DEFAULT_DIM = 4096

# FNV-1a 64-bit offset basis and prime.
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

_TOKEN_SPLIT = re.compile(r"[^a-z0-9]+")


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash of raw bytes."""
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def tokenize(text: str) -> list[str]:
    """Lowercase and split on runs of non-alphanumeric characters."""
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t]


@dataclass(frozen=True)
class EmbeddingVector:
    """A fixed-dimension real vector plus a flag telling whether it was
    normalized (False only for the all-zero vector of empty input)."""

    dim: int
    values: np.ndarray = field(repr=False)
    norm_flag: bool

    def __post_init__(self) -> None:
        if self.values.shape != (self.dim,):
            raise ValueError(
                f"vector shape {self.values.shape} does not match dim {self.dim}"
            )


def embed_text(text: str, dim: int = DEFAULT_DIM) -> EmbeddingVector:
    """Embed text into a dim-bucket hashed bag of words, L2-normalized.

    An input with no tokens maps to the all-zero vector with norm_flag False;
    every other input yields a unit vector (within float rounding).
    """
    if dim <= 0:
        raise ValueError("dim must be positive")
    counts = np.zeros(dim, dtype=np.float64)
    toks = tokenize(text)
    for tok in toks:
        counts[fnv1a64(tok.encode("utf-8")) % dim] += 1.0
    if not toks:
        return EmbeddingVector(dim=dim, values=counts, norm_flag=False)
    norm = float(np.sqrt(np.dot(counts, counts)))
    return EmbeddingVector(dim=dim, values=counts / norm, norm_flag=True)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors; 0.0 if either has norm 0."""
    na = float(np.sqrt(np.dot(a, a)))
    nb = float(np.sqrt(np.dot(b, b)))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def rank_by_cosine(query: np.ndarray, vectors: list[np.ndarray]) -> list[tuple[int, float]]:
    """Rank stored vectors against a query by cosine similarity.

    Returns (index, similarity) pairs sorted by descending similarity; exact
    ties keep insertion order. The zero-vector query scores 0.0 everywhere.
    """
    scored = [(i, cosine_similarity(query, v)) for i, v in enumerate(vectors)]
    scored.sort(key=lambda pair: -pair[1])  # sort is stable: ties keep order
    return scored


class RemoteEmbeddingBackend:
    """Client for the optional external embedding endpoint.

    Wire contract: POST {endpoint} with JSON body {"text": <str>}; response is
    JSON {"vector": [<float>; exactly dim]}. Any other shape or a non-2xx
    status rejects the request. Vectors come back as-is (the remote model owns
    normalization) with norm_flag reporting whether the norm is ~1.
    """

    def __init__(self, endpoint: str, dim: int, timeout_s: float = 10.0):
        self.endpoint = endpoint
        self.dim = dim
        self.timeout_s = timeout_s

    def embed(self, text: str) -> EmbeddingVector:
        try:
            resp = requests.post(
                self.endpoint, json={"text": text}, timeout=self.timeout_s
            )
        except requests.exceptions.Timeout as exc:
            raise BackendTimeout(f"embedding endpoint timed out: {exc}") from exc
        except requests.exceptions.RequestException as exc:
            raise BackendRejected(f"embedding endpoint unreachable: {exc}") from exc
        if resp.status_code < 200 or resp.status_code >= 300:
            raise BackendRejected(
                f"embedding endpoint returned {resp.status_code}", body=resp.text
            )
        try:
            payload = resp.json()
            raw = payload["vector"]
            values = np.asarray([float(x) for x in raw], dtype=np.float64)
        except (ValueError, KeyError, TypeError) as exc:
            raise BackendRejected(
                f"embedding response not in wire format: {exc}", body=resp.text
            ) from exc
        if values.shape != (self.dim,):
            raise BackendRejected(
                f"embedding endpoint returned {values.shape[0] if values.ndim == 1 else 'non-flat'}"
                f" values, expected {self.dim}",
                body=resp.text,
            )
        norm = float(np.sqrt(np.dot(values, values)))
        return EmbeddingVector(
            dim=self.dim, values=values, norm_flag=abs(norm - 1.0) <= 1e-9
        )
