"""In-memory vector index with exact top-k cosine retrieval.

Corpus scale (low tens of thousands of chunks) makes an exhaustive scan
both fast and exactly testable; there is no approximate structure. Ties are
broken by ascending (doc_id, seq_index) so runs are reproducible.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Chunk
from .errors import IndexBuildError, RetrievalError
from .providers import EmbeddingProvider, embed_texts

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoredChunk:
    chunk: Chunk
    similarity: float


class VectorIndex:
    """Immutable (chunk, embedding) list with a fixed dimension."""

    def __init__(self, chunks: Sequence[Chunk], vectors: Sequence[np.ndarray]):
        if len(chunks) != len(vectors):
            raise IndexBuildError("one vector required per chunk")
        dims = {vec.shape[0] for vec in vectors}
        if len(dims) > 1:
            raise IndexBuildError(f"mixed embedding dimensions in index: {sorted(dims)}")
        self._chunks = tuple(chunks)
        self._vectors = tuple(np.asarray(v, dtype=float) for v in vectors)
        self.dimension = self._vectors[0].shape[0] if self._vectors else 0

    @property
    def entries(self) -> tuple[tuple[Chunk, np.ndarray], ...]:
        return tuple(zip(self._chunks, self._vectors))

    def __len__(self) -> int:
        return len(self._chunks)

    def dump(self, path: str | Path) -> None:
        """Write the index to JSON for caching."""
        payload = [
            {
                "doc_id": chunk.doc_id,
                "seq_index": chunk.seq_index,
                "vector": vec.tolist(),
            }
            for chunk, vec in self.entries
        ]
        Path(path).write_text(json.dumps(payload), encoding="utf-8")


def build_index(chunks: Sequence[Chunk], embedder: EmbeddingProvider) -> VectorIndex:
    """Embed every chunk and assemble the index in input order."""
    if not chunks:
        raise ValueError("cannot build an index over zero chunks")
    vectors = embed_texts(embedder, [c.text for c in chunks])
    return VectorIndex(chunks, vectors)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """<a, b> / (||a|| ||b||)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise RetrievalError("cosine similarity is undefined for a zero vector")
    return float(np.dot(a, b)) / (norm_a * norm_b)


def retrieve_top_k(
    index: VectorIndex,
    query_text: str,
    k: int,
    embedder: EmbeddingProvider,
) -> list[ScoredChunk]:
    """Exhaustive scan: the min(k, index size) most similar chunks.

    Sorted by similarity descending; ties by ascending (doc_id, seq_index).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(index) == 0:
        raise RetrievalError("cannot retrieve from an empty index")
    if k > len(index):
        log.warning("k=%d exceeds index size %d; returning all entries", k, len(index))

    query_vec = embed_texts(embedder, [query_text])[0]
    scored = [
        (cosine_similarity(vec, query_vec), chunk) for chunk, vec in index.entries
    ]
    scored.sort(key=lambda item: (-item[0], item[1].doc_id, item[1].seq_index))
    return [ScoredChunk(chunk=c, similarity=s) for s, c in scored[:k]]
