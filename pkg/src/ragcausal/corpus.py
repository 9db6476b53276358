"""Corpus loading, interval slicing, and sentence-level chunking.

A corpus is described by a JSON manifest (list of ``{id, title, year,
interval, text_file}``) next to a directory of plain UTF-8 text files.
Documents are grouped into five five-year publication intervals and split
into token-limited chunks for retrieval.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Protocol

from .errors import CorpusLoadError, CorpusValidationError

log = logging.getLogger(__name__)

#: Interval labels in chronological order, mapped to inclusive year bounds.
INTERVALS: dict[str, tuple[int, int]] = {
    "2000-2005": (2000, 2005),
    "2006-2010": (2006, 2010),
    "2011-2015": (2011, 2015),
    "2016-2020": (2016, 2020),
    "2021-2025": (2021, 2025),
}

INTERVAL_ORDER = tuple(INTERVALS)


def normalize_interval(label: str) -> str:
    """Canonicalize an interval label (en dashes become hyphens)."""
    cleaned = label.strip().replace("–", "-").replace("—", "-")
    if cleaned not in INTERVALS:
        raise ValueError(f"unknown interval label: {label!r}")
    return cleaned


@dataclass(frozen=True)
class DocumentRecord:
    """One source paper: identity, publication interval, and full text."""

    id: str
    title: str
    year: int
    interval: str
    text: str

    def __post_init__(self) -> None:
        lo, hi = INTERVALS[normalize_interval(self.interval)]
        if not lo <= self.year <= hi:
            raise CorpusValidationError(
                f"document {self.id!r}: year {self.year} outside interval {self.interval}"
            )


@dataclass(frozen=True)
class Chunk:
    """A retrieval unit: one token-limited segment of a document."""

    doc_id: str
    seq_index: int
    text: str
    token_count: int


class Corpus:
    """An ordered, immutable collection of documents with unique ids."""

    def __init__(self, documents: list[DocumentRecord] | tuple[DocumentRecord, ...]):
        docs = tuple(documents)
        seen: set[str] = set()
        for doc in docs:
            if doc.id in seen:
                raise CorpusValidationError(f"duplicate document id: {doc.id!r}")
            seen.add(doc.id)
        self._documents = docs

    @property
    def documents(self) -> tuple[DocumentRecord, ...]:
        return self._documents

    def __len__(self) -> int:
        return len(self._documents)

    def __iter__(self) -> Iterator[DocumentRecord]:
        return iter(self._documents)

    def intervals_present(self) -> tuple[str, ...]:
        present = {doc.interval for doc in self._documents}
        return tuple(label for label in INTERVAL_ORDER if label in present)


class Tokenizer(Protocol):
    """Counts tokens in a text. count("") must be 0 and counting must be
    deterministic."""

    def count(self, text: str) -> int: ...


class WhitespaceTokenizer:
    """Default tokenizer: whitespace-separated words."""

    def count(self, text: str) -> int:
        return len(text.split())


def load_corpus(manifest_path: str | Path, text_dir: str | Path) -> Corpus:
    """Load all documents named by a manifest, preserving manifest order."""
    manifest_path = Path(manifest_path)
    text_dir = Path(text_dir)
    try:
        entries = json.loads(manifest_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise CorpusLoadError(f"cannot read manifest {manifest_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CorpusLoadError(f"manifest {manifest_path} is not valid JSON: {exc}") from exc
    if not isinstance(entries, list):
        raise CorpusLoadError(f"manifest {manifest_path} must be a JSON list")

    documents = []
    for entry in entries:
        doc_id = entry.get("id", "<missing id>")
        try:
            text = (text_dir / entry["text_file"]).read_text(encoding="utf-8")
        except (OSError, KeyError) as exc:
            raise CorpusLoadError(f"document {doc_id!r}: cannot read text: {exc}") from exc
        try:
            documents.append(
                DocumentRecord(
                    id=entry["id"],
                    title=entry["title"],
                    year=int(entry["year"]),
                    interval=normalize_interval(entry["interval"]),
                    text=text,
                )
            )
        except (KeyError, ValueError) as exc:
            raise CorpusValidationError(f"document {doc_id!r}: {exc}") from exc
    return Corpus(documents)


def slice_interval(corpus: Corpus, interval: str) -> Corpus:
    """Documents of one publication interval, original order preserved."""
    label = normalize_interval(interval)
    return Corpus([doc for doc in corpus if doc.interval == label])


_SENTENCE_SPLIT = re.compile(r"([.!?]|\n)")
_SECONDARY_SPLIT = re.compile(r"([,;:])")


def split_sentences(text: str) -> list[str]:
    """Split on ".", "!", "?" and newlines.

    Terminal punctuation stays attached to its sentence; newlines are
    dropped. Whitespace-only segments are discarded.
    """
    sentences = []
    current = ""
    for part in _SENTENCE_SPLIT.split(text):
        if part == "\n":
            if current.strip():
                sentences.append(current.strip())
            current = ""
        elif part in (".", "!", "?"):
            current += part
            sentences.append(current.strip())
            current = ""
        else:
            current += part
    if current.strip():
        sentences.append(current.strip())
    return [s for s in sentences if s]


def _split_secondary(sentence: str) -> list[str]:
    """Split on "," ";" ":" with the delimiter retained on its piece."""
    pieces = []
    current = ""
    for part in _SECONDARY_SPLIT.split(sentence):
        if part in (",", ";", ":"):
            current += part
            pieces.append(current.strip())
            current = ""
        else:
            current += part
    if current.strip():
        pieces.append(current.strip())
    return [p for p in pieces if p]


def _pack_words(piece: str, max_tokens: int, tokenizer: Tokenizer) -> list[str]:
    """Last resort for an over-limit piece with no secondary delimiters:
    greedily pack whitespace-separated words up to the limit."""
    words = piece.split()
    groups: list[str] = []
    current: list[str] = []
    for word in words:
        candidate = " ".join(current + [word])
        if current and tokenizer.count(candidate) > max_tokens:
            groups.append(" ".join(current))
            current = [word]
        else:
            current = current + [word] if current else [word]
    if current:
        groups.append(" ".join(current))
    return groups


def chunk_document(
    doc: DocumentRecord, max_chunk_tokens: int, tokenizer: Tokenizer
) -> list[Chunk]:
    """Split a document into chunks of at most ``max_chunk_tokens`` tokens.

    Sentences within the limit become chunks directly; longer sentences are
    re-split on secondary punctuation, then (if still too long) word-packed.
    A single token that alone exceeds the limit is emitted as its own chunk
    with a warning.
    """
    if max_chunk_tokens < 1:
        raise ValueError(f"max_chunk_tokens must be >= 1, got {max_chunk_tokens}")

    texts: list[str] = []
    for sentence in split_sentences(doc.text):
        if tokenizer.count(sentence) <= max_chunk_tokens:
            texts.append(sentence)
            continue
        for piece in _split_secondary(sentence):
            if tokenizer.count(piece) <= max_chunk_tokens:
                texts.append(piece)
            else:
                for group in _pack_words(piece, max_chunk_tokens, tokenizer):
                    if tokenizer.count(group) > max_chunk_tokens:
                        log.warning(
                            "document %s: single token exceeds the %d-token limit; "
                            "emitting it as its own chunk",
                            doc.id,
                            max_chunk_tokens,
                        )
                    texts.append(group)

    return [
        Chunk(doc_id=doc.id, seq_index=i, text=t, token_count=tokenizer.count(t))
        for i, t in enumerate(texts)
    ]
