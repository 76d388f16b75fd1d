"""Corpus ingestion, sentence segmentation, query/qrel loading and BM25.

File formats:
    corpus  - JSONL, one object per line, either
              {"doc_id": str, "sentences": [str]} or
              {"doc_id": str, "text": str}
    queries - TSV ``query_id \\t text``
    qrels   - TREC-style TSV ``query_id \\t 0 \\t doc_id \\t grade``
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .encoder import tokenize

log = logging.getLogger(__name__)

BM25_K1 = 1.2
BM25_B = 0.75


class CorpusError(ValueError):
    """Malformed corpus/query/qrel input."""


@dataclass(frozen=True)
class Sentence:
    text: str
    index: int


@dataclass(frozen=True)
class Document:
    doc_id: str
    sentences: tuple[Sentence, ...]
    token_count: int


@dataclass(frozen=True)
class Query:
    query_id: str
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise CorpusError(f"query {self.query_id!r} has empty text")


class QrelTable:
    """Relevance grades keyed by (query_id, doc_id); absent pairs are 0."""

    def __init__(self, grades: dict[tuple[str, str], int] | None = None):
        self._grades = dict(grades or {})
        for (qid, did), g in self._grades.items():
            if g < 0:
                raise CorpusError(f"negative grade for ({qid}, {did})")

    def grade(self, query_id: str, doc_id: str) -> int:
        return self._grades.get((query_id, doc_id), 0)

    def has_judgment(self, query_id: str, doc_id: str) -> bool:
        return (query_id, doc_id) in self._grades

    def doc_ids_for(self, query_id: str) -> list[str]:
        return [d for (q, d) in self._grades if q == query_id]

    def __len__(self) -> int:
        return len(self._grades)

    def items(self):
        return self._grades.items()


@dataclass
class CorpusIndex:
    """Immutable-after-build inverted index over a document collection."""

    documents: dict[str, Document] = field(default_factory=dict)
    postings: dict[str, list[tuple[str, int]]] = field(default_factory=dict)
    doc_lengths: dict[str, int] = field(default_factory=dict)
    avg_doc_length: float = 0.0

    def df(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def __len__(self) -> int:
        return len(self.documents)


_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")
_TRAILING_RE = re.compile(r"[.!?]+$")


def _collapse_trailing(text: str) -> str:
    # ".." -> ".", "?!" -> "?": runs of end punctuation keep the first char,
    # which makes splitting stable under re-joining with ". ".
    return _TRAILING_RE.sub(lambda m: m.group(0)[0], text)


def split_sentences(text: str) -> list[Sentence]:
    """Split on '.', '!' or '?' followed by whitespace.

    Fragments shorter than 2 tokens are merged into the previous
    sentence; trailing punctuation runs are collapsed to one character.
    """
    stripped = text.strip()
    if not stripped:
        return []
    pieces = [_collapse_trailing(p.strip()) for p in _SPLIT_RE.split(stripped)]
    merged: list[str] = []
    for piece in pieces:
        if not piece:
            continue
        if merged and len(tokenize(piece)) < 2:
            merged[-1] = f"{merged[-1]} {piece}"
        else:
            merged.append(piece)
    return [Sentence(text=t, index=i) for i, t in enumerate(merged)]


def make_document(doc_id: str, sentence_texts: list[str]) -> Document:
    sentences = tuple(
        Sentence(text=t, index=i) for i, t in enumerate(sentence_texts)
    )
    if not sentences:
        raise CorpusError(f"document {doc_id!r} has no sentences")
    n_tokens = sum(len(tokenize(s.text)) for s in sentences)
    return Document(doc_id=doc_id, sentences=sentences, token_count=n_tokens)


def build_index(documents: list[Document]) -> CorpusIndex:
    index = CorpusIndex()
    tf_by_term: dict[str, dict[str, int]] = {}
    for doc in documents:
        if doc.doc_id in index.documents:
            raise CorpusError(f"duplicate doc_id {doc.doc_id!r}")
        index.documents[doc.doc_id] = doc
        tokens = [t for s in doc.sentences for t in tokenize(s.text)]
        index.doc_lengths[doc.doc_id] = len(tokens)
        for tok in tokens:
            tf_by_term.setdefault(tok, {}).setdefault(doc.doc_id, 0)
            tf_by_term[tok][doc.doc_id] += 1
    for term, tfs in tf_by_term.items():
        index.postings[term] = sorted(tfs.items())
    if index.doc_lengths:
        index.avg_doc_length = sum(index.doc_lengths.values()) / len(
            index.doc_lengths
        )
    return index


def ingest_corpus(path: str | Path) -> CorpusIndex:
    """Build a CorpusIndex from a JSONL corpus file."""
    documents: list[Document] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict) or "doc_id" not in record:
                raise CorpusError(f"line {lineno}: missing doc_id")
            doc_id = str(record["doc_id"])
            if doc_id in seen:
                raise CorpusError(f"line {lineno}: duplicate doc_id {doc_id!r}")
            seen.add(doc_id)
            if "sentences" in record:
                texts = [str(s) for s in record["sentences"] if str(s).strip()]
            elif "text" in record:
                texts = [s.text for s in split_sentences(str(record["text"]))]
            else:
                raise CorpusError(
                    f"line {lineno}: need 'sentences' or 'text' for {doc_id!r}"
                )
            if not texts:
                raise CorpusError(f"line {lineno}: document {doc_id!r} is empty")
            documents.append(make_document(doc_id, texts))
    if not documents:
        raise CorpusError("empty corpus")
    return build_index(documents)


def bm25_retrieve(
    index: CorpusIndex, query: Query, k: int
) -> list[tuple[str, float]]:
    """Okapi BM25 top-k retrieval; ties broken by ascending doc_id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    n_docs = len(index.documents)
    scores: dict[str, float] = {}
    for term in tokenize(query.text):
        postings = index.postings.get(term)
        if not postings:
            continue
        df = len(postings)
        idf = math.log((n_docs - df + 0.5) / (df + 0.5) + 1.0)
        for doc_id, tf in postings:
            dl = index.doc_lengths[doc_id]
            denom = tf + BM25_K1 * (
                1.0 - BM25_B + BM25_B * dl / index.avg_doc_length
            )
            scores[doc_id] = scores.get(doc_id, 0.0) + idf * tf * (
                BM25_K1 + 1.0
            ) / denom
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:k]


def load_queries(path: str | Path) -> list[Query]:
    queries: list[Query] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise CorpusError(
                    f"queries line {lineno}: expected 2 columns, got {len(parts)}"
                )
            queries.append(Query(query_id=parts[0], text=parts[1]))
    return queries


def load_qrels(path: str | Path) -> QrelTable:
    grades: dict[tuple[str, str], int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 4:
                raise CorpusError(
                    f"qrels line {lineno}: expected 4 columns, got {len(parts)}"
                )
            qid, _, did, grade_str = parts
            try:
                grade = int(grade_str)
            except ValueError as exc:
                raise CorpusError(
                    f"qrels line {lineno}: non-integer grade {grade_str!r}"
                ) from exc
            if grade < 0:
                raise CorpusError(f"qrels line {lineno}: negative grade")
            if (qid, did) in grades:
                log.warning(
                    "qrels line %d: duplicate pair (%s, %s), keeping last",
                    lineno, qid, did,
                )
            grades[(qid, did)] = grade
    return QrelTable(grades)
