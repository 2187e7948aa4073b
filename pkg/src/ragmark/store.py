"""Passage ingestion, an Okapi BM25 inverted index, and precomputed dense results.

Dense (DPR-style) retrieval is never computed here: rank lists come from a
JSONL dump produced elsewhere. BM25 is built from scratch for the sparse
setting. Both yield the same Passage objects, so the downstream evidence
pipeline is retrieval-agnostic.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .errors import DuplicateId, EmptyIndex, MalformedRecord, MissingField
from .text import SentenceSpan, extract_terms, split_sentences


@dataclass(frozen=True)
class Passage:
    id: str
    title: str
    text: str
    source: str = "kb"  # "kb" | "web"
    rank: int | None = None

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("passage text must be non-empty")


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self) -> None:
        if self.k1 < 0 or not 0.0 <= self.b <= 1.0:
            raise ValueError("require k1 >= 0 and 0 <= b <= 1")


class Bm25Index:
    """Immutable Okapi BM25 index over title + text content terms.

    idf uses the +1 smoothing: ln((N - df + 0.5) / (df + 0.5) + 1), which
    stays non-negative on tiny corpora.
    """

    def __init__(self, passages: list[Passage], params: Bm25Params = Bm25Params()):
        ids = [p.id for p in passages]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise DuplicateId(f"duplicate passage ids: {dupes}")
        self.params = params
        self.passages = tuple(passages)
        self._term_freqs: list[Counter[str]] = []
        self.doc_lengths: list[int] = []
        self.doc_freq: Counter[str] = Counter()
        for p in passages:
            terms = [t.surface for t in extract_terms(f"{p.title} {p.text}", drop_stopwords=True)]
            freqs = Counter(terms)
            self._term_freqs.append(freqs)
            self.doc_lengths.append(len(terms))
            self.doc_freq.update(freqs.keys())
        self.n_docs = len(passages)
        self.avg_doc_length = sum(self.doc_lengths) / self.n_docs if self.n_docs else 0.0

    def idf(self, term: str) -> float:
        df = self.doc_freq.get(term, 0)
        return math.log((self.n_docs - df + 0.5) / (df + 0.5) + 1.0)

    def score(self, query_surfaces: list[str], doc_index: int) -> float:
        freqs = self._term_freqs[doc_index]
        dl = self.doc_lengths[doc_index]
        k1, b = self.params.k1, self.params.b
        norm = k1 * (1.0 - b + b * dl / self.avg_doc_length) if self.avg_doc_length else k1
        total = 0.0
        for term in query_surfaces:
            tf = freqs.get(term, 0)
            if tf == 0:
                continue
            total += self.idf(term) * tf * (k1 + 1.0) / (tf + norm)
        return total

    def top_k(self, query: str, k: int) -> list[Passage]:
        """Top-k passages by BM25 score, ties broken by ascending id."""
        if self.n_docs == 0:
            raise EmptyIndex("index has no documents")
        if k < 1:
            raise ValueError("k must be positive")
        surfaces = [t.surface for t in extract_terms(query, drop_stopwords=True)]
        scored = sorted(
            range(self.n_docs),
            key=lambda i: (-self.score(surfaces, i), self.passages[i].id),
        )
        return [self.passages[i] for i in scored[:k]]


def build_index(passages: list[Passage], params: Bm25Params = Bm25Params()) -> Bm25Index:
    return Bm25Index(passages, params)


def _require(obj: dict, field: str, line_no: int):
    if field not in obj:
        raise MissingField(f"line {line_no}: missing field {field!r}", line_no)
    return obj[field]


def load_passages(path: str | Path) -> list[Passage]:
    """Load a KB file: JSONL of {"id", "title", "text"}."""
    passages = []
    seen: set[str] = set()
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"line {line_no}: {exc}", line_no) from exc
        pid = str(_require(obj, "id", line_no))
        if pid in seen:
            raise DuplicateId(f"line {line_no}: duplicate passage id {pid!r}")
        seen.add(pid)
        passages.append(
            Passage(id=pid, title=str(_require(obj, "title", line_no)), text=str(_require(obj, "text", line_no)))
        )
    return passages


def load_precomputed_results(path: str | Path) -> dict[str, list[Passage]]:
    """Load a precomputed retrieval dump.

    JSONL of {"query_id", "passages": [{"id","title","text","source"}...]}
    in rank order; file order is preserved as the rank order.
    """
    results: dict[str, list[Passage]] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"line {line_no}: {exc}", line_no) from exc
        qid = str(_require(obj, "query_id", line_no))
        raw = _require(obj, "passages", line_no)
        passages = []
        for rank, entry in enumerate(raw, 1):
            passages.append(
                Passage(
                    id=str(_require(entry, "id", line_no)),
                    title=str(_require(entry, "title", line_no)),
                    text=str(_require(entry, "text", line_no)),
                    source=str(entry.get("source", "kb")),
                    rank=rank,
                )
            )
        results[qid] = passages
    return results


def sentence_pool(passages: list[Passage]) -> tuple[SentenceSpan, ...]:
    """All sentences of `passages`, ordered by (passage rank, position in passage)."""
    pool: list[SentenceSpan] = []
    for p in passages:
        pool.extend(split_sentences(p.id, p.text))
    return tuple(pool)


def default_top_k(context_window_tokens: int) -> int | None:
    """Passage budget per QA-model context window; None means all passages."""
    if context_window_tokens >= 8192:
        return None
    if context_window_tokens >= 4096:
        return 11
    return 9
