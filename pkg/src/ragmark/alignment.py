"""Query-to-sentence alignment scoring and soft-match term coverage.

A sentence's relevance to a query is the sum, over query terms, of each
term's best cosine similarity against the sentence's content terms
(late-interaction / MaxSim style). Coverage declares a query term matched
once any selected evidence term exceeds a similarity threshold M.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .embeddings import TermVector, cosine
from .errors import MissingVector
from .text import SentenceSpan, Term, content_surfaces


@dataclass(frozen=True)
class AlignmentScore:
    sentence: SentenceSpan
    score: float
    per_term: dict[str, float]  # unique query surface -> best cosine


@dataclass(frozen=True)
class CoverageState:
    covered: frozenset[str]
    remainder: frozenset[str]
    threshold: float


def _vector(surface: str, vectors: Mapping[str, TermVector]) -> TermVector:
    try:
        return vectors[surface]
    except KeyError:
        raise MissingVector(f"no embedding for term {surface!r}") from None


def align_score(
    query_terms: Sequence[Term],
    sentence: SentenceSpan,
    vectors: Mapping[str, TermVector],
) -> AlignmentScore:
    """Score a sentence against a query term sequence.

    Each occurrence in `query_terms` contributes its best cosine against the
    sentence's content terms, so duplicated query terms count twice. A query
    term contributes 0 when the sentence has no content terms.
    """
    sentence_surfaces = sorted(content_surfaces(sentence))
    per_term: dict[str, float] = {}
    for qt in query_terms:
        if qt.surface in per_term:
            continue
        qv = _vector(qt.surface, vectors)
        best = 0.0
        for ps in sentence_surfaces:
            best = max(best, cosine(qv, _vector(ps, vectors)))
        per_term[qt.surface] = best
    score = sum(per_term[qt.surface] for qt in query_terms)
    return AlignmentScore(sentence=sentence, score=score, per_term=per_term)


def coverage(
    query_surfaces: set[str] | frozenset[str],
    evidence: Sequence[SentenceSpan],
    vectors: Mapping[str, TermVector],
    threshold: float = 0.98,
) -> CoverageState:
    """Partition unique query surfaces into covered / remainder.

    A query term is covered iff its best cosine against the union of all
    evidence content terms is strictly greater than `threshold`.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must be in (0, 1]")
    evidence_surfaces: set[str] = set()
    for span in evidence:
        evidence_surfaces |= content_surfaces(span)
    evidence_sorted = sorted(evidence_surfaces)
    covered: set[str] = set()
    for qs in sorted(query_surfaces):
        if qs in evidence_surfaces:
            covered.add(qs)  # identical surface: cosine 1 > M for any M <= 1
            continue
        qv = _vector(qs, vectors)
        for es in evidence_sorted:
            if cosine(qv, _vector(es, vectors)) > threshold:
                covered.add(qs)
                break
    remainder = frozenset(query_surfaces) - covered
    return CoverageState(covered=frozenset(covered), remainder=remainder, threshold=threshold)
