"""Iterative multi-hop evidence retrieval with query reformulation.

One chain: pick a seed sentence by alignment score against the full query,
then repeatedly re-score the remaining sentences against the query terms not
yet covered (expanding with already-selected evidence terms when few remain)
until the query is fully covered, the hop cap is hit, or the pool is empty.
N parallel chains vary only the rank of the seed sentence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .alignment import AlignmentScore, align_score, coverage
from .embeddings import TermVector
from .errors import EmptyCandidatePool
from .text import SentenceSpan, Term, content_surfaces


@dataclass(frozen=True)
class RetrieverParams:
    n_parallel: int = 3
    k_max_hops: int = 6
    m_threshold: float = 0.98
    t_ambiguity: int = 4

    def __post_init__(self) -> None:
        if self.n_parallel < 1 or self.k_max_hops < 1:
            raise ValueError("n_parallel and k_max_hops must be positive")
        if self.t_ambiguity < 0:
            raise ValueError("t_ambiguity must be non-negative")


@dataclass(frozen=True)
class Hop:
    hop_index: int  # 1-based
    sentence: SentenceSpan
    score: AlignmentScore
    remainder_after: frozenset[str]


@dataclass(frozen=True)
class EvidenceChain:
    hops: tuple[Hop, ...]
    terminated_by: str  # "full-coverage" | "hop-cap" | "no-candidates"
    scoring_calls: int  # sentences scored while building this chain

    def sentences(self) -> tuple[SentenceSpan, ...]:
        return tuple(h.sentence for h in self.hops)


def _rank_candidates(
    working_terms: Sequence[Term],
    candidates: list[tuple[int, SentenceSpan]],
    vectors: Mapping[str, TermVector],
) -> list[tuple[float, int, AlignmentScore]]:
    """Score candidates and sort best-first; ties go to the lowest pool position."""
    scored = [
        (align_score(working_terms, span, vectors), pos) for pos, span in candidates
    ]
    scored.sort(key=lambda item: (-item[0].score, item[1]))
    return [(s.score, pos, s) for s, pos in scored]


def retrieve_chain(
    query_terms: Sequence[Term],
    candidates: Sequence[SentenceSpan],
    vectors: Mapping[str, TermVector],
    params: RetrieverParams = RetrieverParams(),
    first_pick_rank: int = 1,
) -> EvidenceChain:
    """Build one evidence chain.

    Hop 1 takes the sentence at `first_pick_rank` (1-based) in the alignment
    ranking against the full query. Later hops re-score unselected sentences
    against the remainder terms, expanded with terms from already-selected
    evidence when fewer than `t_ambiguity` remain uncovered.
    """
    if not candidates:
        raise EmptyCandidatePool("no candidate sentences")
    if not 1 <= first_pick_rank <= params.n_parallel:
        raise ValueError("first_pick_rank must be in 1..n_parallel")

    query_unique = {t.surface for t in query_terms}
    remaining = list(enumerate(candidates))
    scoring_calls = 0

    ranked = _rank_candidates(query_terms, remaining, vectors)
    scoring_calls += len(remaining)
    if first_pick_rank > len(ranked):
        first_pick_rank = len(ranked)
    _, pick_pos, pick_score = ranked[first_pick_rank - 1]

    hops: list[Hop] = []
    selected: list[SentenceSpan] = []

    def select(pos: int, score: AlignmentScore) -> frozenset[str]:
        span = candidates[pos]
        selected.append(span)
        remaining[:] = [(p, s) for p, s in remaining if p != pos]
        state = coverage(query_unique, selected, vectors, params.m_threshold)
        hops.append(
            Hop(
                hop_index=len(hops) + 1,
                sentence=span,
                score=score,
                remainder_after=state.remainder,
            )
        )
        return state.remainder

    remainder = select(pick_pos, pick_score)
    while True:
        if not remainder:
            return EvidenceChain(tuple(hops), "full-coverage", scoring_calls)
        if len(hops) >= params.k_max_hops:
            return EvidenceChain(tuple(hops), "hop-cap", scoring_calls)
        if not remaining:
            return EvidenceChain(tuple(hops), "no-candidates", scoring_calls)

        working: set[str] = set(remainder)
        if len(remainder) < params.t_ambiguity:
            for span in selected:
                working |= content_surfaces(span)
        working_terms = tuple(Term(s, False) for s in sorted(working))

        ranked = _rank_candidates(working_terms, remaining, vectors)
        scoring_calls += len(remaining)
        _, pick_pos, pick_score = ranked[0]
        remainder = select(pick_pos, pick_score)


def retrieve_parallel_chains(
    query_terms: Sequence[Term],
    candidates: Sequence[SentenceSpan],
    vectors: Mapping[str, TermVector],
    params: RetrieverParams = RetrieverParams(),
) -> tuple[EvidenceChain, ...]:
    """One chain per seed rank 1..n_parallel (fewer when the pool is small)."""
    if not candidates:
        raise EmptyCandidatePool("no candidate sentences")
    n = min(params.n_parallel, len(candidates))
    return tuple(
        retrieve_chain(query_terms, candidates, vectors, params, first_pick_rank=rank)
        for rank in range(1, n + 1)
    )


def collect_evidence(
    chains: Sequence[EvidenceChain],
    pool: Sequence[SentenceSpan] = (),
) -> tuple[SentenceSpan, ...]:
    """Union of all hop sentences, deduplicated, in original document order.

    Document order is the pool order when given (passage rank, then position
    in passage), else (passage_id, start).
    """
    seen: set[tuple[str, int]] = set()
    spans: list[SentenceSpan] = []
    for chain in chains:
        for hop in chain.hops:
            key = (hop.sentence.passage_id, hop.sentence.start)
            if key not in seen:
                seen.add(key)
                spans.append(hop.sentence)
    if pool:
        order = {(s.passage_id, s.start): i for i, s in enumerate(pool)}
        spans.sort(key=lambda s: order.get((s.passage_id, s.start), len(order)))
    else:
        spans.sort(key=lambda s: (s.passage_id, s.start))
    return tuple(spans)
