"""End-to-end evidence selection: queries in, highlighted passages out."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .embeddings import EmbeddingProvider, TermVector
from .highlight import HighlightedDocument, highlight
from .retriever import EvidenceChain, RetrieverParams, collect_evidence, retrieve_parallel_chains
from .stepback import ChatClient, ConjoinedQuery, expand_query
from .store import Passage, sentence_pool
from .text import SentenceSpan, content_surfaces


@dataclass(frozen=True)
class EvidenceResult:
    queries: tuple[ConjoinedQuery, ...]
    chains: tuple[EvidenceChain, ...]
    evidence: tuple[SentenceSpan, ...]
    document: HighlightedDocument
    scoring_calls: int


def build_queries(
    question: str,
    choices: dict[str, str] | None,
    stepback_client: ChatClient | None,
) -> tuple[ConjoinedQuery, ...]:
    """One conjoined query per MCQ choice when step-back is on, else a single query."""
    if stepback_client is not None and choices:
        return tuple(
            expand_query(question, stepback_client, choice_text=choices[label])
            for label in sorted(choices)
        )
    return (expand_query(question, stepback_client),)


def gather_vectors(
    queries: Sequence[ConjoinedQuery],
    pool: Sequence[SentenceSpan],
    provider: EmbeddingProvider,
) -> dict[str, TermVector]:
    surfaces: set[str] = set()
    for q in queries:
        surfaces |= {t.surface for t in q.terms}
    for span in pool:
        surfaces |= content_surfaces(span)
    return provider.embed_terms(surfaces)


def select_evidence(
    question: str,
    passages: list[Passage],
    provider: EmbeddingProvider,
    params: RetrieverParams = RetrieverParams(),
    stepback_client: ChatClient | None = None,
    choices: dict[str, str] | None = None,
) -> EvidenceResult:
    """Run the full selection pipeline over already-retrieved passages."""
    queries = build_queries(question, choices, stepback_client)
    pool = sentence_pool(passages)
    vectors = gather_vectors(queries, pool, provider)
    chains: list[EvidenceChain] = []
    for query in queries:
        if query.terms:
            chains.extend(retrieve_parallel_chains(query.terms, pool, vectors, params))
    evidence = collect_evidence(chains, pool)
    document = highlight(passages, list(evidence))
    return EvidenceResult(
        queries=tuple(queries),
        chains=tuple(chains),
        evidence=evidence,
        document=document,
        scoring_calls=sum(c.scoring_calls for c in chains),
    )
