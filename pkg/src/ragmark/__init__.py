"""Unsupervised evidence selection and in-place highlighting for RAG pipelines."""

from .alignment import AlignmentScore, CoverageState, align_score, coverage
from .config import RunConfig
from .embeddings import (
    OfflineEmbeddingProvider,
    ProviderConfig,
    RemoteEmbeddingProvider,
    TermVector,
    VectorCache,
    cosine,
)
from .highlight import HighlightedDocument, evidence_only, highlight, strip_tags
from .pipeline import EvidenceResult, select_evidence
from .retriever import (
    EvidenceChain,
    RetrieverParams,
    collect_evidence,
    retrieve_chain,
    retrieve_parallel_chains,
)
from .stepback import ConjoinedQuery, conjoin, stepback_choice_concepts, stepback_question
from .store import Bm25Params, Passage, build_index, load_precomputed_results, sentence_pool
from .text import SentenceSpan, Term, extract_terms, normalize_term, split_sentences

__all__ = [
    "AlignmentScore",
    "Bm25Params",
    "ConjoinedQuery",
    "CoverageState",
    "EvidenceChain",
    "EvidenceResult",
    "HighlightedDocument",
    "OfflineEmbeddingProvider",
    "Passage",
    "ProviderConfig",
    "RemoteEmbeddingProvider",
    "RetrieverParams",
    "RunConfig",
    "SentenceSpan",
    "Term",
    "TermVector",
    "VectorCache",
    "align_score",
    "build_index",
    "collect_evidence",
    "conjoin",
    "cosine",
    "coverage",
    "evidence_only",
    "extract_terms",
    "highlight",
    "load_precomputed_results",
    "normalize_term",
    "retrieve_chain",
    "retrieve_parallel_chains",
    "select_evidence",
    "sentence_pool",
    "split_sentences",
    "stepback_choice_concepts",
    "stepback_question",
    "strip_tags",
]

__version__ = "0.1.0"
