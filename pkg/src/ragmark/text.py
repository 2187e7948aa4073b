"""Text normalization, term extraction, and sentence segmentation.

Everything here is deterministic and rule-based: whitespace tokenization,
Unicode-aware lowercasing with surrounding punctuation stripped, and a
terminator-based sentence splitter with an abbreviation guard. No stemming,
no lemmatization, no model calls.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Load the stopword list, one word per line, from `path` or the bundled file."""
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
    else:
        text = resources.files("ragmark.data").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


STOPWORDS = load_stopwords()


@dataclass(frozen=True)
class Term:
    surface: str
    is_stopword: bool


@dataclass(frozen=True)
class SentenceSpan:
    """One sentence inside a passage; slicing text[start:end] is the sentence verbatim."""

    passage_id: str
    start: int
    end: int
    terms: tuple[Term, ...]

    def slice(self, passage_text: str) -> str:
        return passage_text[self.start : self.end]


def normalize_term(raw: str, stopwords: frozenset[str] = STOPWORDS) -> Term | None:
    """Lowercase `raw` and strip surrounding non-alphanumeric characters.

    Returns None when stripping leaves nothing (e.g. punctuation-only input).
    Interior punctuation, including hyphens, is kept intact.
    """
    surface = raw.lower()
    lo, hi = 0, len(surface)
    while lo < hi and not surface[lo].isalnum():
        lo += 1
    while hi > lo and not surface[hi - 1].isalnum():
        hi -= 1
    surface = surface[lo:hi]
    if not surface:
        return None
    return Term(surface=surface, is_stopword=surface in stopwords)


def extract_terms(
    text: str,
    drop_stopwords: bool = True,
    stopwords: frozenset[str] = STOPWORDS,
) -> tuple[Term, ...]:
    """Whitespace-split and normalize `text`, preserving order and duplicates."""
    out = []
    for piece in text.split():
        term = normalize_term(piece, stopwords)
        if term is None:
            continue
        if drop_stopwords and term.is_stopword:
            continue
        out.append(term)
    return tuple(out)


def term_surfaces(terms: tuple[Term, ...] | list[Term]) -> set[str]:
    """Unique surfaces of a term sequence."""
    return {t.surface for t in terms}


# Trailing strings that look like sentence ends but are not.
ABBREVIATIONS = frozenset(
    {
        "dr.",
        "mr.",
        "mrs.",
        "ms.",
        "prof.",
        "st.",
        "jr.",
        "sr.",
        "vs.",
        "etc.",
        "e.g.",
        "i.e.",
        "u.s.",
        "u.k.",
        "no.",
        "fig.",
        "eq.",
        "inc.",
        "ltd.",
        "co.",
        "al.",
        "approx.",
        "dept.",
    }
)

_TERMINATORS = frozenset(".!?")


def _is_sentence_end(text: str, i: int) -> bool:
    """True when the terminator at position `i` genuinely ends a sentence."""
    if i + 1 < len(text) and not text[i + 1].isspace():
        return False
    if text[i] == ".":
        # Never split inside digit.digit (handles "7.4" before a linebreak edge case
        # only when the dot is between digits, which the whitespace check above
        # already excludes; guard kept for terminal "...7.4" followed by space).
        if 0 < i < len(text) - 1 and text[i - 1].isdigit() and text[i + 1].isdigit():
            return False
        # Abbreviation guard: inspect the word ending at this dot.
        j = i
        while j > 0 and not text[j - 1].isspace():
            j -= 1
        word = text[j : i + 1].lower()
        if word in ABBREVIATIONS:
            return False
        # Initials such as "J." or dotted acronyms not in the guard list.
        if len(word) == 2 and word[0].isalpha():
            return False
    return True


def split_sentences(
    passage_id: str,
    passage_text: str,
    stopwords: frozenset[str] = STOPWORDS,
) -> tuple[SentenceSpan, ...]:
    """Segment `passage_text` into non-overlapping sentence spans.

    Splits on '.', '!', '?' followed by whitespace or end of text, with an
    abbreviation guard and a digit.digit guard. A passage without any
    terminator yields a single span. Spans never include surrounding
    whitespace, so reslicing is verbatim.
    """
    spans: list[SentenceSpan] = []
    n = len(passage_text)
    pos = 0
    while pos < n:
        while pos < n and passage_text[pos].isspace():
            pos += 1
        if pos >= n:
            break
        end = None
        for i in range(pos, n):
            if passage_text[i] in _TERMINATORS and _is_sentence_end(passage_text, i):
                end = i + 1
                break
        if end is None:
            end = n
            while end > pos and passage_text[end - 1].isspace():
                end -= 1
        sentence = passage_text[pos:end]
        spans.append(
            SentenceSpan(
                passage_id=passage_id,
                start=pos,
                end=end,
                terms=extract_terms(sentence, drop_stopwords=False, stopwords=stopwords),
            )
        )
        pos = end
    return tuple(spans)


def content_surfaces(span: SentenceSpan) -> set[str]:
    """Unique non-stopword surfaces of a sentence span."""
    return {t.surface for t in span.terms if not t.is_stopword}
