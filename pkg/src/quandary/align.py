"""Fuzzy span-to-concept matching: grounding and the heuristic detector.

The similarity metric blends character-trigram Dice overlap with normalized
edit similarity, both computed on lowercased, whitespace-collapsed strings.
It is symmetric and reaches 1.0 exactly when the normalized strings are
equal. The threshold is a config knob: tests and shipped fixtures pin it
explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

from .core import (
    BioLabel,
    Concept,
    ConceptKind,
    GroundingPair,
    TableSchema,
    Token,
    check_bio_wellformed,
)


@dataclass(frozen=True)
class MatchConfig:
    max_ngram: int = 5
    threshold: float = 0.72
    top_k: int = 3

    def __post_init__(self):
        if self.max_ngram < 1:
            raise ValueError("max_ngram must be >= 1")
        if not (0.0 < self.threshold < 1.0):
            raise ValueError("threshold must be in (0, 1)")
        # grounding pairs carry at most 3 candidates, so a larger top_k
        # would fail later anyway; fail here with a clear message
        if not (1 <= self.top_k <= 3):
            raise ValueError("top_k must be between 1 and 3")


# ---------------------------------------------------------------------------
# Similarity metric
# ---------------------------------------------------------------------------

def _normalize(text: str) -> str:
    return " ".join(text.lower().split())


def _trigrams(text: str) -> frozenset[str]:
    # pg_trgm-style padding so every non-empty string has trigrams
    padded = f"  {text} "
    return frozenset(padded[i:i + 3] for i in range(len(padded) - 2))


def _levenshtein(a: str, b: str) -> int:
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost))
        prev = cur
    return prev[-1]


@lru_cache(maxsize=1 << 18)
def _score_normalized(a: str, b: str) -> float:
    ta, tb = _trigrams(a), _trigrams(b)
    dice = 2.0 * len(ta & tb) / (len(ta) + len(tb))
    edit_sim = 1.0 - _levenshtein(a, b) / max(len(a), len(b))
    return 0.5 * dice + 0.5 * edit_sim


def fuzzy_score(span_text: str, concept_text: str) -> float:
    """Similarity in [0, 1]; symmetric; 1.0 iff normalized strings are equal."""
    a, b = _normalize(span_text), _normalize(concept_text)
    if not a or not b:
        raise ValueError("fuzzy_score requires non-empty strings")
    if a > b:
        a, b = b, a
    return _score_normalized(a, b)


# ---------------------------------------------------------------------------
# Grounding
# ---------------------------------------------------------------------------

def _candidate_spans(
    tokens: Sequence[Token],
    question: str,
    concepts: Sequence[Concept],
    cfg: MatchConfig,
) -> list[tuple[int, int, list[tuple[Concept, float]]]]:
    """Every n-gram with its above-threshold candidates, top_k per span."""
    out = []
    m = len(tokens)
    for i in range(m):
        for j in range(i, min(i + cfg.max_ngram, m)):
            text = question[tokens[i].start:tokens[j].end]
            if not text.strip():
                continue
            scored = []
            for concept in concepts:
                score = fuzzy_score(text, concept.text)
                if score >= cfg.threshold:
                    scored.append((concept, score))
            if scored:
                scored.sort(key=lambda cs: (-cs[1], cs[0].kind.value, cs[0].column, cs[0].text))
                out.append((i, j, scored[:cfg.top_k]))
    return out


def ground(
    tokens: Sequence[Token],
    schema: TableSchema,
    cfg: MatchConfig,
    question: Optional[str] = None,
) -> list[GroundingPair]:
    """Link question n-grams (n <= max_ngram) to schema concepts.

    Overlapping spans are resolved by best candidate score, then span
    length, then leftmost start; the result is non-overlapping, ordered
    by span start.
    """
    if question is None:
        question = _reconstruct(tokens)
    candidates = _candidate_spans(tokens, question, schema.concepts(), cfg)
    candidates.sort(key=lambda c: (-c[2][0][1], -(c[1] - c[0]), c[0]))
    taken: set[int] = set()
    chosen = []
    for i, j, scored in candidates:
        span = range(i, j + 1)
        if any(k in taken for k in span):
            continue
        taken.update(span)
        chosen.append(GroundingPair(span=(i, j), candidates=tuple(scored)))
    chosen.sort(key=lambda p: p.span)
    return chosen


def _reconstruct(tokens: Sequence[Token]) -> str:
    if not tokens:
        return ""
    end = tokens[-1].end
    chars = [" "] * end
    for tok in tokens:
        chars[tok.start:tok.end] = tok.text
    return "".join(chars)


# ---------------------------------------------------------------------------
# Heuristic detector
# ---------------------------------------------------------------------------

#: Question glue words: articles, wh-words, auxiliaries, prepositions,
#: comparison and command verbs common in questions over tables.
STOPWORDS = frozenset("""
a an the this that these those there here it its is are was were be been being
am do does did done has have had having will would shall should can could may
might must what which who whom whose when where why how and or not no nor of
in on at by for with from to into onto over under between among per as if
each every all any some most more less least fewer greater higher lower than
then above below many much few i me my we our us you your he him his she her
they them their show list give tell find get display please whats who's what's
""".split())


def load_stopwords(path) -> frozenset[str]:
    """One word per line; blank lines ignored."""
    with open(path, encoding="utf-8") as handle:
        return frozenset(w.strip().lower() for w in handle if w.strip())


def _is_numeric(norm: str) -> bool:
    stripped = norm.replace(",", "").replace("%", "")
    has_digit = any(ch.isdigit() for ch in stripped)
    return has_digit and all(ch.isdigit() or ch in ".:/–—-" for ch in stripped)


def _is_punct(norm: str) -> bool:
    return not any(ch.isalnum() for ch in norm)


def is_content_word(token: Token, stopwords: frozenset[str] = STOPWORDS) -> bool:
    norm = token.norm
    return (
        norm not in stopwords
        and not _is_punct(norm)
        and not _is_numeric(norm)
        and len(norm) >= 3
    )


def heuristic_detect(
    tokens: Sequence[Token],
    schema: TableSchema,
    cfg: MatchConfig,
    question: Optional[str] = None,
    stopwords: frozenset[str] = STOPWORDS,
) -> list[BioLabel]:
    """N-gram matching baseline.

    Grounded spans with several candidates are ambiguous; with one
    candidate they are column/value mentions; leftover runs of unmatched
    content words are unanswerable spans.
    """
    labels = [BioLabel.O] * len(tokens)
    for pair in ground(tokens, schema, cfg, question=question):
        i, j = pair.span
        if len(pair.candidates) >= 2:
            begin, inside = BioLabel.B_AMB, BioLabel.I_AMB
        elif pair.candidates[0][0].kind is ConceptKind.COLUMN:
            begin, inside = BioLabel.B_COL, BioLabel.I_COL
        else:
            begin, inside = BioLabel.B_VAL, BioLabel.I_VAL
        labels[i] = begin
        for k in range(i + 1, j + 1):
            labels[k] = inside

    k = 0
    while k < len(tokens):
        if labels[k] is BioLabel.O and is_content_word(tokens[k], stopwords):
            end = k
            while (
                end + 1 < len(tokens)
                and labels[end + 1] is BioLabel.O
                and is_content_word(tokens[end + 1], stopwords)
            ):
                end += 1
            labels[k] = BioLabel.B_UNK
            for pos in range(k + 1, end + 1):
                labels[pos] = BioLabel.I_UNK
            k = end + 1
        else:
            k += 1

    check_bio_wellformed(labels)
    return labels
