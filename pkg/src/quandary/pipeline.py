"""Weak-supervision labeling, detect-then-explain, responses, and metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

from .align import MatchConfig, STOPWORDS, fuzzy_score
from .core import (
    BioLabel,
    Category,
    Concept,
    ConceptKind,
    GroundingPair,
    Token,
    TableSchema,
    category_of,
    label_spans,
    span_text,
    tokenize,
)
from .crf import CrfModel, featurize, viterbi_decode
from .sql import SqlQuery, extract_concepts


# ---------------------------------------------------------------------------
# Weak supervision from SQL
# ---------------------------------------------------------------------------

class WeakLabels(NamedTuple):
    labels: tuple[BioLabel, ...]
    groundings: tuple[GroundingPair, ...]
    unmatched: tuple[Concept, ...]


def _norm_name(name: str) -> str:
    return " ".join(name.lower().split())


def best_span(
    tokens: Sequence[Token],
    question: str,
    concept_text: str,
    cfg: MatchConfig,
) -> Optional[tuple[int, int, float]]:
    """Unique best-scoring n-gram for a concept, or None.

    None when no n-gram clears the threshold or when the best score is
    tied between two different spans.
    """
    best: Optional[tuple[int, int, float]] = None
    tied = False
    m = len(tokens)
    for i in range(m):
        for j in range(i, min(i + cfg.max_ngram, m)):
            text = question[tokens[i].start:tokens[j].end]
            if not text.strip():
                continue
            score = fuzzy_score(text, concept_text)
            if score < cfg.threshold:
                continue
            if best is None or score > best[2]:
                best = (i, j, score)
                tied = False
            elif score == best[2] and (i, j) != best[:2]:
                tied = True
    if best is None or tied:
        return None
    return best


def derive_weak_labels(
    tokens: Sequence[Token],
    question: str,
    sql: SqlQuery,
    schema: TableSchema,
    cfg: MatchConfig,
) -> WeakLabels:
    """Pseudo labels from the concepts the SQL query references.

    Each schema-present SQL concept claims its unique best-matching span as
    a COL or VAL mention; concepts without a qualifying span (or whose span
    is already claimed) are reported as unmatched. Remaining tokens are O.
    """
    labels = [BioLabel.O] * len(tokens)
    groundings: list[GroundingPair] = []
    unmatched: list[Concept] = []
    present = {_norm_name(c) for c in schema.columns}

    matched: list[tuple[float, int, int, int, Concept]] = []
    for order, concept in enumerate(extract_concepts(sql)):
        if _norm_name(concept.column) not in present:
            unmatched.append(concept)
            continue
        found = best_span(tokens, question, concept.text, cfg)
        if found is None:
            unmatched.append(concept)
            continue
        i, j, score = found
        matched.append((score, order, i, j, concept))

    # claim spans best-first so a weak column echo cannot shadow the exact
    # value mention it overlaps
    matched.sort(key=lambda m: (-m[0], m[1]))
    for score, _, i, j, concept in matched:
        if any(labels[k] is not BioLabel.O for k in range(i, j + 1)):
            unmatched.append(concept)
            continue
        if concept.kind is ConceptKind.COLUMN:
            begin, inside = BioLabel.B_COL, BioLabel.I_COL
        else:
            begin, inside = BioLabel.B_VAL, BioLabel.I_VAL
        labels[i] = begin
        for k in range(i + 1, j + 1):
            labels[k] = inside
        groundings.append(GroundingPair(span=(i, j), candidates=((concept, score),)))

    groundings.sort(key=lambda p: p.span)
    return WeakLabels(tuple(labels), tuple(groundings), tuple(unmatched))


# ---------------------------------------------------------------------------
# Detection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DetectionResult:
    labels: tuple[BioLabel, ...]
    groundings: tuple[GroundingPair, ...]
    verdict: Category
    response: str


def _span_candidates(
    text: str, schema: TableSchema, cfg: MatchConfig
) -> list[tuple[Concept, float]]:
    scored = []
    for concept in schema.concepts():
        score = fuzzy_score(text, concept.text)
        if score >= cfg.threshold:
            scored.append((concept, score))
    scored.sort(key=lambda cs: (-cs[1], cs[0].kind.value, cs[0].column, cs[0].text))
    return scored[:cfg.top_k]


def span_groundings(
    question: str,
    tokens: Sequence[Token],
    labels: Sequence[BioLabel],
    schema: TableSchema,
    cfg: MatchConfig,
) -> tuple[GroundingPair, ...]:
    """Ground each predicted COL/VAL/AMB span against the schema; COL/VAL
    spans keep only the top concept, AMB spans keep up to top_k."""
    groundings: list[GroundingPair] = []
    for first, last, cat in label_spans(labels):
        if cat not in ("COL", "VAL", "AMB"):
            continue
        candidates = _span_candidates(span_text(question, tokens, first, last), schema, cfg)
        if cat in ("COL", "VAL"):
            candidates = candidates[:1]
        if candidates:
            groundings.append(GroundingPair(span=(first, last), candidates=tuple(candidates)))
    return tuple(groundings)


def detect_then_explain(
    question: str,
    schema: TableSchema,
    model: CrfModel,
    cfg: MatchConfig,
    stopwords: frozenset[str] = STOPWORDS,
) -> DetectionResult:
    """Label the question, ground the problematic/mention spans, and render
    an explanation for non-answerable verdicts."""
    if not question or not question.strip():
        raise ValueError("question is empty")
    tokens = tokenize(question)
    features = featurize(tokens, schema, cfg, stopwords=stopwords)
    labels = tuple(viterbi_decode(model, features))
    groundings = span_groundings(question, tokens, labels, schema, cfg)
    verdict = category_of(labels)
    result = DetectionResult(labels, groundings, verdict, "")
    if verdict is not Category.ANSWERABLE:
        result = DetectionResult(labels, groundings, verdict, render_response(result, question))
    return result


AMBIGUOUS_TEMPLATE = (
    'Oops, this question has multiple semantic meanings. '
    '"{span}" may refer to either {alternatives}.'
)
UNANSWERABLE_TEMPLATE = (
    "Sorry, we can't find an answer for you since "
    '"{span}" cannot be mapped to any concepts in your table.'
)


def _join_alternatives(names: Sequence[str]) -> str:
    quoted = [f'"{name}"' for name in names]
    if len(quoted) == 1:
        return quoted[0]
    if len(quoted) == 2:
        return f"{quoted[0]} or {quoted[1]}"
    return ", ".join(quoted[:-1]) + f", or {quoted[-1]}"


def render_response(result: DetectionResult, question: str) -> str:
    """Templated explanation naming each problematic span in span order."""
    if result.verdict is Category.ANSWERABLE:
        raise ValueError("answerable results have no response")
    tokens = tokenize(question)
    by_span = {pair.span: pair for pair in result.groundings}
    sentences = []
    for first, last, cat in label_spans(result.labels):
        if cat not in ("AMB", "UNK"):
            continue
        text = span_text(question, tokens, first, last)
        pair = by_span.get((first, last))
        if cat == "AMB" and pair is not None and len(pair.candidates) >= 2:
            names = [concept.text for concept, _ in pair.candidates]
            sentences.append(
                AMBIGUOUS_TEMPLATE.format(span=text, alternatives=_join_alternatives(names))
            )
        else:
            # AMB spans that ground to fewer than two concepts cannot name
            # alternatives; explain them as unmappable instead.
            sentences.append(UNANSWERABLE_TEMPLATE.format(span=text))
    return " ".join(sentences)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

LABEL_CATEGORIES = ("COL", "VAL", "AMB", "UNK", "O")
GROUNDED_CATEGORIES = ("COL", "VAL", "AMB")


@dataclass
class MetricsReport:
    label_accuracy: dict[str, Optional[float]]
    label_counts: dict[str, dict[str, int]]
    grounding_accuracy: dict[str, Optional[float]]
    grounding_counts: dict[str, dict[str, int]]
    span_accuracy: dict[str, Optional[float]] = field(default_factory=dict)
    span_counts: dict[str, dict[str, int]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "label_accuracy": self.label_accuracy,
            "label_counts": self.label_counts,
            "grounding_accuracy": self.grounding_accuracy,
            "grounding_counts": self.grounding_counts,
            "span_accuracy": self.span_accuracy,
            "span_counts": self.span_counts,
        }


def _ratio(correct: int, total: int) -> Optional[float]:
    return None if total == 0 else correct / total


def eval_labels(
    predictions: Sequence[Sequence[BioLabel]],
    golds: Sequence[Sequence[BioLabel]],
) -> tuple[dict[str, Optional[float]], dict[str, dict[str, int]]]:
    """Token-level accuracy per label category, B/I boundaries collapsed."""
    if len(predictions) != len(golds):
        raise ValueError("prediction/gold list length mismatch")
    counts = {cat: {"correct": 0, "total": 0} for cat in LABEL_CATEGORIES}
    for pred, gold in zip(predictions, golds):
        if len(pred) != len(gold):
            raise ValueError("prediction/gold sequence length mismatch")
        for p, g in zip(pred, gold):
            cell = counts[g.category]
            cell["total"] += 1
            if p.category == g.category:
                cell["correct"] += 1
    accuracy = {cat: _ratio(c["correct"], c["total"]) for cat, c in counts.items()}
    return accuracy, counts


def eval_spans(
    predictions: Sequence[Sequence[BioLabel]],
    golds: Sequence[Sequence[BioLabel]],
) -> tuple[dict[str, Optional[float]], dict[str, dict[str, int]]]:
    """Boundary-sensitive diagnostic: gold spans matched exactly."""
    counts = {cat: {"correct": 0, "total": 0} for cat in LABEL_CATEGORIES if cat != "O"}
    for pred, gold in zip(predictions, golds):
        pred_spans = set(label_spans(pred))
        for first, last, cat in label_spans(gold):
            counts[cat]["total"] += 1
            if (first, last, cat) in pred_spans:
                counts[cat]["correct"] += 1
    accuracy = {cat: _ratio(c["correct"], c["total"]) for cat, c in counts.items()}
    return accuracy, counts


SpanGroundings = Sequence[tuple[Sequence[BioLabel], Sequence[GroundingPair]]]


def eval_grounding(
    predictions: SpanGroundings,
    golds: SpanGroundings,
) -> tuple[dict[str, Optional[float]], dict[str, dict[str, int]]]:
    """Per-category grounding accuracy over gold grounded spans.

    A gold span counts as correct when some predicted span of the same
    category overlaps it and carries exactly the same candidate concept set.
    """
    if len(predictions) != len(golds):
        raise ValueError("prediction/gold list length mismatch")
    counts = {cat: {"correct": 0, "total": 0} for cat in GROUNDED_CATEGORIES}

    for (pred_labels, pred_pairs), (gold_labels, gold_pairs) in zip(predictions, golds):
        if len(pred_labels) != len(gold_labels):
            raise ValueError("prediction/gold sequence length mismatch")
        pred_cat = {pair.span: _span_category(pred_labels, pair.span) for pair in pred_pairs}
        for gold_pair in gold_pairs:
            cat = _span_category(gold_labels, gold_pair.span)
            if cat not in counts:
                continue
            counts[cat]["total"] += 1
            gi, gj = gold_pair.span
            for pred_pair in pred_pairs:
                pi, pj = pred_pair.span
                if pi > gj or pj < gi:
                    continue
                if pred_cat[pred_pair.span] != cat:
                    continue
                if pred_pair.concepts == gold_pair.concepts:
                    counts[cat]["correct"] += 1
                    break
    accuracy = {cat: _ratio(c["correct"], c["total"]) for cat, c in counts.items()}
    return accuracy, counts


def _span_category(labels: Sequence[BioLabel], span: tuple[int, int]) -> str:
    return labels[span[0]].category


def build_metrics_report(
    predictions: SpanGroundings,
    golds: SpanGroundings,
) -> MetricsReport:
    pred_labels = [p[0] for p in predictions]
    gold_labels = [g[0] for g in golds]
    label_acc, label_counts = eval_labels(pred_labels, gold_labels)
    ground_acc, ground_counts = eval_grounding(predictions, golds)
    span_acc, span_counts = eval_spans(pred_labels, gold_labels)
    return MetricsReport(
        label_accuracy=label_acc,
        label_counts=label_counts,
        grounding_accuracy=ground_acc,
        grounding_counts=ground_counts,
        span_accuracy=span_acc,
        span_counts=span_counts,
    )
