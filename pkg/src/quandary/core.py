"""Core domain types, tokenization, and JSONL dataset serialization.

Everything here is an immutable value object; the serialized dataset format
is one JSON object per line with the question text, the table schema, the
BIO label sequence, and span groundings. Tokens are not serialized -- they
are recomputed deterministically from the question text on load.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence


class ValidationError(ValueError):
    """An object violates one of the documented invariants."""


class DatasetError(ValidationError):
    """A dataset file line is malformed or violates an invariant."""

    def __init__(self, message: str, line_no: Optional[int] = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


# ---------------------------------------------------------------------------
# Labels
# ---------------------------------------------------------------------------

class BioLabel(str, Enum):
    B_COL = "B-COL"
    I_COL = "I-COL"
    B_VAL = "B-VAL"
    I_VAL = "I-VAL"
    B_AMB = "B-AMB"
    I_AMB = "I-AMB"
    B_UNK = "B-UNK"
    I_UNK = "I-UNK"
    O = "O"

    @property
    def category(self) -> str:
        """Label category with the B/I boundary prefix collapsed."""
        return "O" if self is BioLabel.O else self.value[2:]

    @property
    def is_begin(self) -> bool:
        return self.value.startswith("B-")

    @property
    def is_inside(self) -> bool:
        return self.value.startswith("I-")


#: Canonical label order; index positions double as CRF state ids.
LABELS: tuple[BioLabel, ...] = (
    BioLabel.B_COL, BioLabel.I_COL,
    BioLabel.B_VAL, BioLabel.I_VAL,
    BioLabel.B_AMB, BioLabel.I_AMB,
    BioLabel.B_UNK, BioLabel.I_UNK,
    BioLabel.O,
)

LABEL_INDEX: dict[BioLabel, int] = {label: i for i, label in enumerate(LABELS)}

#: Span categories, i.e. label categories other than O.
SPAN_CATEGORIES = ("COL", "VAL", "AMB", "UNK")


def check_bio_wellformed(labels: Sequence[BioLabel]) -> None:
    """Raise ValidationError unless I-X labels follow B-X or I-X."""
    prev: Optional[BioLabel] = None
    for i, label in enumerate(labels):
        if label.is_inside:
            ok = prev is not None and prev.category == label.category and prev is not BioLabel.O
            if not ok:
                raise ValidationError(
                    f"BIO well-formedness violated: {label.value} at position {i} "
                    f"does not continue a {label.category} span"
                )
        prev = label


def label_spans(labels: Sequence[BioLabel]) -> list[tuple[int, int, str]]:
    """Contiguous non-O spans as (first, last, category), token-inclusive."""
    spans: list[tuple[int, int, str]] = []
    start: Optional[int] = None
    cat = ""
    for i, label in enumerate(labels):
        if label is BioLabel.O or label.is_begin:
            if start is not None:
                spans.append((start, i - 1, cat))
                start = None
        if label.is_begin:
            start, cat = i, label.category
        elif label.is_inside and start is None:
            # tolerated only for sequences not validated upstream
            start, cat = i, label.category
    if start is not None:
        spans.append((start, len(labels) - 1, cat))
    return spans


class Category(str, Enum):
    ANSWERABLE = "answerable"
    AMBIGUOUS = "ambiguous"
    UNANSWERABLE = "unanswerable"


def category_of(labels: Sequence[BioLabel]) -> Category:
    """Category implied by a label sequence; AMB presence dominates UNK."""
    cats = {label.category for label in labels}
    if "AMB" in cats:
        return Category.AMBIGUOUS
    if "UNK" in cats:
        return Category.UNANSWERABLE
    return Category.ANSWERABLE


# ---------------------------------------------------------------------------
# Tokens
# ---------------------------------------------------------------------------

_PUNCT = set(string.punctuation)


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int
    norm: str

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValidationError(f"token offsets invalid: [{self.start}, {self.end})")


def tokenize(text: str) -> list[Token]:
    """Split on whitespace, then detach leading/trailing ASCII punctuation.

    Offsets index the original string; ``norm`` is the lowercased token text.
    Non-ASCII punctuation (e.g. the dash in "0–2") never splits a token.
    """
    tokens: list[Token] = []

    def emit(start: int, end: int) -> None:
        chunk = text[start:end]
        tokens.append(Token(chunk, start, end, chunk.lower()))

    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace():
            j += 1
        lo, hi = i, j
        while lo < hi and text[lo] in _PUNCT:
            emit(lo, lo + 1)
            lo += 1
        trailing = []
        while hi > lo and text[hi - 1] in _PUNCT:
            trailing.append(hi - 1)
            hi -= 1
        if lo < hi:
            emit(lo, hi)
        for pos in reversed(trailing):
            emit(pos, pos + 1)
        i = j
    return tokens


def span_text(question: str, tokens: Sequence[Token], first: int, last: int) -> str:
    """Original question substring covering tokens[first..last] inclusive."""
    return question[tokens[first].start:tokens[last].end]


# ---------------------------------------------------------------------------
# Schema and concepts
# ---------------------------------------------------------------------------

def _norm_name(name: str) -> str:
    return " ".join(name.lower().split())


@dataclass(frozen=True)
class TableSchema:
    table_id: str
    columns: tuple[str, ...]
    cells: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "cells", {c: tuple(v) for c, v in self.cells.items()})
        seen = set()
        for col in self.columns:
            if not col or not col.strip():
                raise ValidationError(f"table {self.table_id!r}: empty column name")
            key = _norm_name(col)
            if key in seen:
                raise ValidationError(
                    f"table {self.table_id!r}: duplicate column {col!r} after normalization"
                )
            seen.add(key)
        for col, values in self.cells.items():
            if col not in self.columns:
                raise ValidationError(
                    f"table {self.table_id!r}: cells key {col!r} is not a column"
                )
            if len(set(values)) != len(values):
                raise ValidationError(
                    f"table {self.table_id!r}: duplicate cell values under {col!r}"
                )

    def concepts(self) -> list["Concept"]:
        """All groundable concepts: every column, then every cell value."""
        out = [Concept.for_column(c) for c in self.columns]
        for col in self.columns:
            for value in self.cells.get(col, ()):
                out.append(Concept(ConceptKind.VALUE, value, col))
        return out


class ConceptKind(str, Enum):
    COLUMN = "column"
    VALUE = "value"


@dataclass(frozen=True)
class Concept:
    kind: ConceptKind
    text: str
    column: str

    def __post_init__(self):
        if self.kind is ConceptKind.COLUMN and self.column != self.text:
            raise ValidationError("column concept must have column == text")

    @staticmethod
    def for_column(name: str) -> "Concept":
        return Concept(ConceptKind.COLUMN, name, name)


@dataclass(frozen=True)
class GroundingPair:
    span: tuple[int, int]
    candidates: tuple[tuple[Concept, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "span", tuple(self.span))
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if not self.candidates:
            raise ValidationError("grounding pair has no candidates")
        if len(self.candidates) > 3:
            raise ValidationError("grounding pair has more than 3 candidates")
        scores = [s for _, s in self.candidates]
        if any(s1 < s2 for s1, s2 in zip(scores, scores[1:])):
            raise ValidationError("grounding candidates not sorted by descending score")
        if any(not (0.0 <= s <= 1.0) for s in scores):
            raise ValidationError("grounding score outside [0, 1]")
        i, j = self.span
        if i > j or i < 0:
            raise ValidationError(f"grounding span invalid: [{i}, {j}]")

    @property
    def concepts(self) -> frozenset[Concept]:
        return frozenset(c for c, _ in self.candidates)


# ---------------------------------------------------------------------------
# Labeled examples
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LabeledExample:
    question: str
    tokens: tuple[Token, ...]
    schema: TableSchema
    sql: Optional[str]
    labels: tuple[BioLabel, ...]
    groundings: tuple[GroundingPair, ...]
    category: Category

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "groundings", tuple(self.groundings))
        if len(self.labels) != len(self.tokens):
            raise ValidationError("label/token length mismatch")
        check_bio_wellformed(self.labels)
        if category_of(self.labels) is not self.category:
            raise ValidationError(
                f"category {self.category.value!r} inconsistent with labels"
            )
        groundable = {"COL", "VAL", "AMB"}
        for pair in self.groundings:
            i, j = pair.span
            if j >= len(self.tokens):
                raise ValidationError(f"grounding span [{i}, {j}] outside token range")
            for k in range(i, j + 1):
                if self.labels[k].category not in groundable:
                    raise ValidationError(
                        f"grounding span [{i}, {j}] not covered by COL/VAL/AMB labels"
                    )

    def span_text(self, first: int, last: int) -> str:
        return span_text(self.question, self.tokens, first, last)


def make_example(
    question: str,
    schema: TableSchema,
    labels: Sequence[BioLabel],
    groundings: Iterable[GroundingPair] = (),
    sql: Optional[str] = None,
) -> LabeledExample:
    """Build a LabeledExample with tokens and category derived, then validated."""
    labels = tuple(labels)
    return LabeledExample(
        question=question,
        tokens=tuple(tokenize(question)),
        schema=schema,
        sql=sql,
        labels=labels,
        groundings=tuple(groundings),
        category=category_of(labels),
    )


# ---------------------------------------------------------------------------
# JSONL serialization
# ---------------------------------------------------------------------------

def example_to_dict(example: LabeledExample) -> dict:
    return {
        "question": example.question,
        "table_id": example.schema.table_id,
        "columns": list(example.schema.columns),
        "cells": {c: list(v) for c, v in example.schema.cells.items()},
        "sql": example.sql,
        "labels": [label.value for label in example.labels],
        "groundings": [
            {
                "span": list(pair.span),
                "candidates": [
                    {
                        "kind": concept.kind.value,
                        "text": concept.text,
                        "column": concept.column,
                        "score": score,
                    }
                    for concept, score in pair.candidates
                ],
            }
            for pair in example.groundings
        ],
        "category": example.category.value,
    }


def example_from_dict(obj: dict) -> LabeledExample:
    try:
        schema = TableSchema(
            table_id=obj["table_id"],
            columns=tuple(obj["columns"]),
            cells={c: tuple(v) for c, v in (obj.get("cells") or {}).items()},
        )
        labels = tuple(BioLabel(s) for s in obj["labels"])
        groundings = tuple(
            GroundingPair(
                span=(int(g["span"][0]), int(g["span"][1])),
                candidates=tuple(
                    (
                        Concept(ConceptKind(c["kind"]), c["text"], c["column"]),
                        float(c["score"]),
                    )
                    for c in g["candidates"]
                ),
            )
            for g in obj.get("groundings", [])
        )
        category = Category(obj["category"])
    except (KeyError, TypeError, IndexError) as exc:
        raise DatasetError(f"missing or malformed field: {exc}") from exc

    example = LabeledExample(
        question=obj["question"],
        tokens=tuple(tokenize(obj["question"])),
        schema=schema,
        sql=obj.get("sql"),
        labels=labels,
        groundings=groundings,
        category=category,
    )
    return example


def dumps_example(example: LabeledExample) -> str:
    return json.dumps(example_to_dict(example), ensure_ascii=False)


def load_dataset(path) -> list[LabeledExample]:
    """Load a JSONL dataset, validating every example's invariants.

    Errors carry the 1-based line number of the offending line.
    """
    examples: list[LabeledExample] = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"invalid JSON: {exc.msg}", line_no) from exc
            try:
                examples.append(example_from_dict(obj))
            except DatasetError as exc:
                raise DatasetError(str(exc), line_no) from exc
            except ValidationError as exc:
                raise DatasetError(str(exc), line_no) from exc
    return examples


def save_dataset(examples: Iterable[LabeledExample], path) -> None:
    """Write examples as JSONL; load_dataset(save_dataset(x)) round-trips."""
    with open(path, "w", encoding="utf-8") as handle:
        for example in examples:
            handle.write(dumps_example(example))
            handle.write("\n")
