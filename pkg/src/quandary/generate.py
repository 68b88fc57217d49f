"""Counterfactual generation of unanswerable and ambiguous examples.

An answerable seed (question, schema, SQL) becomes problematic by mutating
the table only -- the question text is never touched. Deleting the column a
question span is grounded to yields an unanswerable example; replacing it
with two semantically associated near-synonym columns yields an ambiguous
one. Candidate near-synonyms come from a pluggable provider.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

from .align import MatchConfig, fuzzy_score
from .core import (
    BioLabel,
    Category,
    Concept,
    ConceptKind,
    GroundingPair,
    LabeledExample,
    TableSchema,
    category_of,
    label_spans,
)
from .pipeline import derive_weak_labels
from .sql import SqlQuery, parse_sql


def _norm_name(name: str) -> str:
    return " ".join(name.lower().split())


# ---------------------------------------------------------------------------
# Candidate providers
# ---------------------------------------------------------------------------

class CandidateProvider(Protocol):
    def propose(self, target_column: str, schema: TableSchema) -> list[str]:
        """Column-name candidates: distinct, non-empty, and distinct
        (case-insensitively) from every existing schema column."""
        ...


#: Compositional patterns producing columns semantically associated with,
#: yet not equivalent to, the target column.
COLUMN_TEMPLATES = (
    "Our {col}",
    "Opponent {col}",
    "{col} (Home)",
    "{col} (Away)",
    "Average {col}",
    "Total {col}",
    "Previous {col}",
)


@dataclass
class TemplateProvider:
    """Built-in provider: curated near-synonyms from a lexicon when the
    target column has an entry, compositional templates otherwise."""

    lexicon: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def propose(self, target_column: str, schema: TableSchema) -> list[str]:
        existing = {_norm_name(c) for c in schema.columns}
        out: list[str] = []
        seen: set[str] = set()

        def add(name: str) -> None:
            key = _norm_name(name)
            if key and key not in existing and key not in seen:
                seen.add(key)
                out.append(name)

        curated = self.lexicon.get(_norm_name(target_column), ())
        if curated:
            for name in curated:
                add(name)
        else:
            for template in COLUMN_TEMPLATES:
                add(template.format(col=target_column))
        return out


def load_lexicon(path) -> dict[str, tuple[str, ...]]:
    """JSONL lines {"column": str, "synonyms": [str]} keyed by normalized column."""
    lexicon: dict[str, tuple[str, ...]] = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            lexicon[_norm_name(obj["column"])] = tuple(obj["synonyms"])
    return lexicon


def validate_candidates(candidates: Sequence[str], schema: TableSchema) -> None:
    existing = {_norm_name(c) for c in schema.columns}
    seen: set[str] = set()
    for name in candidates:
        key = _norm_name(name)
        if not key:
            raise ValueError("candidate column name is empty")
        if key in existing:
            raise ValueError(f"candidate {name!r} duplicates an existing column")
        if key in seen:
            raise ValueError(f"candidate {name!r} proposed twice")
        seen.add(key)


def rerank_candidates(candidates: Sequence[str], target: str) -> list[str]:
    """Order candidates by similarity to the target, then by shorter
    length, then lexicographically."""
    if not candidates:
        raise ValueError("no candidates")
    return sorted(candidates, key=lambda c: (-fuzzy_score(c, target), len(c), c))


# ---------------------------------------------------------------------------
# Target alignment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GenConfig:
    problematic_ratio: float = 0.20
    ambiguous_share: float = 0.55
    rng_seed: int = 0
    added_columns: int = 2

    def __post_init__(self):
        # zero is allowed as the degenerate "weak labels only" case
        if not (0.0 <= self.problematic_ratio < 1.0):
            raise ValueError("problematic_ratio must be in [0, 1)")
        if not (0.0 <= self.ambiguous_share <= 1.0):
            raise ValueError("ambiguous_share must be in [0, 1]")


def aligned_columns(
    example: LabeledExample, sql: SqlQuery, cfg: MatchConfig
) -> list[tuple[str, tuple[int, int]]]:
    """SQL columns that own a question span under the weak-label assignment.

    Using the greedy best-first assignment (rather than each column's best
    span in isolation) keeps a column from aligning to a token that really
    mentions a stronger concept, e.g. "Player" grabbing the "per" inside a
    "points per game" mention.
    """
    weak = derive_weak_labels(example.tokens, example.question, sql, example.schema, cfg)
    out = []
    for pair in weak.groundings:
        concept = pair.candidates[0][0]
        if concept.kind is ConceptKind.COLUMN:
            out.append((concept.column, pair.span))
    return out


def align_target(
    example: LabeledExample,
    sql: SqlQuery,
    cfg: MatchConfig,
    rng: random.Random,
) -> Optional[tuple[str, tuple[int, int]]]:
    """Pick a SQL column with a unique best-matching question span.

    Sampling among the aligned columns is uniform under the supplied RNG;
    None means the seed cannot be used.
    """
    aligned = aligned_columns(example, sql, cfg)
    if not aligned:
        return None
    return aligned[rng.randrange(len(aligned))]


# ---------------------------------------------------------------------------
# Mutations
# ---------------------------------------------------------------------------

def _rebuild(
    example: LabeledExample,
    schema: TableSchema,
    sql: SqlQuery,
    span: tuple[int, int],
    span_labels: tuple[BioLabel, BioLabel],
    span_grounding: Optional[GroundingPair],
    cfg: MatchConfig,
) -> LabeledExample:
    """Relabel against the mutated schema, overriding the target span."""
    weak = derive_weak_labels(example.tokens, example.question, sql, schema, cfg)
    labels = list(weak.labels)
    first, last = span
    # clear derived spans that touch the target span entirely, so no
    # orphaned I-X tail survives the override
    for i, j, _ in label_spans(labels):
        if i <= last and j >= first:
            for k in range(i, j + 1):
                labels[k] = BioLabel.O
    begin, inside = span_labels
    labels[first] = begin
    for k in range(first + 1, last + 1):
        labels[k] = inside
    groundings = [
        pair for pair in weak.groundings
        if pair.span[1] < first or pair.span[0] > last
    ]
    if span_grounding is not None:
        groundings.append(span_grounding)
    groundings.sort(key=lambda p: p.span)
    return LabeledExample(
        question=example.question,
        tokens=example.tokens,
        schema=schema,
        sql=example.sql,
        labels=tuple(labels),
        groundings=tuple(groundings),
        category=category_of(labels),
    )


def make_unanswerable(
    example: LabeledExample,
    cfg: MatchConfig,
    rng: random.Random,
    target_column: Optional[str] = None,
) -> Optional[LabeledExample]:
    """Delete the target column so its question span loses all support.

    Returns None (skip) when no target aligns, when deleting would empty
    the schema, or when a surviving column still matches the span at the
    threshold (the mutation would not be sound).
    """
    sql = _seed_sql(example)
    if sql is None:
        return None
    target = _pick_target(example, sql, cfg, rng, target_column)
    if target is None:
        return None
    column, span = target
    if len(example.schema.columns) <= 1:
        return None

    columns = tuple(c for c in example.schema.columns if c != column)
    cells = {c: v for c, v in example.schema.cells.items() if c != column}
    schema = TableSchema(_mutated_id(example.schema.table_id, "unk", column), columns, cells)

    text = example.span_text(*span)
    if any(fuzzy_score(text, c) >= cfg.threshold for c in columns):
        return None
    return _rebuild(
        example, schema, sql, span, (BioLabel.B_UNK, BioLabel.I_UNK), None, cfg
    )


def make_ambiguous(
    example: LabeledExample,
    provider: CandidateProvider,
    cfg: MatchConfig,
    rng: random.Random,
    target_column: Optional[str] = None,
) -> Optional[LabeledExample]:
    """Replace the target column with the top two reranked near-synonyms.

    The added columns take the target's position in column order; both must
    match the question span at the threshold, otherwise the seed is skipped.
    """
    sql = _seed_sql(example)
    if sql is None:
        return None
    target = _pick_target(example, sql, cfg, rng, target_column)
    if target is None:
        return None
    column, span = target

    candidates = provider.propose(column, example.schema)
    if len(candidates) < 2:
        return None
    validate_candidates(candidates, example.schema)
    added = rerank_candidates(candidates, column)[:2]

    text = example.span_text(*span)
    scored = [(name, fuzzy_score(text, name)) for name in added]
    if any(score < cfg.threshold for _, score in scored):
        return None

    position = example.schema.columns.index(column)
    columns = (
        example.schema.columns[:position]
        + tuple(added)
        + example.schema.columns[position + 1:]
    )
    cells = {c: v for c, v in example.schema.cells.items() if c != column}
    schema = TableSchema(_mutated_id(example.schema.table_id, "amb", column), columns, cells)

    pair = GroundingPair(
        span=span,
        candidates=tuple(
            (Concept.for_column(name), score)
            for name, score in sorted(scored, key=lambda ns: (-ns[1], ns[0]))
        ),
    )
    return _rebuild(
        example, schema, sql, span, (BioLabel.B_AMB, BioLabel.I_AMB), pair, cfg
    )


def _mutated_id(table_id: str, kind: str, column: str) -> str:
    # distinct mutations of one table must not share an id
    return f"{table_id}-{kind}-{_norm_name(column).replace(' ', '-')}"


def _seed_sql(example: LabeledExample) -> Optional[SqlQuery]:
    if example.sql is None or example.category is not Category.ANSWERABLE:
        return None
    try:
        return parse_sql(example.sql)
    except ValueError:
        return None


def _pick_target(
    example: LabeledExample,
    sql: SqlQuery,
    cfg: MatchConfig,
    rng: random.Random,
    target_column: Optional[str],
) -> Optional[tuple[str, tuple[int, int]]]:
    if target_column is None:
        return align_target(example, sql, cfg, rng)
    for column, span in aligned_columns(example, sql, cfg):
        if column == target_column:
            return column, span
    return None


# ---------------------------------------------------------------------------
# Corpus construction
# ---------------------------------------------------------------------------

@dataclass
class StatsReport:
    ambiguous: int = 0
    unanswerable: int = 0
    answerable: int = 0
    tables: int = 0
    skipped_seeds: int = 0
    skipped_sql: int = 0
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "ambiguous": self.ambiguous,
            "unanswerable": self.unanswerable,
            "answerable": self.answerable,
            "tables": self.tables,
            "skipped_seeds": self.skipped_seeds,
            "skipped_sql": self.skipped_sql,
            "warnings": list(self.warnings),
        }


def weak_label_seed(example: LabeledExample, cfg: MatchConfig) -> Optional[LabeledExample]:
    sql = _seed_sql(example)
    if sql is None:
        return None
    weak = derive_weak_labels(example.tokens, example.question, sql, example.schema, cfg)
    return LabeledExample(
        question=example.question,
        tokens=example.tokens,
        schema=example.schema,
        sql=example.sql,
        labels=weak.labels,
        groundings=weak.groundings,
        category=Category.ANSWERABLE,
    )


def build_dataset(
    seeds: Sequence[LabeledExample],
    provider: CandidateProvider,
    gen_cfg: GenConfig,
    match_cfg: MatchConfig,
) -> tuple[list[LabeledExample], StatsReport]:
    """All seeds with weak labels plus generated problematic examples.

    round(ratio * len(seeds)) problematic examples are generated, split
    between ambiguous and unanswerable by ambiguous_share. Seeds are drawn
    without replacement along a seeded permutation; seeds that cannot be
    mutated soundly are skipped and replaced by the next eligible one. The
    whole construction is deterministic in (seeds, provider, configs).
    """
    report = StatsReport()
    out: list[LabeledExample] = []
    eligible: list[tuple[int, LabeledExample]] = []

    for idx, seed in enumerate(seeds):
        labeled = weak_label_seed(seed, match_cfg)
        if labeled is None:
            report.skipped_sql += 1
            report.warnings.append(
                f"seed {idx}: SQL missing or outside the supported fragment; kept unlabeled"
            )
            out.append(seed)
        else:
            out.append(labeled)
            eligible.append((idx, labeled))
        report.answerable += 1

    n_problematic = round(gen_cfg.problematic_ratio * len(seeds))
    n_ambiguous = round(gen_cfg.ambiguous_share * n_problematic)
    n_unanswerable = n_problematic - n_ambiguous

    master = random.Random(gen_cfg.rng_seed)
    order = list(range(len(eligible)))
    master.shuffle(order)
    plans = [(pos, master.randrange(1 << 30)) for pos in order]

    generated: list[LabeledExample] = []
    remaining = iter(plans)
    for kind, quota in (("ambiguous", n_ambiguous), ("unanswerable", n_unanswerable)):
        made = 0
        while made < quota:
            try:
                pos, seed_value = next(remaining)
            except StopIteration:
                report.warnings.append(
                    f"corpus exhausted: only {made} of {quota} {kind} examples generated"
                )
                break
            _, seed = eligible[pos]
            rng = random.Random(seed_value)
            if kind == "ambiguous":
                mutated = make_ambiguous(seed, provider, match_cfg, rng)
            else:
                mutated = make_unanswerable(seed, match_cfg, rng)
            if mutated is None:
                report.skipped_seeds += 1
                continue
            generated.append(mutated)
            made += 1
        if kind == "ambiguous":
            report.ambiguous = made
        else:
            report.unanswerable = made

    out.extend(generated)
    report.tables = len({ex.schema.table_id for ex in out})
    return out, report
