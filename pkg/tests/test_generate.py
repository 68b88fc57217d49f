import random

import pytest

from quandary.align import MatchConfig, fuzzy_score
from quandary.core import BioLabel, Category, TableSchema, dumps_example, tokenize
from quandary.demo import build_seed_corpus, DEMO_MATCH, demo_corpus, golden_tables
from quandary.generate import (
    GenConfig,
    TemplateProvider,
    align_target,
    build_dataset,
    load_lexicon,
    make_ambiguous,
    make_unanswerable,
    rerank_candidates,
    validate_candidates,
    weak_label_seed,
)
from quandary.sql import parse_sql

O = BioLabel.O
CFG = DEMO_MATCH

FIG3_LEXICON = TemplateProvider(
    lexicon={"score": ("Our Score", "Opponent Score", "Score History Notes")}
)


@pytest.fixture()
def fig3_seed(demo_examples):
    seed = demo_examples[8]
    assert seed.question == "What is the score where record is 0–2?"
    return seed


class TestAlignTarget:
    def test_grounds_score_span(self, fig3_seed):
        sql = parse_sql(fig3_seed.sql)
        rng = random.Random(0)
        seen = set()
        for _ in range(40):
            column, span = align_target(fig3_seed, sql, CFG, rng)
            seen.add((column, span))
        # both SQL columns have unique best spans; sampling hits both
        assert ("Score", (3, 3)) in seen
        assert ("Record", (5, 5)) in seen
        assert len(seen) == 2

    def test_deterministic_under_seed(self, fig3_seed):
        sql = parse_sql(fig3_seed.sql)
        a = align_target(fig3_seed, sql, CFG, random.Random(7))
        b = align_target(fig3_seed, sql, CFG, random.Random(7))
        assert a == b

    def test_no_lexical_mention(self):
        schema = TableSchema("t", ("Alpha", "Beta"))
        from quandary.core import make_example

        seed = make_example(
            "completely unrelated words here",
            schema,
            [O] * 4,
            sql="SELECT Alpha FROM t",
        )
        assert align_target(seed, parse_sql(seed.sql), CFG, random.Random(0)) is None


class TestMakeUnanswerable:
    def test_fig3_deletion(self, fig3_seed):
        mutated = make_unanswerable(fig3_seed, CFG, random.Random(1), target_column="Score")
        assert mutated is not None
        assert "Score" not in mutated.schema.columns
        assert "Score" not in mutated.schema.cells
        assert mutated.question == fig3_seed.question
        assert mutated.category is Category.UNANSWERABLE
        assert mutated.labels[3] is BioLabel.B_UNK
        # the surviving column keeps its mention label
        assert mutated.labels[5] is BioLabel.B_COL
        assert mutated.labels[7] is BioLabel.B_VAL
        assert mutated.sql == fig3_seed.sql

    def test_single_column_schema_skipped(self):
        from quandary.core import make_example

        schema = TableSchema("t", ("Sales",))
        seed = make_example("show sales", schema, [O, O], sql="SELECT Sales FROM t")
        assert make_unanswerable(seed, CFG, random.Random(0)) is None

    def test_near_synonym_leftover_skipped(self):
        from quandary.core import make_example

        schema = TableSchema("t", ("Score", "Our Score"))
        seed = make_example(
            "what is the score", schema, [O, O, O, O], sql="SELECT Score FROM t"
        )
        assert make_unanswerable(seed, CFG, random.Random(0), target_column="Score") is None

    def test_soundness_over_generated(self, fig3_seed):
        mutated = make_unanswerable(fig3_seed, CFG, random.Random(1), target_column="Score")
        span = fig3_seed.span_text(3, 3)
        assert all(fuzzy_score(span, c) < CFG.threshold for c in mutated.schema.columns)


class TestRerank:
    def test_similarity_then_length_order(self):
        # ordering fixed by the frozen metric: Our Score 0.590,
        # Opponent Score 0.417, Score History Notes 0.362
        out = rerank_candidates(
            ["Score History Notes", "Opponent Score", "Our Score"], "Score"
        )
        assert out == ["Our Score", "Opponent Score", "Score History Notes"]

    def test_single_candidate(self):
        assert rerank_candidates(["Only"], "Only Column") == ["Only"]

    def test_equal_score_and_length_breaks_lexicographically(self):
        out = rerank_candidates(["Score (Home)", "Score (Away)"], "Score")
        assert out == ["Score (Away)", "Score (Home)"]
        assert fuzzy_score("Score (Home)", "Score") == fuzzy_score("Score (Away)", "Score")

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="no candidates"):
            rerank_candidates([], "Score")


class TestMakeAmbiguous:
    def test_fig3_addition(self, fig3_seed):
        mutated = make_ambiguous(
            fig3_seed, FIG3_LEXICON, CFG, random.Random(2), target_column="Score"
        )
        assert mutated is not None
        # added columns take the deleted column's position
        assert mutated.schema.columns == (
            "Date", "Opponent", "Our Score", "Opponent Score", "Record"
        )
        assert mutated.category is Category.AMBIGUOUS
        assert mutated.labels[3] is BioLabel.B_AMB
        pair = next(p for p in mutated.groundings if p.span == (3, 3))
        assert [c.text for c, _ in pair.candidates] == ["Our Score", "Opponent Score"]
        assert mutated.question == fig3_seed.question
        # ambiguous soundness: both added columns clear the threshold
        span = fig3_seed.span_text(3, 3)
        matching = [c for c in mutated.schema.columns if fuzzy_score(span, c) >= CFG.threshold]
        assert len(matching) >= 2

    def test_provider_shortfall_skipped(self, fig3_seed):
        class OneCandidate:
            def propose(self, target, schema):
                return ["Our Score"]

        assert (
            make_ambiguous(fig3_seed, OneCandidate(), CFG, random.Random(0), target_column="Score")
            is None
        )

    def test_invalid_provider_rejected(self, fig3_seed):
        class Clashing:
            def propose(self, target, schema):
                return ["record", "Our Score"]  # collides with existing column

        with pytest.raises(ValueError, match="existing column"):
            make_ambiguous(fig3_seed, Clashing(), CFG, random.Random(0), target_column="Score")

    def test_below_threshold_candidates_skipped(self, fig3_seed):
        class Unrelated:
            def propose(self, target, schema):
                return ["Zebra Count", "Quux Flavor"]

        assert (
            make_ambiguous(fig3_seed, Unrelated(), CFG, random.Random(0), target_column="Score")
            is None
        )


class TestTemplateProvider:
    def test_filters_existing_columns(self):
        schema = TableSchema("t", ("Score", "Total Score"))
        proposals = TemplateProvider().propose("Score", schema)
        assert "Total Score" not in proposals
        assert "Our Score" in proposals
        validate_candidates(proposals, schema)

    def test_lexicon_file(self, tmp_path):
        path = tmp_path / "lex.jsonl"
        path.write_text('{"column": "Score", "synonyms": ["Final Score"]}\n')
        provider = TemplateProvider(lexicon=load_lexicon(path))
        proposals = provider.propose("Score", TableSchema("t", ("Score",)))
        assert proposals[0] == "Final Score"


@pytest.fixture(scope="module")
def built():
    seeds = build_seed_corpus(200, rng_seed=11)
    examples, report = build_dataset(
        seeds, TemplateProvider(), GenConfig(rng_seed=5), DEMO_MATCH
    )
    return seeds, examples, report


class TestBuildDataset:
    def test_counts(self, built):
        seeds, examples, report = built
        assert report.answerable == 200
        assert report.ambiguous == round(0.55 * 40)
        assert report.unanswerable == 40 - round(0.55 * 40)
        assert len(examples) == 200 + 40

    def test_report_shape(self, built):
        _, _, report = built
        data = report.to_dict()
        for field in ("ambiguous", "unanswerable", "answerable", "tables"):
            assert isinstance(data[field], int)

    def test_questions_never_modified(self, built):
        seeds, examples, _ = built
        seed_questions = {s.question for s in seeds}
        for example in examples:
            assert example.question in seed_questions

    def test_soundness(self, built):
        _, examples, _ = built
        from quandary.core import label_spans

        for example in examples:
            for first, last, cat in label_spans(example.labels):
                text = example.span_text(first, last)
                matches = [
                    c for c in example.schema.columns
                    if fuzzy_score(text, c) >= DEMO_MATCH.threshold
                ]
                if cat == "UNK":
                    assert matches == []
                elif cat == "AMB":
                    assert len(matches) >= 2

    def test_byte_identical_regeneration(self, built):
        seeds, examples, _ = built
        again, _ = build_dataset(seeds, TemplateProvider(), GenConfig(rng_seed=5), DEMO_MATCH)
        assert "\n".join(map(dumps_example, examples)) == "\n".join(map(dumps_example, again))

    def test_different_seed_differs(self, built):
        seeds, examples, _ = built
        other, _ = build_dataset(seeds, TemplateProvider(), GenConfig(rng_seed=6), DEMO_MATCH)
        assert "\n".join(map(dumps_example, examples)) != "\n".join(map(dumps_example, other))

    def test_zero_ratio_yields_weak_labeled_seeds_only(self):
        seeds = build_seed_corpus(30, rng_seed=2)
        examples, report = build_dataset(
            seeds, TemplateProvider(), GenConfig(problematic_ratio=0.0, rng_seed=1), DEMO_MATCH
        )
        assert len(examples) == 30
        assert report.ambiguous == report.unanswerable == 0
        assert all(e.category is Category.ANSWERABLE for e in examples)
        assert all(any(l is not O for l in e.labels) for e in examples)

    def test_shortfall_warns_never_fabricates(self):
        seeds = build_seed_corpus(6, rng_seed=4)
        # a ratio this high cannot be met from six seeds without replacement
        examples, report = build_dataset(
            seeds, TemplateProvider(), GenConfig(problematic_ratio=0.99, rng_seed=1), DEMO_MATCH
        )
        assert report.ambiguous + report.unanswerable < round(0.99 * 6) or report.warnings == []
        generated = len(examples) - len(seeds)
        assert generated == report.ambiguous + report.unanswerable


class TestWeakLabelSeed:
    def test_unsupported_sql_returns_none(self):
        from quandary.core import make_example

        schema = TableSchema("t", ("A", "B"))
        seed = make_example(
            "what is a where b is 1 or 2",
            schema,
            [O] * 9,
            sql="SELECT A FROM t WHERE B = 1 OR B = 2",
        )
        assert weak_label_seed(seed, CFG) is None
