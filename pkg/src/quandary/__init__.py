"""Toolkit for fabricating and detecting ambiguous or unanswerable questions
over single tables: counterfactual table mutation, a fuzzy-grounding
heuristic baseline, a trainable CRF span labeler, and templated explanations.
"""

from .align import MatchConfig, fuzzy_score, ground, heuristic_detect
from .core import (
    BioLabel,
    Category,
    Concept,
    ConceptKind,
    GroundingPair,
    LabeledExample,
    TableSchema,
    Token,
    load_dataset,
    make_example,
    save_dataset,
    tokenize,
)
from .crf import CrfModel, TrainConfig, featurize, load_model, save_model, train, viterbi_decode
from .generate import (
    CandidateProvider,
    GenConfig,
    StatsReport,
    TemplateProvider,
    build_dataset,
    make_ambiguous,
    make_unanswerable,
    rerank_candidates,
)
from .pipeline import (
    DetectionResult,
    MetricsReport,
    build_metrics_report,
    derive_weak_labels,
    detect_then_explain,
    eval_grounding,
    eval_labels,
    render_response,
)
from .sql import Aggregation, SqlQuery, extract_concepts, format_sql, parse_sql

__version__ = "0.1.0"

__all__ = [
    "Aggregation",
    "BioLabel",
    "CandidateProvider",
    "Category",
    "Concept",
    "ConceptKind",
    "CrfModel",
    "DetectionResult",
    "GenConfig",
    "GroundingPair",
    "LabeledExample",
    "MatchConfig",
    "MetricsReport",
    "SqlQuery",
    "StatsReport",
    "TableSchema",
    "TemplateProvider",
    "Token",
    "TrainConfig",
    "build_dataset",
    "build_metrics_report",
    "derive_weak_labels",
    "detect_then_explain",
    "eval_grounding",
    "eval_labels",
    "extract_concepts",
    "featurize",
    "format_sql",
    "fuzzy_score",
    "ground",
    "heuristic_detect",
    "load_dataset",
    "load_model",
    "make_ambiguous",
    "make_example",
    "make_unanswerable",
    "parse_sql",
    "render_response",
    "rerank_candidates",
    "save_dataset",
    "save_model",
    "tokenize",
    "train",
    "viterbi_decode",
]
