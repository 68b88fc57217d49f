"""Command-line entry points.

Subcommands: generate, derive-labels, train, detect, eval, serve.
Exit codes: 0 success, 1 validation/usage error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .align import MatchConfig, STOPWORDS, heuristic_detect, load_stopwords
from .core import DatasetError, ValidationError, load_dataset, save_dataset
from .crf import TrainConfig, featurize, load_model, save_model, train, viterbi_decode
from .generate import GenConfig, TemplateProvider, build_dataset, load_lexicon, weak_label_seed
from .pipeline import build_metrics_report, span_groundings
from .service import create_app, detection_payload, schema_from_dict


def _add_match_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--threshold", type=float, default=0.72,
                        help="fuzzy match threshold (golden fixtures use 0.35)")
    parser.add_argument("--top-k", type=int, default=3)
    parser.add_argument("--max-ngram", type=int, default=5)
    parser.add_argument("--stopwords", type=Path, default=None,
                        help="stopword list file, one word per line; feeds the "
                             "stopword feature and the heuristic baseline (use "
                             "the same list for train and serve)")


def _match_cfg(args: argparse.Namespace) -> MatchConfig:
    return MatchConfig(max_ngram=args.max_ngram, threshold=args.threshold, top_k=args.top_k)


def _stopwords(args: argparse.Namespace) -> frozenset[str]:
    return load_stopwords(args.stopwords) if args.stopwords else STOPWORDS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quandary",
        description="Generate, detect, and explain ambiguous/unanswerable questions over tables",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="seed corpus -> dataset with problematic examples")
    p.add_argument("--seed-corpus", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--ratio", type=float, default=0.20)
    p.add_argument("--ambiguous-share", type=float, default=0.55)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--lexicon", type=Path, default=None,
                   help="JSONL near-synonym lexicon for the candidate provider")
    _add_match_flags(p)

    p = sub.add_parser("derive-labels", help="annotate an answerable corpus with weak labels")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_match_flags(p)

    p = sub.add_parser("train", help="train the CRF labeler on a labeled dataset")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--learning-rate", type=float, default=0.3)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--l2-lambda", type=float, default=1e-4)
    p.add_argument("--lr-decay", type=float, default=1.0)
    p.add_argument("--rng-seed", type=int, default=0)
    _add_match_flags(p)

    p = sub.add_parser("detect", help="one-shot detection for a question against a table")
    p.add_argument("--table", type=Path, required=True, help="table schema JSON file")
    p.add_argument("--question", type=str, required=True)
    p.add_argument("--model", type=Path, required=True)
    _add_match_flags(p)

    p = sub.add_parser("eval", help="evaluate a model or the heuristic baseline on a labeled dataset")
    p.add_argument("--model", type=Path, default=None, help="required unless --baseline heuristic")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--baseline", choices=("crf", "heuristic"), default="crf")
    _add_match_flags(p)

    p = sub.add_parser("serve", help="start the HTTP detection service")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--tables-dir", type=Path, default=None)
    p.add_argument("--port", type=int, default=8490)
    p.add_argument("--host", type=str, default="127.0.0.1")
    p.add_argument("--ui-dir", type=Path, default=None,
                   help="static UI bundle (default: ./frontend/dist when present)")
    _add_match_flags(p)

    return parser


def _cmd_generate(args) -> int:
    seeds = load_dataset(args.seed_corpus)
    lexicon = load_lexicon(args.lexicon) if args.lexicon else {}
    provider = TemplateProvider(lexicon=lexicon)
    gen_cfg = GenConfig(
        problematic_ratio=args.ratio,
        ambiguous_share=args.ambiguous_share,
        rng_seed=args.rng_seed,
    )
    examples, report = build_dataset(seeds, provider, gen_cfg, _match_cfg(args))
    save_dataset(examples, args.out)
    print(json.dumps(report.to_dict(), ensure_ascii=False))
    return 0


def _cmd_derive_labels(args) -> int:
    cfg = _match_cfg(args)
    out = []
    skipped = 0
    for example in load_dataset(args.data):
        labeled = weak_label_seed(example, cfg)
        if labeled is None:
            skipped += 1
            out.append(example)
        else:
            out.append(labeled)
    save_dataset(out, args.out)
    print(json.dumps({"examples": len(out), "skipped_sql": skipped}))
    return 0


def _cmd_train(args) -> int:
    cfg = _match_cfg(args)
    stopwords = _stopwords(args)
    examples = load_dataset(args.data)
    if not examples:
        print("error: training dataset is empty", file=sys.stderr)
        return 1
    featurized = [
        (featurize(ex.tokens, ex.schema, cfg, stopwords=stopwords), ex.labels)
        for ex in examples
    ]
    config = TrainConfig(
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        batch_size=args.batch_size,
        l2_lambda=args.l2_lambda,
        lr_decay=args.lr_decay,
        seed=args.rng_seed,
    )
    model = train(featurized, config)
    save_model(model, args.out)
    print(json.dumps({
        "examples": len(examples),
        "features": len(model.feature_vocabulary),
        "initial_loss": model.losses[0],
        "final_loss": model.losses[-1],
    }))
    return 0


def _cmd_detect(args) -> int:
    model = load_model(args.model)
    schema = schema_from_dict(json.loads(args.table.read_text(encoding="utf-8")))
    payload = detection_payload(
        args.question, schema, model, _match_cfg(args), stopwords=_stopwords(args)
    )
    print(json.dumps(payload, ensure_ascii=False))
    return 0


def _cmd_eval(args) -> int:
    cfg = _match_cfg(args)
    stopwords = _stopwords(args)
    if args.baseline == "crf":
        if args.model is None:
            print("error: --model is required unless --baseline heuristic", file=sys.stderr)
            return 1
        model = load_model(args.model)
    else:
        model = None
    examples = load_dataset(args.data)
    predictions = []
    golds = []
    for ex in examples:
        if model is not None:
            features = featurize(ex.tokens, ex.schema, cfg, stopwords=stopwords)
            labels = viterbi_decode(model, features)
        else:
            labels = heuristic_detect(
                ex.tokens, ex.schema, cfg, question=ex.question, stopwords=stopwords
            )
        pairs = span_groundings(ex.question, ex.tokens, labels, ex.schema, cfg)
        predictions.append((labels, pairs))
        golds.append((ex.labels, ex.groundings))
    report = build_metrics_report(predictions, golds)
    print(json.dumps(report.to_dict(), ensure_ascii=False))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    model = load_model(args.model)
    ui_dir = args.ui_dir
    if ui_dir is None:
        default_ui = Path("frontend") / "dist"
        ui_dir = default_ui if default_ui.is_dir() else None
    app = create_app(
        model,
        _match_cfg(args),
        tables_dir=args.tables_dir,
        ui_dir=ui_dir,
        stopwords=_stopwords(args),
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "derive-labels": _cmd_derive_labels,
    "train": _cmd_train,
    "detect": _cmd_detect,
    "eval": _cmd_eval,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        return _COMMANDS[args.command](args)
    except (DatasetError, ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
