"""HTTP detection service: table registry, detection endpoint, and static UI."""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .align import MatchConfig, STOPWORDS
from .core import TableSchema, ValidationError, label_spans, tokenize
from .crf import CrfModel
from .pipeline import detect_then_explain


def schema_from_dict(obj: dict) -> TableSchema:
    return TableSchema(
        table_id=obj["table_id"],
        columns=tuple(obj["columns"]),
        cells={c: tuple(v) for c, v in (obj.get("cells") or {}).items()},
    )


def schema_to_dict(schema: TableSchema) -> dict:
    return {
        "table_id": schema.table_id,
        "columns": list(schema.columns),
        "cells": {c: list(v) for c, v in schema.cells.items()},
    }


def detection_payload(
    question: str,
    schema: TableSchema,
    model: CrfModel,
    cfg: MatchConfig,
    stopwords: frozenset[str] = STOPWORDS,
) -> dict:
    """Wire form of a detection result; spans carry character offsets into
    the submitted question so a client can highlight without re-tokenizing.

    The CLI `detect` command and POST /detect both return exactly this.
    """
    result = detect_then_explain(question, schema, model, cfg, stopwords=stopwords)
    tokens = tokenize(question)
    by_span = {pair.span: pair for pair in result.groundings}
    spans = []
    for first, last, category in label_spans(result.labels):
        pair = by_span.get((first, last))
        spans.append(
            {
                "start": tokens[first].start,
                "end": tokens[last].end,
                "category": category,
                "candidates": [
                    {
                        "kind": concept.kind.value,
                        "text": concept.text,
                        "column": concept.column,
                        "score": score,
                    }
                    for concept, score in (pair.candidates if pair else ())
                ],
            }
        )
    return {
        "labels": [label.value for label in result.labels],
        "spans": spans,
        "verdict": result.verdict.value,
        "response": result.response,
    }


class ServiceState:
    """Read-mostly state shared across requests; registration is locked."""

    def __init__(self, model: CrfModel, cfg: MatchConfig, stopwords: frozenset[str] = STOPWORDS):
        self.model = model
        self.cfg = cfg
        self.stopwords = stopwords
        self._tables: dict[str, TableSchema] = {}
        self._lock = threading.Lock()

    def register(self, schema: TableSchema) -> None:
        with self._lock:
            self._tables[schema.table_id] = schema

    def get(self, table_id: str) -> Optional[TableSchema]:
        with self._lock:
            return self._tables.get(table_id)

    def tables(self) -> list[TableSchema]:
        with self._lock:
            return sorted(self._tables.values(), key=lambda s: s.table_id)


def load_tables_dir(state: ServiceState, tables_dir: Path) -> int:
    count = 0
    for path in sorted(Path(tables_dir).glob("*.json")):
        state.register(schema_from_dict(json.loads(path.read_text(encoding="utf-8"))))
        count += 1
    return count


def create_app(
    model: CrfModel,
    cfg: MatchConfig,
    tables_dir: Optional[Path] = None,
    ui_dir: Optional[Path] = None,
    stopwords: frozenset[str] = STOPWORDS,
) -> FastAPI:
    state = ServiceState(model, cfg, stopwords=stopwords)
    if tables_dir is not None:
        load_tables_dir(state, tables_dir)

    app = FastAPI(title="quandary")
    app.state.service = state

    @app.get("/health")
    def health() -> dict:
        return {"ok": True}

    @app.get("/tables")
    def tables() -> dict:
        return {"tables": [schema_to_dict(s) for s in state.tables()]}

    @app.post("/tables")
    async def register_table(request: Request):
        try:
            schema = schema_from_dict(await request.json())
        except (ValidationError, KeyError, TypeError, json.JSONDecodeError) as exc:
            return JSONResponse({"error": f"invalid table: {exc}"}, status_code=400)
        state.register(schema)
        return {"ok": True, "table_id": schema.table_id}

    @app.post("/detect")
    async def detect(request: Request):
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return JSONResponse({"error": "invalid JSON body"}, status_code=400)
        table_id = body.get("table_id")
        question = body.get("question")
        schema = state.get(table_id) if table_id else None
        if schema is None:
            return JSONResponse({"error": "unknown table_id"}, status_code=404)
        if not question or not str(question).strip():
            return JSONResponse({"error": "empty question"}, status_code=400)
        return detection_payload(
            str(question), schema, state.model, state.cfg, stopwords=state.stopwords
        )

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    else:
        @app.get("/")
        def index() -> JSONResponse:
            return JSONResponse(
                {"error": "UI bundle not found; build frontend/ and pass --ui-dir"},
                status_code=404,
            )

    return app
