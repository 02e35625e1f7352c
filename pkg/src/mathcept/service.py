"""HTTP service exposing the store: datasets, annotations, disagreements,
adjudications, exports, and agreement reports under /api/v1.

Errors are JSON {error, detail}. When MATHCEPT_API_TOKEN is set (or a
token is passed explicitly), API calls require Authorization: Bearer.
A static frontend directory, when present, is served at /.
"""

from __future__ import annotations

import os
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import agreement as agreement_mod
from .corpus import CorpusError, get_sentence
from .store import (
    AdjudicationDecision,
    DuplicateDatasetError,
    Store,
    StoreError,
    UnknownDatasetError,
)

API_PREFIX = "/api/v1"


def _error(status: int, error: str, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": error, "detail": detail})


def create_app(
    store: Store,
    token: str | None = None,
    static_dir: str | Path | None = None,
) -> FastAPI:
    if token is None:
        token = os.environ.get("MATHCEPT_API_TOKEN") or None
    app = FastAPI(title="mathcept annotation service", docs_url=None, redoc_url=None)

    @app.middleware("http")
    async def _auth(request: Request, call_next):
        if token and request.url.path.startswith(API_PREFIX):
            supplied = request.headers.get("Authorization", "")
            if supplied != f"Bearer {token}":
                return _error(401, "unauthorized", "missing or invalid bearer token")
        return await call_next(request)

    @app.exception_handler(UnknownDatasetError)
    async def _unknown_dataset(request: Request, exc: UnknownDatasetError):
        return _error(404, "not_found", str(exc))

    @app.exception_handler(DuplicateDatasetError)
    async def _duplicate(request: Request, exc: DuplicateDatasetError):
        return _error(409, "conflict", str(exc))

    @app.exception_handler(StoreError)
    async def _store_error(request: Request, exc: StoreError):
        return _error(400, "bad_request", str(exc))

    @app.exception_handler(CorpusError)
    async def _corpus_error(request: Request, exc: CorpusError):
        return _error(400, "bad_request", str(exc))

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return _error(400, "bad_request", str(exc))

    @app.post(API_PREFIX + "/datasets", status_code=201)
    async def upload_dataset(request: Request, name: str, format: str = "jsonl"):
        raw = await request.body()
        dataset = store.ingest_dataset(raw, format, name)
        return {"name": dataset.name, "sentence_count": len(dataset.sentences)}

    @app.get(API_PREFIX + "/datasets")
    async def list_datasets():
        return store.list_datasets()

    @app.get(API_PREFIX + "/datasets/{name}/sentences/{index}")
    async def sentence(name: str, index: int):
        dataset = store.get_dataset(name)
        try:
            s = get_sentence(dataset, index)
        except IndexError as exc:
            return _error(404, "not_found", str(exc))
        return {**s.as_dict(), "index": index, "total": len(dataset.sentences)}

    @app.post(API_PREFIX + "/annotations")
    async def post_annotation(request: Request):
        body = await request.json()
        for key in ("dataset", "sentence_id", "annotator"):
            if not body.get(key):
                return _error(400, "bad_request", f"missing field {key!r}")
        concepts = body.get("concepts")
        if not isinstance(concepts, list) or not all(isinstance(c, str) for c in concepts):
            return _error(400, "bad_request", "'concepts' must be a list of strings")
        stored = store.submit_annotation(
            body["dataset"], body["sentence_id"], body["annotator"], concepts
        )
        return {
            "dataset": body["dataset"],
            "sentence_id": body["sentence_id"],
            "annotator": body["annotator"],
            "concepts": [c.as_dict() for c in stored],
        }

    @app.get(API_PREFIX + "/annotations")
    async def get_annotations(dataset: str, annotator: str | None = None):
        payload = store.export_annotations(dataset, annotator)
        return Response(content=payload, media_type="application/x-ndjson")

    @app.get(API_PREFIX + "/disagreements")
    async def disagreements(dataset: str, a: str, b: str):
        return store.build_disagreement_queue(dataset, a, b).as_dict()

    @app.post(API_PREFIX + "/adjudications")
    async def post_adjudication(request: Request):
        body = await request.json()
        for key in ("dataset", "concept", "verdict"):
            if not body.get(key):
                return _error(400, "bad_request", f"missing field {key!r}")
        decision = AdjudicationDecision(
            dataset_name=body["dataset"],
            concept_normalized=body["concept"],
            source_annotators=tuple(body.get("source_annotators", [])),
            verdict=body["verdict"],
            replacement=body.get("replacement"),
            adjudicator_id=body.get("adjudicator", ""),
        )
        final = store.submit_adjudication(decision)
        return {"decision": decision.as_dict(), "final": final}

    @app.get(API_PREFIX + "/export")
    async def export(dataset: str, annotator: str | None = None, decisions: bool = False):
        payload = store.export_annotations(dataset, annotator, include_decisions=decisions)
        filename = f"{dataset}-annotations.jsonl"
        return Response(
            content=payload,
            media_type="application/x-ndjson",
            headers={"Content-Disposition": f'attachment; filename="{filename}"'},
        )

    @app.get(API_PREFIX + "/reports/agreement")
    async def agreement_report(dataset: str, annotators: str, decisions: bool = True):
        names = [a.strip() for a in annotators.split(",") if a.strip()]
        if len(names) < 2:
            return _error(400, "bad_request", "need at least two annotators")
        report = store.agreement_report(dataset, names, decisions=decisions)
        return Response(content=report.to_json(), media_type="application/json")

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="static")

    return app


def serve(
    store_root: str | Path,
    host: str = "127.0.0.1",
    port: int = 8008,
    static_dir: str | Path | None = None,
    config=None,
) -> None:
    import uvicorn

    store = Store(store_root, config=config)
    app = create_app(store, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
