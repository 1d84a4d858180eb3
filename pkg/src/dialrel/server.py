"""HTTP front for the annotation store.

JSON in, JSON out; all domain failures surface as 400 responses with a
machine-readable {"error": code, "detail": ...} body, except assignment
conflicts which are 409.
"""

from __future__ import annotations

from typing import Any

from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from dialrel.errors import DialrelError
from dialrel.labels import parse_label
from dialrel.pairs import task_record
from dialrel.store import AlreadyAssigned, Annotation, AnnotationStore, InvalidLabels


class AnnotationIn(BaseModel):
    task_id: str
    annotator_id: str
    labels: list[str] = []
    confidence: int | None = None
    rejected: bool = False


class AssignmentIn(BaseModel):
    team_id: str
    dialogue_id: str


def create_app(store: AnnotationStore, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="dialrel annotation server", docs_url=None, redoc_url=None)
    # the client bundle may be served from a different static host; ids are
    # opaque and there are no credentials, so open CORS is fine here
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(DialrelError)
    async def _domain_error(_: Request, exc: DialrelError) -> JSONResponse:
        status = 409 if isinstance(exc, AlreadyAssigned) else 400
        return JSONResponse(
            status_code=status, content={"error": exc.code, "detail": str(exc)}
        )

    @app.exception_handler(RequestValidationError)
    async def _shape_error(_: Request, exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(
            status_code=400, content={"error": "invalid_request", "detail": str(exc.errors())}
        )

    @app.get("/api/tasks/next")
    def next_task(annotator: str = Query(...)) -> Any:
        task = store.next_task(annotator)
        if task is None:
            return Response(status_code=204)
        return JSONResponse(status_code=200, content=task_record(task))

    @app.post("/api/annotations")
    def post_annotation(payload: AnnotationIn) -> Any:
        try:
            labels = frozenset(parse_label(v) for v in payload.labels)
        except ValueError as exc:
            raise InvalidLabels(str(exc)) from exc
        receipt = store.record_annotation(
            Annotation(
                task_id=payload.task_id,
                annotator_id=payload.annotator_id,
                labels=labels,
                confidence=payload.confidence,
                rejected=payload.rejected,
            )
        )
        return JSONResponse(
            status_code=201, content={"seq": receipt.seq, "superseded": receipt.superseded}
        )

    @app.get("/api/progress")
    def progress(team: str = Query(...)) -> Any:
        return JSONResponse(status_code=200, content=store.progress(team))

    @app.post("/api/admin/assign")
    def assign(payload: AssignmentIn) -> Any:
        assignment = store.assign_team(payload.team_id, payload.dialogue_id)
        return JSONResponse(
            status_code=201,
            content={"team_id": assignment.team_id, "dialogue_id": assignment.dialogue_id},
        )

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
