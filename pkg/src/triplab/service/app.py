"""HTTP surface for the annotation service.

Endpoints:
  POST /tasks                         create a task (manifest or signal spec)
  GET  /tasks/{id}/next?annotator=ID  lease the next query
  POST /tasks/{id}/responses          submit an answer (choice A or B)
  GET  /tasks/{id}/export             answered labels as JSON Lines
  GET  /tasks/{id}/progress           counts per state and per annotator
  GET  /assets/{asset_id}             stimulus swatch (JSON RGB or ?format=png)

Choice A means "the reference is closer to option A" and is stored as
w = -1 (option A renders index j); choice B is stored as w = +1.
"""

from __future__ import annotations

import io
from typing import Literal

from fastapi import FastAPI, HTTPException, Query, Response
from pydantic import BaseModel, Field

from ..errors import BudgetExceedsUniverseError
from ..signals import StimulusEntry, StimulusManifest, generate_signal, render_stimuli
from ..triplets import iter_jsonl_lines
from .store import (
    AlreadyAnsweredError,
    DuplicateTaskError,
    LeaseConflictError,
    TaskStore,
    UnknownAssetError,
    UnknownQueryError,
    UnknownTaskError,
)


class SignalSpec(BaseModel):
    kind: str
    n: int = Field(ge=3)
    seed: int = 0


class ManifestEntryIn(BaseModel):
    t: int = Field(ge=1)
    rgb: tuple[int, int, int]
    asset_id: str


class CreateTaskRequest(BaseModel):
    budget: int = Field(ge=1)
    seed: int = 0
    task_id: str | None = None
    lease_timeout: float | None = Field(default=None, gt=0)
    manifest: list[ManifestEntryIn] | None = None
    signal: SignalSpec | None = None


class QueryIn(BaseModel):
    i: int = Field(ge=1)
    j: int = Field(ge=1)
    k: int = Field(ge=1)


class SubmitRequest(BaseModel):
    annotator: str = Field(min_length=1, max_length=128)
    query: QueryIn
    choice: Literal["A", "B"]
    latency_ms: int | None = Field(default=None, ge=0)


def _entry_payload(entry: StimulusEntry) -> dict:
    return {"t": entry.t, "rgb": list(entry.rgb), "asset_id": entry.asset_id}


def create_app(data_dir, lease_timeout: float = 120.0, clock=None) -> FastAPI:
    """Build the service around a TaskStore rooted at data_dir."""
    kwargs = {} if clock is None else {"clock": clock}
    store = TaskStore(data_dir, default_lease_timeout=lease_timeout, **kwargs)
    app = FastAPI(title="triplab annotation service")
    app.state.store = store

    @app.post("/tasks", status_code=201)
    def create_task(body: CreateTaskRequest):
        if (body.manifest is None) == (body.signal is None):
            raise HTTPException(422, "provide exactly one of manifest or signal")
        if body.manifest is not None:
            entries = tuple(
                StimulusEntry(t=e.t, rgb=tuple(e.rgb), asset_id=e.asset_id)
                for e in body.manifest
            )
            try:
                manifest = StimulusManifest(entries=entries)
            except ValueError as exc:
                raise HTTPException(422, f"invalid manifest: {exc}") from exc
        else:
            try:
                signal = generate_signal(body.signal.kind, body.signal.n, body.signal.seed)
            except ValueError as exc:
                raise HTTPException(422, str(exc)) from exc
            manifest = render_stimuli(signal)
        try:
            task_id = store.create_task(
                manifest,
                budget=body.budget,
                seed=body.seed,
                task_id=body.task_id,
                lease_timeout=body.lease_timeout,
            )
        except BudgetExceedsUniverseError as exc:
            raise HTTPException(400, str(exc)) from exc
        except DuplicateTaskError as exc:
            raise HTTPException(409, str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from exc
        effective_timeout = (
            body.lease_timeout if body.lease_timeout is not None else store.default_lease_timeout
        )
        return {
            "task_id": task_id,
            "n": manifest.n,
            "pool_size": body.budget,
            "lease_timeout": effective_timeout,
        }

    @app.get("/tasks/{task_id}/next")
    def next_query(task_id: str, annotator: str = Query(min_length=1, max_length=128)):
        try:
            dealt = store.next_query(task_id, annotator)
        except UnknownTaskError as exc:
            raise HTTPException(404, str(exc)) from exc
        if dealt is None:
            return {"status": "no-work"}
        q = dealt.query
        return {
            "status": "ok",
            "query": {"i": q.i, "j": q.j, "k": q.k},
            "stimuli": {
                "reference": _entry_payload(dealt.reference),
                "a": _entry_payload(dealt.option_a),
                "b": _entry_payload(dealt.option_b),
            },
            "lease_expires_in": dealt.lease_expires_in,
        }

    @app.post("/tasks/{task_id}/responses")
    def submit_response(task_id: str, body: SubmitRequest):
        try:
            result = store.submit_response(
                task_id,
                body.annotator,
                body.query.i,
                body.query.j,
                body.query.k,
                body.choice,
                body.latency_ms,
            )
        except UnknownTaskError as exc:
            raise HTTPException(404, str(exc)) from exc
        except UnknownQueryError as exc:
            raise HTTPException(404, str(exc)) from exc
        except AlreadyAnsweredError as exc:
            raise HTTPException(410, str(exc)) from exc
        except LeaseConflictError as exc:
            raise HTTPException(409, str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from exc
        return {"status": "ok", "w": result.w, "duplicate": result.duplicate}

    @app.get("/tasks/{task_id}/export")
    def export_labels(task_id: str):
        try:
            labels = store.export_labels(task_id)
        except UnknownTaskError as exc:
            raise HTTPException(404, str(exc)) from exc
        body = "".join(line + "\n" for line in iter_jsonl_lines(labels))
        return Response(content=body, media_type="application/x-ndjson")

    @app.get("/tasks/{task_id}/progress")
    def progress(task_id: str):
        try:
            return store.progress(task_id)
        except UnknownTaskError as exc:
            raise HTTPException(404, str(exc)) from exc

    @app.get("/assets/{asset_id}")
    def asset(asset_id: str, format: str = "json"):
        try:
            entry = store.find_asset(asset_id)
        except UnknownAssetError as exc:
            raise HTTPException(404, str(exc)) from exc
        if format == "json":
            return _entry_payload(entry)
        if format == "png":
            try:
                from PIL import Image
            except ImportError as exc:
                raise HTTPException(
                    501, "PNG rendering needs the optional Pillow dependency"
                ) from exc
            img = Image.new("RGB", (64, 64), entry.rgb)
            buf = io.BytesIO()
            img.save(buf, format="PNG")
            return Response(content=buf.getvalue(), media_type="image/png")
        raise HTTPException(422, f"unknown format {format!r}, expected json or png")

    return app
