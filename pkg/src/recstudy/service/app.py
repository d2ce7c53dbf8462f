"""The study web service: a FastAPI app wrapping the core package.

Single process: request handlers stay non-blocking and observe session
state; collection and recommendation run on in-process worker pools.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import asynccontextmanager
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from ..preview import CatalogApiConfig, PreviewResolver
from ..scrobble import ScrobbleApiConfig, ScrobbleClient
from .config import ServiceConfig
from .pipeline import ModelRegistry, ParticipantPipeline
from .questions import InvalidAnswer, QuestionSet, validate_answers
from .responselog import ResponseLog
from .schemas import (
    Acknowledged,
    GlobalResponseRequest,
    ItemOut,
    ItemsResponse,
    QuestionOut,
    SessionCreated,
    StatusResponse,
    TrackResponseRequest,
    UsernameRequest,
)
from .sessions import (
    DuplicateResponse,
    GlobalResponse,
    IllegalTransition,
    JobAlreadyRunning,
    SessionStore,
    TrackResponse,
    UnknownSession,
    WrongState,
    responses_complete,
    session_transition,
)

log = logging.getLogger(__name__)


@dataclass
class ServiceContext:
    config: ServiceConfig
    store: SessionStore
    response_log: ResponseLog
    registry: ModelRegistry
    questions: QuestionSet
    pipeline: ParticipantPipeline
    io_pool: ThreadPoolExecutor
    cpu_pool: ThreadPoolExecutor
    shutdown_event: threading.Event

    def apply_event(self, session_id: str, event: str, **payload) -> None:
        """Transition a session, persisting the event before it takes effect."""
        with self.store.lock(session_id):
            session = self.store.get(session_id)
            updated = session_transition(session, event, **payload)
            record = {
                "kind": "session_event",
                "session_id": session_id,
                "event": event,
                "state_after": updated.state,
                "ts": updated.updated_at,
            }
            if event == "username_accepted":
                record["username"] = payload.get("username")
            elif event == "recommendation_done":
                record["items"] = [
                    {"rank": i + 1, "artist": key.artist_name, "title": key.track_title}
                    for i, (_, key, _) in enumerate(payload["items"].items)
                ]
            elif event == "failure":
                record["reason"] = payload.get("reason")
            self.response_log.append(record)
            self.store.put(updated)


def build_context(config: ServiceConfig) -> ServiceContext:
    registry = ModelRegistry()
    registry.load_all(config.model_paths)
    store = SessionStore()
    response_log = ResponseLog(config.response_log_path)
    questions = QuestionSet.load(config.question_file)
    scrobble = ScrobbleClient(
        ScrobbleApiConfig(
            base_url=config.scrobble_base_url,
            api_key=config.scrobble_api_key,
            page_size=config.scrobble_page_size,
            min_request_interval_ms=config.scrobble_min_interval_ms,
        )
    )
    resolver = PreviewResolver(
        CatalogApiConfig(base_url=config.catalog_base_url, default_market=config.default_market)
    )
    io_pool = ThreadPoolExecutor(max_workers=config.io_workers, thread_name_prefix="collect")
    cpu_pool = ThreadPoolExecutor(max_workers=config.cpu_workers, thread_name_prefix="score")
    shutdown_event = threading.Event()
    ctx = ServiceContext(
        config=config,
        store=store,
        response_log=response_log,
        registry=registry,
        questions=questions,
        pipeline=None,  # type: ignore[arg-type]
        io_pool=io_pool,
        cpu_pool=cpu_pool,
        shutdown_event=shutdown_event,
    )
    ctx.pipeline = ParticipantPipeline(
        store=store,
        response_log=response_log,
        registry=registry,
        scrobble=scrobble,
        resolver=resolver,
        config=config,
        cpu_pool=cpu_pool,
        apply_event=ctx.apply_event,
        shutdown_event=shutdown_event,
    )
    return ctx


def create_app(config: ServiceConfig) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        ctx = build_context(config)
        app.state.ctx = ctx
        log.info("loaded %d model(s); serving on port %d", ctx.registry.load_count, config.port)
        yield
        ctx.shutdown_event.set()
        ctx.io_pool.shutdown(wait=False, cancel_futures=True)
        ctx.cpu_pool.shutdown(wait=False, cancel_futures=True)

    app = FastAPI(title="recstudy", lifespan=lifespan)
    _register_error_handlers(app)
    _register_routes(app)
    if config.static_dir and Path(config.static_dir).is_dir():
        app.mount("/", StaticFiles(directory=config.static_dir, html=True), name="ui")
    return app


def _register_error_handlers(app: FastAPI) -> None:
    codes = {
        UnknownSession: 404,
        WrongState: 409,
        IllegalTransition: 409,
        DuplicateResponse: 409,
        JobAlreadyRunning: 409,
    }
    for exc_type, status in codes.items():
        def handler(request: Request, exc: Exception, status=status):
            return JSONResponse(
                status_code=status,
                content={"error": type(exc).__name__, "detail": str(exc)},
            )
        app.add_exception_handler(exc_type, handler)

    def invalid_answer(request: Request, exc: InvalidAnswer):
        return JSONResponse(
            status_code=422,
            content={"error": "InvalidAnswer", "question_id": exc.question_id, "detail": exc.reason},
        )

    app.add_exception_handler(InvalidAnswer, invalid_answer)


def _ctx(request: Request) -> ServiceContext:
    return request.app.state.ctx


def _register_routes(app: FastAPI) -> None:
    @app.get("/healthz", response_class=PlainTextResponse)
    async def healthz():
        return "ok"

    @app.post("/api/sessions", response_model=SessionCreated, status_code=201)
    async def create_session(request: Request):
        ctx = _ctx(request)
        session = ctx.store.create()
        ctx.response_log.append(
            {
                "kind": "session_event",
                "session_id": session.session_id,
                "event": "created",
                "state_after": session.state,
                "ts": session.created_at,
            }
        )
        return SessionCreated(session_id=session.session_id)

    @app.post("/api/sessions/{session_id}/consent", response_model=Acknowledged)
    async def consent(session_id: str, request: Request):
        ctx = _ctx(request)
        ctx.apply_event(session_id, "consent")
        return Acknowledged(state=ctx.store.get(session_id).state)

    @app.post("/api/sessions/{session_id}/username", response_model=Acknowledged, status_code=202)
    async def submit_username(session_id: str, body: UsernameRequest, request: Request):
        ctx = _ctx(request)
        username = body.username.strip()
        if not username:
            raise HTTPException(status_code=422, detail="username must be nonempty")
        with ctx.store.lock(session_id):
            session = ctx.store.get(session_id)
            if ctx.store.job(session_id) is not None:
                raise JobAlreadyRunning(session_id)
            if session.state != "Consented":
                raise WrongState(session.state, "Consented")
            assigned = ctx.registry.assign(ctx.config.model_assignment)
            updated = session_transition(session, "username_accepted", username=username)
            updated = replace(updated, model_name=assigned.name)
            ctx.response_log.append(
                {
                    "kind": "session_event",
                    "session_id": session_id,
                    "event": "username_accepted",
                    "state_after": updated.state,
                    "ts": updated.updated_at,
                    "username": username,
                }
            )
            ctx.store.put(updated)
            ctx.store.attach_job(session_id)
        ctx.io_pool.submit(ctx.pipeline.run, session_id, body.market)
        return Acknowledged(state="Collecting")

    @app.get(
        "/api/sessions/{session_id}/status",
        response_model=StatusResponse,
        response_model_exclude_none=True,
    )
    async def status(session_id: str, request: Request):
        ctx = _ctx(request)
        session = ctx.store.get(session_id)
        handle = ctx.store.job(session_id)
        return StatusResponse(
            state=session.state,
            phase=handle.phase if handle else None,
            progress=handle.progress if handle else None,
            reason=session.failure_reason,
        )

    @app.get("/api/sessions/{session_id}/items", response_model=ItemsResponse)
    async def items(session_id: str, request: Request):
        ctx = _ctx(request)
        session = ctx.store.get(session_id)
        if session.state not in ("Rating", "Completed"):
            raise WrongState(session.state, "Rating")
        per_track = [QuestionOut(**q.model_dump()) for q in ctx.questions.per_track]
        out = [
            ItemOut(
                rank=i + 1,
                artist=key.artist_name,
                title=key.track_title,
                preview_url=preview.preview_url,
                artwork_url=preview.artwork_url,
                embed_markup_ref=preview.embed_markup_ref,
                questions=per_track,
            )
            for i, (_, key, preview) in enumerate(session.items.items)
        ]
        return ItemsResponse(
            items=out,
            global_questions=[QuestionOut(**q.model_dump()) for q in ctx.questions.global_questions],
        )

    @app.post("/api/sessions/{session_id}/responses/track", response_model=Acknowledged)
    async def record_track_response(session_id: str, body: TrackResponseRequest, request: Request):
        ctx = _ctx(request)
        with ctx.store.lock(session_id):
            session = ctx.store.get(session_id)
            if session.state != "Rating":
                raise WrongState(session.state, "Rating")
            n_items = len(session.items.items)
            if not 1 <= body.rank <= n_items:
                raise HTTPException(status_code=400, detail=f"rank {body.rank} was not presented")
            if body.rank in session.track_responses:
                raise DuplicateResponse(f"rank {body.rank} already answered")
            validate_answers(ctx.questions.per_track, body.answers)
            _, key, _ = session.items.items[body.rank - 1]
            response = TrackResponse(
                session_id=session_id,
                rank=body.rank,
                track=key,
                answers=dict(body.answers),
                answered_at=time.time(),
            )
            ctx.response_log.append(
                {
                    "kind": "track_response",
                    "session_id": session_id,
                    "rank": body.rank,
                    "artist": key.artist_name,
                    "title": key.track_title,
                    "answers": response.answers,
                    "answered_at": response.answered_at,
                }
            )
            track_responses = dict(session.track_responses)
            track_responses[body.rank] = response
            updated = replace(session, track_responses=track_responses, updated_at=response.answered_at)
            ctx.store.put(updated)
        _complete_if_done(ctx, session_id)
        return Acknowledged(state=ctx.store.get(session_id).state)

    @app.post("/api/sessions/{session_id}/responses/global", response_model=Acknowledged)
    async def record_global_response(session_id: str, body: GlobalResponseRequest, request: Request):
        ctx = _ctx(request)
        with ctx.store.lock(session_id):
            session = ctx.store.get(session_id)
            if session.state != "Rating":
                raise WrongState(session.state, "Rating")
            if session.global_response is not None:
                raise DuplicateResponse("global form already submitted")
            validate_answers(ctx.questions.global_questions, body.answers)
            response = GlobalResponse(
                session_id=session_id, answers=dict(body.answers), answered_at=time.time()
            )
            ctx.response_log.append(
                {
                    "kind": "global_response",
                    "session_id": session_id,
                    "answers": response.answers,
                    "answered_at": response.answered_at,
                }
            )
            updated = replace(session, global_response=response, updated_at=response.answered_at)
            ctx.store.put(updated)
        _complete_if_done(ctx, session_id)
        return Acknowledged(state=ctx.store.get(session_id).state)

    @app.get("/api/export")
    async def export(request: Request, from_: Optional[float] = None, to: Optional[float] = None):
        ctx = _ctx(request)
        token = request.headers.get("Authorization", "")
        if token != f"Bearer {ctx.config.admin_token}":
            raise HTTPException(status_code=401, detail="missing or bad admin token")
        # query params named from/to on the wire
        params = request.query_params
        lo = float(params["from"]) if params.get("from") else None
        hi = float(params["to"]) if params.get("to") else None
        return StreamingResponse(_export_records(ctx, lo, hi), media_type="application/x-ndjson")


def _complete_if_done(ctx: ServiceContext, session_id: str) -> None:
    with ctx.store.lock(session_id):
        session = ctx.store.get(session_id)
        if session.state == "Rating" and responses_complete(session):
            updated = session_transition(session, "last_response")
            ctx.response_log.append(
                {
                    "kind": "session_event",
                    "session_id": session_id,
                    "event": "last_response",
                    "state_after": updated.state,
                    "ts": updated.updated_at,
                }
            )
            ctx.store.put(updated)


def _in_range(ts: float, lo: Optional[float], hi: Optional[float]) -> bool:
    return (lo is None or ts >= lo) and (hi is None or ts < hi)


def _export_records(ctx: ServiceContext, lo: Optional[float], hi: Optional[float]):
    """One NDJSON line per persisted response, stable field order.

    Only usernames and survey answers leave the system; scrobble histories
    are never exported.
    """
    for session in sorted(ctx.store.all_sessions(), key=lambda s: s.created_at):
        for rank in sorted(session.track_responses):
            tr = session.track_responses[rank]
            if not _in_range(tr.answered_at, lo, hi):
                continue
            yield json.dumps(
                {
                    "kind": "track_response",
                    "session_id": session.session_id,
                    "session_state": session.state,
                    "username": session.username,
                    "rank": tr.rank,
                    "artist": tr.track.artist_name,
                    "title": tr.track.track_title,
                    "answers": tr.answers,
                    "answered_at": tr.answered_at,
                },
                ensure_ascii=False,
            ) + "\n"
        gr = session.global_response
        if gr is not None and _in_range(gr.answered_at, lo, hi):
            yield json.dumps(
                {
                    "kind": "global_response",
                    "session_id": session.session_id,
                    "session_state": session.state,
                    "username": session.username,
                    "answers": gr.answers,
                    "answered_at": gr.answered_at,
                },
                ensure_ascii=False,
            ) + "\n"
