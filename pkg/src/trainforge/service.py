"""HTTP facade over the engine and store.

Endpoints (all under ``/v1``; stable machine codes in ``docs/api.md``):

    POST /v1/scenarios            upload a scenario file body
    GET  /v1/scenarios            list stored scenario ids and versions
    POST /v1/sessions             start a live session
    GET  /v1/sessions/{id}        current phase, prompt, and tallies
    POST /v1/sessions/{id}/events apply one trainee event
    GET  /v1/sessions/{id}/metrics finalized metrics (canonical JSON)
    GET  /v1/reports              cohort report over stored sessions
    GET  /healthz                 liveness probe

The service owns the wall clock: it timestamps the events it synthesizes
(prompts, hints, timeouts, session end) and runs one deadline timer per open
prompt, so the engine itself stays clockless. Client events may carry their
own session-relative timestamps; omitted ones get the server's elapsed time.
Engine apply and store append are atomic per event: validation runs first,
the event is persisted, then applied, all under the session's lock.
"""

from __future__ import annotations

import datetime as _dt
import secrets
import threading
import time
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import engine as engine_mod
from .core import (
    EventKind,
    ModuleKind,
    Scenario,
    SessionEvent,
    SessionMetrics,
    canonical_json,
    session_metrics_to_dict,
    step_result_to_dict,
)
from .engine import EngineConfig, Prompt, Session, SessionMode, StepOutcome
from .errors import ProtocolError, StoreError, TrainforgeError
from .parser import parse_scenario
from .report import build_report, render_text
from .store import EventStore

__all__ = ["create_app", "SessionService"]

# machine code -> HTTP status; anything unlisted maps by error family below
_STATUS_BY_CODE = {
    "not-found": 404,
    "empty-cohort": 404,
    "session-active": 409,
    "seq-conflict": 409,
    "version-conflict": 409,
}


def _status_for(error: TrainforgeError) -> int:
    if error.code in _STATUS_BY_CODE:
        return _STATUS_BY_CODE[error.code]
    if isinstance(error, ProtocolError):
        return 409
    if isinstance(error, StoreError):
        return 409
    return 422


def _error_response(error: TrainforgeError) -> JSONResponse:
    body: dict[str, Any] = {"code": error.code, "message": error.message}
    for key in ("seq", "expected", "got"):
        if key in error.context:
            body[key] = error.context[key]
    return JSONResponse(status_code=_status_for(error), content={"error": body})


def _prompt_dict(prompt: Prompt, prompt_timestamp_s: float) -> dict[str, Any]:
    return {
        "step_id": prompt.step_id,
        "module_kind": prompt.module_kind.value,
        "module_index": prompt.module_index,
        "step_index": prompt.step_index,
        "text": prompt.text,
        "options": [{"id": o.id, "label": o.label} for o in prompt.presented_options],
        "time_limit_s": prompt.time_limit_s,
        "difficulty": int(prompt.difficulty),
        "hint": prompt.hint,
        "prompt_timestamp_s": prompt_timestamp_s,
    }


def _outcome_dict(outcome: StepOutcome) -> dict[str, Any]:
    return {
        "step_result": step_result_to_dict(outcome.step_result) if outcome.step_result else None,
        "adaptation": (
            {"from": int(outcome.adaptation_applied[0]), "to": int(outcome.adaptation_applied[1])}
            if outcome.adaptation_applied
            else None
        ),
        "session_finished": outcome.session_finished,
    }


@dataclass
class _LiveSession:
    session: Session
    scenario: Scenario
    t0: float
    lock: threading.RLock = field(default_factory=threading.RLock)
    timer: Optional[threading.Timer] = None
    prompt_seq: Optional[int] = None
    prompt_ts: float = 0.0
    metrics: Optional[SessionMetrics] = None


class SessionService:
    """Registry of in-flight sessions plus the event plumbing around them."""

    def __init__(self, store: EventStore, config: Optional[EngineConfig] = None, timeouts_enabled: bool = True):
        self.store = store
        self.config = config or EngineConfig()
        self.timeouts_enabled = timeouts_enabled
        self._sessions: dict[str, _LiveSession] = {}
        self._registry_lock = threading.Lock()

    # -- helpers -------------------------------------------------------------

    def _get(self, session_id: str) -> _LiveSession:
        with self._registry_lock:
            live = self._sessions.get(session_id)
        if live is None:
            raise StoreError("not-found", "unknown session", session_id=session_id)
        return live

    def _elapsed(self, live: _LiveSession) -> float:
        return time.monotonic() - live.t0

    def _server_ts(self, live: _LiveSession) -> float:
        return max(self._elapsed(live), live.session.last_timestamp)

    def _record(self, live: _LiveSession, event: SessionEvent) -> StepOutcome:
        # validate -> persist -> apply; a failure at any stage leaves both
        # the engine state and the log untouched by this event
        live.session.validate_event(event)
        self.store.append_event(live.session.session_id, event)
        return live.session.submit_event(event)

    def _emit_prompt(self, live: _LiveSession) -> dict[str, Any]:
        ts = self._server_ts(live)
        prompt = live.session.next_prompt()
        prompt_event = SessionEvent(
            session_id=live.session.session_id,
            seq=live.session.next_seq,
            timestamp_s=ts,
            kind=EventKind.PROMPT_SHOWN,
            payload=prompt.payload(),
        )
        self._record(live, prompt_event)
        live.prompt_seq = prompt_event.seq
        live.prompt_ts = prompt_event.timestamp_s
        if prompt.hint is not None:
            hint_event = SessionEvent(
                session_id=live.session.session_id,
                seq=live.session.next_seq,
                timestamp_s=ts,
                kind=EventKind.HINT_SHOWN,
                payload={"step_id": prompt.step_id},
            )
            self._record(live, hint_event)
        self._schedule_timeout(live, prompt, prompt_event.seq)
        return _prompt_dict(prompt, prompt_event.timestamp_s)

    def _schedule_timeout(self, live: _LiveSession, prompt: Prompt, prompt_seq: int) -> None:
        if not self.timeouts_enabled:
            return
        deadline = live.prompt_ts + prompt.time_limit_s
        delay = max(0.0, deadline - self._elapsed(live))
        timer = threading.Timer(delay, self._fire_timeout, args=(live.session.session_id, prompt_seq))
        timer.daemon = True
        live.timer = timer
        timer.start()

    def _fire_timeout(self, session_id: str, prompt_seq: int) -> None:
        try:
            live = self._get(session_id)
        except StoreError:
            return
        with live.lock:
            if live.session.ended or live.prompt_seq != prompt_seq or live.session.phase() != "awaiting-answer":
                return
            prompt = live.session.next_prompt()
            event = SessionEvent(
                session_id=session_id,
                seq=live.session.next_seq,
                timestamp_s=self._server_ts(live),
                kind=EventKind.STEP_TIMED_OUT,
                payload={"step_id": prompt.step_id},
            )
            outcome = self._record(live, event)
            self._continue(live, outcome)

    def _continue(self, live: _LiveSession, outcome: StepOutcome) -> tuple[Optional[dict], Optional[SessionMetrics]]:
        """After a terminal event: either show the next prompt or close out."""
        if live.timer is not None:
            live.timer.cancel()
            live.timer = None
        live.prompt_seq = None
        if outcome.session_finished:
            end_event = SessionEvent(
                session_id=live.session.session_id,
                seq=live.session.next_seq,
                timestamp_s=self._server_ts(live),
                kind=EventKind.SESSION_ENDED,
                payload={},
            )
            self._record(live, end_event)
            live.metrics = live.session.finalize()
            self.store.save_metrics(live.session.session_id, live.metrics)
            return None, live.metrics
        return self._emit_prompt(live), None

    # -- operations ------------------------------------------------------------

    def create_session(self, scenario_id: str, version: Optional[int], seed: Optional[int]) -> dict[str, Any]:
        scenario = self.store.get_scenario(scenario_id, version)
        if seed is None:
            # kept within 2^32 so JSON consumers with double-precision
            # integers render it exactly; any 64-bit seed is accepted
            seed = secrets.randbits(32)
        session = Session(scenario, seed, mode=SessionMode.LIVE, config=self.config)
        live = _LiveSession(session=session, scenario=scenario, t0=time.monotonic())
        with self._registry_lock:
            self._sessions[session.session_id] = live
        with live.lock:
            wall_clock = _dt.datetime.now(_dt.timezone.utc).isoformat()
            start = SessionEvent(
                session_id=session.session_id,
                seq=0,
                timestamp_s=0.0,
                kind=EventKind.SESSION_STARTED,
                payload=engine_mod.start_payload(scenario, seed, wall_clock=wall_clock),
            )
            self._record(live, start)
            prompt = self._emit_prompt(live)
            return {
                "session_id": session.session_id,
                "scenario_id": scenario.id,
                "scenario_version": scenario.version,
                "seed": seed,
                "next_seq": session.next_seq,
                "prompt": prompt,
                "server_elapsed_s": self._elapsed(live),
            }

    def submit_event(
        self,
        session_id: str,
        seq: int,
        kind: str,
        payload: dict[str, Any],
        timestamp_s: Optional[float],
    ) -> dict[str, Any]:
        live = self._get(session_id)
        with live.lock:
            ts = timestamp_s if timestamp_s is not None else self._server_ts(live)
            event = SessionEvent(
                session_id=session_id, seq=seq, timestamp_s=ts, kind=EventKind(kind), payload=payload
            )
            outcome = self._record(live, event)
            next_prompt: Optional[dict] = None
            metrics: Optional[SessionMetrics] = None
            if outcome.step_result is not None:
                next_prompt, metrics = self._continue(live, outcome)
            response: dict[str, Any] = {
                "outcome": _outcome_dict(outcome),
                "next_seq": live.session.next_seq,
                "next_prompt": next_prompt,
                "metrics": session_metrics_to_dict(metrics) if metrics else None,
                "server_elapsed_s": self._elapsed(live),
            }
            return response

    def snapshot(self, session_id: str) -> dict[str, Any]:
        live = self._get(session_id)
        with live.lock:
            session = live.session
            phase = session.phase()
            prompt = None
            if phase == "awaiting-answer":
                prompt = _prompt_dict(session.next_prompt(), live.prompt_ts)
            tallies = []
            for kind in ModuleKind:
                results = [r for r in session.step_results if r.module_kind is kind]
                if results:
                    tallies.append(
                        {
                            "module_kind": kind.value,
                            "attempted": len(results),
                            "correct": sum(1 for r in results if r.correct),
                        }
                    )
            return {
                "session_id": session_id,
                "scenario_id": live.scenario.id,
                "scenario_version": live.scenario.version,
                "seed": session.seed,
                "phase": phase,
                "difficulty": int(session.difficulty),
                "next_seq": session.next_seq,
                "prompt": prompt,
                "tallies": tallies,
                "metrics_available": live.metrics is not None,
                "server_elapsed_s": self._elapsed(live),
            }

    def metrics(self, session_id: str) -> SessionMetrics:
        live = self._get(session_id)
        with live.lock:
            if live.metrics is None:
                raise ProtocolError("session-active", "session has not finished", session_id=session_id)
            return live.metrics

    def shutdown(self) -> None:
        with self._registry_lock:
            for live in self._sessions.values():
                if live.timer is not None:
                    live.timer.cancel()


class _SessionCreate(BaseModel):
    scenario_id: str
    version: Optional[int] = None
    seed: Optional[int] = None


class _EventIn(BaseModel):
    seq: int
    kind: str
    payload: dict[str, Any] = {}
    timestamp_s: Optional[float] = None


def create_app(
    store_dir: "Path | str",
    config: Optional[EngineConfig] = None,
    static_dir: "Path | str | None" = None,
    timeouts_enabled: bool = True,
) -> FastAPI:
    store = EventStore(store_dir)
    service = SessionService(store, config=config, timeouts_enabled=timeouts_enabled)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        service.shutdown()

    app = FastAPI(title="trainforge", version="0.1.0", lifespan=lifespan)
    app.state.service = service
    app.state.store = store

    @app.exception_handler(TrainforgeError)
    async def _handle_domain_error(_request: Request, error: TrainforgeError):
        return _error_response(error)

    @app.get("/healthz")
    def healthz() -> dict[str, str]:
        return {"status": "ok"}

    @app.post("/v1/scenarios")
    async def upload_scenario(request: Request) -> Response:
        body = await request.body()
        result = parse_scenario(body)
        if not result.ok:
            return JSONResponse(
                status_code=422,
                content={
                    "error": {"code": "invalid-scenario", "message": "scenario file failed validation"},
                    "diagnostics": [
                        {"severity": d.severity.value, "location": d.location, "code": d.code, "message": d.message}
                        for d in result.diagnostics
                    ],
                },
            )
        scenario = result.scenario
        existing = store.scenario_versions(scenario.id)
        fresh = scenario.version not in existing
        store.put_scenario(scenario)  # no-op when identical, 409 when conflicting
        return JSONResponse(
            status_code=201 if fresh else 200,
            content={"scenario_id": scenario.id, "version": scenario.version},
        )

    @app.get("/v1/scenarios")
    def list_scenarios() -> dict[str, Any]:
        return {
            "scenarios": [
                {"scenario_id": sid, "versions": store.scenario_versions(sid)} for sid in store.scenario_ids()
            ]
        }

    @app.post("/v1/sessions", status_code=201)
    def create_session(body: _SessionCreate) -> dict[str, Any]:
        return service.create_session(body.scenario_id, body.version, body.seed)

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str) -> dict[str, Any]:
        return service.snapshot(session_id)

    @app.post("/v1/sessions/{session_id}/events")
    def post_event(session_id: str, body: _EventIn) -> dict[str, Any]:
        return service.submit_event(session_id, body.seq, body.kind, body.payload, body.timestamp_s)

    @app.get("/v1/sessions/{session_id}/metrics")
    def get_metrics(session_id: str) -> Response:
        metrics = service.metrics(session_id)
        return Response(
            content=canonical_json(session_metrics_to_dict(metrics)),
            media_type="application/json",
        )

    @app.get("/v1/reports")
    def get_report(
        scenario_id: Optional[str] = None,
        version: Optional[int] = None,
        mu0: float = 0.5,
        format: str = "machine",
    ) -> Response:
        report = build_report(store, scenario_id=scenario_id, version=version, mu0=mu0, config=service.config)
        if format == "text":
            return Response(content=render_text(report), media_type="text/plain")
        return JSONResponse(content=report.to_dict())

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
