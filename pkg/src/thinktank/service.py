"""Long-running local HTTP service: project management, document upload,
asynchronous meetings, and live event streaming.

Meetings run on background threads — one at a time per project — and every
event is persisted to the meeting's log before it is broadcast, so a
subscriber connecting at any moment can replay from ``from_seq`` and then
follow the live tail with no gap and no duplicate. Killing the service
mid-meeting leaves the meeting marked failed on the next startup; silent
resumption is deliberately not attempted.
"""

from __future__ import annotations

import json
import logging
import os
import queue
import threading
import time
from dataclasses import dataclass

from fastapi import Body, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse

from .engine import Engine
from .errors import (
    ConflictError,
    NotFoundError,
    StateError,
    ThinkTankError,
    ValidationError,
)
from .gateway import Gateway, OllamaGateway, ScriptedGateway
from .knowledge import KnowledgeStore
from .model import (
    MEDIA_KINDS,
    MeetingConfig,
    MeetingEvent,
    MeetingStatus,
    Phase,
    TERMINAL_PHASES,
    add_expert,
    create_project,
)
from .storage import Store, data_dir_from_env, render_minutes

logger = logging.getLogger(__name__)

PORT_ENV = "THINKTANK_PORT"
DEFAULT_PORT = 8700
KEEPALIVE_S = 15.0

_STATUS_BY_KIND = {
    "validation": 400,
    "conflict": 409,
    "state": 409,
    "not_found": 404,
    "integrity": 500,
    "gateway": 502,
    "timeout": 504,
    "protocol": 502,
    "configuration": 502,
    "script": 502,
}


def _error_body(exc: ThinkTankError) -> dict:
    body = {"error": {"kind": exc.kind, "message": str(exc)}}
    if isinstance(exc, ValidationError):
        body["error"]["violations"] = exc.violations
    return body


@dataclass
class Subscription:
    events: "queue.Queue[MeetingEvent]"
    overflowed: bool = False


class Broadcaster:
    """Fans persisted events out to per-subscriber bounded queues.

    A full queue marks the subscriber overflowed instead of blocking the
    engine; the stream then disconnects that subscriber with a resumable
    ``from_seq`` hint.
    """

    def __init__(self, buffer_size: int = 512):
        self.buffer_size = buffer_size
        self._subs: dict[str, list[Subscription]] = {}
        self._lock = threading.Lock()

    def subscribe(self, meeting_id: str) -> Subscription:
        sub = Subscription(events=queue.Queue(maxsize=self.buffer_size))
        with self._lock:
            self._subs.setdefault(meeting_id, []).append(sub)
        return sub

    def unsubscribe(self, meeting_id: str, sub: Subscription) -> None:
        with self._lock:
            subs = self._subs.get(meeting_id, [])
            if sub in subs:
                subs.remove(sub)
            if not subs:
                self._subs.pop(meeting_id, None)

    def publish(self, event: MeetingEvent) -> None:
        with self._lock:
            subs = list(self._subs.get(event.meeting_id, []))
        for sub in subs:
            try:
                sub.events.put_nowait(event)
            except queue.Full:
                sub.overflowed = True


class MeetingRunner:
    """Executes meetings on daemon threads, one at a time per project."""

    def __init__(self):
        self._busy: dict[str, str] = {}
        self._lock = threading.Lock()

    def busy_meeting(self, project_id: str) -> str | None:
        with self._lock:
            return self._busy.get(project_id)

    def start(self, project_id: str, meeting_id: str, target) -> None:
        with self._lock:
            if project_id in self._busy:
                raise ConflictError(
                    f"project {project_id} already runs meeting {self._busy[project_id]}"
                )
            self._busy[project_id] = meeting_id

        def run():
            try:
                target()
            except ThinkTankError as exc:
                logger.warning("meeting %s ended with error: %s", meeting_id, exc)
            except Exception:
                logger.exception("meeting %s crashed", meeting_id)
            finally:
                with self._lock:
                    self._busy.pop(project_id, None)

        threading.Thread(target=run, name=f"meeting-{meeting_id}", daemon=True).start()


def recover_running_meetings(store: Store, engine: Engine) -> int:
    """Mark meetings left running by a dead service as failed."""
    recovered = 0
    for project in store.list_projects():
        for meeting_id in project.meetings:
            record = store.load_meeting(meeting_id)
            if record.status != MeetingStatus.RUNNING:
                continue
            log = store.event_log(record.project_id, record.id)
            event = MeetingEvent(
                seq=log.last_seq + 1,
                meeting_id=record.id,
                phase=Phase.MEETING_FAILED,
                speaker="system",
                content="meeting aborted: service restarted while the meeting was running",
                round=0,
                timestamp=engine.clock.now_iso(),
            )
            log.append(event)
            record.status = MeetingStatus.FAILED
            store.save_meeting(record)
            recovered += 1
    if recovered:
        logger.warning("marked %d interrupted meetings as failed", recovered)
    return recovered


def sse_frame(event: MeetingEvent) -> bytes:
    payload = json.dumps(event.to_dict(), ensure_ascii=False, separators=(",", ":"))
    return f"id: {event.seq}\ndata: {payload}\n\n".encode("utf-8")


def create_app(store: Store, gateway: Gateway, *, engine: Engine | None = None) -> FastAPI:
    engine = engine or Engine(store, gateway)
    broadcaster = Broadcaster()
    runner = MeetingRunner()
    app = FastAPI(title="thinktank", version="0.1.0")
    app.state.store = store
    app.state.engine = engine
    app.state.broadcaster = broadcaster
    app.state.runner = runner

    recover_running_meetings(store, engine)

    @app.exception_handler(ThinkTankError)
    async def domain_error(_request: Request, exc: ThinkTankError):
        status = _STATUS_BY_KIND.get(exc.kind, 500)
        return JSONResponse(status_code=status, content=_error_body(exc))

    @app.exception_handler(RequestValidationError)
    async def body_error(_request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"error": {"kind": "validation", "message": "malformed request body",
                               "violations": [str(e) for e in exc.errors()]}},
        )

    def _field(payload: dict, name: str, default=None, required: bool = False):
        value = payload.get(name, default)
        if required and (value is None or value == ""):
            raise ValidationError(f"field {name!r} is required")
        return value

    # -- health ----------------------------------------------------------

    @app.get("/health")
    def health():
        status = gateway.health_check()
        return {
            "service": "ok",
            "backend": {
                "name": status.name,
                "models": status.models,
                "reachable": status.reachable,
                "warning": status.warning,
            },
        }

    # -- projects ----------------------------------------------------------

    @app.post("/projects", status_code=201)
    def post_project(payload: dict = Body(...)):
        project = create_project(
            str(_field(payload, "title", required=True)),
            str(_field(payload, "description", "")),
            [str(o) for o in _field(payload, "objectives", []) or []],
            ids=engine.ids,
            clock=engine.clock,
        )
        store.save_project(project)
        return project.to_dict()

    @app.get("/projects")
    def get_projects():
        return {"projects": [p.to_dict() for p in store.list_projects()]}

    @app.get("/projects/{project_id}")
    def get_project(project_id: str):
        return store.load_project(project_id).to_dict()

    # -- experts -----------------------------------------------------------

    @app.post("/projects/{project_id}/experts", status_code=201)
    def post_expert(project_id: str, payload: dict = Body(...)):
        project = store.load_project(project_id)
        profile = add_expert(
            project,
            str(_field(payload, "name", required=True)),
            str(_field(payload, "persona", "")),
            ids=engine.ids,
        )
        store.save_project(project)
        return profile.to_dict()

    @app.post("/experts/{agent_id}/warmup", status_code=202)
    def post_warmup(agent_id: str):
        found = store.find_expert(agent_id)
        if found is None:
            raise NotFoundError(f"expert not found: {agent_id}")
        project, expert_name = found
        record = engine.prepare_warmup(project, expert_name)
        runner.start(
            project.id,
            record.id,
            lambda: engine.execute_warmup(project, record, on_event=broadcaster.publish),
        )
        return {"meeting_id": record.id}

    # -- documents -----------------------------------------------------------

    @app.post("/projects/{project_id}/documents", status_code=201)
    def post_document(project_id: str, payload: dict = Body(...)):
        project = store.load_project(project_id)
        expert_name = str(_field(payload, "expert", required=True))
        profile = project.expert(expert_name)
        if profile is None:
            raise NotFoundError(f"unknown expert {expert_name!r} in project {project_id}")
        media = str(_field(payload, "media", "plain_text"))
        if media not in MEDIA_KINDS:
            raise ValidationError(f"media must be one of {MEDIA_KINDS}")
        content = str(_field(payload, "content", required=True))
        source_name = str(_field(payload, "source_name", "pasted-text"))
        knowledge = KnowledgeStore(store.kb_root(project_id), gateway, ids=engine.ids, clock=engine.clock)
        if not profile.knowledge_base_id:
            profile.knowledge_base_id = knowledge.create_base()
        ref, chunk_count = knowledge.ingest_document(profile.knowledge_base_id, source_name, content, media)
        project.corpus.append(ref)
        store.save_project(project)
        return {"document": ref.to_dict(), "chunk_count": chunk_count}

    # -- meetings -----------------------------------------------------------

    @app.post("/projects/{project_id}/meetings", status_code=202)
    def post_meeting(project_id: str, payload: dict = Body(...)):
        project = store.load_project(project_id)
        busy = runner.busy_meeting(project_id)
        if busy:
            raise ConflictError(f"project {project_id} already runs meeting {busy}")
        config = MeetingConfig(
            project_id=project_id,
            agenda=str(_field(payload, "agenda", "")),
            rounds=int(_field(payload, "rounds", 0) or 0),
            participants=[str(n) for n in _field(payload, "participants", []) or []],
            retrieval_k=int(_field(payload, "retrieval_k", 5) or 5),
            context_budget=int(_field(payload, "context_budget", 24000) or 24000),
        )
        record = engine.prepare_meeting(project, config)
        runner.start(
            project_id,
            record.id,
            lambda: engine.execute_meeting(project, record, on_event=broadcaster.publish),
        )
        return {"meeting_id": record.id}

    @app.get("/meetings/{meeting_id}")
    def get_meeting(meeting_id: str):
        record = store.load_meeting(meeting_id)
        return record.to_dict()

    @app.get("/meetings/{meeting_id}/minutes")
    def get_minutes(meeting_id: str):
        record = store.load_meeting(meeting_id)
        if record.status == MeetingStatus.RUNNING:
            raise StateError("meeting in progress")
        if record.status == MeetingStatus.FAILED:
            raise StateError("meeting failed; no final minutes exist")
        minutes = store.load_minutes(meeting_id)
        return {
            "meeting_id": meeting_id,
            "agenda": record.config.agenda,
            "participants": record.config.participants,
            "per_round": [r.to_dict() for r in minutes.per_round],
            "final_summary": minutes.final_summary,
            "rendered": render_minutes(record, minutes),
        }

    @app.get("/meetings/{meeting_id}/events")
    def get_events(meeting_id: str, from_seq: int = 1):
        store.load_meeting(meeting_id)  # 404 before the stream starts
        start = max(1, from_seq)

        def stream():
            sub = broadcaster.subscribe(meeting_id)
            try:
                last = start - 1
                terminal = False
                for event in store.read_events(meeting_id, start):
                    yield sse_frame(event)
                    last = event.seq
                    if event.phase in TERMINAL_PHASES:
                        terminal = True
                        break
                if not terminal and store.load_meeting(meeting_id).status != MeetingStatus.RUNNING:
                    # The meeting already ended; drain the log (the terminal
                    # marker may land a beat after the status flip) and close
                    # instead of blocking a full keepalive interval.
                    deadline = time.monotonic() + 2.0
                    while not terminal:
                        for event in store.read_events(meeting_id, last + 1):
                            yield sse_frame(event)
                            last = event.seq
                            if event.phase in TERMINAL_PHASES:
                                terminal = True
                                break
                        if terminal or time.monotonic() > deadline:
                            break
                        time.sleep(0.02)
                    terminal = True
                while not terminal:
                    if sub.overflowed:
                        hint = json.dumps({"resume_from": last + 1})
                        yield f"event: overflow\ndata: {hint}\n\n".encode("utf-8")
                        break
                    try:
                        event = sub.events.get(timeout=KEEPALIVE_S)
                    except queue.Empty:
                        tail = store.read_events(meeting_id, last + 1)
                        if tail:
                            for event in tail:
                                yield sse_frame(event)
                                last = event.seq
                                if event.phase in TERMINAL_PHASES:
                                    terminal = True
                                    break
                            continue
                        record = store.load_meeting(meeting_id)
                        if record.status != MeetingStatus.RUNNING:
                            break
                        yield b": keepalive\n\n"
                        continue
                    if event.seq <= last:
                        continue
                    if event.seq > last + 1:
                        # queue overflow or replay race: the log is authoritative
                        for missed in store.read_events(meeting_id, last + 1):
                            if missed.seq <= last:
                                continue
                            yield sse_frame(missed)
                            last = missed.seq
                            if missed.phase in TERMINAL_PHASES:
                                terminal = True
                                break
                        continue
                    yield sse_frame(event)
                    last = event.seq
                    if event.phase in TERMINAL_PHASES:
                        terminal = True
            finally:
                broadcaster.unsubscribe(meeting_id, sub)

        return StreamingResponse(
            stream(),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache", "X-Accel-Buffering": "no"},
        )

    @app.get("/meetings/{meeting_id}/minutes.txt", response_class=PlainTextResponse)
    def get_minutes_text(meeting_id: str):
        return store.export_minutes(meeting_id)

    return app


def app_from_env() -> FastAPI:
    """Build the app from environment variables (used by ``__main__``)."""
    store = Store(data_dir_from_env())
    backend = os.environ.get("THINKTANK_BACKEND", "ollama")
    if backend == "scripted":
        script = os.environ.get("THINKTANK_SCRIPT")
        if not script:
            raise ValidationError("THINKTANK_BACKEND=scripted requires THINKTANK_SCRIPT")
        gateway: Gateway = ScriptedGateway.from_file(script)
    else:
        gateway = OllamaGateway(model=os.environ.get("THINKTANK_MODEL", "llama3.1"))
    return create_app(store, gateway)


def main() -> None:
    import uvicorn

    logging.basicConfig(level=logging.INFO)
    port = int(os.environ.get(PORT_ENV, DEFAULT_PORT))
    uvicorn.run(app_from_env(), host="127.0.0.1", port=port, log_level="info")


if __name__ == "__main__":
    main()
