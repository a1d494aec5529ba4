"""Scriptable operator CLI.

Runs in one of two modes: embedded (default — engine in-process against the
data directory, no daemon needed) or service mode (``--url`` — every command
becomes HTTP calls against a running service). Exit codes: 0 success,
2 validation/conflict/state, 3 not found, 4 backend failure, 5 integrity.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import httpx

from .engine import Engine
from .errors import (
    ConflictError,
    GatewayError,
    IntegrityError,
    NotFoundError,
    StateError,
    ThinkTankError,
    ValidationError,
)
from .gateway import BASE_URL_ENV, Gateway, OllamaGateway, ScriptedGateway
from .knowledge import KnowledgeStore
from .model import MEDIA_KINDS, MeetingConfig, add_expert, create_project
from .storage import DATA_DIR_ENV, DEFAULT_DATA_DIR, Store

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NOT_FOUND = 3
EXIT_BACKEND = 4
EXIT_INTEGRITY = 5

_EXIT_BY_TYPE = (
    (IntegrityError, EXIT_INTEGRITY),
    (GatewayError, EXIT_BACKEND),
    (NotFoundError, EXIT_NOT_FOUND),
    (ValidationError, EXIT_VALIDATION),
    (ConflictError, EXIT_VALIDATION),
    (StateError, EXIT_VALIDATION),
)

_EXIT_BY_KIND = {
    "validation": EXIT_VALIDATION,
    "conflict": EXIT_VALIDATION,
    "state": EXIT_VALIDATION,
    "not_found": EXIT_NOT_FOUND,
    "integrity": EXIT_INTEGRITY,
    "gateway": EXIT_BACKEND,
    "timeout": EXIT_BACKEND,
    "protocol": EXIT_BACKEND,
    "configuration": EXIT_BACKEND,
    "script": EXIT_BACKEND,
}


class Output:
    """Human-readable lines or one machine-readable JSON record per line."""

    def __init__(self, machine: bool):
        self.machine = machine

    def emit(self, kind: str, data: dict, human: str) -> None:
        if self.machine:
            print(json.dumps({"type": kind, "data": data}, ensure_ascii=False))
        else:
            print(human)

    def error(self, exc: Exception) -> None:
        kind = getattr(exc, "kind", "error")
        if self.machine:
            record = {"type": "error", "data": {"kind": kind, "message": str(exc)}}
            if isinstance(exc, ValidationError):
                record["data"]["violations"] = exc.violations
            print(json.dumps(record, ensure_ascii=False), file=sys.stderr)
        else:
            print(f"error ({kind}): {exc}", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thinktank",
        description="Run structured multi-round meetings among RAG-grounded agents.",
    )
    parser.add_argument("--data-dir", default=os.environ.get(DATA_DIR_ENV, DEFAULT_DATA_DIR),
                        help="data directory (embedded mode)")
    parser.add_argument("--url", default=None, help="service base URL; switches to service mode")
    parser.add_argument("--llm-url", default=os.environ.get(BASE_URL_ENV),
                        help="LLM server base URL (embedded mode)")
    parser.add_argument("--model", default=os.environ.get("THINKTANK_MODEL", "llama3.1"))
    parser.add_argument("--backend", choices=["ollama", "scripted"],
                        default=os.environ.get("THINKTANK_BACKEND", "ollama"))
    parser.add_argument("--script", default=os.environ.get("THINKTANK_SCRIPT"),
                        help="script file for --backend scripted")
    parser.add_argument("--json", action="store_true", help="machine-readable output")

    sub = parser.add_subparsers(dest="command", required=True)

    project = sub.add_parser("project", help="manage projects")
    project_sub = project.add_subparsers(dest="subcommand", required=True)
    create = project_sub.add_parser("create")
    create.add_argument("--title", required=True)
    create.add_argument("--description", default="")
    create.add_argument("--objective", action="append", default=[], dest="objectives")
    project_sub.add_parser("list")
    show = project_sub.add_parser("show")
    show.add_argument("--project", required=True)

    expert = sub.add_parser("expert", help="manage experts")
    expert_sub = expert.add_subparsers(dest="subcommand", required=True)
    expert_add = expert_sub.add_parser("add")
    expert_add.add_argument("--project", required=True)
    expert_add.add_argument("--name", required=True)
    expert_add.add_argument("--persona-file", required=True)

    doc = sub.add_parser("doc", help="manage documents")
    doc_sub = doc.add_subparsers(dest="subcommand", required=True)
    ingest = doc_sub.add_parser("ingest")
    ingest.add_argument("--project", required=True)
    ingest.add_argument("--expert", required=True)
    ingest.add_argument("--file", required=True)
    ingest.add_argument("--source-name", default=None)
    ingest.add_argument("--media", choices=list(MEDIA_KINDS), default="plain_text")

    warmup = sub.add_parser("warmup", help="run a warm-up session for one expert")
    warmup.add_argument("--project", required=True)
    warmup.add_argument("--expert", required=True)
    warmup.add_argument("--follow", action="store_true")

    meeting = sub.add_parser("meeting", help="run meetings")
    meeting_sub = meeting.add_subparsers(dest="subcommand", required=True)
    run = meeting_sub.add_parser("run")
    run.add_argument("--project", required=True)
    run.add_argument("--agenda-file", required=True)
    run.add_argument("--rounds", type=int, required=True)
    run.add_argument("--experts", required=True, help="comma-separated expert names")
    run.add_argument("--retrieval-k", type=int, default=5)
    run.add_argument("--context-budget", type=int, default=24000)
    run.add_argument("--follow", action="store_true")

    minutes = sub.add_parser("minutes", help="read meeting minutes")
    minutes_sub = minutes.add_subparsers(dest="subcommand", required=True)
    minutes_show = minutes_sub.add_parser("show")
    minutes_show.add_argument("--meeting", required=True)
    minutes_show.add_argument("--out", default=None)

    return parser


def _read_file(path: str, what: str) -> str:
    p = Path(path)
    if not p.exists():
        raise NotFoundError(f"{what} file not found: {path}")
    return p.read_text(encoding="utf-8")


def _event_line(event_dict: dict) -> str:
    content = event_dict["content"].replace("\n", " ")
    if len(content) > 120:
        content = content[:119] + "…"
    return (
        f"[{event_dict['seq']:>3}] r{event_dict['round']} "
        f"{event_dict['phase']:<16} {event_dict['speaker']}: {content}"
    )


class EmbeddedCli:
    """Commands executed in-process against the data directory."""

    def __init__(self, args, out: Output):
        self.args = args
        self.out = out
        self.store = Store(args.data_dir)
        self._gateway: Gateway | None = None

    def gateway(self) -> Gateway:
        if self._gateway is None:
            if self.args.backend == "scripted":
                if not self.args.script:
                    raise ValidationError("--backend scripted requires --script FILE")
                self._gateway = ScriptedGateway.from_file(self.args.script)
            else:
                self._gateway = OllamaGateway(self.args.llm_url, model=self.args.model)
        return self._gateway

    def engine(self) -> Engine:
        return Engine(self.store, self.gateway(), model=self.args.model)

    def project_create(self):
        project = create_project(self.args.title, self.args.description, self.args.objectives)
        self.store.save_project(project)
        self.out.emit("project", project.to_dict(), f"created project {project.id}")

    def project_list(self):
        for project in self.store.list_projects():
            self.out.emit(
                "project",
                project.to_dict(),
                f"{project.id}  {project.title}  experts={len(project.experts)} meetings={len(project.meetings)}",
            )

    def project_show(self):
        project = self.store.load_project(self.args.project)
        self.out.emit("project", project.to_dict(), json.dumps(project.to_dict(), indent=2, ensure_ascii=False))

    def expert_add(self):
        project = self.store.load_project(self.args.project)
        persona = _read_file(self.args.persona_file, "persona")
        profile = add_expert(project, self.args.name, persona)
        self.store.save_project(project)
        self.out.emit("expert", profile.to_dict(), f"added expert {profile.name} ({profile.id})")

    def doc_ingest(self):
        project = self.store.load_project(self.args.project)
        profile = project.expert(self.args.expert)
        if profile is None:
            raise NotFoundError(f"unknown expert {self.args.expert!r} in project {project.id}")
        raw = _read_file(self.args.file, "document")
        knowledge = KnowledgeStore(self.store.kb_root(project.id), self.gateway())
        if not profile.knowledge_base_id:
            profile.knowledge_base_id = knowledge.create_base()
        source = self.args.source_name or Path(self.args.file).name
        ref, chunk_count = knowledge.ingest_document(profile.knowledge_base_id, source, raw, self.args.media)
        project.corpus.append(ref)
        self.store.save_project(project)
        self.out.emit(
            "document",
            {"document": ref.to_dict(), "chunk_count": chunk_count},
            f"ingested {source} into {profile.knowledge_base_id}: {chunk_count} chunks",
        )

    def _follow_hook(self):
        if not self.args.follow:
            return None

        def hook(event):
            data = event.to_dict()
            self.out.emit("event", data, _event_line(data))

        return hook

    def warmup(self):
        project = self.store.load_project(self.args.project)
        report = self.engine().run_warmup(project, self.args.expert, on_event=self._follow_hook())
        self.out.emit("warmup", {"report": report}, report)

    def meeting_run(self):
        project = self.store.load_project(self.args.project)
        config = MeetingConfig(
            project_id=project.id,
            agenda=_read_file(self.args.agenda_file, "agenda"),
            rounds=self.args.rounds,
            participants=[n.strip() for n in self.args.experts.split(",") if n.strip()],
            retrieval_k=self.args.retrieval_k,
            context_budget=self.args.context_budget,
        )
        minutes = self.engine().run_meeting(project, config, on_event=self._follow_hook())
        self.out.emit(
            "meeting",
            {"meeting_id": minutes.meeting_id, "status": "completed"},
            f"meeting {minutes.meeting_id} completed ({len(minutes.per_round)} rounds)",
        )

    def minutes_show(self):
        rendered = self.store.export_minutes(self.args.meeting)
        if self.args.out:
            Path(self.args.out).write_text(rendered, encoding="utf-8")
            self.out.emit(
                "minutes",
                {"meeting_id": self.args.meeting, "path": self.args.out},
                f"wrote minutes to {self.args.out}",
            )
        else:
            minutes = self.store.load_minutes(self.args.meeting)
            self.out.emit("minutes", minutes.to_dict(), rendered)


class ServiceCli:
    """Commands executed against a running service over HTTP."""

    def __init__(self, args, out: Output):
        self.args = args
        self.out = out
        self.client = httpx.Client(base_url=args.url.rstrip("/"), timeout=30.0)

    def _call(self, method: str, path: str, payload: dict | None = None) -> dict:
        response = self.client.request(method, path, json=payload)
        if response.status_code >= 400:
            self._raise_for(response)
        return response.json()

    @staticmethod
    def _raise_for(response: httpx.Response):
        try:
            error = response.json().get("error", {})
        except ValueError:
            error = {}
        kind = error.get("kind", "error")
        message = error.get("message", f"HTTP {response.status_code}")
        exc_type = {
            "validation": ValidationError,
            "conflict": ConflictError,
            "state": StateError,
            "not_found": NotFoundError,
            "integrity": IntegrityError,
        }.get(kind, GatewayError)
        if exc_type is ValidationError:
            raise ValidationError(message, error.get("violations"))
        raise exc_type(message)

    def project_create(self):
        data = self._call("POST", "/projects", {
            "title": self.args.title,
            "description": self.args.description,
            "objectives": self.args.objectives,
        })
        self.out.emit("project", data, f"created project {data['id']}")

    def project_list(self):
        for project in self._call("GET", "/projects")["projects"]:
            self.out.emit(
                "project",
                project,
                f"{project['id']}  {project['title']}  experts={len(project['experts'])} meetings={len(project['meetings'])}",
            )

    def project_show(self):
        data = self._call("GET", f"/projects/{self.args.project}")
        self.out.emit("project", data, json.dumps(data, indent=2, ensure_ascii=False))

    def expert_add(self):
        persona = _read_file(self.args.persona_file, "persona")
        data = self._call("POST", f"/projects/{self.args.project}/experts",
                          {"name": self.args.name, "persona": persona})
        self.out.emit("expert", data, f"added expert {data['name']} ({data['id']})")

    def doc_ingest(self):
        raw = _read_file(self.args.file, "document")
        source = self.args.source_name or Path(self.args.file).name
        data = self._call("POST", f"/projects/{self.args.project}/documents", {
            "expert": self.args.expert,
            "source_name": source,
            "media": self.args.media,
            "content": raw,
        })
        self.out.emit("document", data, f"ingested {source}: {data['chunk_count']} chunks")

    def _follow(self, meeting_id: str) -> str:
        """Stream events until the terminal one; returns the terminal phase."""
        terminal = ""
        with self.client.stream("GET", f"/meetings/{meeting_id}/events", timeout=None) as response:
            if response.status_code >= 400:
                response.read()
                self._raise_for(response)
            for raw_line in response.iter_lines():
                line = raw_line.strip()
                if not line.startswith("data:"):
                    continue
                data = json.loads(line[len("data:"):].strip())
                if "phase" not in data:
                    continue
                self.out.emit("event", data, _event_line(data))
                if data["phase"] in ("meeting_finished", "meeting_failed"):
                    terminal = data["phase"]
                    break
        return terminal

    def _wait(self, meeting_id: str) -> str:
        while True:
            record = self._call("GET", f"/meetings/{meeting_id}")
            if record["status"] != "running":
                return record["status"]
            time.sleep(0.3)

    def _finish_meeting(self, meeting_id: str, label: str):
        if self.args.follow:
            terminal = self._follow(meeting_id)
            status = "completed" if terminal == "meeting_finished" else "failed"
        else:
            status = self._wait(meeting_id)
        if status != "completed":
            raise GatewayError(f"{label} {meeting_id} failed")
        self.out.emit(
            "meeting",
            {"meeting_id": meeting_id, "status": status},
            f"{label} {meeting_id} {status}",
        )

    def warmup(self):
        project = self._call("GET", f"/projects/{self.args.project}")
        expert = next((e for e in project["experts"] if e["name"] == self.args.expert), None)
        if expert is None:
            raise NotFoundError(f"unknown expert {self.args.expert!r} in project {self.args.project}")
        data = self._call("POST", f"/experts/{expert['id']}/warmup")
        self._finish_meeting(data["meeting_id"], "warm-up")

    def meeting_run(self):
        agenda = _read_file(self.args.agenda_file, "agenda")
        data = self._call("POST", f"/projects/{self.args.project}/meetings", {
            "agenda": agenda,
            "rounds": self.args.rounds,
            "participants": [n.strip() for n in self.args.experts.split(",") if n.strip()],
            "retrieval_k": self.args.retrieval_k,
            "context_budget": self.args.context_budget,
        })
        self._finish_meeting(data["meeting_id"], "meeting")

    def minutes_show(self):
        data = self._call("GET", f"/meetings/{self.args.meeting}/minutes")
        rendered = data["rendered"]
        if self.args.out:
            Path(self.args.out).write_text(rendered, encoding="utf-8")
            self.out.emit(
                "minutes",
                {"meeting_id": self.args.meeting, "path": self.args.out},
                f"wrote minutes to {self.args.out}",
            )
        else:
            self.out.emit("minutes", data, rendered)


def _dispatch(args, out: Output) -> None:
    cli = ServiceCli(args, out) if args.url else EmbeddedCli(args, out)
    command = args.command
    if command == "project":
        getattr(cli, f"project_{args.subcommand}")()
    elif command == "expert":
        cli.expert_add()
    elif command == "doc":
        cli.doc_ingest()
    elif command == "warmup":
        cli.warmup()
    elif command == "meeting":
        cli.meeting_run()
    elif command == "minutes":
        cli.minutes_show()


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out = Output(machine=args.json)
    try:
        _dispatch(args, out)
    except ThinkTankError as exc:
        out.error(exc)
        for exc_type, code in _EXIT_BY_TYPE:
            if isinstance(exc, exc_type):
                return code
        return 1
    except httpx.HTTPError as exc:
        out.error(GatewayError(f"service unreachable: {exc}"))
        return EXIT_BACKEND
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
