"""Durable storage: one data directory, human-readable records, append-only logs.

Layout (format version 1)::

    <root>/manifest.json
    <root>/projects/<pid>/project.json
    <root>/projects/<pid>/lock
    <root>/projects/<pid>/meetings/<mid>/meeting.json
    <root>/projects/<pid>/meetings/<mid>/events.log      (JSONL, append-only)
    <root>/projects/<pid>/meetings/<mid>/minutes.json
    <root>/projects/<pid>/notes/                          (memory module)
    <root>/projects/<pid>/kb/<kbid>/                      (knowledge module)

Every record write is atomic (temp file + rename). Event logs are append-only
JSONL; a reader accepts a truncated trailing record (crash mid-append) but
treats any other malformation, or a non-dense seq run, as an integrity error.
"""

from __future__ import annotations

import fcntl
import json
import logging
import os
from contextlib import contextmanager
from pathlib import Path

from .errors import ConflictError, IntegrityError, NotFoundError, StateError
from .model import (
    COORDINATOR_NAME,
    CRITIC_NAME,
    MeetingEvent,
    MeetingKind,
    MeetingMinutes,
    MeetingRecord,
    MeetingStatus,
    ProjectRecord,
)

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
DATA_DIR_ENV = "THINKTANK_DATA_DIR"
DEFAULT_DATA_DIR = "./thinktank_data"


def data_dir_from_env() -> Path:
    return Path(os.environ.get(DATA_DIR_ENV, DEFAULT_DATA_DIR))


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def _load_json(path: Path, entity: str) -> dict:
    if not path.exists():
        raise NotFoundError(f"{entity} not found")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise IntegrityError(f"corrupt {entity} record in {path}") from exc


class EventLog:
    """Append-only log of one meeting's events, dense seq starting at 1."""

    def __init__(self, path: Path):
        self.path = path
        self._last_seq = 0
        if path.exists():
            events = read_log(path)
            self._last_seq = events[-1].seq if events else 0

    @property
    def last_seq(self) -> int:
        return self._last_seq

    def append(self, event: MeetingEvent) -> None:
        if event.seq != self._last_seq + 1:
            raise IntegrityError(
                f"event seq {event.seq} breaks contiguity (last was {self._last_seq})"
            )
        line = json.dumps(event.to_dict(), ensure_ascii=False, separators=(",", ":"))
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
        self._last_seq = event.seq

    def read(self, from_seq: int = 1) -> list[MeetingEvent]:
        return [e for e in read_log(self.path) if e.seq >= from_seq]


def read_log(path: Path) -> list[MeetingEvent]:
    """Parse an event log, tolerating only a truncated trailing record.

    Returns the valid prefix; raises IntegrityError on any corruption that
    truncation cannot explain (bad interior line, malformed complete record,
    seq gap).
    """
    if not path.exists():
        return []
    raw = path.read_bytes()
    if not raw:
        return []
    ends_complete = raw.endswith(b"\n")
    lines = raw.split(b"\n")
    if ends_complete:
        lines = lines[:-1]
    events: list[MeetingEvent] = []
    for index, line in enumerate(lines):
        last = index == len(lines) - 1
        try:
            data = json.loads(line.decode("utf-8"))
            event = MeetingEvent.from_dict(data)
        except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
            if last and not ends_complete:
                break  # crash mid-append: drop the partial tail record
            raise IntegrityError(f"corrupt event record at line {index + 1} in {path}") from exc
        events.append(event)
    for position, event in enumerate(events, start=1):
        if event.seq != position:
            raise IntegrityError(
                f"event log {path} is not dense: expected seq {position}, found {event.seq}"
            )
    return events


class Store:
    """Single data-directory store for projects, meetings, events, minutes."""

    def __init__(self, root: Path | str, create: bool = True):
        self.root = Path(root)
        manifest_path = self.root / "manifest.json"
        if manifest_path.exists():
            manifest = _load_json(manifest_path, "store manifest")
            version = manifest.get("format_version")
            if version != FORMAT_VERSION:
                raise IntegrityError(
                    f"data directory uses layout version {version}; this build reads "
                    f"version {FORMAT_VERSION} and has no migration for it"
                )
        elif create:
            self.root.mkdir(parents=True, exist_ok=True)
            _write_atomic(manifest_path, json.dumps({"format_version": FORMAT_VERSION}, indent=2))
        else:
            raise NotFoundError(f"no data directory at {self.root}")

    # -- paths -----------------------------------------------------------

    def project_dir(self, project_id: str) -> Path:
        return self.root / "projects" / project_id

    def kb_root(self, project_id: str) -> Path:
        return self.project_dir(project_id) / "kb"

    def notes_root(self, project_id: str) -> Path:
        return self.project_dir(project_id) / "notes"

    def meeting_dir(self, project_id: str, meeting_id: str) -> Path:
        return self.project_dir(project_id) / "meetings" / meeting_id

    def find_meeting_dir(self, meeting_id: str) -> Path | None:
        projects = self.root / "projects"
        if not projects.exists():
            return None
        for project_dir in sorted(projects.iterdir()):
            candidate = project_dir / "meetings" / meeting_id
            if (candidate / "meeting.json").exists():
                return candidate
        return None

    # -- locking ---------------------------------------------------------

    @contextmanager
    def write_lock(self, project_id: str):
        """Advisory single-writer lock for one project directory."""
        project_dir = self.project_dir(project_id)
        project_dir.mkdir(parents=True, exist_ok=True)
        lock_path = project_dir / "lock"
        with open(lock_path, "a+") as fh:
            fcntl.flock(fh.fileno(), fcntl.LOCK_EX)
            try:
                yield
            finally:
                fcntl.flock(fh.fileno(), fcntl.LOCK_UN)

    # -- projects ----------------------------------------------------------

    def save_project(self, project: ProjectRecord) -> None:
        with self.write_lock(project.id):
            path = self.project_dir(project.id) / "project.json"
            _write_atomic(path, json.dumps(project.to_dict(), indent=2, ensure_ascii=False))

    def load_project(self, project_id: str) -> ProjectRecord:
        path = self.project_dir(project_id) / "project.json"
        data = _load_json(path, f"project {project_id}")
        try:
            return ProjectRecord.from_dict(data)
        except (KeyError, TypeError, ValueError) as exc:
            raise IntegrityError(f"corrupt project record in {path}") from exc

    def list_projects(self) -> list[ProjectRecord]:
        projects = self.root / "projects"
        if not projects.exists():
            return []
        records = []
        for project_dir in sorted(projects.iterdir()):
            if (project_dir / "project.json").exists():
                records.append(self.load_project(project_dir.name))
        return records

    def find_expert(self, agent_id: str) -> tuple[ProjectRecord, str] | None:
        """Locate an expert by its opaque id across all projects."""
        for project in self.list_projects():
            profile = project.expert_by_id(agent_id)
            if profile is not None:
                return project, profile.name
        return None

    # -- meetings ----------------------------------------------------------

    def create_meeting(self, project: ProjectRecord, record: MeetingRecord) -> None:
        """Persist a new meeting record and append it to the project history."""
        meeting_dir = self.meeting_dir(project.id, record.id)
        if meeting_dir.exists():
            raise ConflictError(f"meeting {record.id!r} already exists")
        meeting_dir.mkdir(parents=True)
        _write_atomic(meeting_dir / "meeting.json", json.dumps(record.to_dict(), indent=2, ensure_ascii=False))
        project.meetings.append(record.id)
        self.save_project(project)

    def save_meeting(self, record: MeetingRecord) -> None:
        meeting_dir = self.meeting_dir(record.project_id, record.id)
        if not meeting_dir.exists():
            raise NotFoundError(f"meeting not found: {record.id}")
        _write_atomic(meeting_dir / "meeting.json", json.dumps(record.to_dict(), indent=2, ensure_ascii=False))

    def load_meeting(self, meeting_id: str) -> MeetingRecord:
        meeting_dir = self.find_meeting_dir(meeting_id)
        if meeting_dir is None:
            raise NotFoundError(f"meeting not found: {meeting_id}")
        data = _load_json(meeting_dir / "meeting.json", f"meeting {meeting_id}")
        try:
            return MeetingRecord.from_dict(data)
        except (KeyError, TypeError, ValueError) as exc:
            raise IntegrityError(f"corrupt meeting record in {meeting_dir}") from exc

    def list_meetings(self, project_id: str) -> list[MeetingRecord]:
        project = self.load_project(project_id)
        return [self.load_meeting(mid) for mid in project.meetings]

    # -- events ------------------------------------------------------------

    def event_log(self, project_id: str, meeting_id: str) -> EventLog:
        meeting_dir = self.meeting_dir(project_id, meeting_id)
        if not meeting_dir.exists():
            raise NotFoundError(f"meeting not found: {meeting_id}")
        return EventLog(meeting_dir / "events.log")

    def read_events(self, meeting_id: str, from_seq: int = 1) -> list[MeetingEvent]:
        meeting_dir = self.find_meeting_dir(meeting_id)
        if meeting_dir is None:
            raise NotFoundError(f"meeting not found: {meeting_id}")
        return [e for e in read_log(meeting_dir / "events.log") if e.seq >= from_seq]

    # -- minutes -----------------------------------------------------------

    def save_minutes(self, project_id: str, minutes: MeetingMinutes) -> None:
        meeting_dir = self.meeting_dir(project_id, minutes.meeting_id)
        if not meeting_dir.exists():
            raise NotFoundError(f"meeting not found: {minutes.meeting_id}")
        _write_atomic(meeting_dir / "minutes.json", json.dumps(minutes.to_dict(), indent=2, ensure_ascii=False))

    def load_minutes(self, meeting_id: str, with_transcript: bool = False) -> MeetingMinutes:
        meeting_dir = self.find_meeting_dir(meeting_id)
        if meeting_dir is None:
            raise NotFoundError(f"meeting not found: {meeting_id}")
        data = _load_json(meeting_dir / "minutes.json", f"minutes of meeting {meeting_id}")
        try:
            minutes = MeetingMinutes.from_dict(data)
        except (KeyError, TypeError, ValueError) as exc:
            raise IntegrityError(f"corrupt minutes record in {meeting_dir}") from exc
        if with_transcript:
            minutes.transcript = read_log(meeting_dir / "events.log")
        return minutes

    def export_minutes(self, meeting_id: str) -> str:
        """Deterministic text rendering of a completed meeting's minutes."""
        record = self.load_meeting(meeting_id)
        if record.status == MeetingStatus.RUNNING:
            raise StateError("meeting in progress")
        if record.status == MeetingStatus.FAILED:
            raise StateError("meeting failed; no final minutes exist")
        minutes = self.load_minutes(meeting_id)
        return render_minutes(record, minutes)


def render_minutes(record: MeetingRecord, minutes: MeetingMinutes) -> str:
    """Pure rendering: same minutes, same bytes."""
    lines = [
        "MEETING MINUTES",
        "===============",
        "",
        f"Meeting: {record.id}",
        f"Kind: {record.config.kind.value}",
        "",
        "Agenda:",
        record.config.agenda,
        "",
        "Participants:",
    ]
    if record.config.kind == MeetingKind.TEAM:
        lines.append(f"- {COORDINATOR_NAME} (system)")
        lines.append(f"- {CRITIC_NAME} (system)")
    for name in record.config.participants:
        lines.append(f"- {name} (domain expert)")
    for round_record in minutes.per_round:
        lines.extend(["", f"Round {round_record.round_index} Synthesis:", round_record.synthesis])
        if round_record.follow_up_questions:
            lines.extend(["", f"Round {round_record.round_index} Follow-ups:"])
            for number, question in enumerate(round_record.follow_up_questions, start=1):
                lines.append(f"{number}. {question}")
    lines.extend(["", "Final Summary:", minutes.final_summary, ""])
    return "\n".join(lines)
