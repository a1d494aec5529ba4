"""Short-term session context and long-term per-agent project notes.

Session memory is an in-process, append-only turn list confined to one
meeting run; its ``session_context`` rendering always keeps the most recent
turns within a character budget. Long-term notes are embedded and persisted
per project (JSONL + packed vector file, same commit discipline as the
knowledge store) and recalled by cosine similarity.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .errors import IntegrityError, NotFoundError, ValidationError
from .gateway import EmbeddingVector, Gateway
from .ids import Clock, IdFactory, default_clock, default_ids
from .model import COORDINATOR_NAME, CRITIC_NAME, ProjectRecord
from . import vectors

logger = logging.getLogger(__name__)

TRUNCATION_MARKER = "…"

NOTE_ORIGINS = ("warmup", "round_synthesis", "manual")


@dataclass
class SessionTurn:
    speaker: str
    phase: str
    content: str


@dataclass
class SessionMemory:
    meeting_id: str
    turns: list[SessionTurn] = field(default_factory=list)


def append_turn(session: SessionMemory, speaker: str, phase: str, content: str) -> SessionMemory:
    if not content:
        raise ValidationError("turn content must be non-empty")
    session.turns.append(SessionTurn(speaker=speaker, phase=phase, content=content))
    return session


def render_turn(turn: SessionTurn) -> str:
    return f"[{turn.speaker}/{turn.phase}] {turn.content}\n"


def clip_tail(text: str, budget: int) -> str:
    """Keep the trailing ``budget`` characters, marking any truncation."""
    if budget <= 0:
        raise ValidationError("budget must be positive")
    if len(text) <= budget:
        return text
    keep = budget - len(TRUNCATION_MARKER)
    tail = text[len(text) - keep :] if keep > 0 else ""
    return TRUNCATION_MARKER + tail


def session_context(session: SessionMemory, budget: int) -> str:
    """Render the longest suffix of turns fitting the character budget.

    The most recent turns always win; if even the last turn alone exceeds
    the budget it is truncated from the front with a marker. Output length
    never exceeds the budget.
    """
    if budget <= 0:
        raise ValidationError("budget must be positive")
    rendered = [render_turn(t) for t in session.turns]
    if not rendered:
        return ""
    total = 0
    start = len(rendered)
    for i in range(len(rendered) - 1, -1, -1):
        if total + len(rendered[i]) > budget:
            break
        total += len(rendered[i])
        start = i
    if start == len(rendered):
        return clip_tail(rendered[-1], budget)
    return "".join(rendered[start:])


@dataclass
class LongTermNote:
    note_id: str
    agent_name: str
    project_id: str
    text: str
    origin: str
    created_at: str
    embedding: EmbeddingVector | None = None

    def to_dict(self) -> dict:
        return {
            "note_id": self.note_id,
            "agent_name": self.agent_name,
            "project_id": self.project_id,
            "text": self.text,
            "origin": self.origin,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LongTermNote":
        return cls(
            note_id=data["note_id"],
            agent_name=data["agent_name"],
            project_id=data["project_id"],
            text=data["text"],
            origin=data["origin"],
            created_at=data["created_at"],
        )


class MemoryStore:
    """Long-term notes for one project, persisted under its notes directory."""

    def __init__(
        self,
        root: Path | str,
        gateway: Gateway,
        *,
        ids: IdFactory | None = None,
        clock: Clock | None = None,
    ):
        self.root = Path(root)
        self.gateway = gateway
        self.ids = ids or default_ids()
        self.clock = clock or default_clock()

    def _manifest_path(self) -> Path:
        return self.root / "manifest.json"

    def _manifest(self) -> dict:
        path = self._manifest_path()
        if not path.exists():
            return {"dim": None, "count": 0, "notes_bytes": 0, "vectors_bytes": 0}
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except ValueError as exc:
            raise IntegrityError(f"corrupt notes manifest {path}") from exc

    def _commit_manifest(self, manifest: dict) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        tmp = self._manifest_path().with_suffix(".json.tmp")
        tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
        tmp.replace(self._manifest_path())

    @staticmethod
    def _known_agent(project: ProjectRecord, agent_name: str) -> bool:
        if agent_name in (COORDINATOR_NAME, CRITIC_NAME):
            return True
        return project.expert(agent_name) is not None

    def store_note(
        self, project: ProjectRecord, agent_name: str, text: str, origin: str
    ) -> LongTermNote:
        if not text:
            raise ValidationError("note text must be non-empty")
        if origin not in NOTE_ORIGINS:
            raise ValidationError(f"origin must be one of {NOTE_ORIGINS}")
        if not self._known_agent(project, agent_name):
            raise NotFoundError(f"unknown agent {agent_name!r} in project {project.id}")
        manifest = self._manifest()
        embedding = self.gateway.embed([text])[0]
        if manifest["dim"] is not None and manifest["dim"] != embedding.dim:
            raise ValidationError(
                f"note embedding dim {embedding.dim} does not match project dim {manifest['dim']}"
            )
        self.root.mkdir(parents=True, exist_ok=True)
        notes_path = self.root / "notes.jsonl"
        vec_path = self.root / "notes.vec"
        _truncate(notes_path, manifest["notes_bytes"])
        vectors.truncate_to(vec_path, manifest["vectors_bytes"])

        note = LongTermNote(
            note_id=self.ids.new("note"),
            agent_name=agent_name,
            project_id=project.id,
            text=text,
            origin=origin,
            created_at=self.clock.now_iso(),
            embedding=embedding,
        )
        with open(notes_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(note.to_dict(), ensure_ascii=False) + "\n")
        vectors.append_rows(vec_path, [list(embedding.values)])

        manifest["dim"] = embedding.dim
        manifest["count"] += 1
        manifest["notes_bytes"] = notes_path.stat().st_size
        manifest["vectors_bytes"] = vec_path.stat().st_size
        self._commit_manifest(manifest)
        return note

    def notes(self, agent_name: str | None = None, with_embeddings: bool = False) -> list[LongTermNote]:
        manifest = self._manifest()
        if manifest["count"] == 0:
            return []
        path = self.root / "notes.jsonl"
        data = path.read_bytes()[: manifest["notes_bytes"]]
        records = [LongTermNote.from_dict(json.loads(line)) for line in data.decode("utf-8").splitlines() if line]
        if len(records) != manifest["count"]:
            raise IntegrityError(f"notes table holds {len(records)} rows, manifest committed {manifest['count']}")
        if with_embeddings:
            matrix = vectors.read_matrix(self.root / "notes.vec", manifest["dim"], manifest["count"])
            for row, record in zip(matrix, records):
                record.embedding = EmbeddingVector(tuple(float(v) for v in row), manifest["dim"])
        if agent_name is not None:
            records = [r for r in records if r.agent_name == agent_name]
        return records

    def recall_notes(
        self, project: ProjectRecord, agent_name: str, query: str, k: int = 5
    ) -> list[tuple[LongTermNote, float]]:
        """Top-k notes of one agent by cosine similarity, ties by note_id."""
        if not query:
            raise ValidationError("query must be non-empty")
        if k < 1:
            raise ValidationError("k must be ≥ 1")
        if not self._known_agent(project, agent_name):
            raise NotFoundError(f"unknown agent {agent_name!r} in project {project.id}")
        manifest = self._manifest()
        if manifest["count"] == 0:
            return []
        candidates = [n for n in self.notes(with_embeddings=True) if n.agent_name == agent_name]
        if not candidates:
            return []
        query_vec = self.gateway.embed([query])[0]
        matrix = [list(n.embedding.values) for n in candidates]
        scores = vectors.cosine_scores(matrix, query_vec.values)
        order = sorted(range(len(candidates)), key=lambda i: (-scores[i], candidates[i].note_id))[:k]
        return [(candidates[i], float(scores[i])) for i in order]


def _truncate(path: Path, byte_count: int) -> None:
    if path.exists() and path.stat().st_size > byte_count:
        with open(path, "r+b") as fh:
            fh.truncate(byte_count)
