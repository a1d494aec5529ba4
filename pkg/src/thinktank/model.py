"""Core domain records shared by every other module.

Records are plain dataclasses with explicit ``to_dict``/``from_dict``
conversion so the persistence layer can store them as human-readable JSON
with a stable key order. They are treated as immutable snapshots by all
readers; mutation is reserved for the single writer that holds the project
lock (see ``storage``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import ConflictError, ValidationError
from .ids import Clock, IdFactory, default_clock, default_ids


class Role(str, Enum):
    COORDINATOR = "coordinator"
    DOMAIN_EXPERT = "domain_expert"
    CRITICAL_THINKER = "critical_thinker"


class MeetingKind(str, Enum):
    TEAM = "team"
    WARMUP = "warmup"


class MeetingStatus(str, Enum):
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


class Phase(str, Enum):
    MEETING_STARTED = "meeting_started"
    GUIDANCE = "guidance"
    EXPERT_TURN = "expert_turn"
    CRITIQUE = "critique"
    SYNTHESIS = "synthesis"
    FINAL_SUMMARY = "final_summary"
    MEETING_FINISHED = "meeting_finished"
    MEETING_FAILED = "meeting_failed"


# Phases whose events carry agent-generated content; bookends and failure
# markers are excluded.
CONTENT_PHASES = frozenset(
    {
        Phase.GUIDANCE,
        Phase.EXPERT_TURN,
        Phase.CRITIQUE,
        Phase.SYNTHESIS,
        Phase.FINAL_SUMMARY,
    }
)

TERMINAL_PHASES = frozenset({Phase.MEETING_FINISHED, Phase.MEETING_FAILED})

# Display names of the two system roles. Experts may not shadow them.
COORDINATOR_NAME = "Coordinator"
CRITIC_NAME = "Critical Thinker"
SYSTEM_SPEAKER = "system"
RESERVED_NAMES = frozenset({COORDINATOR_NAME, CRITIC_NAME, SYSTEM_SPEAKER})

COORDINATOR_PERSONA = (
    "Meeting lead: issues round guidance, synthesizes each round's discussion, "
    "carries unresolved questions forward, and compiles the final minutes."
)
CRITIC_PERSONA = (
    "Critical reviewer: examines expert contributions for fallacies, unstated "
    "assumptions, potential biases, and implementation risks, and reports to "
    "the meeting lead."
)


@dataclass
class AgentProfile:
    """A meeting participant. Experts are user-configured; the coordinator and
    critical thinker are fixed system roles and never appear in a roster."""

    id: str
    name: str
    role: Role
    persona: str = ""
    knowledge_base_id: str | None = None
    warmup_done: bool = False

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "role": self.role.value,
            "persona": self.persona,
            "knowledge_base_id": self.knowledge_base_id,
            "warmup_done": self.warmup_done,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AgentProfile":
        return cls(
            id=data["id"],
            name=data["name"],
            role=Role(data["role"]),
            persona=data.get("persona", ""),
            knowledge_base_id=data.get("knowledge_base_id"),
            warmup_done=bool(data.get("warmup_done", False)),
        )


@dataclass
class DocumentRef:
    """Provenance record for one ingested document."""

    doc_id: str
    knowledge_base_id: str
    source_name: str
    media: str  # plain_text | markdown | pdf_extracted
    char_count: int
    ingested_at: str

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "knowledge_base_id": self.knowledge_base_id,
            "source_name": self.source_name,
            "media": self.media,
            "char_count": self.char_count,
            "ingested_at": self.ingested_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DocumentRef":
        return cls(
            doc_id=data["doc_id"],
            knowledge_base_id=data["knowledge_base_id"],
            source_name=data["source_name"],
            media=data["media"],
            char_count=int(data["char_count"]),
            ingested_at=data["ingested_at"],
        )


MEDIA_KINDS = ("plain_text", "markdown", "pdf_extracted")


@dataclass
class ProjectRecord:
    """A project: description, objectives, expert roster, corpus, meetings."""

    id: str
    title: str
    description: str = ""
    objectives: list[str] = field(default_factory=list)
    experts: list[AgentProfile] = field(default_factory=list)
    corpus: list[DocumentRef] = field(default_factory=list)
    meetings: list[str] = field(default_factory=list)
    created_at: str = ""

    def expert(self, name: str) -> AgentProfile | None:
        for profile in self.experts:
            if profile.name == name:
                return profile
        return None

    def expert_by_id(self, agent_id: str) -> AgentProfile | None:
        for profile in self.experts:
            if profile.id == agent_id:
                return profile
        return None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "description": self.description,
            "objectives": list(self.objectives),
            "experts": [e.to_dict() for e in self.experts],
            "corpus": [d.to_dict() for d in self.corpus],
            "meetings": list(self.meetings),
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProjectRecord":
        return cls(
            id=data["id"],
            title=data["title"],
            description=data.get("description", ""),
            objectives=list(data.get("objectives", [])),
            experts=[AgentProfile.from_dict(e) for e in data.get("experts", [])],
            corpus=[DocumentRef.from_dict(d) for d in data.get("corpus", [])],
            meetings=list(data.get("meetings", [])),
            created_at=data.get("created_at", ""),
        )


@dataclass
class MeetingConfig:
    """User-supplied parameters of one meeting."""

    project_id: str
    agenda: str
    rounds: int
    participants: list[str] = field(default_factory=list)
    kind: MeetingKind = MeetingKind.TEAM
    retrieval_k: int = 5
    context_budget: int = 24000  # characters per prompt section

    def to_dict(self) -> dict:
        return {
            "project_id": self.project_id,
            "agenda": self.agenda,
            "rounds": self.rounds,
            "participants": list(self.participants),
            "kind": self.kind.value,
            "retrieval_k": self.retrieval_k,
            "context_budget": self.context_budget,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MeetingConfig":
        return cls(
            project_id=data["project_id"],
            agenda=data["agenda"],
            rounds=int(data["rounds"]),
            participants=list(data.get("participants", [])),
            kind=MeetingKind(data.get("kind", "team")),
            retrieval_k=int(data.get("retrieval_k", 5)),
            context_budget=int(data.get("context_budget", 24000)),
        )


@dataclass
class MeetingRecord:
    """Durable identity and lifecycle state of one meeting."""

    id: str
    project_id: str
    config: MeetingConfig
    status: MeetingStatus = MeetingStatus.RUNNING
    created_at: str = ""

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "project_id": self.project_id,
            "config": self.config.to_dict(),
            "status": self.status.value,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MeetingRecord":
        return cls(
            id=data["id"],
            project_id=data["project_id"],
            config=MeetingConfig.from_dict(data["config"]),
            status=MeetingStatus(data["status"]),
            created_at=data.get("created_at", ""),
        )


@dataclass
class RoundRecord:
    """Everything one round produced."""

    round_index: int
    guidance: str
    expert_turns: list[tuple[str, str]]  # (speaker, content) in turn order
    critique: str
    synthesis: str
    follow_up_questions: list[str]

    def to_dict(self) -> dict:
        return {
            "round_index": self.round_index,
            "guidance": self.guidance,
            "expert_turns": [[name, text] for name, text in self.expert_turns],
            "critique": self.critique,
            "synthesis": self.synthesis,
            "follow_up_questions": list(self.follow_up_questions),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RoundRecord":
        return cls(
            round_index=int(data["round_index"]),
            guidance=data["guidance"],
            expert_turns=[(pair[0], pair[1]) for pair in data["expert_turns"]],
            critique=data["critique"],
            synthesis=data["synthesis"],
            follow_up_questions=list(data["follow_up_questions"]),
        )


@dataclass
class MeetingMinutes:
    """Durable outcome of a meeting: per-round records plus final summary.

    The full transcript lives in the meeting's event log; ``transcript`` is
    populated on demand when minutes are loaded together with events.
    """

    meeting_id: str
    per_round: list[RoundRecord]
    final_summary: str
    transcript: list["MeetingEvent"] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "meeting_id": self.meeting_id,
            "per_round": [r.to_dict() for r in self.per_round],
            "final_summary": self.final_summary,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MeetingMinutes":
        return cls(
            meeting_id=data["meeting_id"],
            per_round=[RoundRecord.from_dict(r) for r in data["per_round"]],
            final_summary=data["final_summary"],
        )


@dataclass
class MeetingEvent:
    """One entry of the append-only meeting transcript.

    ``seq`` starts at 1 and is dense; ``round`` is 0 for events outside any
    round (bookends and the final summary).
    """

    seq: int
    meeting_id: str
    phase: Phase
    speaker: str
    content: str
    round: int
    timestamp: str

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "meeting_id": self.meeting_id,
            "phase": self.phase.value,
            "speaker": self.speaker,
            "content": self.content,
            "round": self.round,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MeetingEvent":
        return cls(
            seq=int(data["seq"]),
            meeting_id=data["meeting_id"],
            phase=Phase(data["phase"]),
            speaker=data["speaker"],
            content=data["content"],
            round=int(data["round"]),
            timestamp=data["timestamp"],
        )


def create_project(
    title: str,
    description: str = "",
    objectives: list[str] | None = None,
    *,
    ids: IdFactory | None = None,
    clock: Clock | None = None,
) -> ProjectRecord:
    """Create an empty project with a fresh unique id.

    Raises ValidationError when the title is empty or whitespace.
    """
    if not title or not title.strip():
        raise ValidationError("project title must be non-empty")
    ids = ids or default_ids()
    clock = clock or default_clock()
    return ProjectRecord(
        id=ids.new("proj"),
        title=title.strip(),
        description=description,
        objectives=list(objectives or []),
        created_at=clock.now_iso(),
    )


def add_expert(
    project: ProjectRecord,
    name: str,
    persona: str = "",
    *,
    ids: IdFactory | None = None,
) -> AgentProfile:
    """Append a domain expert to the roster.

    Names must be unique within the project and may not shadow the system
    roles. The new expert starts without a knowledge base and with
    warmup_done=False.
    """
    if not name or not name.strip():
        raise ValidationError("expert name must be non-empty")
    name = name.strip()
    if name in RESERVED_NAMES:
        raise ConflictError(f"name {name!r} is reserved for a system role")
    if project.expert(name) is not None:
        raise ConflictError(f"expert {name!r} already exists in project {project.id}")
    ids = ids or default_ids()
    profile = AgentProfile(id=ids.new("agent"), name=name, role=Role.DOMAIN_EXPERT, persona=persona)
    project.experts.append(profile)
    return profile


def validate_meeting_config(config: MeetingConfig, project: ProjectRecord) -> list[str]:
    """Return every invariant violation of the config against the project.

    Total: never raises, whatever the field values are. An empty list means
    the config is valid.
    """
    violations: list[str] = []
    try:
        if config.project_id != project.id:
            violations.append(f"config project_id {config.project_id!r} does not match project {project.id!r}")
        if not isinstance(config.rounds, int) or config.rounds < 1:
            violations.append("rounds ≥ 1 required")
        if not isinstance(config.agenda, str) or not config.agenda.strip():
            violations.append("agenda must be non-empty")
        if not isinstance(config.retrieval_k, int) or config.retrieval_k < 1:
            violations.append("retrieval_k ≥ 1 required")
        if not isinstance(config.context_budget, int) or config.context_budget < 1:
            violations.append("context_budget ≥ 1 required")

        participants = list(config.participants or [])
        if len(set(participants)) != len(participants):
            violations.append("participants must not repeat")
        unknown = [n for n in participants if project.expert(n) is None]
        if config.kind == MeetingKind.WARMUP:
            if len(participants) != 1:
                violations.append("a warm-up meeting has exactly 1 participant")
        else:
            if not participants:
                violations.append("a team meeting needs at least 1 participant")
        if unknown:
            violations.append(f"unknown participants: {', '.join(repr(n) for n in unknown)}")
    except Exception as exc:  # totality over arbitrary garbage values
        violations.append(f"config not interpretable: {exc}")
    return violations
