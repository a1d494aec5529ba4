"""The meeting state machine: rounds, sequential expert chain, critique,
synthesis with carry-over, final summary, and single-expert warm-ups.

A team meeting with N participants and R rounds emits, in order:
``meeting_started``, then per round ``guidance``, N ``expert_turn``s,
``critique``, ``synthesis``, then ``final_summary`` and
``meeting_finished`` — R*(N+3)+1 content events bracketed by two bookends.
Every event is appended to the meeting's log before any subscriber hears
about it. A gateway failure mid-meeting appends a ``meeting_failed`` marker
and leaves no minutes claiming completion.

Prompt texts are assembled from fixed labeled sections; each section is
clipped to the meeting's character budget keeping the most recent tail.
The critique never reaches the experts directly: it flows into the
coordinator's synthesis, and the synthesis (plus its follow-up questions)
is carried verbatim into every prompt of the next round.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .errors import GatewayError, NotFoundError, StateError, ValidationError
from .gateway import ChatMessage, ChatRequest, Gateway
from .ids import Clock, IdFactory, default_clock, default_ids
from .knowledge import KnowledgeStore, ScoredChunk, adaptive_filter
from .memory import (
    LongTermNote,
    MemoryStore,
    SessionMemory,
    append_turn,
    clip_tail,
    session_context,
)
from .model import (
    COORDINATOR_NAME,
    COORDINATOR_PERSONA,
    CRITIC_NAME,
    CRITIC_PERSONA,
    SYSTEM_SPEAKER,
    AgentProfile,
    MeetingConfig,
    MeetingEvent,
    MeetingKind,
    MeetingMinutes,
    MeetingRecord,
    MeetingStatus,
    Phase,
    ProjectRecord,
    RoundRecord,
    validate_meeting_config,
)
from .storage import Store

logger = logging.getLogger(__name__)

SECTION_NONE = "none"
SYNTHESIS_HEADER = "SYNTHESIS:"
QUESTIONS_HEADER = "FOLLOW-UP QUESTIONS:"

_SYNTH_RE = re.compile(r"SYNTHESIS\s*:", re.IGNORECASE)
_QUESTIONS_RE = re.compile(r"FOLLOW[-\s]?UP\s+QUESTIONS\s*:", re.IGNORECASE)
_NUMBERED_RE = re.compile(r"^\s*\d+[.)]\s*(.+?)\s*$", re.MULTILINE)


@dataclass
class RoundState:
    """Accumulated outcome of one round while a meeting runs."""

    round_index: int
    carried_context: str
    guidance: str = ""
    expert_turns: list[tuple[str, str]] = field(default_factory=list)
    critique: str = ""
    synthesis: str = ""
    follow_up_questions: list[str] = field(default_factory=list)


def _section(label: str, body: str, budget: int) -> str:
    text = body if body else SECTION_NONE
    return f"{label}\n{clip_tail(text, budget)}"


def render_carryover(synthesis: str, questions: list[str], round_index: int) -> str:
    """Verbatim carry-over block injected into every next-round prompt."""
    parts = [f"Summary of round {round_index}:", synthesis]
    if questions:
        parts.append("")
        parts.append(f"Open follow-up questions from round {round_index}:")
        for number, question in enumerate(questions, start=1):
            parts.append(f"{number}. {question}")
    return "\n".join(parts)


def render_retrieved(retrieved: list[ScoredChunk]) -> str:
    lines = []
    for hit in retrieved:
        chunk = hit.chunk
        lines.append(f"[{chunk.doc_id}#{chunk.ordinal}] {chunk.text}")
    return "\n".join(lines)


def render_notes(recalled: list[tuple[LongTermNote, float]]) -> str:
    return "\n".join(f"- ({note.origin}) {note.text}" for note, _ in recalled)


def render_prior_turns(prior_turns: list[tuple[str, str]], budget: int) -> str:
    session = SessionMemory(meeting_id="prompt")
    for name, text in prior_turns:
        append_turn(session, name, "expert_turn", text)
    return session_context(session, budget)


def parse_synthesis(text: str) -> tuple[str, list[str]] | None:
    """Split a coordinator reply into (synthesis, follow-up questions).

    Requires both headers, synthesis first; the question list may be empty.
    Returns None when the reply does not follow the format.
    """
    synth_match = _SYNTH_RE.search(text)
    questions_match = _QUESTIONS_RE.search(text)
    if not synth_match or not questions_match:
        return None
    if questions_match.start() < synth_match.end():
        return None
    synthesis = text[synth_match.end() : questions_match.start()].strip()
    if not synthesis:
        return None
    questions = _NUMBERED_RE.findall(text[questions_match.end() :])
    return synthesis, questions


def assemble_expert_prompt(
    agenda: str,
    guidance: str,
    prior_expert_turns_this_round: list[tuple[str, str]],
    carried_context: str,
    retrieved: list[ScoredChunk],
    persona: str,
    recalled_notes: list[tuple[LongTermNote, float]],
    *,
    expert_name: str,
    model: str,
    temperature: float,
    context_budget: int,
    max_output_chars: int,
    timeout_s: float,
    tags: dict,
) -> ChatRequest:
    """Prompt for one expert turn; retrieval must already be filtered."""
    budget = context_budget
    sections = [
        _section("PERSONA:", persona, budget),
        _section("AGENDA:", agenda, budget),
        _section("CARRIED CONTEXT:", carried_context, budget),
        _section("COORDINATOR GUIDANCE:", guidance, budget),
        _section(
            "EARLIER EXPERT TURNS THIS ROUND:",
            render_prior_turns(prior_expert_turns_this_round, budget) if prior_expert_turns_this_round else "",
            budget,
        ),
        _section("RETRIEVED KNOWLEDGE:", render_retrieved(retrieved), budget),
        _section("RECALLED NOTES:", render_notes(recalled_notes), budget),
    ]
    system = (
        f"You are {expert_name}, a domain expert in a structured team meeting. "
        "Contribute your specialized view on the agenda, building on the earlier "
        "turns of this round and grounding claims in the retrieved knowledge and "
        "recalled notes when they are relevant."
    )
    return ChatRequest(
        model=model,
        messages=(ChatMessage("system", system), ChatMessage("user", "\n\n".join(sections))),
        temperature=temperature,
        max_output_chars=max_output_chars,
        timeout_s=timeout_s,
        tags=tags,
    )


def assemble_critic_prompt(
    agenda: str,
    all_expert_turns_this_round: list[tuple[str, str]],
    carried_context: str,
    *,
    model: str,
    temperature: float,
    context_budget: int,
    max_output_chars: int,
    timeout_s: float,
    tags: dict,
) -> ChatRequest:
    budget = context_budget
    sections = [
        _section("AGENDA:", agenda, budget),
        _section("CARRIED CONTEXT:", carried_context, budget),
        _section(
            "EXPERT TURNS THIS ROUND:",
            render_prior_turns(all_expert_turns_this_round, budget) if all_expert_turns_this_round else "",
            budget,
        ),
    ]
    system = (
        f"You are {CRITIC_NAME}. {CRITIC_PERSONA} Evaluate the expert turns for "
        "fallacies, unstated assumptions, potential biases, and implementation "
        "risks. Address your critique to the meeting lead, not to the experts."
    )
    return ChatRequest(
        model=model,
        messages=(ChatMessage("system", system), ChatMessage("user", "\n\n".join(sections))),
        temperature=temperature,
        max_output_chars=max_output_chars,
        timeout_s=timeout_s,
        tags=tags,
    )


def _coordinator_request(
    sections: list[str],
    task: str,
    *,
    model: str,
    temperature: float,
    max_output_chars: int,
    timeout_s: float,
    tags: dict,
) -> ChatRequest:
    system = f"You are {COORDINATOR_NAME}. {COORDINATOR_PERSONA}"
    body = "\n\n".join(sections + [f"TASK:\n{task}"])
    return ChatRequest(
        model=model,
        messages=(ChatMessage("system", system), ChatMessage("user", body)),
        temperature=temperature,
        max_output_chars=max_output_chars,
        timeout_s=timeout_s,
        tags=tags,
    )


class Engine:
    """Runs meetings and warm-ups against one store and one gateway.

    One engine may run many meetings concurrently as long as they target
    distinct projects; callers (the service runner, the CLI) are responsible
    for serializing meetings within a project.
    """

    def __init__(
        self,
        store: Store,
        gateway: Gateway,
        *,
        model: str = "llama3.1",
        ids: IdFactory | None = None,
        clock: Clock | None = None,
        coordinator_temperature: float = 0.2,
        critic_temperature: float = 0.2,
        expert_temperature: float = 0.7,
        warmup_batch_size: int = 10,
        request_timeout_s: float = 180.0,
        max_output_chars: int = 20000,
    ):
        self.store = store
        self.gateway = gateway
        self.model = model
        self.ids = ids or default_ids()
        self.clock = clock or default_clock()
        self.coordinator_temperature = coordinator_temperature
        self.critic_temperature = critic_temperature
        self.expert_temperature = expert_temperature
        self.warmup_batch_size = warmup_batch_size
        self.request_timeout_s = request_timeout_s
        self.max_output_chars = max_output_chars

    # -- shared plumbing ---------------------------------------------------

    def _knowledge(self, project_id: str) -> KnowledgeStore:
        return KnowledgeStore(self.store.kb_root(project_id), self.gateway, ids=self.ids, clock=self.clock)

    def _memory(self, project_id: str) -> MemoryStore:
        return MemoryStore(self.store.notes_root(project_id), self.gateway, ids=self.ids, clock=self.clock)

    def _tags(self, record: MeetingRecord, phase: str, round_index: int, speaker: str) -> dict:
        return {
            "meeting": record.id,
            "kind": record.config.kind.value,
            "phase": phase,
            "round": str(round_index),
            "speaker": speaker,
        }

    # -- meeting preparation -------------------------------------------------

    def prepare_meeting(self, project: ProjectRecord, config: MeetingConfig) -> MeetingRecord:
        """Validate, persist the meeting record, and return it without running.

        Raises ValidationError (with the violation list) before any event is
        written; also verifies that every participant's knowledge base
        resolves.
        """
        violations = validate_meeting_config(config, project)
        if violations:
            raise ValidationError("meeting config rejected", violations)
        knowledge = self._knowledge(project.id)
        for name in config.participants:
            profile = project.expert(name)
            if profile and profile.knowledge_base_id and not knowledge.has_base(profile.knowledge_base_id):
                raise NotFoundError(
                    f"knowledge base {profile.knowledge_base_id!r} of expert {name!r} does not resolve"
                )
        record = MeetingRecord(
            id=self.ids.new("mtg"),
            project_id=project.id,
            config=config,
            status=MeetingStatus.RUNNING,
            created_at=self.clock.now_iso(),
        )
        self.store.create_meeting(project, record)
        return record

    # -- team meetings ---------------------------------------------------

    def run_meeting(self, project: ProjectRecord, config: MeetingConfig, *, on_event=None) -> MeetingMinutes:
        record = self.prepare_meeting(project, config)
        return self.execute_meeting(project, record, on_event=on_event)

    def execute_meeting(self, project: ProjectRecord, record: MeetingRecord, *, on_event=None) -> MeetingMinutes:
        config = record.config
        participants = [project.expert(name) for name in config.participants]
        knowledge = self._knowledge(project.id)
        memory = self._memory(project.id)
        log = self.store.event_log(project.id, record.id)
        session = SessionMemory(meeting_id=record.id)
        rounds: list[RoundState] = []
        current_round = 0

        def emit(phase: Phase, speaker: str, content: str, round_index: int) -> None:
            event = MeetingEvent(
                seq=log.last_seq + 1,
                meeting_id=record.id,
                phase=phase,
                speaker=speaker,
                content=content,
                round=round_index,
                timestamp=self.clock.now_iso(),
            )
            log.append(event)
            if on_event is not None:
                try:
                    on_event(event)
                except Exception:
                    logger.exception("event hook failed; meeting continues")

        emit(Phase.MEETING_STARTED, SYSTEM_SPEAKER, config.agenda, 0)
        try:
            carried = ""
            for round_index in range(1, config.rounds + 1):
                current_round = round_index
                state = RoundState(round_index=round_index, carried_context=carried)
                state.guidance = self._run_guidance(record, config, carried, round_index, emit, session)
                for profile in participants:
                    turn = self._run_expert_turn(
                        project,
                        record,
                        config,
                        profile,
                        state,
                        knowledge,
                        memory,
                        emit,
                        session,
                    )
                    state.expert_turns.append((profile.name, turn))
                state.critique = self._run_critique(record, config, state, emit, session)
                synthesis, questions, raw = self.synthesize_round(
                    config.agenda,
                    state.guidance,
                    state.expert_turns,
                    state.critique,
                    record=record,
                    context_budget=config.context_budget,
                    round_index=round_index,
                )
                state.synthesis, state.follow_up_questions = synthesis, questions
                emit(Phase.SYNTHESIS, COORDINATOR_NAME, raw, round_index)
                append_turn(session, COORDINATOR_NAME, Phase.SYNTHESIS.value, raw)
                rounds.append(state)
                carried = render_carryover(synthesis, questions, round_index)
        except GatewayError as exc:
            emit(Phase.MEETING_FAILED, SYSTEM_SPEAKER, f"meeting aborted: {exc}", current_round)
            record.status = MeetingStatus.FAILED
            self.store.save_meeting(record)
            raise

        minutes = MeetingMinutes(
            meeting_id=record.id,
            per_round=[
                RoundRecord(
                    round_index=s.round_index,
                    guidance=s.guidance,
                    expert_turns=s.expert_turns,
                    critique=s.critique,
                    synthesis=s.synthesis,
                    follow_up_questions=s.follow_up_questions,
                )
                for s in rounds
            ],
            final_summary="",
        )
        try:
            final = self.compile_final_minutes(config.agenda, rounds, record=record, context_budget=config.context_budget)
        except GatewayError as exc:
            minutes.final_summary = f"[failed: {exc}]"
            self.store.save_minutes(project.id, minutes)
            emit(Phase.MEETING_FAILED, SYSTEM_SPEAKER, f"final summary failed: {exc}", 0)
            record.status = MeetingStatus.FAILED
            self.store.save_meeting(record)
            raise
        minutes.final_summary = final
        emit(Phase.FINAL_SUMMARY, COORDINATOR_NAME, final, 0)
        self.store.save_minutes(project.id, minutes)
        for profile in participants:
            for state in rounds:
                memory.store_note(project, profile.name, state.synthesis, "round_synthesis")
        record.status = MeetingStatus.COMPLETED
        self.store.save_meeting(record)
        # The terminal event goes out last: whoever observes it can rely on
        # the minutes and the completed status being durable already.
        emit(Phase.MEETING_FINISHED, SYSTEM_SPEAKER, "", 0)
        return minutes

    def _run_guidance(
        self,
        record: MeetingRecord,
        config: MeetingConfig,
        carried: str,
        round_index: int,
        emit,
        session: SessionMemory,
    ) -> str:
        budget = config.context_budget
        sections = [
            _section("AGENDA:", config.agenda, budget),
            _section("ROUND:", f"{round_index} of {config.rounds}", budget),
            _section("CARRIED CONTEXT:", carried, budget),
        ]
        request = _coordinator_request(
            sections,
            "Give the experts focused guidance for this round. Build on the carried "
            "context where present and direct attention to unresolved questions.",
            model=self.model,
            temperature=self.coordinator_temperature,
            max_output_chars=self.max_output_chars,
            timeout_s=self.request_timeout_s,
            tags=self._tags(record, Phase.GUIDANCE.value, round_index, COORDINATOR_NAME),
        )
        fresh = self.gateway.chat(request)
        # From round 2 on, the distributed guidance leads with the carried
        # synthesis and follow-ups, so what the experts receive (and what the
        # transcript shows) contains the previous round's outcome verbatim.
        guidance = f"{carried}\n\n{fresh}" if carried else fresh
        emit(Phase.GUIDANCE, COORDINATOR_NAME, guidance, round_index)
        append_turn(session, COORDINATOR_NAME, Phase.GUIDANCE.value, guidance)
        return guidance

    def _run_expert_turn(
        self,
        project: ProjectRecord,
        record: MeetingRecord,
        config: MeetingConfig,
        profile: AgentProfile,
        state: RoundState,
        knowledge: KnowledgeStore,
        memory: MemoryStore,
        emit,
        session: SessionMemory,
    ) -> str:
        query = f"{config.agenda} {state.guidance}"
        retrieved: list[ScoredChunk] = []
        if profile.knowledge_base_id:
            hits = knowledge.retrieve(profile.knowledge_base_id, query, config.retrieval_k)
            retrieved = adaptive_filter(hits)
        recalled = memory.recall_notes(project, profile.name, query, config.retrieval_k)
        request = assemble_expert_prompt(
            config.agenda,
            state.guidance,
            state.expert_turns,
            state.carried_context,
            retrieved,
            profile.persona,
            recalled,
            expert_name=profile.name,
            model=self.model,
            temperature=self.expert_temperature,
            context_budget=config.context_budget,
            max_output_chars=self.max_output_chars,
            timeout_s=self.request_timeout_s,
            tags=self._tags(record, Phase.EXPERT_TURN.value, state.round_index, profile.name),
        )
        turn = self.gateway.chat(request)
        emit(Phase.EXPERT_TURN, profile.name, turn, state.round_index)
        append_turn(session, profile.name, Phase.EXPERT_TURN.value, turn)
        return turn

    def _run_critique(
        self,
        record: MeetingRecord,
        config: MeetingConfig,
        state: RoundState,
        emit,
        session: SessionMemory,
    ) -> str:
        request = assemble_critic_prompt(
            config.agenda,
            state.expert_turns,
            state.carried_context,
            model=self.model,
            temperature=self.critic_temperature,
            context_budget=config.context_budget,
            max_output_chars=self.max_output_chars,
            timeout_s=self.request_timeout_s,
            tags=self._tags(record, Phase.CRITIQUE.value, state.round_index, CRITIC_NAME),
        )
        critique = self.gateway.chat(request)
        emit(Phase.CRITIQUE, CRITIC_NAME, critique, state.round_index)
        append_turn(session, CRITIC_NAME, Phase.CRITIQUE.value, critique)
        return critique

    def synthesize_round(
        self,
        agenda: str,
        guidance: str,
        expert_turns: list[tuple[str, str]],
        critique: str,
        *,
        record: MeetingRecord,
        context_budget: int,
        round_index: int,
    ) -> tuple[str, list[str], str]:
        """Coordinator synthesis of one round.

        Returns (synthesis, follow_up_questions, raw_reply). A reply missing
        the expected sections gets one reformat retry; if that also fails the
        whole reply becomes the synthesis with zero questions.
        """
        budget = context_budget
        sections = [
            _section("AGENDA:", agenda, budget),
            _section("COORDINATOR GUIDANCE:", guidance, budget),
            _section("EXPERT TURNS:", render_prior_turns(expert_turns, budget) if expert_turns else "", budget),
            _section("CRITIQUE:", critique, budget),
        ]
        task = (
            "Synthesize the round: key points, decisions, and the critique's "
            "findings. Reply with exactly these two sections:\n"
            f"{SYNTHESIS_HEADER}\n<your synthesis>\n"
            f"{QUESTIONS_HEADER}\n<numbered list of open questions; leave the "
            "list empty only if nothing remains>"
        )
        request = _coordinator_request(
            sections,
            task,
            model=self.model,
            temperature=self.coordinator_temperature,
            max_output_chars=self.max_output_chars,
            timeout_s=self.request_timeout_s,
            tags=self._tags(record, Phase.SYNTHESIS.value, round_index, COORDINATOR_NAME),
        )
        raw = self.gateway.chat(request)
        parsed = parse_synthesis(raw)
        if parsed is None:
            retry_tags = dict(request.tags)
            retry_tags["attempt"] = "2"
            retry = ChatRequest(
                model=request.model,
                messages=request.messages
                + (
                    ChatMessage("assistant", raw),
                    ChatMessage(
                        "user",
                        "Reformat your previous answer using exactly the two headers "
                        f"{SYNTHESIS_HEADER!r} and {QUESTIONS_HEADER!r}.",
                    ),
                ),
                temperature=request.temperature,
                max_output_chars=request.max_output_chars,
                timeout_s=request.timeout_s,
                tags=retry_tags,
            )
            raw = self.gateway.chat(retry)
            parsed = parse_synthesis(raw)
        if parsed is None:
            return raw, [], raw
        synthesis, questions = parsed
        return synthesis, questions, raw

    def compile_final_minutes(
        self,
        agenda: str,
        rounds: list[RoundState],
        *,
        record: MeetingRecord,
        context_budget: int,
    ) -> str:
        """Coordinator pass over all round syntheses producing the final summary."""
        budget = context_budget
        syntheses = "\n\n".join(f"Round {s.round_index} synthesis:\n{s.synthesis}" for s in rounds)
        sections = [
            _section("AGENDA:", agenda, budget),
            _section("ROUND SYNTHESES:", syntheses, budget),
        ]
        request = _coordinator_request(
            sections,
            "Compile the final meeting summary from the round syntheses: overall "
            "conclusions, decisions, and remaining open questions.",
            model=self.model,
            temperature=self.coordinator_temperature,
            max_output_chars=self.max_output_chars,
            timeout_s=self.request_timeout_s,
            tags=self._tags(record, Phase.FINAL_SUMMARY.value, 0, COORDINATOR_NAME),
        )
        return self.gateway.chat(request)

    # -- warm-up meetings --------------------------------------------------

    def prepare_warmup(self, project: ProjectRecord, expert_name: str) -> MeetingRecord:
        """Validate preconditions and persist the warm-up meeting record.

        The warm-up iterates the expert's knowledge base in fixed-size chunk
        batches; the number of batches becomes the meeting's round count.
        """
        profile = project.expert(expert_name)
        if profile is None:
            raise NotFoundError(f"unknown expert {expert_name!r} in project {project.id}")
        if not profile.knowledge_base_id:
            raise StateError(f"expert {expert_name!r} has no knowledge base to warm up on")
        knowledge = self._knowledge(project.id)
        if not knowledge.has_base(profile.knowledge_base_id):
            raise NotFoundError(f"knowledge base {profile.knowledge_base_id!r} does not resolve")
        chunk_count = knowledge.chunk_count(profile.knowledge_base_id)
        if chunk_count == 0:
            raise StateError(f"knowledge base of expert {expert_name!r} holds no chunks")
        batches = (chunk_count + self.warmup_batch_size - 1) // self.warmup_batch_size
        config = MeetingConfig(
            project_id=project.id,
            agenda=f"Warm-up: {expert_name} reviews their knowledge base",
            rounds=batches,
            participants=[expert_name],
            kind=MeetingKind.WARMUP,
        )
        record = MeetingRecord(
            id=self.ids.new("mtg"),
            project_id=project.id,
            config=config,
            status=MeetingStatus.RUNNING,
            created_at=self.clock.now_iso(),
        )
        self.store.create_meeting(project, record)
        return record

    def run_warmup(self, project: ProjectRecord, expert_name: str, *, on_event=None) -> str:
        record = self.prepare_warmup(project, expert_name)
        return self.execute_warmup(project, record, on_event=on_event)

    def execute_warmup(self, project: ProjectRecord, record: MeetingRecord, *, on_event=None) -> str:
        """Run a prepared warm-up: one expert reads its knowledge base in
        batches, each batch response becomes a long-term note, and the expert
        is marked warmed up. Returns the warm-up report text."""
        expert_name = record.config.participants[0]
        profile = project.expert(expert_name)
        knowledge = self._knowledge(project.id)
        memory = self._memory(project.id)
        chunks = knowledge.chunks(profile.knowledge_base_id)
        log = self.store.event_log(project.id, record.id)

        def emit(phase: Phase, speaker: str, content: str, round_index: int) -> None:
            event = MeetingEvent(
                seq=log.last_seq + 1,
                meeting_id=record.id,
                phase=phase,
                speaker=speaker,
                content=content,
                round=round_index,
                timestamp=self.clock.now_iso(),
            )
            log.append(event)
            if on_event is not None:
                try:
                    on_event(event)
                except Exception:
                    logger.exception("event hook failed; warm-up continues")

        emit(Phase.MEETING_STARTED, SYSTEM_SPEAKER, record.config.agenda, 0)
        size = self.warmup_batch_size
        batches = [chunks[i : i + size] for i in range(0, len(chunks), size)]
        notes: list[str] = []
        rounds: list[RoundRecord] = []
        try:
            for batch_index, batch in enumerate(batches, start=1):
                excerpt = "\n".join(f"[{c.doc_id}#{c.ordinal}] {c.text}" for c in batch)
                budget = record.config.context_budget
                sections = [
                    _section("PERSONA:", profile.persona, budget),
                    _section(
                        f"KNOWLEDGE EXCERPTS (batch {batch_index} of {len(batches)}):",
                        excerpt,
                        budget,
                    ),
                ]
                system = (
                    f"You are {expert_name}, preparing for upcoming team meetings. "
                    "Read the knowledge excerpts and extract the key concepts, "
                    "terminology, and context worth remembering."
                )
                request = ChatRequest(
                    model=self.model,
                    messages=(ChatMessage("system", system), ChatMessage("user", "\n\n".join(sections))),
                    temperature=self.expert_temperature,
                    max_output_chars=self.max_output_chars,
                    timeout_s=self.request_timeout_s,
                    tags=self._tags(record, Phase.EXPERT_TURN.value, batch_index, expert_name),
                )
                reply = self.gateway.chat(request)
                emit(Phase.EXPERT_TURN, expert_name, reply, batch_index)
                memory.store_note(project, expert_name, reply, "warmup")
                notes.append(reply)
                rounds.append(
                    RoundRecord(
                        round_index=batch_index,
                        guidance=f"Review knowledge batch {batch_index} of {len(batches)}",
                        expert_turns=[(expert_name, reply)],
                        critique="",
                        synthesis=reply,
                        follow_up_questions=[],
                    )
                )
        except GatewayError as exc:
            emit(Phase.MEETING_FAILED, SYSTEM_SPEAKER, f"warm-up aborted: {exc}", 0)
            record.status = MeetingStatus.FAILED
            self.store.save_meeting(record)
            raise

        report = (
            f"Warm-up report for {expert_name}: {len(notes)} notes stored from "
            f"{len(chunks)} knowledge chunks."
        )
        emit(Phase.FINAL_SUMMARY, SYSTEM_SPEAKER, report, 0)
        self.store.save_minutes(project.id, MeetingMinutes(meeting_id=record.id, per_round=rounds, final_summary=report))
        record.status = MeetingStatus.COMPLETED
        self.store.save_meeting(record)
        profile.warmup_done = True
        self.store.save_project(project)
        emit(Phase.MEETING_FINISHED, SYSTEM_SPEAKER, "", 0)
        return report
