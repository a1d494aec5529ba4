import math
import random

import pytest
from hypothesis import given, strategies as st

from thinktank.errors import NotFoundError, ValidationError
from thinktank.gateway import ScriptedGateway, hash_embedding
from thinktank.memory import (
    MemoryStore,
    SessionMemory,
    append_turn,
    clip_tail,
    render_turn,
    session_context,
)
from thinktank.model import add_expert, create_project


class TestSessionMemory:
    def test_appends_preserve_order(self):
        session = SessionMemory(meeting_id="m")
        append_turn(session, "A", "expert_turn", "first")
        append_turn(session, "B", "expert_turn", "second")
        assert [t.content for t in session.turns] == ["first", "second"]

    def test_fresh_session_single_append(self):
        session = SessionMemory(meeting_id="m")
        append_turn(session, "A", "guidance", "only")
        assert len(session.turns) == 1

    def test_many_appends(self):
        session = SessionMemory(meeting_id="m")
        for i in range(100):
            append_turn(session, "A", "expert_turn", f"turn {i}")
        assert len(session.turns) == 100
        assert session.turns[0].content == "turn 0"
        assert session.turns[-1].content == "turn 99"

    def test_empty_content_rejected(self):
        with pytest.raises(ValidationError):
            append_turn(SessionMemory(meeting_id="m"), "A", "p", "")


class TestSessionContext:
    def _session(self, content_sizes):
        session = SessionMemory(meeting_id="m")
        for i, size in enumerate(content_sizes):
            # rendered length = len("[S/p] ") + size + 1
            append_turn(session, "S", "p", "x" * size)
        return session

    def test_full_transcript_when_budget_suffices(self):
        session = self._session([10, 10])
        full = "".join(render_turn(t) for t in session.turns)
        assert session_context(session, len(full)) == full

    def test_recency_window_drops_oldest(self):
        # each rendered turn is len("[S/p] ") + 393 + 1 = 400 chars
        session = self._session([393, 393, 393])
        result = session_context(session, 900)
        rendered = [render_turn(t) for t in session.turns]
        assert result == rendered[1] + rendered[2]

    def test_empty_session_is_empty_text(self):
        assert session_context(SessionMemory(meeting_id="m"), 100) == ""

    def test_last_turn_truncated_from_front_with_marker(self):
        session = self._session([50])
        result = session_context(session, 10)
        assert len(result) == 10
        assert result.startswith("…")
        assert session_context(session, 1) == "…"

    @given(
        sizes=st.lists(st.integers(0, 40), max_size=12),
        budget=st.integers(1, 300),
    )
    def test_output_never_exceeds_budget(self, sizes, budget):
        session = SessionMemory(meeting_id="m")
        for size in sizes:
            append_turn(session, "S", "p", "y" * max(size, 1))
        assert len(session_context(session, budget)) <= budget


def test_clip_tail_marks_truncation():
    assert clip_tail("abcdef", 10) == "abcdef"
    clipped = clip_tail("abcdefgh", 4)
    assert clipped == "…fgh"
    assert len(clipped) == 4


@pytest.fixture
def project():
    record = create_project("P", "", [])
    add_expert(record, "E1", "persona")
    return record


@pytest.fixture
def memory(tmp_path):
    return MemoryStore(tmp_path / "notes", ScriptedGateway([], embedding_dim=16))


class TestLongTermNotes:
    def test_store_then_recall_scores_one(self, memory, project):
        note = memory.store_note(project, "E1", "vector stores enable retrieval", "manual")
        assert note.note_id
        results = memory.recall_notes(project, "E1", "vector stores enable retrieval", k=3)
        assert results[0][0].note_id == note.note_id
        assert results[0][1] == pytest.approx(1.0, abs=1e-6)

    def test_recall_before_store_is_empty(self, memory, project):
        assert memory.recall_notes(project, "E1", "anything", k=3) == []

    def test_unknown_agent_not_found(self, memory, project):
        with pytest.raises(NotFoundError):
            memory.store_note(project, "Nobody", "text", "manual")
        with pytest.raises(NotFoundError):
            memory.recall_notes(project, "Nobody", "q", k=1)

    def test_invalid_origin_rejected(self, memory, project):
        with pytest.raises(ValidationError):
            memory.store_note(project, "E1", "text", "dream")

    def test_recall_matches_brute_force_oracle(self, memory, project):
        rng = random.Random(21)
        texts = []
        for i in range(50):
            text = f"note {i} " + " ".join(
                "".join(rng.choice("abcdefg") for _ in range(5)) for _ in range(6)
            )
            texts.append(text)
            memory.store_note(project, "E1", text, "manual")
        query = "completely different query text"
        query_vec = hash_embedding(query, 16)

        def cosine(u, v):
            dot = sum(a * b for a, b in zip(u, v))
            return dot / (math.sqrt(sum(a * a for a in u)) * math.sqrt(sum(b * b for b in v)))

        notes = memory.notes("E1", with_embeddings=True)
        expected = sorted(
            notes, key=lambda n: (-cosine(list(n.embedding.values), query_vec), n.note_id)
        )[:3]
        actual = memory.recall_notes(project, "E1", query, k=3)
        assert [n.note_id for n, _ in actual] == [n.note_id for n in expected]

    def test_notes_survive_restart(self, tmp_path, project):
        gateway = ScriptedGateway([], embedding_dim=16)
        first = MemoryStore(tmp_path / "notes", gateway)
        first.store_note(project, "E1", "durable fact", "manual")
        before = first.recall_notes(project, "E1", "durable fact", k=1)

        second = MemoryStore(tmp_path / "notes", gateway)
        after = second.recall_notes(project, "E1", "durable fact", k=1)
        assert [(n.note_id, s) for n, s in before] == [(n.note_id, s) for n, s in after]
        assert after[0][0].text == "durable fact"

    def test_notes_filtered_per_agent(self, memory, project):
        add_expert(project, "E2")
        memory.store_note(project, "E1", "one note", "manual")
        memory.store_note(project, "E2", "other note", "manual")
        assert len(memory.recall_notes(project, "E1", "note", k=10)) == 1

    def test_system_roles_can_hold_notes(self, memory, project):
        note = memory.store_note(project, "Coordinator", "carry this forward", "round_synthesis")
        assert note.agent_name == "Coordinator"
