"""Shared test helpers: scripted meeting scripts, deterministic engines,
and an ephemeral uvicorn server for HTTP-level tests."""

from __future__ import annotations

import random
import socket
import threading
import time
from contextlib import contextmanager

import pytest
import uvicorn

from thinktank.engine import Engine
from thinktank.gateway import Gateway, ScriptedGateway
from thinktank.ids import SerialIds, TickClock
from thinktank.model import MeetingConfig, add_expert, create_project
from thinktank.storage import Store


def meeting_script(
    names: list[str],
    rounds: int,
    *,
    questions_per_round: int = 2,
    final_text: str = "FINAL overall summary.",
) -> list[tuple[dict, str]]:
    """Script for a full team meeting with recognizable per-turn markers.

    Guidance content is ``GUIDE-r<r>``, expert turns ``TURN-<name>-r<r>``,
    critiques ``CRIT-r<r>``, parsed syntheses ``SYN-r<r> ...``, follow-ups
    ``FUQ-r<r>-<i>``.
    """
    rules: list[tuple[dict, str]] = []
    for r in range(1, rounds + 1):
        rules.append(({"phase": "guidance", "round": r}, f"GUIDE-r{r} guidance for round {r}."))
        for name in names:
            rules.append(
                ({"phase": "expert_turn", "round": r, "speaker": name},
                 f"TURN-{name}-r{r} contribution from {name}.")
            )
        rules.append(({"phase": "critique", "round": r}, f"CRIT-r{r} critique of round {r}."))
        question_lines = "\n".join(
            f"{i}. FUQ-r{r}-{i} open question" for i in range(1, questions_per_round + 1)
        )
        rules.append(
            ({"phase": "synthesis", "round": r},
             f"SYNTHESIS:\nSYN-r{r} synthesis of round {r}.\n\nFOLLOW-UP QUESTIONS:\n{question_lines}")
        )
    rules.append(({"phase": "final_summary"}, final_text))
    return rules


def warmup_script(name: str, batches: int) -> list[tuple[dict, str]]:
    return [
        ({"phase": "expert_turn", "kind": "warmup", "round": b, "speaker": name},
         f"WARM-{name}-b{b} key concepts of batch {b}.")
        for b in range(1, batches + 1)
    ]


def wildcard_script() -> list[tuple[dict, str]]:
    """Phase-keyed rules that satisfy any meeting shape (CLI golden runs)."""
    return [
        ({"phase": "guidance"}, "Generic guidance."),
        ({"phase": "expert_turn", "kind": "warmup"}, "Generic warm-up extraction."),
        ({"phase": "expert_turn"}, "Generic expert contribution."),
        ({"phase": "critique"}, "Generic critique."),
        ({"phase": "synthesis"},
         "SYNTHESIS:\nGeneric synthesis.\n\nFOLLOW-UP QUESTIONS:\n1. Generic question"),
        ({"phase": "final_summary"}, "Generic final summary."),
    ]


def build_team(tmp_path, names: list[str], rounds: int, *, script=None, dirname="data"):
    """Store + deterministic engine + project with the given expert roster."""
    store = Store(tmp_path / dirname)
    gateway = ScriptedGateway(script if script is not None else meeting_script(names, rounds))
    ids, clock = SerialIds(), TickClock()
    engine = Engine(store, gateway, ids=ids, clock=clock)
    project = create_project("Scripted project", "exercise the engine", ["cover the agenda"],
                             ids=ids, clock=clock)
    for name in names:
        add_expert(project, name, f"{name} persona", ids=ids)
    store.save_project(project)
    config = MeetingConfig(
        project_id=project.id,
        agenda="Scripted agenda",
        rounds=rounds,
        participants=list(names),
    )
    return store, gateway, engine, project, config


def clean_text(length: int, rng: random.Random) -> str:
    """Random text that is a fixed point of whitespace normalization."""
    words = []
    size = 0
    while size < length + 16:
        word = "".join(rng.choice("abcdefghijklmnopqrstuvwxyz") for _ in range(rng.randint(2, 9)))
        words.append(word)
        size += len(word) + 1
    text = " ".join(words)[:length]
    if text.endswith(" "):
        text = text[:-1] + "x"
    return text


class SlowGateway(Gateway):
    """Delays every chat call so tests can reliably connect mid-meeting."""

    def __init__(self, inner: Gateway, delay_s: float = 0.05):
        self.inner = inner
        self.delay_s = delay_s

    def chat(self, request):
        time.sleep(self.delay_s)
        return self.inner.chat(request)

    def embed(self, texts):
        return self.inner.embed(texts)

    def health_check(self):
        return self.inner.health_check()


@contextmanager
def run_service(app):
    """Serve an ASGI app on an ephemeral localhost port in a thread."""
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    server = uvicorn.Server(uvicorn.Config(app, log_level="warning"))
    thread = threading.Thread(target=server.run, kwargs={"sockets": [sock]}, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started and time.time() < deadline:
        time.sleep(0.01)
    if not server.started:
        raise RuntimeError("test service failed to start")
    try:
        yield f"http://127.0.0.1:{port}"
    finally:
        server.should_exit = True
        thread.join(timeout=5)


def read_stream_events(client, url, *, from_seq=None, limit=None, timeout=30.0):
    """Collect SSE data payloads until the terminal event (or a limit)."""
    import json as json_mod

    params = {} if from_seq is None else {"from_seq": from_seq}
    events = []
    with client.stream("GET", url, params=params, timeout=timeout) as response:
        response.raise_for_status()
        for raw_line in response.iter_lines():
            line = raw_line.strip()
            if not line.startswith("data:"):
                continue
            data = json_mod.loads(line[len("data:"):].strip())
            if "phase" not in data:
                continue
            events.append(data)
            if data["phase"] in ("meeting_finished", "meeting_failed"):
                break
            if limit is not None and len(events) >= limit:
                break
    return events


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)
