"""Identifier and clock sources.

Ids are opaque, sortable, time-prefixed strings. Both the id factory and the
clock are injectable so that a scripted run can be made byte-for-byte
reproducible (serial ids, ticking clock) while production uses wall-clock
time and random suffixes.
"""

from __future__ import annotations

import secrets
import time
from datetime import datetime, timedelta, timezone


class Clock:
    """Source of UTC timestamps."""

    def now(self) -> datetime:
        raise NotImplementedError

    def now_iso(self) -> str:
        return self.now().strftime("%Y-%m-%dT%H:%M:%S.%fZ")


class SystemClock(Clock):
    def now(self) -> datetime:
        return datetime.now(timezone.utc)


class TickClock(Clock):
    """Deterministic clock: starts at a fixed instant, advances per call."""

    def __init__(self, start: datetime | None = None, step_s: float = 1.0):
        self._current = start or datetime(2026, 1, 1, tzinfo=timezone.utc)
        self._step = timedelta(seconds=step_s)

    def now(self) -> datetime:
        value = self._current
        self._current = self._current + self._step
        return value


class IdFactory:
    """Source of opaque unique identifiers."""

    def new(self, kind: str) -> str:
        raise NotImplementedError


class TimeIds(IdFactory):
    """Zero-padded nanosecond prefix keeps ids sortable by creation time."""

    def new(self, kind: str) -> str:
        return f"{kind}-{time.time_ns():019d}-{secrets.token_hex(3)}"


class SerialIds(IdFactory):
    """Deterministic per-kind counters, for reproducible runs and tests."""

    def __init__(self):
        self._counters: dict[str, int] = {}

    def new(self, kind: str) -> str:
        n = self._counters.get(kind, 0) + 1
        self._counters[kind] = n
        return f"{kind}-{n:08d}"


def default_clock() -> Clock:
    return SystemClock()


def default_ids() -> IdFactory:
    return TimeIds()
