"""Event bus with poll-to-consume delivery.

Events are plain text stamped with injection and consumption ticks. Producers
may inject from any thread; only the control loop drains. Consumed events are
retained so delivery and ordering invariants can be verified after a run.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Optional


@dataclass
class Event:
    seq: int
    text: str
    injected_at: int
    consumed_at: Optional[int] = None


class EventBus:
    """FIFO queue of discrete text events, each delivered at most once."""

    def __init__(self, on_inject: Optional[Callable[[Event], None]] = None):
        self._events: list[Event] = []
        self._next_seq = 1
        self._cursor = 0  # index of the first unconsumed event
        self._lock = threading.Lock()
        self._on_inject = on_inject

    def inject(self, text: str, tick: int) -> Event:
        if not text:
            raise ValueError("event text must be non-empty")
        with self._lock:
            event = Event(seq=self._next_seq, text=text, injected_at=tick)
            self._next_seq += 1
            self._events.append(event)
        if self._on_inject is not None:
            self._on_inject(event)
        return event

    def drain(self, tick: int) -> list[str]:
        """Return all unconsumed event texts in seq order, marking them consumed at `tick`."""
        with self._lock:
            pending = self._events[self._cursor:]
            for event in pending:
                event.consumed_at = tick
            self._cursor = len(self._events)
            return [event.text for event in pending]

    @property
    def pending_count(self) -> int:
        with self._lock:
            return len(self._events) - self._cursor

    def history(self) -> list[Event]:
        with self._lock:
            return list(self._events)
