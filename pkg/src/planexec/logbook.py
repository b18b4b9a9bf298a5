"""Append-only execution log.

One session produces one ordered log of everything that happened: utterances,
routing decisions, reflections, tool calls and results, injected events,
final texts and critic verdicts. Entries carry the world tick, never wall
clock time, so identical runs serialize to identical bytes. The log is
thread-safe for one writer loop plus any number of tailing readers.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from typing import Callable, Optional

ENTRY_KINDS = (
    "utterance",
    "routing",
    "reflection",
    "tool_call",
    "tool_result",
    "event",
    "final_text",
    "critic_verdict",
)


@dataclass
class LogEntry:
    kind: str
    tick: int
    payload: dict

    def to_json(self) -> str:
        return json.dumps(
            {"kind": self.kind, "tick": self.tick, "payload": self.payload},
            sort_keys=True,
            separators=(",", ":"),
        )


class ExecutionLog:
    def __init__(self):
        self._entries: list[LogEntry] = []
        self._cond = threading.Condition()
        self._observers: list[Callable[[LogEntry], None]] = []

    def append(self, kind: str, tick: int, payload: dict) -> LogEntry:
        if kind not in ENTRY_KINDS:
            raise ValueError(f"unknown log entry kind: {kind}")
        entry = LogEntry(kind=kind, tick=tick, payload=payload)
        with self._cond:
            self._entries.append(entry)
            observers = list(self._observers)
            self._cond.notify_all()
        for observer in observers:
            observer(entry)
        return entry

    def add_observer(self, observer: Callable[[LogEntry], None]) -> None:
        with self._cond:
            self._observers.append(observer)

    def entries(self) -> list[LogEntry]:
        with self._cond:
            return list(self._entries)

    def __len__(self) -> int:
        with self._cond:
            return len(self._entries)

    def wait_for(self, index: int, timeout: float) -> bool:
        """Block until the log holds more than `index` entries. Returns False on timeout."""
        with self._cond:
            if len(self._entries) > index:
                return True
            self._cond.wait(timeout)
            return len(self._entries) > index

    def to_jsonl(self) -> str:
        return "\n".join(e.to_json() for e in self.entries())


def entry_from_json(line: str) -> LogEntry:
    raw = json.loads(line)
    return LogEntry(kind=raw["kind"], tick=raw["tick"], payload=raw["payload"])
