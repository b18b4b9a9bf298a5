"""HTTP face of the session orchestrator.

Sessions live in memory; every log entry is also appended to one JSONL file
per session so a finished run can be replayed later. Reads are cheap JSON
endpoints; the log endpoint can stream as server-sent events, sending the
full backlog first and then tailing live entries, so a reconnecting client
always sees the same transcript from the top.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.responses import HTMLResponse, StreamingResponse
from pydantic import BaseModel

from .backends import PolicyError, load_policy_text
from .logbook import LogEntry
from .scenario import ScenarioError, load_scenario_text
from .session import Session, SessionConfig
from .world import serialize_world
from .facts import make_snapshot


class ScenarioBody(BaseModel):
    scenario: str
    policy: Optional[str] = None
    seed: int = 1
    budget: int = 120
    max_critic_rounds: int = 3


class UtteranceBody(BaseModel):
    text: str


class EventBody(BaseModel):
    text: str


class EstopBody(BaseModel):
    engaged: bool


class SessionRuntime:
    def __init__(self, session: Session, session_id: str, log_path: Optional[str]):
        self.session = session
        self.id = session_id
        self.thread: Optional[threading.Thread] = None
        self._log_fh = None
        if log_path:
            self._log_fh = open(log_path, "a", encoding="utf-8")
            header = {
                "kind": "header",
                "tick": 0,
                "payload": {
                    "format": 1,
                    "scenario_id": session.scenario.id,
                    "seed": session.config.seed,
                    "budget": session.config.budget,
                    "max_critic_rounds": session.config.max_critic_rounds,
                    "scenario_text": session.scenario.raw_text,
                    "policy_text": session._policies.source_text if session._policies else "",
                },
            }
            self._log_fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
            self._log_fh.flush()
            session.log.add_observer(self._persist)

    def _persist(self, entry: LogEntry) -> None:
        self._log_fh.write(entry.to_json() + "\n")
        self._log_fh.flush()

    def start(self, text: str) -> None:
        self.thread = threading.Thread(target=self.session.run, args=(text,), daemon=True)
        self.thread.start()

    def info(self) -> dict:
        return {
            "session_id": self.id,
            "scenario_id": self.session.scenario.id,
            "seed": self.session.config.seed,
            "status": self.session.status,
            "tick": self.session.world.tick,
            "log_entries": len(self.session.log),
        }


def create_app(log_dir: Optional[str] = None, console_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="planexec service")
    sessions: dict[str, SessionRuntime] = {}
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)

    def _runtime(session_id: str) -> SessionRuntime:
        runtime = sessions.get(session_id)
        if runtime is None:
            raise HTTPException(status_code=404, detail=f"unknown session '{session_id}'")
        return runtime

    @app.get("/healthz")
    def healthz():
        return {"ok": True}

    @app.post("/scenario")
    def create_session(body: ScenarioBody):
        try:
            scenario = load_scenario_text(body.scenario)
            policies = load_policy_text(body.policy) if body.policy else None
        except (ScenarioError, PolicyError) as err:
            raise HTTPException(status_code=400, detail=str(err))
        config = SessionConfig(seed=body.seed, budget=body.budget, max_critic_rounds=body.max_critic_rounds)
        session = Session(scenario, policies=policies, config=config)
        session_id = uuid.uuid4().hex[:12]
        log_path = os.path.join(log_dir, f"{session_id}.jsonl") if log_dir else None
        runtime = SessionRuntime(session, session_id, log_path)
        sessions[session_id] = runtime
        return runtime.info()

    @app.get("/sessions")
    def list_sessions():
        return {"sessions": [r.info() for r in sessions.values()]}

    @app.get("/sessions/{session_id}")
    def session_info(session_id: str):
        return _runtime(session_id).info()

    @app.post("/sessions/{session_id}/utterance")
    def utterance(session_id: str, body: UtteranceBody):
        runtime = _runtime(session_id)
        if not body.text.strip():
            raise HTTPException(status_code=400, detail="utterance must be non-empty")
        if runtime.session.is_running:
            runtime.session.submit_utterance(body.text)
            return {"accepted": True, "mode": "event"}
        runtime.start(body.text)
        return {"accepted": True, "mode": "started"}

    @app.post("/sessions/{session_id}/events")
    def inject_event(session_id: str, body: EventBody):
        runtime = _runtime(session_id)
        if not body.text.strip():
            raise HTTPException(status_code=400, detail="event text must be non-empty")
        event = runtime.session.bus.inject(body.text, runtime.session.world.tick)
        return {"accepted": True, "seq": event.seq}

    @app.post("/sessions/{session_id}/estop")
    def estop(session_id: str, body: EstopBody):
        runtime = _runtime(session_id)
        runtime.session.request_estop(body.engaged)
        return {"engaged": body.engaged}

    @app.get("/sessions/{session_id}/state")
    def state(session_id: str):
        runtime = _runtime(session_id)
        view = serialize_world(runtime.session.world)
        view["status"] = runtime.session.status
        return view

    @app.get("/sessions/{session_id}/snapshot")
    def snapshot(session_id: str):
        runtime = _runtime(session_id)
        snap = make_snapshot(runtime.session.world, runtime.session.buffer)
        return {
            "tick": snap.tick,
            "rendered_text": snap.rendered_text,
            "freshness_window": runtime.session.world.config.freshness_window,
        }

    @app.get("/sessions/{session_id}/log")
    def log(session_id: str, follow: bool = False):
        runtime = _runtime(session_id)
        if not follow:
            entries = runtime.session.log.entries()
            return {"entries": [{"kind": e.kind, "tick": e.tick, "payload": e.payload} for e in entries]}

        def stream():
            index = 0
            while True:
                entries = runtime.session.log.entries()
                while index < len(entries):
                    yield f"data: {entries[index].to_json()}\n\n"
                    index += 1
                if runtime.session.status == "finished" and index >= len(runtime.session.log):
                    yield "event: end\ndata: {}\n\n"
                    return
                if not runtime.session.log.wait_for(index, timeout=0.25):
                    yield ": keep-alive\n\n"

        return StreamingResponse(stream(), media_type="text/event-stream")

    @app.get("/sessions/{session_id}/report")
    def report(session_id: str):
        return _runtime(session_id).session.report()

    if console_dir and os.path.isdir(console_dir):
        from fastapi.staticfiles import StaticFiles

        index_path = os.path.join(console_dir, "index.html")

        @app.get("/console")
        def console_index():
            with open(index_path, "r", encoding="utf-8") as fh:
                return HTMLResponse(fh.read())

        app.mount("/console-assets", StaticFiles(directory=console_dir), name="console-assets")

    return app
