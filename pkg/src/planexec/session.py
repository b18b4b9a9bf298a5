"""One session: a scenario instance plus the agent loop that works on it.

The session owns the single control thread that may mutate the world.
Operators (live over the service, or scripted in the scenario file) reach a
running session only through the event bus and a command queue, both of
which the control loop applies between actions. That is also the simulator's
honest concurrency model: a running action is atomic and nothing preempts it.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Optional

from . import agents, tools, world as worldmod
from .backends import Backend, PolicyBundle, ScriptedBackend
from .events import EventBus
from .facts import ObservationBuffer
from .logbook import ExecutionLog
from .scenario import OperatorStep, Scenario, build_world, check_goals
from .tools import ToolCall, ToolResult


@dataclass
class SessionConfig:
    seed: int = 1
    budget: int = 120
    max_critic_rounds: int = 3


@dataclass
class _ScriptState:
    step: OperatorStep
    fired: bool = False


class Session:
    def __init__(
        self,
        scenario: Scenario,
        policies: Optional[PolicyBundle] = None,
        config: Optional[SessionConfig] = None,
        planner_backend: Optional[Backend] = None,
        chatbot_backend: Optional[Backend] = None,
        router_backend: Optional[Backend] = None,
        critic_backend: Optional[Backend] = None,
    ):
        self.scenario = scenario
        self.config = config or SessionConfig()
        self.world = build_world(scenario, self.config.seed)
        self.buffer = ObservationBuffer()
        self.log = ExecutionLog()
        self.bus: EventBus = self.world.bus
        self.bus._on_inject = self._on_event_injected
        self.intervals: list[tuple[int, int]] = []
        self.system_prompt = agents.build_prompt(scenario)
        self.tool_schemas = tools.describe_tools(scenario.platform)
        self._policies = policies
        self._planner_backend = planner_backend or (policies.planner_backend() if policies else None)
        self._chatbot_backend = chatbot_backend or (policies.chatbot_backend() if policies else None)
        self._router_backend = router_backend or (policies.router_backend() if policies else None)
        self._critic_backend = critic_backend
        self._script = [_ScriptState(s) for s in scenario.operator_script]
        self._planner_calls = 0
        self._commands: list[tuple] = []
        self._lock = threading.Lock()
        self._running = False
        self._finished = False
        self.critic_rounds = 0
        self.final_texts: list[str] = []

    # -- status ------------------------------------------------------------

    @property
    def status(self) -> str:
        if self._running:
            return "awaiting_operator" if self.world.robot.estop_engaged else "running"
        return "finished" if self._finished else "idle"

    @property
    def is_running(self) -> bool:
        return self._running

    # -- operator inputs ---------------------------------------------------

    def _on_event_injected(self, event) -> None:
        self.log.append("event", event.injected_at, {"seq": event.seq, "text": event.text})

    def inject_event(self, text: str) -> None:
        self.bus.inject(text, self.world.tick)

    def submit_utterance(self, text: str) -> str:
        """idle: start a run on the calling thread. running: becomes an event."""
        if not text:
            raise ValueError("utterance must be non-empty")
        with self._lock:
            running = self._running
        if running:
            self.bus.inject(f"user: {text}", self.world.tick)
            return "event"
        self.run(text)
        return "started"

    def request_estop(self, engaged: bool) -> None:
        """Queue for a running session; apply immediately when nothing runs."""
        with self._lock:
            if self._running:
                self._commands.append(("estop", engaged))
                return
        worldmod.set_estop(self.world, engaged)

    # -- control loop hooks --------------------------------------------------

    def _apply_commands(self) -> None:
        with self._lock:
            commands, self._commands = self._commands, []
        for kind, value in commands:
            if kind == "estop":
                worldmod.set_estop(self.world, value)

    def _apply_operator_script(self, next_call: int) -> None:
        for state in self._script:
            if state.fired:
                continue
            step = state.step
            tick_due = step.at_tick is None or self.world.tick >= step.at_tick
            call_due = step.at_call is None or next_call >= step.at_call
            if not (tick_due and call_due):
                continue
            state.fired = True
            stamp = step.at_tick if step.at_tick is not None and step.at_tick <= self.world.tick else self.world.tick
            if step.op == "estop":
                worldmod.set_estop(self.world, True)
            elif step.op == "release_estop":
                worldmod.set_estop(self.world, False)
            elif step.op == "inject_event":
                self.bus.inject(step.text, stamp)
            elif step.op == "utterance":
                self.bus.inject(f"user: {step.text}", stamp)

    def _pre_planner_call(self) -> None:
        self._apply_commands()
        self._planner_calls += 1
        self._apply_operator_script(self._planner_calls)

    def _pre_chat_call(self) -> None:
        self._apply_commands()

    # -- dispatchers ---------------------------------------------------------

    def dispatch(self, call: ToolCall) -> ToolResult:
        start = self.world.tick
        result = tools.dispatch(call, self.world, self.buffer, self.bus, self.log)
        end = self.world.tick
        if end != start:
            self.intervals.append((start, end))
        return result

    def chat_dispatch(self, call: ToolCall) -> ToolResult:
        return tools.chat_dispatch(call, self.world, self.buffer, self.log, today=self.scenario.today)

    # -- the run -------------------------------------------------------------

    def run(self, utterance: str) -> None:
        with self._lock:
            if self._running:
                raise RuntimeError("a run is already active on this session")
            self._running = True
        try:
            self.log.append("utterance", self.world.tick, {"role": "user", "text": utterance})
            if self._router_backend is not None:
                actionable = agents.route(utterance, self._router_backend, self.log, self.world.tick)
            else:
                actionable = True
                self.log.append(
                    "routing", self.world.tick,
                    {"utterance": utterance, "actionable": True, "note": "no router policy; treated as actionable"},
                )
            if actionable:
                self._run_planner(utterance)
            else:
                self._run_chatbot(utterance)
        finally:
            self._apply_commands()
            with self._lock:
                self._running = False
                self._finished = True

    def _run_chatbot(self, utterance: str) -> None:
        backend = self._chatbot_backend
        if backend is None:
            raise agents.ConfigurationError("no chatbot policy configured for a conversational utterance")
        final = agents.run_chatbot(
            utterance,
            backend,
            self.chat_dispatch,
            self.log,
            tick_fn=lambda: self.world.tick,
            system_prompt=self.system_prompt,
            pre_call_hook=self._pre_chat_call,
        )
        self.final_texts.append(final)

    def _run_planner(self, utterance: str) -> None:
        backend = self._planner_backend
        if backend is None:
            raise agents.ConfigurationError("no planner policy configured for an actionable utterance")
        history: list[dict] = [{"role": "user", "content": utterance}]
        for round_index in range(1, self.config.max_critic_rounds + 1):
            final = agents.run_planner_executor(
                utterance,
                backend,
                self.dispatch,
                self.log,
                budget=self.config.budget,
                tick_fn=lambda: self.world.tick,
                system_prompt=self.system_prompt,
                tool_schemas=self.tool_schemas,
                history=history,
                pre_call_hook=self._pre_planner_call,
            )
            self.final_texts.append(final)
            verdict = agents.run_critic(self.log, utterance, self._critic_backend, round_index, self.config.max_critic_rounds)
            self.critic_rounds = round_index
            self.log.append(
                "critic_verdict", self.world.tick,
                {"round": round_index, "decision": verdict.decision, "reason": verdict.reason},
            )
            if verdict.decision == "stop":
                break
            history.append({"role": "user", "content": f"[goal completion critic] {verdict.reason}"})

    # -- verification and reporting -------------------------------------------

    def verify(self) -> list[str]:
        """Invariant sweep over the finished run. Empty list means clean."""
        problems: list[str] = []
        events = self.bus.history()
        seqs = [e.seq for e in events]
        if seqs != sorted(set(seqs)):
            problems.append("event seq numbers are not strictly increasing")
        for event in events:
            if event.consumed_at is None:
                continue
            if event.consumed_at < event.injected_at:
                problems.append(f"event {event.seq} consumed before injection")
            for start, end in self.intervals:
                if start < event.consumed_at < end:
                    problems.append(
                        f"event {event.seq} consumed at tick {event.consumed_at} inside action interval ({start}, {end})"
                    )
        consumed = [e for e in events if e.consumed_at is not None]
        if len({e.seq for e in consumed}) != len(consumed):
            problems.append("an event was consumed more than once")
        if "no_blind_place" in self.scenario.constraints:
            for entry in self.log.entries():
                if (
                    entry.kind == "tool_result"
                    and entry.payload.get("ok")
                    and "without fresh perception" in str(entry.payload.get("text", ""))
                ):
                    problems.append(f"blind placement at tick {entry.tick} violates no_blind_place")
        return problems

    def goal_results(self) -> dict[str, bool]:
        return check_goals(self.world, self.scenario.goals)

    def report(self) -> dict:
        entries = self.log.entries()
        actions_by_name: dict[str, int] = {}
        failures = 0
        parameter_errors = 0
        pending_action = None
        for entry in entries:
            if entry.kind == "tool_call" and entry.payload.get("tool") == "act":
                pending_action = (entry.payload.get("payload") or {}).get("action")
            elif entry.kind == "tool_result" and pending_action is not None:
                if entry.payload.get("kind") == "status":
                    actions_by_name[pending_action] = actions_by_name.get(pending_action, 0) + 1
                    if not entry.payload.get("ok"):
                        failures += 1
                elif entry.payload.get("kind") == "parameter_error":
                    parameter_errors += 1
                pending_action = None
        events = self.bus.history()
        goals = self.goal_results()
        problems = self.verify()
        return {
            "scenario": self.scenario.id,
            "seed": self.config.seed,
            "status": self.status,
            "ticks": self.world.tick,
            "actions_by_name": dict(sorted(actions_by_name.items())),
            "action_failures": failures,
            "parameter_errors": parameter_errors,
            "events_injected": len(events),
            "events_consumed": sum(1 for e in events if e.consumed_at is not None),
            "scans": [list(s) for s in self.world.scans],
            "critic_rounds": self.critic_rounds,
            "final_texts": list(self.final_texts),
            "goals": goals,
            "goals_met": all(goals.values()) if goals else True,
            "invariant_problems": problems,
            "ok": (all(goals.values()) if goals else True) and not problems,
        }
