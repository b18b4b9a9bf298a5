"""The four-agent control topology.

A router decides whether an utterance needs the robot at all. Conversational
turns go to a chatbot limited to read-only tools plus speech. Actionable
turns go to the planner-executor, which iterates tool calls against the
world under a budget, and a goal-completion critic that inspects the log
after each planner round and decides whether to send it back to work.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional

from .backends import Backend, BackendRequest, BackendResponse
from .logbook import ExecutionLog
from .tools import CHATBOT_TOOLS, PLANNER_TOOLS, ToolCall, ToolResult, describe_actions


class ConfigurationError(Exception):
    """A scenario or agent configuration is unusable; named, not guessed at."""


@dataclass
class AgentConfig:
    name: str
    model_id: str
    reasoning_effort: str  # minimal | low
    output_schema: str  # bool | string
    tool_names: tuple[str, ...]


DEFAULT_AGENT_PROFILE: dict[str, AgentConfig] = {
    "router": AgentConfig("router", "gpt-5-mini", "minimal", "bool", ()),
    "chatbot": AgentConfig("chatbot", "gpt-5-mini", "minimal", "string", CHATBOT_TOOLS),
    "planner_executor": AgentConfig("planner_executor", "o3", "low", "string", PLANNER_TOOLS),
    "critic": AgentConfig("critic", "o4-mini", "low", "string", ()),
}

PROMPT_SECTIONS = (
    ("domain_model", "Domain model"),
    ("example_state", "Example semantic state"),
    ("operational_instructions", "Operational instructions"),
    ("affordances", "Affordances"),
    ("heuristics", "Heuristics"),
    ("action_catalogue", "Action catalogue"),
    ("exemplars", "Planning and acting exemplars"),
    ("failure_patterns", "Failure patterns to avoid"),
)
OPTIONAL_SECTIONS = ("failure_patterns",)

ROUTER_PROMPT = (
    "Classify the user's utterance. Answer exactly 'true' if it asks the robot "
    "to do something in the environment, 'false' if it is conversational."
)


def build_prompt(scenario) -> str:
    """Assemble the planner system prompt from the scenario's sections, in
    fixed order. The action catalogue may be generated from the world config
    with the sentinel 'auto'. Only the failure-patterns section may be empty."""
    sections = dict(scenario.prompt_sections or {})
    unknown = set(sections) - {key for key, _ in PROMPT_SECTIONS}
    if unknown:
        raise ConfigurationError(f"unknown prompt sections: {', '.join(sorted(unknown))}")
    parts = []
    for key, title in PROMPT_SECTIONS:
        value = sections.get(key)
        if key == "action_catalogue" and value in (None, "auto"):
            value = describe_actions(scenario.config.catalogue)
        if value is None or not str(value).strip():
            if key in OPTIONAL_SECTIONS:
                continue
            raise ConfigurationError(f"missing prompt section: {key}")
        parts.append(f"## {title}\n{str(value).strip()}")
    return "\n\n".join(parts) + "\n"


def route(utterance: str, backend: Backend, log: Optional[ExecutionLog] = None, tick: int = 0) -> bool:
    """Ask the router whether the utterance is actionable. Anything that is
    not a clean boolean falls back to the chatbot, with the problem logged."""
    request = BackendRequest(
        system_prompt=ROUTER_PROMPT,
        history=[{"role": "user", "content": utterance}],
    )
    note = None
    try:
        response = backend.complete(request)
    except Exception as err:  # a broken router must not kill the session
        response, note = None, f"router backend error: {err}"
    actionable = False
    if response is not None:
        if response.final_text is None:
            note = "router returned a tool call; expected a boolean"
        else:
            text = response.final_text.strip().lower()
            if text in ("true", "false"):
                actionable = text == "true"
            else:
                note = f"router returned non-boolean '{response.final_text}'"
    if log is not None:
        payload = {"utterance": utterance, "actionable": actionable}
        if note:
            payload["note"] = note + "; defaulting to chatbot"
        log.append("routing", tick, payload)
    return actionable


def run_chatbot(
    utterance: str,
    backend: Backend,
    chat_dispatch: Callable[[ToolCall], ToolResult],
    log: ExecutionLog,
    tick_fn: Callable[[], int] = lambda: 0,
    system_prompt: str = "",
    read_only_tools: tuple[str, ...] = CHATBOT_TOOLS,
    max_tool_calls: int = 20,
    pre_call_hook: Optional[Callable[[], None]] = None,
) -> str:
    """Conversational branch: tools allowed are read only plus speak; an
    attempted act comes back as a parameter error and the loop continues."""
    history = [{"role": "user", "content": utterance}]
    calls = 0
    while True:
        response = backend.complete(BackendRequest(system_prompt, list(history)))
        if pre_call_hook is not None:
            pre_call_hook()
        if response.final_text is not None:
            log.append("final_text", tick_fn(), {"agent": "chatbot", "text": response.final_text})
            return response.final_text
        calls += 1
        result = chat_dispatch(response.tool_call)
        history.append({"role": "assistant", "content": _render_call(response.tool_call)})
        history.append({"role": "tool", "content": result.text})
        if calls >= max_tool_calls:
            text = "I could not finish answering within my tool budget."
            log.append("final_text", tick_fn(), {"agent": "chatbot", "text": text})
            return text


def _render_call(call: ToolCall) -> str:
    return json.dumps({"tool": call.tool, "payload": call.payload}, sort_keys=True)


def run_planner_executor(
    goal: str,
    backend: Backend,
    dispatch: Callable[[ToolCall], ToolResult],
    log: ExecutionLog,
    budget: int,
    tick_fn: Callable[[], int] = lambda: 0,
    system_prompt: str = "",
    tool_schemas: str = "",
    history: Optional[list[dict]] = None,
    pre_call_hook: Optional[Callable[[], None]] = None,
) -> str:
    """One planner-executor round: iterate backend tool calls through the
    dispatcher until a final text, or cut off at `budget` tool calls."""
    messages = history if history is not None else [{"role": "user", "content": goal}]
    if not messages:
        messages.append({"role": "user", "content": goal})
    used = 0
    while True:
        if used >= budget:
            text = "budget exceeded"
            log.append("final_text", tick_fn(), {"agent": "planner_executor", "text": text})
            return text
        response = backend.complete(BackendRequest(system_prompt, list(messages), tool_schemas))
        # operator inputs land between deciding and acting, never mid-action
        if pre_call_hook is not None:
            pre_call_hook()
        if response.final_text is not None:
            log.append("final_text", tick_fn(), {"agent": "planner_executor", "text": response.final_text})
            messages.append({"role": "assistant", "content": response.final_text})
            return response.final_text
        used += 1
        result = dispatch(response.tool_call)
        messages.append({"role": "assistant", "content": _render_call(response.tool_call)})
        messages.append({"role": "tool", "content": result.text})


@dataclass
class CriticVerdict:
    decision: str  # continue | stop
    reason: str


CRITIC_PROMPT = (
    "You review an execution log after a planner round. Decide whether the "
    "robot should keep working toward the user's goal. A genuine physical "
    "attempt means at least one environment-changing action was tried, "
    "successfully or not; speaking and listening do not count. Answer "
    "'continue: <reason>' or 'stop: <reason>'."
)


def _round_act_attempts(log: ExecutionLog) -> list[tuple[str, tuple[str, ...], bool, str]]:
    """(action, params, ok, status) for every act in the current critic round.
    Parameter errors never reached the environment and are excluded."""
    entries = log.entries()
    start = 0
    for i, entry in enumerate(entries):
        if entry.kind == "critic_verdict":
            start = i + 1
    attempts = []
    pending = None
    for entry in entries[start:]:
        if entry.kind == "tool_call" and entry.payload.get("tool") == "act":
            payload = entry.payload.get("payload") or {}
            pending = (str(payload.get("action")), tuple(payload.get("params") or ()))
        elif entry.kind == "tool_result" and pending is not None:
            if entry.payload.get("kind") == "status":
                attempts.append((pending[0], pending[1], bool(entry.payload.get("ok")), entry.payload.get("text", "")))
            pending = None
    return attempts


def run_critic(
    log: ExecutionLog,
    goal: str,
    backend: Optional[Backend],
    round_index: int,
    max_rounds: int,
) -> CriticVerdict:
    """Judge the round. With no backend the scripted rules apply: stop when
    blocked on repeated identical failures, push back when the round was all
    talk, otherwise accept. The round cap always forces a stop."""
    if round_index >= max_rounds:
        return CriticVerdict("stop", f"maximum critic rounds reached ({max_rounds})")
    if backend is not None:
        return _remote_critic(log, goal, backend)
    attempts = _round_act_attempts(log)
    streak = 0
    streak_key = None
    for action, params, ok, status in attempts:
        key = (action, params)
        if not ok and key == streak_key:
            streak += 1
        elif not ok:
            streak_key, streak = key, 1
        else:
            streak_key, streak = None, 0
        if streak >= 3:
            pretty = f"{action}({', '.join(params)})"
            return CriticVerdict("stop", f"blocked: {streak} consecutive identical failures of {pretty}: {status}")
    environment_attempts = [a for a in attempts if a[0] not in ("speak", "listen")]
    if not environment_attempts:
        return CriticVerdict(
            "continue",
            "no environment-changing action was attempted; describe less, act on the goal",
        )
    return CriticVerdict("stop", "a genuine physical attempt was made; accepting this round as final")


def _remote_critic(log: ExecutionLog, goal: str, backend: Backend) -> CriticVerdict:
    transcript = "\n".join(e.to_json() for e in log.entries())
    request = BackendRequest(
        system_prompt=CRITIC_PROMPT,
        history=[{"role": "user", "content": f"goal: {goal}\n\nlog:\n{transcript}"}],
    )
    response = backend.complete(request)
    text = (response.final_text or "").strip()
    lowered = text.lower()
    if lowered.startswith("continue"):
        return CriticVerdict("continue", text.partition(":")[2].strip() or "critic asked to continue")
    if lowered.startswith("stop"):
        return CriticVerdict("stop", text.partition(":")[2].strip() or "critic asked to stop")
    return CriticVerdict("stop", f"unparseable critic answer treated as stop: {text!r}")
