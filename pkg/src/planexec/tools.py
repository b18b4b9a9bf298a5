"""The tool surface exposed to the agents.

The planner-executor gets exactly four tools: reflect, act, get_snapshot and
check_events. Everything physical goes through act, whose payload is a strict
{"action": str, "params": [str, ...]} with no other fields permitted. The
chatbot gets a separate read-only toolset plus speak and is rejected if it
ever tries to act.
"""

from __future__ import annotations

import copy
import datetime as _dt
from dataclasses import dataclass, field
from typing import Optional

from . import world as worldmod
from .events import EventBus
from .facts import ObservationBuffer, make_snapshot, record_perception
from .logbook import ExecutionLog
from .world import ActionParameterError, WorldState

PLANNER_TOOLS = ("reflect", "act", "get_snapshot", "check_events")
CHATBOT_TOOLS = ("get_today_date", "get_available_locations", "get_snapshot", "speak")
RESULT_KINDS = ("ack", "status", "snapshot", "events", "parameter_error")

ENVIRONMENT_CHANGING = tuple(
    a for a in worldmod.ACTION_SIGNATURES if a not in ("speak", "listen")
)


@dataclass
class ToolCall:
    tool: str
    payload: dict = field(default_factory=dict)


@dataclass
class ToolResult:
    ok: bool
    text: str
    kind: str


def _param_error(text: str) -> ToolResult:
    return ToolResult(ok=False, text=text, kind="parameter_error")


def validate_act_payload(payload) -> tuple[str, list[str]]:
    """Enforce the act schema: exactly the keys action and params, params a
    list of strings. Raises ActionParameterError on any deviation."""
    if not isinstance(payload, dict):
        raise ActionParameterError("act payload must be an object with keys 'action' and 'params'")
    extra = set(payload) - {"action", "params"}
    if extra:
        raise ActionParameterError(
            f"act payload has unexpected fields: {', '.join(sorted(str(e) for e in extra))}; "
            "only 'action' and 'params' are allowed"
        )
    if "action" not in payload or "params" not in payload:
        missing = {"action", "params"} - set(payload)
        raise ActionParameterError(f"act payload is missing fields: {', '.join(sorted(missing))}")
    action = payload["action"]
    params = payload["params"]
    if not isinstance(action, str):
        raise ActionParameterError("act field 'action' must be a string")
    if not isinstance(params, list) or any(not isinstance(p, str) for p in params):
        raise ActionParameterError("act field 'params' must be a list of strings, interpreted positionally")
    return action, params


def dispatch(
    call: ToolCall,
    world: WorldState,
    buffer: ObservationBuffer,
    bus: EventBus,
    log: ExecutionLog,
) -> ToolResult:
    """Execute one planner tool call and record it in the log.

    Every call produces a tool_call entry, then exactly one tool_result entry
    whose text is returned verbatim to the caller.
    """
    log.append("tool_call", world.tick, {"tool": call.tool, "payload": copy.deepcopy(call.payload)})
    result = _dispatch_inner(call, world, buffer, bus, log)
    log.append("tool_result", world.tick, {"ok": result.ok, "kind": result.kind, "text": result.text})
    return result


def _dispatch_inner(call, world, buffer, bus, log) -> ToolResult:
    if call.tool == "reflect":
        text = call.payload.get("text")
        if not isinstance(text, str) or not text:
            return _param_error("reflect payload must be {'text': <non-empty string>}")
        log.append("reflection", world.tick, {"text": text})
        return ToolResult(ok=True, text="reflection recorded", kind="ack")
    if call.tool == "act":
        return _dispatch_act(call, world, buffer, log)
    if call.tool == "get_snapshot":
        snap = make_snapshot(world, buffer)
        return ToolResult(ok=True, text=snap.rendered_text, kind="snapshot")
    if call.tool == "check_events":
        texts = bus.drain(world.tick)
        return ToolResult(ok=True, text="\n".join(texts) if texts else "no events", kind="events")
    return _param_error(f"unknown tool '{call.tool}'; available tools: {', '.join(PLANNER_TOOLS)}")


def _dispatch_act(call, world, buffer, log) -> ToolResult:
    try:
        action, params = validate_act_payload(call.payload)
        if action == "perceive" and len(params) == 1:
            # resolve ahead so the buffer refresh below uses the canonical id
            surface = worldmod.resolve_location(world, params[0]).id
        else:
            surface = None
        picked = worldmod.resolve_object(world, params[0]).id if action == "pick" and len(params) == 1 else None
        _, outcome = worldmod.apply_action(world, action, params)
    except ActionParameterError as err:
        return _param_error(str(err))
    if outcome.success:
        if action == "perceive":
            record_perception(buffer, world, surface)
        elif action == "pick":
            # the object left its surface in the robot's own gripper
            buffer.forget(picked)
        elif action == "speak":
            log.append("utterance", world.tick, {"role": "robot", "text": params[0]})
    return ToolResult(ok=outcome.success, text=outcome.status_text, kind="status")


def chat_dispatch(
    call: ToolCall,
    world: WorldState,
    buffer: ObservationBuffer,
    log: ExecutionLog,
    today: Optional[str] = None,
) -> ToolResult:
    """Execute one chatbot tool call. The chatbot never mutates the world."""
    log.append("tool_call", world.tick, {"tool": call.tool, "payload": copy.deepcopy(call.payload)})
    result = _chat_inner(call, world, buffer, log, today)
    log.append("tool_result", world.tick, {"ok": result.ok, "kind": result.kind, "text": result.text})
    return result


def _chat_inner(call, world, buffer, log, today) -> ToolResult:
    if call.tool == "get_today_date":
        value = today or _dt.date.today().isoformat()
        return ToolResult(ok=True, text=value, kind="status")
    if call.tool == "get_available_locations":
        return ToolResult(ok=True, text=", ".join(sorted(world.locations)), kind="status")
    if call.tool == "get_snapshot":
        snap = make_snapshot(world, buffer)
        return ToolResult(ok=True, text=snap.rendered_text, kind="snapshot")
    if call.tool == "speak":
        text = call.payload.get("text")
        if not isinstance(text, str) or not text:
            return _param_error("speak payload must be {'text': <non-empty string>}")
        log.append("utterance", world.tick, {"role": "robot", "text": text})
        return ToolResult(ok=True, text="completed speech", kind="status")
    if call.tool == "act":
        return _param_error(
            "the chatbot cannot execute environment actions; available tools: "
            + ", ".join(CHATBOT_TOOLS)
        )
    return _param_error(f"unknown tool '{call.tool}'; available tools: {', '.join(CHATBOT_TOOLS)}")


def describe_actions(catalogue) -> str:
    """One line per catalogued action: signature plus behaviour summary."""
    lines = []
    for action in catalogue:
        if action not in worldmod.ACTION_SIGNATURES:
            raise ValueError(f"unknown action in catalogue: {action}")
        lines.append(f"- {worldmod.signature_text(action)}: {worldmod.ACTION_DOCS[action]}")
    return "\n".join(lines)


def describe_tools(platform: str) -> str:
    """Text description of the whole tool surface for a platform, grouped by agent."""
    if platform == "indoor":
        catalogue = worldmod.INDOOR_CATALOGUE
    elif platform == "outdoor":
        catalogue = worldmod.OUTDOOR_CATALOGUE
    else:
        raise ValueError(f"unknown platform '{platform}'")
    parts = [
        "router tools: none (answers with a bare boolean)",
        "chatbot tools: " + ", ".join(CHATBOT_TOOLS),
        "planner-executor tools: " + ", ".join(PLANNER_TOOLS),
        "critic tools: none (verdict only)",
        "",
        "act accepts {\"action\": <name>, \"params\": [<string>, ...]} and nothing else.",
        "actions available on this platform:",
        describe_actions(catalogue),
    ]
    return "\n".join(parts)
