"""Decision backends for the agents.

A backend maps (system prompt, message history, tool schemas) to either a
tool call or a final text. The scripted backend replays an ordered rule table
against the last observed tool result and is what every reproducible run
uses. The remote backend speaks a chat-completion style HTTP protocol and
exists behind the same contract; nothing in the test suite depends on it
being reachable.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from typing import Optional, Protocol

import httpx
import yaml

from .tools import ToolCall


class PolicyError(Exception):
    """A scripted policy file is malformed or ran out of applicable rules."""


@dataclass
class BackendRequest:
    system_prompt: str
    history: list[dict]
    tool_schemas: str = ""


@dataclass
class BackendResponse:
    tool_call: Optional[ToolCall] = None
    final_text: Optional[str] = None

    def __post_init__(self):
        if (self.tool_call is None) == (self.final_text is None):
            raise ValueError("a backend response carries exactly one of tool_call or final_text")


class Backend(Protocol):
    def complete(self, request: BackendRequest) -> BackendResponse: ...


@dataclass
class PolicyRule:
    emit_tool: Optional[ToolCall] = None
    emit_final: Optional[str] = None
    match: Optional[str] = None  # regex searched in the last observed text
    repeat: bool = False
    pause_ms: int = 0  # demo pacing only; never enters the log


@dataclass
class ScriptedPolicy:
    rules: list[PolicyRule] = field(default_factory=list)
    default_final: Optional[str] = None


def last_observed_text(history: list[dict]) -> str:
    """The text a scripted rule matches against: the most recent tool result,
    or the most recent user message when no tool has run yet."""
    for message in reversed(history):
        if message.get("role") == "tool":
            return message.get("content", "")
    for message in reversed(history):
        if message.get("role") == "user":
            return message.get("content", "")
    return ""


class ScriptedBackend:
    """Deterministic rule-table backend.

    Rules are scanned in order: spent one-shot rules are skipped, rules whose
    match pattern does not hit the last observed text are skipped, and the
    first remaining rule fires. Rules fire once unless marked repeat. When
    nothing applies the default final text is emitted; having neither is a
    policy error.
    """

    def __init__(self, policy: ScriptedPolicy):
        self._policy = policy
        self._fired = [0] * len(policy.rules)

    def complete(self, request: BackendRequest) -> BackendResponse:
        last = last_observed_text(request.history)
        for i, rule in enumerate(self._policy.rules):
            if self._fired[i] and not rule.repeat:
                continue
            if rule.match is not None and not re.search(rule.match, last):
                continue
            self._fired[i] += 1
            if rule.pause_ms:
                time.sleep(rule.pause_ms / 1000.0)
            if rule.emit_tool is not None:
                payload = {k: _substitute(v, last) for k, v in rule.emit_tool.payload.items()}
                return BackendResponse(tool_call=ToolCall(rule.emit_tool.tool, payload))
            return BackendResponse(final_text=_substitute(rule.emit_final, last))
        if self._policy.default_final is not None:
            return BackendResponse(final_text=_substitute(self._policy.default_final, last))
        raise PolicyError("no scripted rule matched and the policy has no default final text")


def _substitute(value, last: str):
    """Fill {last_result} into strings, recursing through payload containers."""
    if isinstance(value, str):
        return value.replace("{last_result}", last)
    if isinstance(value, list):
        return [_substitute(v, last) for v in value]
    return value


_EMIT_KEYS = ("reflect", "act", "snapshot", "check_events", "speak", "tool", "final")


def _parse_rule(raw: dict, where: str) -> PolicyRule:
    if not isinstance(raw, dict):
        raise PolicyError(f"{where}: each rule must be a mapping")
    present = [k for k in _EMIT_KEYS if k in raw]
    if len(present) != 1:
        raise PolicyError(f"{where}: a rule needs exactly one of {', '.join(_EMIT_KEYS)}")
    key = present[0]
    value = raw[key]
    unknown = set(raw) - {key, "match", "repeat", "pause_ms"}
    if unknown:
        raise PolicyError(f"{where}: unknown rule fields: {', '.join(sorted(unknown))}")
    if key == "reflect":
        emit = PolicyRule(emit_tool=ToolCall("reflect", {"text": str(value)}))
    elif key == "act":
        if not isinstance(value, dict) or "action" not in value:
            raise PolicyError(f"{where}: act must be a mapping with 'action' and optional 'params'")
        params = value.get("params", [])
        if not isinstance(params, list):
            raise PolicyError(f"{where}: act params must be a list")
        emit = PolicyRule(
            emit_tool=ToolCall("act", {"action": str(value["action"]), "params": [str(p) for p in params]})
        )
    elif key == "snapshot":
        emit = PolicyRule(emit_tool=ToolCall("get_snapshot", {}))
    elif key == "check_events":
        emit = PolicyRule(emit_tool=ToolCall("check_events", {}))
    elif key == "speak":
        emit = PolicyRule(emit_tool=ToolCall("speak", {"text": str(value)}))
    elif key == "tool":
        if not isinstance(value, dict) or "name" not in value:
            raise PolicyError(f"{where}: tool must be a mapping with 'name' and optional 'payload'")
        emit = PolicyRule(emit_tool=ToolCall(str(value["name"]), dict(value.get("payload", {}))))
    else:  # final
        emit = PolicyRule(emit_final=str(value))
    emit.match = str(raw["match"]) if raw.get("match") not in (None, "") else None
    emit.repeat = bool(raw.get("repeat", False))
    emit.pause_ms = int(raw.get("pause_ms", 0))
    return emit


def _parse_policy(raw, where: str) -> ScriptedPolicy:
    if not isinstance(raw, dict):
        raise PolicyError(f"{where}: expected a mapping with 'rules' and/or 'default'")
    unknown = set(raw) - {"rules", "default"}
    if unknown:
        raise PolicyError(f"{where}: unknown fields: {', '.join(sorted(unknown))}")
    rules_raw = raw.get("rules", []) or []
    rules = [_parse_rule(r, f"{where}.rules[{i}]") for i, r in enumerate(rules_raw)]
    default = raw.get("default")
    return ScriptedPolicy(rules=rules, default_final=None if default is None else str(default))


@dataclass
class PolicyBundle:
    """All scripted per-agent policies for one run, parsed from one file."""

    router: Optional[ScriptedPolicy] = None
    chatbot: Optional[ScriptedPolicy] = None
    planner: Optional[ScriptedPolicy] = None
    source_text: str = ""

    def router_backend(self) -> Optional[ScriptedBackend]:
        return ScriptedBackend(self.router) if self.router is not None else None

    def chatbot_backend(self) -> Optional[ScriptedBackend]:
        return ScriptedBackend(self.chatbot) if self.chatbot is not None else None

    def planner_backend(self) -> Optional[ScriptedBackend]:
        return ScriptedBackend(self.planner) if self.planner is not None else None


def load_policy_text(text: str, source: str = "<policy>") -> PolicyBundle:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise PolicyError(f"{source}: not valid YAML: {err}")
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise PolicyError(f"{source}: the policy document must be a mapping")
    unknown = set(raw) - {"id", "router", "chatbot", "planner"}
    if unknown:
        raise PolicyError(f"{source}: unknown top-level fields: {', '.join(sorted(unknown))}")
    bundle = PolicyBundle(source_text=text)
    for name in ("router", "chatbot", "planner"):
        if raw.get(name) is not None:
            setattr(bundle, name, _parse_policy(raw[name], f"{source}.{name}"))
    return bundle


def load_policy_file(path: str) -> PolicyBundle:
    with open(path, "r", encoding="utf-8") as fh:
        return load_policy_text(fh.read(), source=path)


class RemoteBackend:
    """Chat-completion style HTTP backend.

    Sends {model, messages, ...} and reads either a tool call or plain
    content out of the first choice. The exact JSON field names follow the
    common completions shape and are not contractual.
    """

    def __init__(self, url: str, model_id: str, reasoning_effort: str = "low", timeout: float = 60.0):
        self.url = url
        self.model_id = model_id
        self.reasoning_effort = reasoning_effort
        self.timeout = timeout
        self._client = httpx.Client(timeout=timeout)

    def complete(self, request: BackendRequest) -> BackendResponse:
        messages = [{"role": "system", "content": request.system_prompt}]
        if request.tool_schemas:
            messages.append({"role": "system", "content": request.tool_schemas})
        messages.extend(request.history)
        body = {
            "model": self.model_id,
            "reasoning_effort": self.reasoning_effort,
            "messages": messages,
        }
        response = self._client.post(self.url, json=body)
        response.raise_for_status()
        data = response.json()
        message = data["choices"][0]["message"]
        tool_calls = message.get("tool_calls") or []
        if tool_calls:
            fn = tool_calls[0]["function"]
            arguments = fn.get("arguments", "{}")
            payload = json.loads(arguments) if isinstance(arguments, str) else dict(arguments)
            return BackendResponse(tool_call=ToolCall(fn["name"], payload))
        return BackendResponse(final_text=message.get("content") or "")
