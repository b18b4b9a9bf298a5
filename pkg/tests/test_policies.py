"""Scripted policy parsing and rule-table replay."""

import pytest

from planexec.backends import (
    BackendRequest,
    BackendResponse,
    PolicyError,
    PolicyRule,
    ScriptedBackend,
    ScriptedPolicy,
    last_observed_text,
    load_policy_text,
)
from planexec.tools import ToolCall


def req(history=None):
    return BackendRequest(system_prompt="", history=history or [])


def tool_history(text):
    return [{"role": "tool", "content": text}]


# -- response contract ---------------------------------------------------------------

def test_response_carries_exactly_one_branch():
    BackendResponse(tool_call=ToolCall("reflect", {"text": "x"}))
    BackendResponse(final_text="done")
    with pytest.raises(ValueError):
        BackendResponse()
    with pytest.raises(ValueError):
        BackendResponse(tool_call=ToolCall("reflect", {}), final_text="both")


# -- matching base text ----------------------------------------------------------------

def test_last_observed_text_prefers_tool_result():
    history = [
        {"role": "user", "content": "fetch the box"},
        {"role": "assistant", "content": "on it"},
        {"role": "tool", "content": "navigated to table_1"},
        {"role": "assistant", "content": "next"},
    ]
    assert last_observed_text(history) == "navigated to table_1"


def test_last_observed_text_falls_back_to_user_then_empty():
    assert last_observed_text([{"role": "user", "content": "hello"}]) == "hello"
    assert last_observed_text([{"role": "assistant", "content": "hi"}]) == ""
    assert last_observed_text([]) == ""


# -- firing order -------------------------------------------------------------------------

def test_rules_fire_in_order_and_are_one_shot():
    backend = ScriptedBackend(
        ScriptedPolicy(
            rules=[
                PolicyRule(emit_tool=ToolCall("reflect", {"text": "first"})),
                PolicyRule(emit_tool=ToolCall("reflect", {"text": "second"})),
            ],
            default_final="done",
        )
    )
    assert backend.complete(req()).tool_call.payload["text"] == "first"
    assert backend.complete(req()).tool_call.payload["text"] == "second"
    assert backend.complete(req()).final_text == "done"
    assert backend.complete(req()).final_text == "done"  # default never wears out


def test_repeat_rule_fires_forever():
    backend = ScriptedBackend(
        ScriptedPolicy(rules=[PolicyRule(emit_tool=ToolCall("check_events", {}), repeat=True)])
    )
    for _ in range(5):
        assert backend.complete(req()).tool_call.tool == "check_events"


def test_match_gates_a_rule():
    backend = ScriptedBackend(
        ScriptedPolicy(
            rules=[
                PolicyRule(emit_final="saw failure", match="no feasible grasp"),
                PolicyRule(emit_final="fallthrough"),
            ]
        )
    )
    # first call: the guard misses, the unguarded rule fires
    assert backend.complete(req(tool_history("picked box_1"))).final_text == "fallthrough"
    # second call: now the guard hits
    response = backend.complete(req(tool_history("no feasible grasp found for screwdriver_1")))
    assert response.final_text == "saw failure"


def test_match_is_regex_search():
    backend = ScriptedBackend(
        ScriptedPolicy(rules=[PolicyRule(emit_final="hit", match=r"charged to \d+%")], default_final="miss")
    )
    assert backend.complete(req(tool_history("charged to 80%"))).final_text == "hit"


def test_no_rule_and_no_default_raises():
    backend = ScriptedBackend(ScriptedPolicy(rules=[PolicyRule(emit_final="once")]))
    backend.complete(req())
    with pytest.raises(PolicyError):
        backend.complete(req())


def test_last_result_substitution_in_finals_and_payloads():
    backend = ScriptedBackend(
        ScriptedPolicy(
            rules=[
                PolicyRule(emit_tool=ToolCall("speak", {"text": "heard: {last_result}"})),
                PolicyRule(emit_final="run over; last was {last_result}"),
            ]
        )
    )
    response = backend.complete(req(tool_history("navigated to table_2")))
    assert response.tool_call.payload["text"] == "heard: navigated to table_2"
    response = backend.complete(req(tool_history("completed speech")))
    assert response.final_text == "run over; last was completed speech"


# -- YAML parsing --------------------------------------------------------------------------

def test_load_full_bundle():
    bundle = load_policy_text(
        """
id: demo
router:
  rules:
    - {match: "pick", final: "true"}
  default: "false"
chatbot:
  rules:
    - tool: {name: get_today_date}
  default: bye
planner:
  rules:
    - reflect: planning now
    - act: {action: navigate, params: [table_1]}
    - snapshot: true
    - check_events: true
    - speak: done here
  default: stopping
"""
    )
    assert bundle.router and bundle.chatbot and bundle.planner
    assert len(bundle.planner.rules) == 5
    assert bundle.planner.rules[1].emit_tool.payload == {"action": "navigate", "params": ["table_1"]}
    assert bundle.planner.rules[2].emit_tool.tool == "get_snapshot"
    assert bundle.planner.rules[4].emit_tool == ToolCall("speak", {"text": "done here"})
    assert bundle.router.rules[0].match == "pick"
    assert bundle.source_text.startswith("\nid: demo")


def test_flag_style_rules():
    bundle = load_policy_text("planner:\n  rules:\n    - snapshot: true\n    - check_events: true\n")
    tools = [r.emit_tool.tool for r in bundle.planner.rules]
    assert tools == ["get_snapshot", "check_events"]
    # rules must be mappings; a bare string is not accepted
    with pytest.raises(PolicyError, match="must be a mapping"):
        load_policy_text("planner:\n  rules:\n    - snapshot\n")


def test_parse_errors_name_the_rule():
    with pytest.raises(PolicyError, match=r"planner\.rules\[1\]"):
        load_policy_text(
            "planner:\n  rules:\n    - reflect: ok\n    - {match: x}\n"
        )
    with pytest.raises(PolicyError, match="exactly one"):
        load_policy_text("planner:\n  rules:\n    - {reflect: a, final: b}\n")
    with pytest.raises(PolicyError, match="unknown rule fields"):
        load_policy_text("planner:\n  rules:\n    - {reflect: a, when: x}\n")
    with pytest.raises(PolicyError, match="unknown top-level fields"):
        load_policy_text("pilot:\n  rules: []\n")
    with pytest.raises(PolicyError, match="unknown fields"):
        load_policy_text("planner:\n  steps: []\n")
    with pytest.raises(PolicyError, match="not valid YAML"):
        load_policy_text("planner: [unclosed\n")
    with pytest.raises(PolicyError, match="must be a mapping"):
        load_policy_text("- just\n- a\n- list\n")


def test_act_rule_validation():
    with pytest.raises(PolicyError, match="act must be a mapping"):
        load_policy_text("planner:\n  rules:\n    - act: navigate\n")
    with pytest.raises(PolicyError, match="params must be a list"):
        load_policy_text("planner:\n  rules:\n    - act: {action: navigate, params: table_1}\n")


def test_empty_policy_and_missing_sections():
    bundle = load_policy_text("")
    assert bundle.router is None and bundle.chatbot is None and bundle.planner is None
    assert bundle.router_backend() is None
    bundle = load_policy_text("planner:\n  default: idle\n")
    assert bundle.planner.rules == []
    assert bundle.planner_backend().complete(req()).final_text == "idle"


def test_rule_numeric_coercions():
    bundle = load_policy_text(
        "planner:\n  rules:\n    - {act: {action: charge, params: [80]}, pause_ms: 5, repeat: true}\n"
    )
    rule = bundle.planner.rules[0]
    assert rule.emit_tool.payload["params"] == ["80"]  # numbers become strings
    assert rule.repeat is True and rule.pause_ms == 5
