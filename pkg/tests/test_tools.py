"""Tool surface: strict act schema, dispatch logging, chatbot read-only set."""

import pytest

from planexec.facts import ObservationBuffer
from planexec.logbook import ExecutionLog
from planexec.tools import (
    CHATBOT_TOOLS,
    ENVIRONMENT_CHANGING,
    PLANNER_TOOLS,
    ToolCall,
    chat_dispatch,
    describe_tools,
    dispatch,
    validate_act_payload,
)
from planexec.world import ActionParameterError, state_hash

from test_world import make_indoor


def setup_run():
    world = make_indoor()
    return world, ObservationBuffer(), world.bus, ExecutionLog()


# -- act schema --------------------------------------------------------------------

def test_act_payload_happy_path():
    assert validate_act_payload({"action": "navigate", "params": ["table_1"]}) == (
        "navigate",
        ["table_1"],
    )
    assert validate_act_payload({"action": "listen", "params": []}) == ("listen", [])


@pytest.mark.parametrize(
    "payload",
    [
        {"action": "navigate", "params": ["table_1"], "speed": "fast"},
        {"action": "navigate", "params": ["table_1"], "reason": "user asked"},
        {"action": "navigate"},
        {"params": ["table_1"]},
        {},
        {"action": 3, "params": []},
        {"action": "navigate", "params": "table_1"},
        {"action": "navigate", "params": [1]},
        {"action": "navigate", "params": [None]},
        ["navigate", "table_1"],
        "navigate table_1",
    ],
)
def test_act_payload_rejects_deviations(payload):
    with pytest.raises(ActionParameterError):
        validate_act_payload(payload)


def test_extra_field_error_names_the_field():
    with pytest.raises(ActionParameterError, match="speed"):
        validate_act_payload({"action": "navigate", "params": [], "speed": "fast"})


# -- planner dispatch ----------------------------------------------------------------

def test_dispatch_logs_call_then_result():
    world, buffer, bus, log = setup_run()
    result = dispatch(ToolCall("reflect", {"text": "thinking"}), world, buffer, bus, log)
    assert result.ok and result.kind == "ack" and result.text == "reflection recorded"
    kinds = [e.kind for e in log.entries()]
    assert kinds == ["tool_call", "reflection", "tool_result"]
    assert log.entries()[0].payload == {"tool": "reflect", "payload": {"text": "thinking"}}
    assert log.entries()[2].payload == {"ok": True, "kind": "ack", "text": "reflection recorded"}


def test_reflect_does_not_touch_world():
    world, buffer, bus, log = setup_run()
    before = state_hash(world)
    dispatch(ToolCall("reflect", {"text": "still thinking"}), world, buffer, bus, log)
    assert state_hash(world) == before
    assert world.tick == 0


def test_reflect_requires_text():
    world, buffer, bus, log = setup_run()
    result = dispatch(ToolCall("reflect", {}), world, buffer, bus, log)
    assert not result.ok and result.kind == "parameter_error"


def test_act_success_is_status_kind():
    world, buffer, bus, log = setup_run()
    result = dispatch(
        ToolCall("act", {"action": "navigate", "params": ["table_1"]}), world, buffer, bus, log
    )
    assert result.ok and result.kind == "status"
    assert result.text == "navigated to table_1"
    assert world.tick == 4


def test_act_precondition_failure_is_status_not_parameter_error():
    world, buffer, bus, log = setup_run()
    result = dispatch(
        ToolCall("act", {"action": "pick", "params": ["box_1"]}), world, buffer, bus, log
    )
    assert not result.ok
    assert result.kind == "status"
    assert result.text == "box_1 is not at the robot's current location"
    assert world.tick == 1  # the failed attempt still consumed time


def test_act_schema_violation_is_parameter_error_and_free():
    world, buffer, bus, log = setup_run()
    before = state_hash(world)
    result = dispatch(
        ToolCall("act", {"action": "navigate", "params": ["table_1"], "speed": "fast"}),
        world,
        buffer,
        bus,
        log,
    )
    assert not result.ok and result.kind == "parameter_error"
    assert state_hash(world) == before
    assert world.tick == 0


def test_act_unknown_action_is_parameter_error():
    world, buffer, bus, log = setup_run()
    result = dispatch(
        ToolCall("act", {"action": "fly", "params": ["Paris"]}), world, buffer, bus, log
    )
    assert result.kind == "parameter_error"
    assert "unknown action 'fly'" in result.text


def test_perceive_feeds_the_observation_buffer():
    world, buffer, bus, log = setup_run()
    dispatch(ToolCall("act", {"action": "navigate", "params": ["table_3"]}), world, buffer, bus, log)
    dispatch(ToolCall("act", {"action": "perceive", "params": ["table_3"]}), world, buffer, bus, log)
    snap = dispatch(ToolCall("get_snapshot", {}), world, buffer, bus, log)
    assert snap.kind == "snapshot"
    assert "on(box_1, table_3)" in snap.text
    assert "in(relay_1, box_1)" in snap.text


def test_pick_forgets_the_object_from_belief():
    world, buffer, bus, log = setup_run()
    dispatch(ToolCall("act", {"action": "navigate", "params": ["table_3"]}), world, buffer, bus, log)
    dispatch(ToolCall("act", {"action": "perceive", "params": ["table_3"]}), world, buffer, bus, log)
    dispatch(ToolCall("act", {"action": "pick", "params": ["box_1"]}), world, buffer, bus, log)
    snap = dispatch(ToolCall("get_snapshot", {}), world, buffer, bus, log)
    # the held object disappears from the snapshot; tracking it is the planner's job
    assert "box_1" not in snap.text or "in(relay_1, box_1)" in snap.text
    assert "on(box_1" not in snap.text


def test_check_events_drains_and_reports_empty():
    world, buffer, bus, log = setup_run()
    bus.inject("door opened", world.tick)
    bus.inject("parcel arrived", world.tick)
    result = dispatch(ToolCall("check_events", {}), world, buffer, bus, log)
    assert result.kind == "events"
    assert result.text == "door opened\nparcel arrived"
    result = dispatch(ToolCall("check_events", {}), world, buffer, bus, log)
    assert result.text == "no events"


def test_speak_act_logs_an_utterance():
    world, buffer, bus, log = setup_run()
    dispatch(ToolCall("act", {"action": "speak", "params": ["done"]}), world, buffer, bus, log)
    utterances = [e for e in log.entries() if e.kind == "utterance"]
    assert len(utterances) == 1
    assert utterances[0].payload == {"role": "robot", "text": "done"}


def test_unknown_tool_lists_the_toolset():
    world, buffer, bus, log = setup_run()
    result = dispatch(ToolCall("grab", {}), world, buffer, bus, log)
    assert result.kind == "parameter_error"
    for tool in PLANNER_TOOLS:
        assert tool in result.text


# -- chatbot dispatch ---------------------------------------------------------------

def test_chatbot_tools_are_pure():
    world, buffer, _, log = setup_run()
    before = state_hash(world)
    chat_dispatch(ToolCall("get_today_date", {}), world, buffer, log, today="2026-02-03")
    chat_dispatch(ToolCall("get_available_locations", {}), world, buffer, log)
    chat_dispatch(ToolCall("get_snapshot", {}), world, buffer, log)
    chat_dispatch(ToolCall("speak", {"text": "hello"}), world, buffer, log)
    assert state_hash(world) == before
    assert world.tick == 0


def test_chatbot_date_and_locations():
    world, buffer, _, log = setup_run()
    result = chat_dispatch(ToolCall("get_today_date", {}), world, buffer, log, today="2026-02-03")
    assert result.text == "2026-02-03"
    result = chat_dispatch(ToolCall("get_available_locations", {}), world, buffer, log)
    assert result.text == "home, table_1, table_2, table_3"


def test_chatbot_speak_logs_utterance():
    world, buffer, _, log = setup_run()
    result = chat_dispatch(ToolCall("speak", {"text": "hello there"}), world, buffer, log)
    assert result.ok and result.text == "completed speech"
    utterances = [e for e in log.entries() if e.kind == "utterance"]
    assert utterances[0].payload == {"role": "robot", "text": "hello there"}


def test_chatbot_cannot_act():
    world, buffer, _, log = setup_run()
    before = state_hash(world)
    result = chat_dispatch(
        ToolCall("act", {"action": "navigate", "params": ["table_1"]}), world, buffer, log
    )
    assert not result.ok and result.kind == "parameter_error"
    assert "cannot execute environment actions" in result.text
    assert state_hash(world) == before


def test_chatbot_unknown_tool():
    world, buffer, _, log = setup_run()
    result = chat_dispatch(ToolCall("check_events", {}), world, buffer, log)
    assert result.kind == "parameter_error"
    for tool in CHATBOT_TOOLS:
        assert tool in result.text


# -- descriptions ---------------------------------------------------------------------

def test_describe_tools_names_all_actions():
    text = describe_tools("indoor")
    for action in ("navigate", "perceive", "pick", "place", "insert", "move_arm"):
        assert action in text
    assert "- dock(" not in text
    text = describe_tools("outdoor")
    for action in ("- dock(", "- undock(", "- charge(", "- scan("):
        assert action in text
    with pytest.raises(ValueError):
        describe_tools("underwater")


def test_environment_changing_excludes_speech():
    assert "speak" not in ENVIRONMENT_CHANGING
    assert "listen" not in ENVIRONMENT_CHANGING
    assert "navigate" in ENVIRONMENT_CHANGING
    assert "charge" in ENVIRONMENT_CHANGING
