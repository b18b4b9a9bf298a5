"""Reproducible planner-executor control loop over deterministic robot simulators."""

from .agents import AgentConfig, ConfigurationError, CriticVerdict, DEFAULT_AGENT_PROFILE, build_prompt
from .backends import (
    Backend,
    BackendRequest,
    BackendResponse,
    PolicyBundle,
    PolicyError,
    RemoteBackend,
    ScriptedBackend,
    ScriptedPolicy,
    load_policy_file,
    load_policy_text,
)
from .events import Event, EventBus
from .facts import (
    Observation,
    ObservationBuffer,
    Predicate,
    Snapshot,
    discretize_battery,
    make_snapshot,
    nearest_location,
    record_perception,
)
from .logbook import ExecutionLog, LogEntry
from .scenario import (
    GoalPredicate,
    Scenario,
    ScenarioError,
    build_world,
    check_goals,
    load_scenario_file,
    load_scenario_text,
)
from .session import Session, SessionConfig
from .tools import ToolCall, ToolResult, chat_dispatch, describe_tools, dispatch
from .world import (
    ActionOutcome,
    ActionParameterError,
    InvariantViolation,
    Location,
    ObjectItem,
    Placement,
    RobotState,
    WorldConfig,
    WorldState,
    apply_action,
    inject_failure_decision,
    set_estop,
    simulate_battery,
    state_hash,
)

__version__ = "0.1.0"
