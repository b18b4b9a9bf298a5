"""Deterministic ground-truth simulator for the two robot platforms.

Indoor: a mobile manipulator working over tabletop surfaces (navigate,
perceive, pick, place, insert, arm postures). Outdoor: a field robot that
navigates between points of interest, scans them, and manages its battery
through a shelter with a charging dock.

Time is a discrete tick counter. Navigation costs ceil(distance) ticks at
1 m/tick; every other action costs one tick. Actions are atomic: nothing is
delivered or observable between an action's start and its end. Safety rules
are enforced as action preconditions, never left to agent goodwill.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Optional

from .events import EventBus
from .facts import discretize_battery, nearest_location

INDOOR_CATALOGUE = ("navigate", "move_arm", "perceive", "pick", "place", "insert", "listen", "speak")
OUTDOOR_CATALOGUE = ("navigate", "scan", "dock", "undock", "charge", "listen", "speak")

ARM_POSTURES = ("transport", "observe", "other")
LOCATION_KINDS = ("table", "poi", "shelter", "shelter_entry", "home")
OBJECT_CATEGORIES = ("tool", "container", "other")
GRASP_DIFFICULTIES = ("easy", "hard")

ACTION_SIGNATURES: dict[str, tuple[str, ...]] = {
    "navigate": ("location_id",),
    "move_arm": ("posture",),
    "perceive": ("location_id",),
    "pick": ("object_id",),
    "place": ("object_id", "location_id"),
    "insert": ("object_id", "container_id"),
    "speak": ("text",),
    "listen": (),
    "dock": (),
    "undock": (),
    "charge": ("target_percent",),
    "scan": ("location_id",),
}

ACTION_DOCS: dict[str, str] = {
    "navigate": "drive the base to a known location; the arm must be in transport posture (indoor) and the robot must not be docked or inside the shelter (outdoor)",
    "move_arm": "move the arm to one of the postures: transport, observe, other",
    "perceive": "point the camera at a surface at the current location and refresh its observations; rejected while gripping a container that has contents",
    "pick": "grasp an object resting on a surface at the current location; the gripper holds one object at a time",
    "place": "put the held object down on a surface at the current location; placing on a surface without fresh perception is allowed but risky",
    "insert": "put the held object into a container resting at the current location",
    "speak": "say something to the user",
    "listen": "fetch the oldest pending user utterance, if any",
    "dock": "dock onto the charging station; requires standing at the shelter entry",
    "undock": "leave the charging station and return to the shelter entry",
    "charge": "charge the battery up to the given percentage (0..100); requires being docked",
    "scan": "run a sensing sweep at the current location",
}


def signature_text(action: str) -> str:
    return f"{action}({', '.join(ACTION_SIGNATURES[action])})"


class ActionParameterError(Exception):
    """Unknown action, wrong arity, or an unresolvable parameter value."""


class InvariantViolation(Exception):
    """A simulator invariant broke; always a bug, never a scenario outcome."""


@dataclass
class Location:
    id: str
    kind: str
    x: float
    y: float


@dataclass
class Placement:
    kind: str  # "on" | "in" | "gripped"
    ref: Optional[str] = None  # surface for on, container id for in


@dataclass
class ObjectItem:
    id: str
    category: str  # tool | container | other
    placement: Placement
    aliases: tuple[str, ...] = ()
    grasp_difficulty: str = "easy"


@dataclass
class RobotState:
    x: float = 0.0
    y: float = 0.0
    arm_posture: str = "transport"
    gripped_object: Optional[str] = None
    estop_engaged: bool = False
    battery_percent: float = 100.0
    docked: bool = False
    in_shelter: bool = False


@dataclass
class WorldConfig:
    platform: str  # indoor | outdoor
    catalogue: tuple[str, ...]
    battery_drain_per_meter: float = 0.0
    battery_thresholds: dict[str, float] = field(default_factory=lambda: {"low": 30.0, "critical": 10.0})
    location_match_radius: float = 1.0
    freshness_window: int = 15
    surface_capacity: dict[str, int] = field(default_factory=dict)
    failure_rates: dict[str, float] = field(default_factory=dict)


@dataclass
class ActionOutcome:
    success: bool
    status_text: str
    ticks_elapsed: int


@dataclass
class WorldState:
    config: WorldConfig
    robot: RobotState
    locations: dict[str, Location]
    objects: dict[str, ObjectItem]
    rng_seed: int = 1
    tick: int = 0
    scans: list = field(default_factory=list)  # (location_id, tick) pairs
    pending_utterances: list = field(default_factory=list)
    last_perceived: dict[str, int] = field(default_factory=dict)
    failure_draw_counts: dict[str, int] = field(default_factory=dict)
    bus: EventBus = field(default_factory=EventBus)

    @property
    def platform(self) -> str:
        return self.config.platform


def _ok(text: str, ticks: int = 1) -> ActionOutcome:
    return ActionOutcome(True, text, ticks)


def _fail(text: str, ticks: int = 1) -> ActionOutcome:
    return ActionOutcome(False, text, ticks)


def resolve_location(state: WorldState, token: str) -> Location:
    loc = state.locations.get(token)
    if loc is None:
        known = ", ".join(sorted(state.locations))
        raise ActionParameterError(f"unknown location '{token}'; known locations: {known}")
    return loc


def resolve_object(state: WorldState, token: str) -> ObjectItem:
    obj = state.objects.get(token)
    if obj is not None:
        return obj
    lowered = token.lower()
    matches = [o for o in state.objects.values() if lowered in (a.lower() for a in o.aliases)]
    if len(matches) == 1:
        return matches[0]
    if len(matches) > 1:
        ids = ", ".join(sorted(m.id for m in matches))
        raise ActionParameterError(f"ambiguous object '{token}'; could be any of: {ids}")
    known = ", ".join(sorted(state.objects))
    raise ActionParameterError(f"unknown object '{token}'; known objects: {known}")


def robot_location(state: WorldState) -> str:
    return nearest_location(
        (state.robot.x, state.robot.y), state.locations, state.config.location_match_radius
    )


def _objects_on(state: WorldState, surface: str) -> list[ObjectItem]:
    return [o for o in state.objects.values() if o.placement.kind == "on" and o.placement.ref == surface]


def _contents_of(state: WorldState, container_id: str) -> list[ObjectItem]:
    return [o for o in state.objects.values() if o.placement.kind == "in" and o.placement.ref == container_id]


def inject_failure_decision(state: WorldState, rate_key: str) -> bool:
    """Seeded failure draw for one action attempt.

    Each rate key has its own draw counter, so attempts of one action never
    shift the draws of another. The k-th draw for a key is a pure function of
    (seed, key, k).
    """
    rate = state.config.failure_rates.get(rate_key)
    if not rate:
        return False
    k = state.failure_draw_counts.get(rate_key, 0)
    state.failure_draw_counts[rate_key] = k + 1
    draw = random.Random(f"{state.rng_seed}/{rate_key}/{k}").random()
    return draw < rate


def simulate_battery(state: WorldState, distance: float) -> WorldState:
    """Apply drive drain for `distance` meters, floored at zero.

    The drain is attributed to the navigate interval that just ended at
    state.tick. If the discretized class changes, one event per crossed
    boundary is enqueued, stamped at the tick the boundary was crossed, which
    usually falls strictly inside the action interval.
    """
    if distance < 0:
        raise ValueError("distance must be non-negative")
    rate = state.config.battery_drain_per_meter
    if distance == 0 or rate == 0:
        return state
    before = state.robot.battery_percent
    drop = distance * rate
    after = max(0.0, before - drop)
    state.robot.battery_percent = after
    thresholds = state.config.battery_thresholds
    if discretize_battery(before, thresholds) == discretize_battery(after, thresholds):
        return state
    duration = max(1, math.ceil(distance))
    start = max(0, state.tick - duration)
    for boundary, cls in ((thresholds["low"], "low"), (thresholds["critical"], "critical")):
        if before > boundary >= after:
            fraction = (before - boundary) / drop
            stamp = start + math.ceil(fraction * duration)
            stamp = max(start + 1 if state.tick > start else 0, min(stamp, state.tick))
            state.bus.inject(f"battery state changed to {cls}", stamp)
    return state


def set_estop(state: WorldState, engaged: bool) -> WorldState:
    """Flip the emergency stop flag. Idempotent; a real change enqueues an event."""
    if engaged == state.robot.estop_engaged:
        return state
    state.robot.estop_engaged = engaged
    text = "emergency stop engaged" if engaged else "emergency stop released"
    state.bus.inject(text, state.tick)
    return state


def _h_navigate(state: WorldState, params: list[str]) -> ActionOutcome:
    loc = resolve_location(state, params[0])
    if state.robot.estop_engaged:
        return _fail("emergency stop engaged: navigation blocked")
    if state.platform == "indoor" and state.robot.arm_posture != "transport":
        return _fail("arm not in transport posture")
    if state.platform == "outdoor":
        if state.robot.docked or state.robot.in_shelter:
            return _fail("cannot drive while in shelter/docked")
        if state.robot.battery_percent <= 0:
            return _fail("battery depleted")
    distance = math.hypot(loc.x - state.robot.x, loc.y - state.robot.y)
    duration = max(1, math.ceil(distance))
    state.robot.x, state.robot.y = loc.x, loc.y
    state.tick += duration
    if state.platform == "outdoor":
        simulate_battery(state, distance)
    return _ok(f"navigated to {loc.id}", duration)


def _h_move_arm(state: WorldState, params: list[str]) -> ActionOutcome:
    posture = params[0]
    if posture not in ARM_POSTURES:
        raise ActionParameterError(f"unknown posture '{posture}'; valid postures: {', '.join(ARM_POSTURES)}")
    if state.robot.estop_engaged:
        return _fail("arm cannot be actuated")
    state.robot.arm_posture = posture
    return _ok(f"arm moved to {posture} posture")


def _h_perceive(state: WorldState, params: list[str]) -> ActionOutcome:
    loc = resolve_location(state, params[0])
    if state.robot.estop_engaged:
        return _fail("arm cannot be actuated")
    if robot_location(state) != loc.id:
        return _fail(f"cannot perceive {loc.id} from current position")
    gripped = state.robot.gripped_object
    if gripped is not None:
        held = state.objects[gripped]
        if held.category == "container" and _contents_of(state, held.id):
            return _fail("perceiving would invert loaded container")
    state.robot.arm_posture = "observe"
    state.last_perceived[loc.id] = state.tick + 1
    seen: list[str] = []
    for obj in _objects_on(state, loc.id):
        seen.append(f"{obj.id} on {loc.id}")
        for inner in _contents_of(state, obj.id):
            seen.append(f"{inner.id} in {obj.id}")
    summary = "; ".join(seen) if seen else "surface clear"
    return _ok(f"perceived {loc.id}: {summary}")


def _h_pick(state: WorldState, params: list[str]) -> ActionOutcome:
    obj = resolve_object(state, params[0])
    if state.robot.estop_engaged:
        return _fail("arm cannot be actuated")
    if state.robot.gripped_object is not None:
        return _fail(f"gripper already holds {state.robot.gripped_object}")
    if obj.placement.kind == "in":
        return _fail(f"{obj.id} is inside {obj.placement.ref}; cannot pick")
    if obj.placement.kind != "on" or robot_location(state) != obj.placement.ref:
        return _fail(f"{obj.id} is not at the robot's current location")
    rate_key = "pick:hard" if obj.grasp_difficulty == "hard" and "pick:hard" in state.config.failure_rates else "pick"
    if inject_failure_decision(state, rate_key):
        return _fail(f"no feasible grasp found for {obj.id}")
    obj.placement = Placement("gripped")
    state.robot.gripped_object = obj.id
    return _ok(f"picked {obj.id}")


def _h_place(state: WorldState, params: list[str]) -> ActionOutcome:
    obj = resolve_object(state, params[0])
    loc = resolve_location(state, params[1])
    if state.robot.estop_engaged:
        return _fail("arm cannot be actuated")
    if state.robot.gripped_object != obj.id:
        return _fail(f"not holding {obj.id}")
    if robot_location(state) != loc.id:
        return _fail(f"cannot reach {loc.id} from current position")
    capacity = state.config.surface_capacity.get(loc.id)
    if capacity is not None and len(_objects_on(state, loc.id)) >= capacity:
        return _fail(f"no free space on {loc.id}")
    last = state.last_perceived.get(loc.id)
    fresh = last is not None and (state.tick - last) <= state.config.freshness_window
    obj.placement = Placement("on", loc.id)
    state.robot.gripped_object = None
    if fresh:
        return _ok(f"placed {obj.id} on {loc.id}")
    return _ok(f"placed {obj.id} on {loc.id} without fresh perception")


def _h_insert(state: WorldState, params: list[str]) -> ActionOutcome:
    obj = resolve_object(state, params[0])
    container = resolve_object(state, params[1])
    if state.robot.estop_engaged:
        return _fail("arm cannot be actuated")
    if state.robot.gripped_object != obj.id:
        return _fail(f"not holding {obj.id}")
    if container.category != "container":
        return _fail(f"{container.id} is not a container")
    if container.placement.kind != "on" or robot_location(state) != container.placement.ref:
        return _fail(f"{container.id} is not at the robot's current location")
    obj.placement = Placement("in", container.id)
    state.robot.gripped_object = None
    return _ok(f"inserted {obj.id} into {container.id}")


def _h_speak(state: WorldState, params: list[str]) -> ActionOutcome:
    return _ok("completed speech")


def _h_listen(state: WorldState, params: list[str]) -> ActionOutcome:
    if state.pending_utterances:
        text = state.pending_utterances.pop(0)
        return _ok(f"heard: {text}")
    return _ok("nothing heard")


def _entry_location(state: WorldState) -> Optional[Location]:
    entries = [l for l in state.locations.values() if l.kind == "shelter_entry"]
    return entries[0] if entries else None


def _h_dock(state: WorldState, params: list[str]) -> ActionOutcome:
    if state.robot.estop_engaged:
        return _fail("emergency stop engaged: docking blocked")
    if state.robot.docked:
        return _fail("already docked")
    entry = _entry_location(state)
    if entry is None:
        return _fail("no shelter entry in this world")
    if robot_location(state) != entry.id:
        return _fail(f"docking requires the robot at {entry.id}")
    shelters = [l for l in state.locations.values() if l.kind == "shelter"]
    target = shelters[0] if shelters else entry
    state.robot.x, state.robot.y = target.x, target.y
    state.robot.docked = True
    state.robot.in_shelter = True
    return _ok("docked at charging station")


def _h_undock(state: WorldState, params: list[str]) -> ActionOutcome:
    if state.robot.estop_engaged:
        return _fail("emergency stop engaged: undocking blocked")
    if not state.robot.docked:
        return _fail("not docked")
    entry = _entry_location(state)
    if entry is not None:
        state.robot.x, state.robot.y = entry.x, entry.y
    state.robot.docked = False
    state.robot.in_shelter = False
    suffix = f"; at {entry.id}" if entry is not None else ""
    return _ok(f"undocked{suffix}")


def _h_charge(state: WorldState, params: list[str]) -> ActionOutcome:
    try:
        target = float(params[0])
    except ValueError:
        raise ActionParameterError(f"charge target must be a number between 0 and 100, got '{params[0]}'")
    if not 0 <= target <= 100:
        raise ActionParameterError(f"charge target must be between 0 and 100, got '{params[0]}'")
    if state.robot.estop_engaged:
        return _fail("emergency stop engaged: charging blocked")
    if not state.robot.docked:
        return _fail("charging requires docking")
    before = state.robot.battery_percent
    if target <= before:
        return _ok(f"battery already at {before:g}%")
    ticks = max(1, math.ceil(target - before))
    state.robot.battery_percent = target
    state.tick += ticks
    thresholds = state.config.battery_thresholds
    old_cls = discretize_battery(before, thresholds)
    new_cls = discretize_battery(target, thresholds)
    if old_cls != new_cls:
        state.bus.inject(f"battery state changed to {new_cls}", state.tick)
    return _ok(f"charged to {target:g}%", ticks)


def _h_scan(state: WorldState, params: list[str]) -> ActionOutcome:
    loc = resolve_location(state, params[0])
    if state.robot.estop_engaged:
        return _fail("emergency stop engaged: scan blocked")
    if state.robot.docked or state.robot.in_shelter:
        return _fail("cannot scan while docked in shelter")
    if robot_location(state) != loc.id:
        return _fail(f"cannot scan {loc.id} from current position")
    state.scans.append((loc.id, state.tick + 1))
    return _ok(f"scanned {loc.id}")


_HANDLERS: dict[str, Callable[[WorldState, list[str]], ActionOutcome]] = {
    "navigate": _h_navigate,
    "move_arm": _h_move_arm,
    "perceive": _h_perceive,
    "pick": _h_pick,
    "place": _h_place,
    "insert": _h_insert,
    "speak": _h_speak,
    "listen": _h_listen,
    "dock": _h_dock,
    "undock": _h_undock,
    "charge": _h_charge,
    "scan": _h_scan,
}


def apply_action(state: WorldState, action: str, params: list[str]) -> tuple[WorldState, ActionOutcome]:
    """Execute one action attempt against the world.

    Parameter problems (unknown action, wrong arity, unresolvable values)
    raise ActionParameterError and leave the world untouched. Precondition
    violations return a failed outcome; the attempt still costs time.
    """
    if action not in ACTION_SIGNATURES or action not in state.config.catalogue:
        valid = ", ".join(state.config.catalogue)
        raise ActionParameterError(f"unknown action '{action}'; valid actions: {valid}")
    sig = ACTION_SIGNATURES[action]
    if len(params) != len(sig):
        raise ActionParameterError(
            f"wrong arity for {signature_text(action)}: got {len(params)} parameter(s); "
            f"{action}: {ACTION_DOCS[action]}"
        )
    for p in params:
        if not isinstance(p, str):
            raise ActionParameterError(
                f"parameters for {signature_text(action)} must be strings, interpreted positionally"
            )
    start = state.tick
    outcome = _HANDLERS[action](state, list(params))
    expected = start + outcome.ticks_elapsed
    if state.tick == start:
        state.tick = expected
    elif state.tick != expected:
        raise InvariantViolation(f"{action} advanced the tick inconsistently")
    if sum(1 for o in state.objects.values() if o.placement.kind == "gripped") > 1:
        raise InvariantViolation("more than one object gripped")
    return state, outcome


def serialize_world(state: WorldState) -> dict:
    """Plain-data view of the ground truth, used by the operator state endpoint
    and for mutation checks."""
    return {
        "platform": state.platform,
        "tick": state.tick,
        "seed": state.rng_seed,
        "robot": {
            "x": state.robot.x,
            "y": state.robot.y,
            "arm_posture": state.robot.arm_posture,
            "gripped_object": state.robot.gripped_object,
            "estop_engaged": state.robot.estop_engaged,
            "battery_percent": state.robot.battery_percent,
            "battery_class": discretize_battery(state.robot.battery_percent, state.config.battery_thresholds),
            "docked": state.robot.docked,
            "in_shelter": state.robot.in_shelter,
            "location": robot_location(state),
        },
        "locations": {
            l.id: {"kind": l.kind, "x": l.x, "y": l.y} for l in state.locations.values()
        },
        "objects": {
            o.id: {
                "category": o.category,
                "placement": {"kind": o.placement.kind, "ref": o.placement.ref},
                "grasp_difficulty": o.grasp_difficulty,
            }
            for o in state.objects.values()
        },
        "scans": [list(s) for s in state.scans],
        "pending_utterances": list(state.pending_utterances),
        "last_perceived": dict(state.last_perceived),
        "failure_draw_counts": dict(state.failure_draw_counts),
    }


def state_hash(state: WorldState) -> str:
    payload = json.dumps(serialize_world(state), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()
