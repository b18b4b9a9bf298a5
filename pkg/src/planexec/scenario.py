"""Scenario files: one YAML document describing a world, an instruction, the
prompt sections, optional scheduled operator actions, and the goal predicates
that decide success. Loading validates everything up front so a bad file
fails with a named complaint instead of a mid-run surprise.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

import yaml

from . import world as worldmod
from .facts import nearest_location
from .world import (
    GRASP_DIFFICULTIES,
    INDOOR_CATALOGUE,
    LOCATION_KINDS,
    OBJECT_CATEGORIES,
    OUTDOOR_CATALOGUE,
    Location,
    ObjectItem,
    Placement,
    RobotState,
    WorldConfig,
    WorldState,
)


class ScenarioError(Exception):
    pass


@dataclass
class GoalPredicate:
    name: str
    args: tuple[str, ...]

    def render(self) -> str:
        return f"{self.name}({', '.join(self.args)})"


@dataclass
class OperatorStep:
    op: str  # estop | release_estop | inject_event | utterance
    text: Optional[str] = None
    at_tick: Optional[int] = None
    at_call: Optional[int] = None


@dataclass
class Scenario:
    id: str
    platform: str
    instruction: str
    locations: list[Location]
    objects: list[ObjectItem]
    robot: RobotState
    config: WorldConfig
    prompt_sections: dict[str, str]
    goals: list[GoalPredicate] = field(default_factory=list)
    constraints: list[str] = field(default_factory=list)
    operator_script: list[OperatorStep] = field(default_factory=list)
    pending_utterances: list[str] = field(default_factory=list)
    today: Optional[str] = None
    raw_text: str = ""


_GOAL_RE = re.compile(r"^\s*(\w+)\s*\(\s*([^()]*?)\s*\)\s*$")
GOAL_NAMES = ("on", "in", "at", "gripped", "docked", "battery", "scanned")
CONSTRAINT_NAMES = ("no_blind_place",)


def parse_goal(text: str) -> GoalPredicate:
    m = _GOAL_RE.match(text)
    if not m:
        raise ScenarioError(f"goal '{text}' is not of the form name(arg, ...)")
    name = m.group(1)
    args = tuple(a.strip() for a in m.group(2).split(",") if a.strip())
    if name not in GOAL_NAMES:
        raise ScenarioError(f"goal '{text}': unknown predicate '{name}'; supported: {', '.join(GOAL_NAMES)}")
    arity = {"on": 2, "in": 2, "at": 2, "gripped": 1, "docked": 1, "battery": 1, "scanned": 1}[name]
    if len(args) != arity:
        raise ScenarioError(f"goal '{text}': {name} takes {arity} argument(s)")
    return GoalPredicate(name, args)


def goal_holds(world: WorldState, goal: GoalPredicate) -> bool:
    if goal.name == "on":
        obj = world.objects.get(goal.args[0])
        return obj is not None and obj.placement.kind == "on" and obj.placement.ref == goal.args[1]
    if goal.name == "in":
        obj = world.objects.get(goal.args[0])
        return obj is not None and obj.placement.kind == "in" and obj.placement.ref == goal.args[1]
    if goal.name == "at":
        here = nearest_location((world.robot.x, world.robot.y), world.locations, world.config.location_match_radius)
        return goal.args[0] == "robot" and here == goal.args[1]
    if goal.name == "gripped":
        return world.robot.gripped_object == goal.args[0]
    if goal.name == "docked":
        return world.robot.docked == (goal.args[0] == "true")
    if goal.name == "battery":
        from .facts import discretize_battery

        return discretize_battery(world.robot.battery_percent, world.config.battery_thresholds) == goal.args[0]
    if goal.name == "scanned":
        return any(loc == goal.args[0] for loc, _ in world.scans)
    raise ScenarioError(f"unknown goal predicate {goal.name}")


def check_goals(world: WorldState, goals: list[GoalPredicate]) -> dict[str, bool]:
    return {g.render(): goal_holds(world, g) for g in goals}


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ScenarioError(message)


def _get(raw: dict, key: str, kind, where: str, default=None, required: bool = False):
    if key not in raw or raw[key] is None:
        _require(not required, f"{where}: missing required field '{key}'")
        return default
    value = raw[key]
    if kind is float and isinstance(value, int):
        value = float(value)
    _require(isinstance(value, kind), f"{where}: field '{key}' has the wrong type")
    return value


def load_scenario_text(text: str, source: str = "<scenario>") -> Scenario:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ScenarioError(f"{source}: not valid YAML: {err}")
    _require(isinstance(raw, dict), f"{source}: the scenario document must be a mapping")
    known = {
        "id", "platform", "instruction", "today", "locations", "objects", "robot",
        "config", "prompt", "operator_script", "pending_utterances", "goals", "constraints",
    }
    unknown = set(raw) - known
    _require(not unknown, f"{source}: unknown top-level fields: {', '.join(sorted(unknown))}")

    sid = _get(raw, "id", str, source, required=True)
    platform = _get(raw, "platform", str, source, required=True)
    _require(platform in ("indoor", "outdoor"), f"{source}: platform must be indoor or outdoor")
    instruction = _get(raw, "instruction", str, source, default="")
    today = _get(raw, "today", str, source)

    locations = _load_locations(raw.get("locations"), source)
    loc_ids = {l.id for l in locations}
    objects = _load_objects(raw.get("objects"), loc_ids, source)
    config = _load_config(raw.get("config") or {}, platform, loc_ids, source)
    robot = _load_robot(raw.get("robot") or {}, platform, source)

    if platform == "outdoor":
        shelters = [l for l in locations if l.kind == "shelter"]
        entries = [l for l in locations if l.kind == "shelter_entry"]
        if shelters:
            _require(len(entries) == 1, f"{source}: a world with a shelter needs exactly one shelter_entry")

    prompt_sections = raw.get("prompt") or {}
    _require(isinstance(prompt_sections, dict), f"{source}: 'prompt' must be a mapping of sections")
    prompt_sections = {str(k): ("" if v is None else str(v)) for k, v in prompt_sections.items()}

    goals = [parse_goal(str(g)) for g in (raw.get("goals") or [])]
    object_ids = {o.id for o in objects}
    for g in goals:
        for arg in g.args:
            if g.name in ("on", "in") or (g.name == "gripped"):
                _require(
                    arg in object_ids or arg in loc_ids or arg == "robot",
                    f"{source}: goal {g.render()} references unknown id '{arg}'",
                )
    constraints = [str(c) for c in (raw.get("constraints") or [])]
    for c in constraints:
        _require(c in CONSTRAINT_NAMES, f"{source}: unknown constraint '{c}'")

    script = _load_operator_script(raw.get("operator_script") or [], source)
    pending = [str(u) for u in (raw.get("pending_utterances") or [])]

    return Scenario(
        id=sid,
        platform=platform,
        instruction=instruction,
        locations=locations,
        objects=objects,
        robot=robot,
        config=config,
        prompt_sections=prompt_sections,
        goals=goals,
        constraints=constraints,
        operator_script=script,
        pending_utterances=pending,
        today=today,
        raw_text=text,
    )


def load_scenario_file(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return load_scenario_text(fh.read(), source=path)


def _load_locations(raw, source: str) -> list[Location]:
    _require(isinstance(raw, list) and raw, f"{source}: 'locations' must be a non-empty list")
    locations = []
    seen = set()
    for i, item in enumerate(raw):
        where = f"{source}: locations[{i}]"
        _require(isinstance(item, dict), f"{where} must be a mapping")
        lid = _get(item, "id", str, where, required=True)
        _require(lid not in seen, f"{source}: duplicate location id '{lid}'")
        seen.add(lid)
        kind = _get(item, "kind", str, where, required=True)
        _require(kind in LOCATION_KINDS, f"{where}: unknown kind '{kind}'")
        x = _get(item, "x", (int, float), where, required=True)
        y = _get(item, "y", (int, float), where, required=True)
        locations.append(Location(lid, kind, float(x), float(y)))
    return locations


def _load_objects(raw, loc_ids: set, source: str) -> list[ObjectItem]:
    raw = raw or []
    _require(isinstance(raw, list), f"{source}: 'objects' must be a list")
    objects: list[ObjectItem] = []
    seen = set()
    for i, item in enumerate(raw):
        where = f"{source}: objects[{i}]"
        _require(isinstance(item, dict), f"{where} must be a mapping")
        # YAML 1.1 reads a bare `on:` key as boolean True; map it back.
        item = {("on" if k is True else k): v for k, v in item.items()}
        oid = _get(item, "id", str, where, required=True)
        _require(oid not in seen, f"{source}: duplicate object id '{oid}'")
        seen.add(oid)
        category = _get(item, "category", str, where, default="other")
        _require(category in OBJECT_CATEGORIES, f"{where}: unknown category '{category}'")
        grasp = _get(item, "grasp_difficulty", str, where, default="easy")
        _require(grasp in GRASP_DIFFICULTIES, f"{where}: unknown grasp_difficulty '{grasp}'")
        aliases = item.get("aliases") or []
        _require(isinstance(aliases, list), f"{where}: 'aliases' must be a list")
        placements = [k for k in ("on", "in", "gripped") if item.get(k)]
        _require(len(placements) == 1, f"{where}: exactly one of on/in/gripped is required")
        if placements[0] == "on":
            ref = str(item["on"])
            _require(ref in loc_ids, f"{where}: placed on unknown location '{ref}'")
            placement = Placement("on", ref)
        elif placements[0] == "in":
            placement = Placement("in", str(item["in"]))
        else:
            placement = Placement("gripped")
        objects.append(
            ObjectItem(oid, category, placement, tuple(str(a) for a in aliases), grasp)
        )
    by_id = {o.id: o for o in objects}
    gripped = [o for o in objects if o.placement.kind == "gripped"]
    _require(len(gripped) <= 1, f"{source}: more than one object marked gripped")
    for o in objects:
        if o.placement.kind == "in":
            host = by_id.get(o.placement.ref)
            _require(host is not None, f"{source}: {o.id} is inside unknown object '{o.placement.ref}'")
            _require(host.category == "container", f"{source}: {o.id} is inside non-container '{host.id}'")
            _require(o.category != "container", f"{source}: containers cannot nest ({o.id})")
    return objects


def _load_config(raw: dict, platform: str, loc_ids: set, source: str) -> WorldConfig:
    where = f"{source}: config"
    _require(isinstance(raw, dict), f"{where} must be a mapping")
    default_catalogue = INDOOR_CATALOGUE if platform == "indoor" else OUTDOOR_CATALOGUE
    catalogue = tuple(str(a) for a in (raw.get("catalogue") or default_catalogue))
    for action in catalogue:
        _require(action in worldmod.ACTION_SIGNATURES, f"{where}: unknown action '{action}' in catalogue")
    thresholds_raw = raw.get("battery_thresholds") or {"low": 30, "critical": 10}
    _require(
        isinstance(thresholds_raw, dict) and set(thresholds_raw) == {"low", "critical"},
        f"{where}: battery_thresholds needs exactly the keys low and critical",
    )
    low, critical = float(thresholds_raw["low"]), float(thresholds_raw["critical"])
    _require(0 <= critical < low <= 100, f"{where}: need 0 <= critical < low <= 100")
    capacity = {str(k): int(v) for k, v in (raw.get("surface_capacity") or {}).items()}
    for surface, cap in capacity.items():
        _require(surface in loc_ids, f"{where}: surface_capacity for unknown location '{surface}'")
        _require(cap >= 0, f"{where}: surface_capacity for '{surface}' must be >= 0")
    rates = {str(k): float(v) for k, v in (raw.get("failure_rates") or {}).items()}
    for key, rate in rates.items():
        _require(0 <= rate <= 1, f"{where}: failure rate for '{key}' must be within [0, 1]")
    drain = float(raw.get("battery_drain_per_meter", 0.0))
    _require(drain >= 0, f"{where}: battery_drain_per_meter must be >= 0")
    radius = float(raw.get("location_match_radius", 1.0))
    _require(radius > 0, f"{where}: location_match_radius must be > 0")
    freshness = int(raw.get("freshness_window", 15))
    _require(freshness >= 0, f"{where}: freshness_window must be >= 0")
    unknown = set(raw) - {
        "catalogue", "battery_thresholds", "surface_capacity", "failure_rates",
        "battery_drain_per_meter", "location_match_radius", "freshness_window",
    }
    _require(not unknown, f"{where}: unknown fields: {', '.join(sorted(unknown))}")
    return WorldConfig(
        platform=platform,
        catalogue=catalogue,
        battery_drain_per_meter=drain,
        battery_thresholds={"low": low, "critical": critical},
        location_match_radius=radius,
        freshness_window=freshness,
        surface_capacity=capacity,
        failure_rates=rates,
    )


def _load_robot(raw: dict, platform: str, source: str) -> RobotState:
    where = f"{source}: robot"
    _require(isinstance(raw, dict), f"{where} must be a mapping")
    unknown = set(raw) - {"position", "arm_posture", "battery_percent", "docked"}
    _require(not unknown, f"{where}: unknown fields: {', '.join(sorted(unknown))}")
    position = raw.get("position", [0.0, 0.0])
    _require(isinstance(position, list) and len(position) == 2, f"{where}: position must be [x, y]")
    posture = str(raw.get("arm_posture", "transport"))
    _require(posture in worldmod.ARM_POSTURES, f"{where}: unknown arm_posture '{posture}'")
    battery = float(raw.get("battery_percent", 100.0))
    _require(0 <= battery <= 100, f"{where}: battery_percent must be within [0, 100]")
    docked = bool(raw.get("docked", False))
    _require(platform == "outdoor" or not docked, f"{where}: docked applies to the outdoor platform only")
    return RobotState(
        x=float(position[0]),
        y=float(position[1]),
        arm_posture=posture,
        battery_percent=battery,
        docked=docked,
        in_shelter=docked,
    )


def _load_operator_script(raw, source: str) -> list[OperatorStep]:
    _require(isinstance(raw, list), f"{source}: 'operator_script' must be a list")
    steps = []
    ops = ("estop", "release_estop", "inject_event", "utterance")
    for i, item in enumerate(raw):
        where = f"{source}: operator_script[{i}]"
        _require(isinstance(item, dict), f"{where} must be a mapping")
        op = _get(item, "op", str, where, required=True)
        _require(op in ops, f"{where}: unknown op '{op}'; supported: {', '.join(ops)}")
        text = item.get("text")
        if op in ("inject_event", "utterance"):
            _require(isinstance(text, str) and text, f"{where}: op '{op}' needs a non-empty 'text'")
        at_tick = item.get("at_tick")
        at_call = item.get("at_call")
        _require(at_tick is not None or at_call is not None, f"{where}: needs at_tick and/or at_call")
        unknown = set(item) - {"op", "text", "at_tick", "at_call"}
        _require(not unknown, f"{where}: unknown fields: {', '.join(sorted(unknown))}")
        steps.append(
            OperatorStep(
                op=op,
                text=None if text is None else str(text),
                at_tick=None if at_tick is None else int(at_tick),
                at_call=None if at_call is None else int(at_call),
            )
        )
    return steps


def build_world(scenario: Scenario, seed: int) -> WorldState:
    """Fresh mutable world from the immutable scenario description."""
    robot = RobotState(
        x=scenario.robot.x,
        y=scenario.robot.y,
        arm_posture=scenario.robot.arm_posture,
        battery_percent=scenario.robot.battery_percent,
        docked=scenario.robot.docked,
        in_shelter=scenario.robot.in_shelter,
    )
    locations = {l.id: Location(l.id, l.kind, l.x, l.y) for l in scenario.locations}
    objects = {
        o.id: ObjectItem(
            o.id,
            o.category,
            Placement(o.placement.kind, o.placement.ref),
            tuple(o.aliases),
            o.grasp_difficulty,
        )
        for o in scenario.objects
    }
    config = WorldConfig(
        platform=scenario.config.platform,
        catalogue=tuple(scenario.config.catalogue),
        battery_drain_per_meter=scenario.config.battery_drain_per_meter,
        battery_thresholds=dict(scenario.config.battery_thresholds),
        location_match_radius=scenario.config.location_match_radius,
        freshness_window=scenario.config.freshness_window,
        surface_capacity=dict(scenario.config.surface_capacity),
        failure_rates=dict(scenario.config.failure_rates),
    )
    world = WorldState(
        config=config,
        robot=robot,
        locations=locations,
        objects=objects,
        rng_seed=seed,
        pending_utterances=list(scenario.pending_utterances),
    )
    gripped = [o.id for o in objects.values() if o.placement.kind == "gripped"]
    world.robot.gripped_object = gripped[0] if gripped else None
    return world
