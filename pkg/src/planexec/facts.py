"""Semantic state for the agents: observations, predicates, snapshots.

The ground-truth simulator knows everything; the agents only know what the
robot has perceived plus onboard telemetry (pose, battery, dock state). This
module keeps the observation buffer and turns it into rendered predicate
snapshots. Facts about object placement can therefore be stale or missing,
which is exactly what a planner over a real robot has to cope with.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Optional

if TYPE_CHECKING:
    from .world import Location, WorldState

ROBOT = "robot"


@dataclass
class Observation:
    """Latest sighting of one object. `container` is set when it was seen inside one."""

    object_id: str
    surface: str
    observed_at: int
    container: Optional[str] = None


class ObservationBuffer:
    """At most one buffered observation per object; a newer sighting replaces it."""

    def __init__(self):
        self._by_object: dict[str, Observation] = {}

    def record(self, obs: Observation) -> None:
        self._by_object[obs.object_id] = obs

    def forget(self, object_id: str) -> None:
        self._by_object.pop(object_id, None)

    def get(self, object_id: str) -> Optional[Observation]:
        return self._by_object.get(object_id)

    def observations(self) -> list[Observation]:
        return list(self._by_object.values())

    def __len__(self) -> int:
        return len(self._by_object)

    def __contains__(self, object_id: str) -> bool:
        return object_id in self._by_object


@dataclass
class Predicate:
    name: str
    args: tuple[str, ...]
    age: Optional[int] = None  # ticks since observation; only on/in carry one

    def render(self) -> str:
        text = f"{self.name}({', '.join(self.args)})"
        if self.age is not None:
            text += f" [age={self.age}]"
        return text


@dataclass
class Snapshot:
    tick: int
    predicates: list[Predicate]
    rendered_text: str


def discretize_battery(percent: float, thresholds: dict[str, float]) -> str:
    """Map a battery percentage onto okay/low/critical. A boundary value belongs
    to the lower class, so percent == low reads as low."""
    if percent <= thresholds["critical"]:
        return "critical"
    if percent <= thresholds["low"]:
        return "low"
    return "okay"


def nearest_location(position: tuple[float, float], locations: Iterable, radius: float) -> str:
    """Closest location id by Euclidean distance, or "unknown" when nothing is
    within `radius`. Ties go to the lexicographically smallest id."""
    candidates = list(locations.values()) if hasattr(locations, "values") else list(locations)
    if not candidates:
        raise ValueError("nearest_location requires at least one location")
    px, py = position
    best_id = None
    best_dist = None
    for loc in candidates:
        dist = math.hypot(loc.x - px, loc.y - py)
        if best_dist is None or dist < best_dist or (dist == best_dist and loc.id < best_id):
            best_id = loc.id
            best_dist = dist
    if best_dist > radius:
        return "unknown"
    return best_id


def record_perception(buffer: ObservationBuffer, world: "WorldState", surface: str) -> ObservationBuffer:
    """Refresh the buffer from a successful perceive of `surface`.

    Objects resting on the surface get fresh on-observations, objects inside
    containers on the surface get fresh in-observations. Stale claims about
    this surface are dropped, except in-container claims whose container has
    left the surface: the container took its contents along, so the belief is
    kept and just keeps ageing.
    """
    now = world.tick
    fresh: dict[str, Observation] = {}
    for obj in world.objects.values():
        if obj.placement.kind == "on" and obj.placement.ref == surface:
            fresh[obj.id] = Observation(obj.id, surface, now)
            for inner in world.objects.values():
                if inner.placement.kind == "in" and inner.placement.ref == obj.id:
                    fresh[inner.id] = Observation(inner.id, surface, now, container=obj.id)
    for obs in buffer.observations():
        if obs.surface != surface or obs.object_id in fresh:
            continue
        if obs.container is None:
            buffer.forget(obs.object_id)
            continue
        container = world.objects.get(obs.container)
        container_still_here = (
            container is not None
            and container.placement.kind == "on"
            and container.placement.ref == surface
        )
        if container_still_here:
            # Looked inside the container and the object is gone.
            buffer.forget(obs.object_id)
    for obs in fresh.values():
        buffer.record(obs)
    return buffer


def make_snapshot(world: "WorldState", buffer: ObservationBuffer) -> Snapshot:
    """Render the agent-visible state: telemetry predicates plus buffered
    observations. The gripped object is dropped entirely; grasp state is the
    planner's job to remember."""
    preds: list[Predicate] = []
    here = nearest_location(
        (world.robot.x, world.robot.y), world.locations, world.config.location_match_radius
    )
    preds.append(Predicate("at", (ROBOT, here)))
    if world.config.platform == "indoor":
        preds.append(Predicate("arm_posture", (ROBOT, world.robot.arm_posture)))
    else:
        battery_class = discretize_battery(world.robot.battery_percent, world.config.battery_thresholds)
        preds.append(Predicate("battery", (battery_class,)))
        preds.append(Predicate("docked", ("true" if world.robot.docked else "false",)))
    gripped = world.robot.gripped_object
    for obs in buffer.observations():
        if obs.object_id == gripped:
            continue
        age = world.tick - obs.observed_at
        if obs.container is not None:
            preds.append(Predicate("in", (obs.object_id, obs.container), age=age))
        else:
            preds.append(Predicate("on", (obs.object_id, obs.surface), age=age))
    preds.sort(key=lambda p: (p.name, p.args))
    rendered = "\n".join(p.render() for p in preds)
    return Snapshot(tick=world.tick, predicates=preds, rendered_text=rendered)
