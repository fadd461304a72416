"""Built-in ego policies for test scenarios.

A policy maps the current world and the ego's desired state to a commanded
acceleration.  Policies here are pure functions of their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

from .model import StateVector
from .simulation import DEFAULT_SHAPES, Rect, WorldState

__all__ = ["ConstantSpeed", "DemoAEB", "POLICIES", "make_policy", "parse_policy_args"]


@dataclass(frozen=True)
class ConstantSpeed:
    """Keep the current speed."""

    def __call__(self, world: WorldState, desired: StateVector | None, *, actor: str) -> float:
        return 0.0


@dataclass(frozen=True)
class DemoAEB:
    """Speed keeping with emergency braking.

    Brakes at ``brake`` when another actor overlaps the ego's lateral band
    ahead of it with a bumper gap below ``gap``; otherwise tracks the desired
    speed with a proportional controller clipped to ``[brake, max_accel]``.
    Shapes default to a car and a pedestrian footprint.  The switch between
    braking and tracking is exposed through :meth:`mode` so the executor can
    place it exactly instead of on the time grid.
    """

    gap: float = 10.0
    brake: float = -6.0
    max_accel: float = 2.0
    gain: float = 1.0
    ego_shape: Rect = DEFAULT_SHAPES[next(iter(DEFAULT_SHAPES))]
    other_shape: Rect = Rect(0.5, 0.5)

    def threat(self, world: WorldState, actor: str) -> bool:
        ego = world.actors[actor]
        half_w = 0.5 * (self.ego_shape.width + self.other_shape.width)
        front = ego.x + 0.5 * self.ego_shape.length
        for uid, other in world.actors.items():
            if uid == actor or abs(other.y - ego.y) > half_w:
                continue
            rear = other.x - 0.5 * self.other_shape.length
            if other.x >= ego.x and rear - front < self.gap:
                return True
        return False

    def mode(self, world: WorldState, desired: StateVector | None, *, actor: str) -> str:
        return "brake" if self.threat(world, actor) else "track"

    def __call__(self, world: WorldState, desired: StateVector | None, *, actor: str) -> float:
        if self.threat(world, actor):
            return self.brake
        v = world.actors[actor].v
        v_des = desired["v"] if desired is not None and "v" in desired else v
        return min(self.max_accel, max(self.brake, self.gain * (v_des - v)))


POLICIES: Mapping[str, Callable[..., object]] = {
    "constant-speed": ConstantSpeed,
    "demo-aeb": DemoAEB,
}


def parse_policy_args(text: str | None) -> dict[str, float]:
    """Parse ``"k=v,k2=v2"`` into floats."""
    out: dict[str, float] = {}
    for item in filter(None, (p.strip() for p in (text or "").split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"policy argument {item!r} is not key=value")
        out[key.strip()] = float(value)
    return out


def make_policy(name: str, args: Mapping[str, float] | None = None):
    try:
        factory = POLICIES[name]
    except KeyError:
        raise ValueError(f"unknown policy {name!r}; choose from {sorted(POLICIES)}") from None
    try:
        return factory(**dict(args or {}))
    except TypeError as exc:
        raise ValueError(f"bad arguments for policy {name!r}: {exc}") from None
