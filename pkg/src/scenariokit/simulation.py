"""Event-driven scenario executor.

Time advances on a fixed grid ``k * dt``.  Activity-driven variables are
evaluated from their closed forms, never integrated.  Actors driven by a
policy use semi-implicit Euler: the commanded acceleration is held over a
step, ``v`` is updated first and ``x`` moves with the new ``v``.

After every step the armed events are checked.  When one turns true inside a
step, its instant is found by bisection, the world is moved to that instant,
events are fired, activities are switched (ends before starts) and the
process repeats at the same instant until nothing new fires.  Stepping then
resumes towards the next grid point.

Activation anchors an activity to the moment it starts: ``t0`` becomes the
start instant and ``z0`` the actor's current value of the governed variable,
so trajectories stay continuous when an event fires later or earlier than the
nominal parameters assumed.
"""

from __future__ import annotations

import bisect
import csv
import io
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Callable, Mapping, Protocol, TextIO, Union

from . import conditions as cond
from . import dynamics
from .dynamics import ModelParams
from .model import Activity, Actor, ActorType, Event, Scenario, StateVector

__all__ = [
    "SimulationError",
    "NoGoverningBehavior",
    "MissingShape",
    "NoSignChange",
    "OutOfRange",
    "StartConditionFalse",
    "Rect",
    "DEFAULT_SHAPES",
    "SimConfig",
    "ActorState",
    "WorldState",
    "Trace",
    "EgoPolicy",
    "simulate",
    "run_test_scenario",
    "locate_event",
    "check_collision",
    "state_at",
    "write_trace_csv",
    "write_events_csv",
    "trace_csv",
    "events_csv",
]

log = logging.getLogger(__name__)

VARIABLES = ("x", "y", "v", "a")
TIMEOUT = "timeout"


class SimulationError(RuntimeError):
    pass


class NoGoverningBehavior(SimulationError):
    pass


class MissingShape(SimulationError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class NoSignChange(SimulationError):
    pass


class OutOfRange(SimulationError, ValueError):
    pass


class StartConditionFalse(SimulationError):
    pass


@dataclass(frozen=True)
class Rect:
    """Axis-aligned footprint centred on the actor; ``length`` lies along x."""

    length: float
    width: float


DEFAULT_SHAPES: Mapping[ActorType, Rect] = MappingProxyType(
    {
        ActorType.VEHICLE: Rect(4.5, 1.8),
        ActorType.PEDESTRIAN: Rect(0.5, 0.5),
        ActorType.CYCLIST: Rect(1.8, 0.6),
    }
)


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.01
    t_max: float = 200.0
    eps_t: float = 1e-6
    shapes: Mapping[str, Rect] = field(default_factory=dict)

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not (0 < self.eps_t < self.dt):
            raise ValueError(f"eps_t must lie in (0, dt), got {self.eps_t!r}")
        if not self.t_max > 0:
            raise ValueError(f"t_max must be positive, got {self.t_max!r}")
        object.__setattr__(self, "shapes", MappingProxyType(dict(self.shapes)))


@dataclass(frozen=True)
class ActorState:
    symbol: str
    x: float = 0.0
    y: float = 0.0
    v: float = 0.0
    a: float = 0.0

    def get(self, var: str) -> float:
        return getattr(self, var)


@dataclass(frozen=True)
class WorldState:
    t: float
    actors: Mapping[str, ActorState]
    fired: frozenset[str] = frozenset()

    def by_symbol(self, symbol: str) -> ActorState:
        for s in self.actors.values():
            if s.symbol == symbol:
                return s
        raise KeyError(symbol)

    def variables(self) -> dict[str, float]:
        out = {"t": self.t}
        for s in self.actors.values():
            for var in VARIABLES:
                out[f"{var}_{s.symbol}"] = s.get(var)
        return out


@dataclass(frozen=True)
class Trace:
    samples: tuple[WorldState, ...]
    event_times: Mapping[str, float]
    outcome: tuple[str, ...]
    timed_out: bool
    actor_order: tuple[str, ...]

    @property
    def end_time(self) -> float:
        return self.samples[-1].t

    @cached_property
    def times(self) -> tuple[float, ...]:
        return tuple(s.t for s in self.samples)

    def series(self, actor_uid: str, var: str) -> list[float]:
        return [s.actors[actor_uid].get(var) for s in self.samples]


class EgoPolicy(Protocol):
    """Goal-driven behaviour for an actor without activities.

    Returns the commanded acceleration, or ``(acceleration, lateral_rate)``.
    Must be deterministic in its inputs.
    """

    def __call__(self, world: WorldState, desired: StateVector | None, *, actor: str) -> Union[float, tuple[float, float]]:
        ...


# --- geometry ------------------------------------------------------------------


def check_collision(state: WorldState, shapes: Mapping[str, Rect]) -> dict[tuple[str, str], bool]:
    """Overlap of closed axis-aligned rectangles for every actor pair."""
    uids = list(state.actors)
    for uid in uids:
        if uid not in shapes:
            raise MissingShape(f"no collision shape for actor {uid!r}")
    out = {}
    for i, a in enumerate(uids):
        for b in uids[i + 1 :]:
            out[(a, b)] = _overlap(state.actors[a], shapes[a], state.actors[b], shapes[b])
    return out


def _overlap(p: ActorState, rp: Rect, q: ActorState, rq: Rect) -> bool:
    return abs(p.x - q.x) <= 0.5 * (rp.length + rq.length) and abs(p.y - q.y) <= 0.5 * (rp.width + rq.width)


def _shape_of(actor: Actor, config: SimConfig) -> Rect | None:
    if actor.uid in config.shapes:
        return config.shapes[actor.uid]
    props = actor.properties
    if "length" in props and "width" in props:
        return Rect(float(props["length"].value), float(props["width"].value))
    return DEFAULT_SHAPES.get(actor.category.actor_type)


# --- event localisation -----------------------------------------------------------


def locate_event(
    condition: Union[cond.ConditionExpr, Callable[[float], bool]],
    state_fn: Callable[[float], WorldState] | None,
    bracket: tuple[float, float],
    eps_t: float = 1e-6,
    env_fn: Callable[[WorldState], cond.EvaluationContext] | None = None,
) -> float:
    """First instant in ``bracket`` at which ``condition`` holds, to within ``eps_t``.

    ``condition`` is either an expression evaluated on ``state_fn(t)`` or a
    plain predicate of time.  The condition must be false at the lower end and
    true at the upper end; the upper end of the final bracket is returned.
    """
    if callable(condition):
        holds = condition
    else:
        make_env = env_fn or (lambda w: cond.EvaluationContext(w.variables()))

        def holds(t: float) -> bool:
            return cond.evaluate(condition, make_env(state_fn(t)))

    lo, hi = bracket
    if holds(lo) or not holds(hi):
        raise NoSignChange(f"condition does not switch from false to true on [{lo!r}, {hi!r}]")
    while hi - lo > eps_t:
        mid = lo + 0.5 * (hi - lo)
        if mid <= lo or mid >= hi:
            break
        if holds(mid):
            hi = mid
        else:
            lo = mid
    return hi


# --- executor ----------------------------------------------------------------------


@dataclass
class _Running:
    """An activity that has started, with parameters anchored at its start."""

    activity: Activity
    actor: str
    params: ModelParams
    t_start: float
    x_start: float  # for speed activities: position when the activity began
    end: float | None  # natural end of the model, if any


def _anchor(activity: Activity, t: float, current: float) -> ModelParams:
    values = dict(activity.parameters)
    if "t0" in values:
        values["t0"] = t
    if "z0" in values:
        if abs(values["z0"] - current) > 1e-9:
            log.warning(
                "activity %r: z0=%g replaced by current value %g for continuity",
                activity.uid,
                values["z0"],
                current,
            )
        values["z0"] = current
    return ModelParams(activity.category.model, values)


class _Executor:
    def __init__(self, scenario: Scenario, config: SimConfig, policies: Mapping[str, EgoPolicy]):
        self.sc = scenario
        self.cfg = config
        self.policies = dict(policies)
        self.actors = {a.uid: a for a in scenario.actors}
        self.symbol_to_uid = {a.symbol: a.uid for a in scenario.actors}
        self.events = scenario.all_events()
        self.activity_by_uid = {v.uid: v for v in scenario.activities}
        self.performer: dict[int, list[str]] = {}
        for act in scenario.acts:
            self.performer.setdefault(id(act.activity), []).append(act.actor.uid)
        self.shapes = {uid: _shape_of(a, config) for uid, a in self.actors.items()}
        for uid in self.policies:
            if uid not in self.actors:
                raise KeyError(f"policy given for unknown actor {uid!r}")
        for uid in self.actors:
            if uid not in self.policies and not any(uid in p for p in self.performer.values()):
                raise NoGoverningBehavior(f"actor {uid!r} has neither activities nor a policy")
        # Events used only to end activities wait until one of those activities starts.
        starts = {id(v.start_event) for v in scenario.activities}
        ends_only = {id(v.end_event) for v in scenario.activities} - starts
        self.armed: set[str] = {
            e.uid for e in self.events if id(e) not in ends_only or e is scenario.end_event
        }
        self.fired: dict[str, float] = {}
        self.running: dict[tuple[str, str], _Running] = {}  # (actor, variable) -> activity
        self.started: set[str] = set()
        self.ended: set[str] = set()
        self.commands: dict[str, tuple[float, float]] = {}

    # state evaluation -----------------------------------------------------------

    def initial_world(self) -> WorldState:
        states = {}
        for uid, a in self.actors.items():
            init = a.initial_state.values
            states[uid] = ActorState(a.symbol, *(float(init.get(v, 0.0)) for v in VARIABLES))
        return WorldState(0.0, MappingProxyType(states), frozenset())

    def advance(self, world: WorldState, t: float) -> WorldState:
        """World at ``t >= world.t`` with the current activities and held commands."""
        dt = t - world.t
        states = {}
        for uid, s in world.actors.items():
            vals = {"x": s.x, "y": s.y, "v": s.v, "a": s.a}
            gov = {var: self.running.get((uid, var)) for var in VARIABLES}
            if uid in self.commands and gov["x"] is None and gov["v"] is None:
                acc, lat = self.commands[uid]
                v_new = s.v + acc * dt
                if v_new < 0.0 <= s.v:
                    # braking stops the actor; it never reverses
                    v_new = 0.0
                    if s.v == 0.0:
                        acc = 0.0
                vals["v"], vals["a"] = v_new, acc
                vals["x"] = s.x + v_new * dt
                if gov["y"] is None:
                    vals["y"] = s.y + lat * dt
            elif gov["x"] is None and gov["v"] is None:
                vals["x"] = s.x + s.v * dt  # held speed keeps the actor moving
            for var, run in gov.items():
                if run is not None:
                    self._apply(run, var, t, vals)
            states[uid] = ActorState(s.symbol, vals["x"], vals["y"], vals["v"], vals["a"])
        return WorldState(t, MappingProxyType(states), world.fired)

    def _apply(self, run: _Running, var: str, t: float, vals: dict) -> None:
        p = run.params
        te = t if run.end is None else min(t, run.end)
        vals[var] = dynamics.state(p, te, clamp=True)
        past = run.end is not None and t > run.end
        if var == "v":
            vals["a"] = 0.0 if past else dynamics.derivative(p, te, clamp=True)
            dist = dynamics.displacement(p, run.t_start, te)
            if past:
                dist += vals["v"] * (t - run.end)
            vals["x"] = run.x_start + dist
        elif var == "x":
            vals["v"] = 0.0 if past else dynamics.derivative(p, te, clamp=True)
            vals["a"] = 0.0 if past else dynamics.second_derivative(p, te, clamp=True)

    # conditions -----------------------------------------------------------------

    def env(self, world: WorldState, event: Event | None = None) -> cond.EvaluationContext:
        def collision(first: str, second: str) -> bool:
            a, b = self.symbol_to_uid[first], self.symbol_to_uid[second]
            for uid in (a, b):
                if self.shapes[uid] is None:
                    raise MissingShape(f"no collision shape for actor {uid!r}")
            return _overlap(world.actors[a], self.shapes[a], world.actors[b], self.shapes[b])

        def linked(activity_uid: str, boundary: str) -> bool:
            activity = self.activity_by_uid[activity_uid]
            if boundary == "start":
                return activity_uid in self.started
            if activity_uid in self.ended:
                return True
            if event is not None and activity.end_event is event:
                # the activity's own end event: the model's natural end
                for run in self.running.values():
                    if run.activity is activity and run.end is not None:
                        return world.t >= run.end
            return False

        return cond.EvaluationContext(world.variables(), collision, linked)

    def holds(self, event: Event, world: WorldState) -> bool:
        return cond.evaluate(event.condition, self.env(world, event))

    # switching ------------------------------------------------------------------

    def fire(self, world: WorldState) -> WorldState:
        """Fire every armed event true at ``world.t`` and apply the switches."""
        while True:
            newly = [
                e for e in self.events if e.uid in self.armed and e.uid not in self.fired and self.holds(e, world)
            ]
            if not newly:
                return world
            for e in newly:
                self.fired[e.uid] = world.t
            world = WorldState(world.t, world.actors, world.fired | {e.uid for e in newly})
            fired_ids = {id(e) for e in newly}
            for key, run in list(self.running.items()):
                if id(run.activity.end_event) in fired_ids:
                    del self.running[key]
                    self.ended.add(run.activity.uid)
            for activity in self.sc.activities:
                if id(activity.start_event) in fired_ids and activity.uid not in self.started:
                    if activity.end_event.uid in self.fired:
                        continue  # its window has already closed
                    self.start(activity, world)
            if self.sc.end_event.uid in self.fired:
                return world

    def start(self, activity: Activity, world: WorldState) -> None:
        self.started.add(activity.uid)
        self.armed.add(activity.end_event.uid)
        for uid in self.performer.get(id(activity), []):
            state = world.actors[uid]
            for var in activity.category.state_variables:
                if var not in VARIABLES:
                    raise SimulationError(f"activity {activity.uid!r} governs unknown variable {var!r}")
                previous = self.running.get((uid, var))
                if previous is not None:
                    log.warning("activity %r overrides %r on %s.%s", activity.uid, previous.activity.uid, uid, var)
                params = _anchor(activity, world.t, state.get(var))
                self.running[(uid, var)] = _Running(
                    activity, uid, params, world.t, state.x, dynamics.natural_end(params)
                )

    def command(self, world: WorldState) -> None:
        for uid, policy in self.policies.items():
            out = policy(world, self.actors[uid].desired_state, actor=uid)
            acc, lat = (out if isinstance(out, tuple) else (out, 0.0))
            acc, lat = float(acc), float(lat)
            if not (math.isfinite(acc) and math.isfinite(lat)):
                raise SimulationError(f"policy for {uid!r} returned a non-finite command")
            self.commands[uid] = (acc, lat)

    def mode_switches(self, base: WorldState, cand: WorldState) -> list[float]:
        """Instants inside the step at which a policy changes its discrete mode.

        Policies may expose ``mode(world, desired, *, actor)``; a change of
        mode is a transition and is located like an event so that the switch
        does not snap to the time grid.
        """
        out = []
        for uid, policy in self.policies.items():
            mode = getattr(policy, "mode", None)
            if mode is None:
                continue
            desired = self.actors[uid].desired_state
            m0 = mode(base, desired, actor=uid)
            if mode(cand, desired, actor=uid) == m0:
                continue
            changed = lambda t: mode(self.advance(base, t), desired, actor=uid) != m0  # noqa: E731
            out.append(locate_event(changed, None, (base.t, cand.t), self.cfg.eps_t))
        return out

    def step_limit(self, t: float, t_grid: float) -> float:
        """Next stop: the grid point or an earlier natural activity end."""
        nxt = t_grid
        for run in self.running.values():
            if run.end is not None and t < run.end < nxt:
                nxt = run.end
        return nxt

    # main loop --------------------------------------------------------------------

    def run(self) -> Trace:
        cfg = self.cfg
        world = self.initial_world()
        start = self.sc.start_event
        if not self.holds(start, world):
            raise StartConditionFalse(f"start condition {start.condition_text!r} is false at t=0")
        world = self.fire(world)
        samples = [world]
        k = 0
        timed_out = False
        while self.sc.end_event.uid not in self.fired:
            self.command(world)
            t_grid = (k + 1) * cfg.dt
            if world.t >= cfg.t_max:
                timed_out = True
                break
            t_next = min(self.step_limit(world.t, t_grid), cfg.t_max)
            cand = self.advance(world, t_next)
            base = world
            crossings = [
                locate_event(lambda t, e=e: self.holds(e, self.advance(base, t)), None, (base.t, t_next), cfg.eps_t)
                for e in self.events
                if e.uid in self.armed and e.uid not in self.fired and self.holds(e, cand)
            ]
            crossings.extend(self.mode_switches(base, cand))
            if crossings and min(crossings) < t_next:
                cand = self.advance(base, min(crossings))
            world = self.fire(cand)
            samples.append(world)
            if world.t >= t_grid:
                k += 1
        outcome = self.outcome(world, timed_out)
        return Trace(
            tuple(samples),
            MappingProxyType(dict(self.fired)),
            outcome,
            timed_out,
            tuple(a.uid for a in self.sc.actors),
        )

    def outcome(self, world: WorldState, timed_out: bool) -> tuple[str, ...]:
        if timed_out:
            return (TIMEOUT,)
        end = self.sc.end_event
        parts = cond.disjuncts(end.condition)
        if len(parts) == 1 and not end.labels:
            return (end.uid,)
        env = self.env(world, end)
        names: list[str] = []
        for part in parts:
            if cond.evaluate(part, env):
                label = end.label_of(part)
                if label not in names:
                    names.append(label)
        return tuple(names)


def simulate(
    scenario: Scenario,
    config: SimConfig | None = None,
    policies: Mapping[str, EgoPolicy] | None = None,
) -> Trace:
    """Execute ``scenario`` from its start event until its end event or ``t_max``.

    ``policies`` maps actor uids to :class:`EgoPolicy` callables for actors
    driven by goals rather than activities.  Reaching ``t_max`` is not an
    error: the trace is returned with outcome ``("timeout",)``.
    """
    return _Executor(scenario, config or SimConfig(), policies or {}).run()


def run_test_scenario(scenario: Scenario, ego_policy: EgoPolicy, config: SimConfig | None = None) -> Trace:
    """Drive the ego with ``ego_policy`` and every other actor by its activities."""
    ego = scenario.ego()
    if ego.desired_state is None:
        raise SimulationError(f"ego {ego.uid!r} has no desired state")
    if scenario.activities_of(ego):
        raise SimulationError(f"ego {ego.uid!r} has activities; use simulate()")
    return simulate(scenario, config, {ego.uid: ego_policy})


# --- trace access ------------------------------------------------------------------


def state_at(trace: Trace, t: float) -> WorldState:
    """Temporal cross-section of the trace, linearly interpolated between samples."""
    times = trace.times
    if not times[0] <= t <= times[-1]:
        raise OutOfRange(f"t={t!r} is outside the trace span [{times[0]!r}, {times[-1]!r}]")
    i = bisect.bisect_left(times, t)
    if times[i] == t:
        return trace.samples[i]
    lo, hi = trace.samples[i - 1], trace.samples[i]
    w = (t - lo.t) / (hi.t - lo.t)
    states = {}
    for uid, a in lo.actors.items():
        b = hi.actors[uid]
        states[uid] = ActorState(a.symbol, *((1 - w) * a.get(v) + w * b.get(v) for v in VARIABLES))
    fired = frozenset(uid for uid, te in trace.event_times.items() if te <= t)
    return WorldState(t, MappingProxyType(states), fired)


def write_trace_csv(trace: Trace, out: TextIO) -> None:
    """Rows ``t,actor_uid,x,y,v,a``: time-major, then scenario actor order."""
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["t", "actor_uid", *VARIABLES])
    for s in trace.samples:
        for uid in trace.actor_order:
            st = s.actors[uid]
            w.writerow([repr(s.t), uid, *(repr(st.get(v)) for v in VARIABLES)])


def write_events_csv(trace: Trace, out: TextIO) -> None:
    """Rows ``event_uid,t`` in firing order."""
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["event_uid", "t"])
    for uid, t in sorted(trace.event_times.items(), key=lambda kv: kv[1]):
        w.writerow([uid, repr(t)])


def trace_csv(trace: Trace) -> str:
    buf = io.StringIO()
    write_trace_csv(trace, buf)
    return buf.getvalue()


def events_csv(trace: Trace) -> str:
    buf = io.StringIO()
    write_events_csv(trace, buf)
    return buf.getvalue()
