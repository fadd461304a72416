"""Seeded random generators for property and acceptance tests.

Each function takes a ``random.Random`` so runs are reproducible and counts
are exact.
"""

from __future__ import annotations

import math
import random

from scenariokit import conditions as c
from scenariokit.conditions import UNITS
from scenariokit.model import (
    Activity,
    ActivityCategory,
    Actor,
    ActorCategory,
    ActorType,
    CategoryAct,
    Event,
    PhysicalElement,
    PhysicalElementCategory,
    Property,
    Scenario,
    ScenarioCategory,
    StateVector,
)
from scenariokit.tags import default_registry

# --- numbers and text ------------------------------------------------------------

TEXT_POOL = ["a", "Ego", "ped 1", "x/y", 'quo"te', "back\\slash", "ünïcødé", "日本", "🚗", "tab\there", "", " "]


def finite_float(rng: random.Random) -> float:
    kind = rng.randrange(6)
    if kind == 0:
        return float(rng.randint(-1000, 1000))
    if kind == 1:
        return rng.uniform(-1e3, 1e3)
    if kind == 2:
        return math.copysign(10 ** rng.uniform(-300, 300), rng.choice((-1, 1)))
    if kind == 3:
        return rng.choice((0.0, -0.0, 0.1, 1 / 3, 5e-324, 1.7976931348623157e308, 1e15, 1e16))
    if kind == 4:
        return round(rng.uniform(-100, 100), rng.randint(0, 6))
    return rng.uniform(-1, 1) * 10 ** rng.randint(-12, 12)


def text(rng: random.Random, min_len: int = 0) -> str:
    while True:
        s = "".join(rng.choice(TEXT_POOL) for _ in range(rng.randint(1, 3)))
        if len(s.strip()) >= min_len:
            return s


# --- condition expressions -----------------------------------------------------------

VAR_POOL = ("t", "x_ego", "v_ego", "y_ped", "a_1", "speed", "_z9")
WORD_POOL = ("ego", "ped", "ego braking", 'say "hi"', "AND", "x-y", "n1")


def numeric(rng: random.Random, depth: int, variables=VAR_POOL):
    if depth <= 0 or rng.random() < 0.35:
        if rng.random() < 0.5:
            return c.Var(rng.choice(variables))
        unit = rng.choice(UNITS) if rng.random() < 0.3 else None
        return c.Num(finite_float(rng), unit)
    r = rng.random()
    if r < 0.15:
        inner = numeric(rng, depth - 1, variables)
        if isinstance(inner, c.Num):  # the parser folds "-<literal>" into the literal
            return c.Num(-inner.value, inner.unit)
        return c.Neg(inner)
    if r < 0.3:
        return c.Abs(numeric(rng, depth - 1, variables))
    return c.BinOp(rng.choice("+-*/"), numeric(rng, depth - 1, variables), numeric(rng, depth - 1, variables))


def boolean(rng: random.Random, depth: int = 8, variables=VAR_POOL, words=WORD_POOL, linked=None):
    """Random well-typed condition of nesting depth at most ``depth``."""
    if depth <= 1 or rng.random() < 0.4:
        r = rng.random()
        if r < 0.1 and words:
            return c.Collision(rng.choice(words), rng.choice(words))
        targets = words if linked is None else linked
        if r < 0.2 and targets:
            return c.Linked(rng.choice(targets), rng.choice(("start", "end")))
        d = max(0, depth - 2)
        return c.Compare(rng.choice(("<", "<=", ">", ">=", "==")), numeric(rng, d, variables), numeric(rng, d, variables))
    r = rng.random()
    if r < 0.2:
        return c.Not(boolean(rng, depth - 1, variables, words, linked))
    cls = c.And if r < 0.6 else c.Or
    return cls(tuple(boolean(rng, depth - 1, variables, words, linked) for _ in range(rng.randint(2, 3))))


# --- small categories and scenarios for matching ---------------------------------------

ACTIVITY_TAGS = (
    "Driving forward",
    "Decelerating",
    "Cruising",
    "Accelerating",
    "Standing still",
    "Vehicle longitudinal activity",
    "Turning",
    "Turning/Left",
    "Changing lane/Right",
    "Going straight",
)
ACTOR_TAGS = ("Ego vehicle",) + ACTIVITY_TAGS[:4]
KINDS = (("Linear", ("v",)), ("Constant", ("v",)), ("Linear", ("y",)))
TYPES = (ActorType.VEHICLE, ActorType.PEDESTRIAN)
_DUMMY = Event(uid="e", condition="t >= 0")
_PARAMS = {"Linear": {"s": 1.0, "t0": 0.0, "z0": 0.0}, "Constant": {"z0": 0.0}}


def _unique_pairs(pairs):
    seen, out = set(), []
    for a, v in pairs:
        key = (id(a), id(v))
        if key not in seen:
            seen.add(key)
            out.append((a, v))
    return tuple(out)


class _Uids:
    def __init__(self, prefix: str):
        self.prefix, self.n = prefix, 0

    def __call__(self) -> str:
        self.n += 1
        return f"{self.prefix}{self.n}"


def _tags(rng, pool, k=2):
    return tuple(sorted(set(rng.sample(pool, rng.randint(0, k)))))


def small_category(rng: random.Random, uid=None) -> ScenarioCategory:
    new = uid or _Uids("c")
    actor_cats = tuple(
        ActorCategory(uid=new(), description="d", actor_type=rng.choice(TYPES), tags=_tags(rng, ACTOR_TAGS, 1))
        for _ in range(rng.randint(1, 3))
    )
    activity_cats = []
    for _ in range(rng.randint(0, 3)):
        model, variables = rng.choice(KINDS)
        activity_cats.append(
            ActivityCategory(uid=new(), description="d", model=model, state_variables=variables, tags=_tags(rng, ACTIVITY_TAGS))
        )
    phys = tuple(PhysicalElementCategory(uid=new(), description="d") for _ in range(rng.randint(0, 1)))
    acts = []
    for vc in activity_cats:
        if rng.random() < 0.8:
            acts.append(CategoryAct(rng.choice(actor_cats), vc))
    return ScenarioCategory(
        uid=new(),
        description="d",
        physical_element_categories=phys,
        actor_categories=actor_cats,
        activity_categories=tuple(activity_cats),
        acts=tuple(dict.fromkeys(acts)),
    )


def _generalise(rng, tags):
    reg = default_registry()
    out = []
    for t in tags:
        r = rng.random()
        if r < 0.5:
            out.append(t)
        elif r < 0.8:
            anc = reg.resolve(t).ancestors
            if anc:
                out.append(str(rng.choice(anc)))
            else:
                out.append(t)
    return tuple(out)


def _specialise(rng, tags):
    reg = default_registry()
    out = []
    for t in tags:
        node = reg.resolve(t)
        children = [x for x in reg if x.ancestors and x.ancestors[-1] == node]
        out.append(str(rng.choice(children)) if children and rng.random() < 0.5 else t)
    if rng.random() < 0.3:
        out.append(rng.choice(ACTIVITY_TAGS))
    return tuple(out)


def weaken(rng: random.Random, cat: ScenarioCategory) -> ScenarioCategory:
    """A category whose requirements are a generalised subset of ``cat``'s."""
    new = _Uids("w")
    actor_map = {}
    for ac in cat.actor_categories:
        if rng.random() < 0.8:
            actor_map[id(ac)] = ActorCategory(
                uid=new(), description="d", actor_type=ac.actor_type, tags=_generalise(rng, ac.tags)
            )
    activity_map = {}
    for vc in cat.activity_categories:
        if rng.random() < 0.7:
            activity_map[id(vc)] = ActivityCategory(
                uid=new(), description="d", model=vc.model, state_variables=vc.state_variables, tags=_generalise(rng, vc.tags)
            )
    phys = tuple(PhysicalElementCategory(uid=new(), description="d") for p in cat.physical_element_categories if rng.random() < 0.8)
    acts = tuple(
        CategoryAct(actor_map[id(a.actor_category)], activity_map[id(a.activity_category)])
        for a in cat.acts
        if id(a.actor_category) in actor_map and id(a.activity_category) in activity_map and rng.random() < 0.8
    )
    return ScenarioCategory(
        uid=new(),
        description="d",
        physical_element_categories=phys,
        actor_categories=tuple(actor_map.values()),
        activity_categories=tuple(activity_map.values()),
        acts=acts,
    )


def instantiate(rng: random.Random, cat: ScenarioCategory) -> Scenario:
    """A scenario built to match ``cat``, then perturbed a little."""
    new = _Uids("s")
    actors = {}
    for ac in cat.actor_categories:
        own = ActorCategory(uid=new(), description="d", actor_type=ac.actor_type, tags=ac.tags)
        actors[id(ac)] = Actor(uid=new(), category=own, tags=_specialise(rng, ()) if rng.random() < 0.3 else ())
    activities = {}
    for vc in cat.activity_categories:
        model, variables = vc.model, vc.state_variables
        if rng.random() < 0.1:
            model, variables = rng.choice(KINDS)
        own = ActivityCategory(uid=new(), description="d", model=model, state_variables=variables, tags=_specialise(rng, vc.tags))
        activities[id(vc)] = Activity(
            uid=new(), category=own, parameters=_PARAMS[model], start_event=_DUMMY, end_event=_DUMMY
        )
    phys = [
        PhysicalElement(uid=new(), category=PhysicalElementCategory(uid=new(), description="d"))
        for _ in cat.physical_element_categories
    ]
    acts = [
        (actors[id(a.actor_category)], activities[id(a.activity_category)])
        for a in cat.acts
        if rng.random() < 0.95
    ]
    extra = small_scenario(rng, new)
    return Scenario(
        uid=new(),
        start_event=_DUMMY,
        end_event=_DUMMY,
        physical_elements=tuple(phys) + (extra.physical_elements if rng.random() < 0.3 else ()),
        actors=tuple(actors.values()) + (extra.actors if rng.random() < 0.3 else ()),
        activities=tuple(activities.values()),
        events=(_DUMMY,),
        acts=_unique_pairs(acts),
    )


def small_scenario(rng: random.Random, uid=None) -> Scenario:
    new = uid or _Uids("r")
    actors = []
    for _ in range(rng.randint(1, 3)):
        cat = ActorCategory(uid=new(), description="d", actor_type=rng.choice(TYPES), tags=_tags(rng, ACTOR_TAGS, 1))
        actors.append(Actor(uid=new(), category=cat, tags=_tags(rng, ACTOR_TAGS, 1)))
    activities = []
    for _ in range(rng.randint(0, 3)):
        model, variables = rng.choice(KINDS)
        cat = ActivityCategory(uid=new(), description="d", model=model, state_variables=variables, tags=_tags(rng, ACTIVITY_TAGS))
        activities.append(
            Activity(uid=new(), category=cat, parameters=_PARAMS[model], start_event=_DUMMY, end_event=_DUMMY, tags=_tags(rng, ACTIVITY_TAGS, 1))
        )
    phys = tuple(
        PhysicalElement(uid=new(), category=PhysicalElementCategory(uid=new(), description="d"))
        for _ in range(rng.randint(0, 2))
    )
    acts = _unique_pairs((rng.choice(actors), v) for v in activities if rng.random() < 0.8)
    return Scenario(
        uid=new(),
        start_event=_DUMMY,
        end_event=_DUMMY,
        physical_elements=phys,
        actors=tuple(actors),
        activities=tuple(activities),
        events=(_DUMMY,),
        acts=acts,
    )


# --- valid elements for persistence ----------------------------------------------------

_VALID_TAGS = ("Ego vehicle", "Turning/Left", "Changing lane/Left", "Cruising", "Driving forward", "Reversing", "Swerving")
_MODEL_PARAMS = {
    "Sinusoidal": lambda rng: {"A": finite_float(rng), "T": abs(finite_float(rng)) or 1.0, "t0": finite_float(rng), "z0": finite_float(rng)},
    "Linear": lambda rng: {"s": finite_float(rng), "t0": finite_float(rng), "z0": rng.choice((0, 1, -3))},
    "Constant": lambda rng: {"z0": finite_float(rng)},
}


def _property(rng):
    kind = rng.randrange(4)
    if kind == 0:
        value = finite_float(rng)
    elif kind == 1:
        value = rng.randint(-10**12, 10**12)
    elif kind == 2:
        value = text(rng)
    else:
        value = rng.random() < 0.5
    return Property(value, rng.choice((None, "m", "m/s", "file-uri")))


def _state(rng, keys):
    values, units = {}, {}
    for k in keys:
        values[k] = finite_float(rng)
        if rng.random() < 0.5:
            units[k] = {"x": "m", "y": "m", "v": rng.choice(("m/s",)), "a": rng.choice(("m/s^2", "m/s²"))}[k]
    return StateVector(values, units)


def valid_scenario(rng: random.Random) -> Scenario:
    new = _Uids(text(rng, 1) + "#")
    pick_tags = lambda: tuple(rng.sample(_VALID_TAGS[1:], rng.randint(0, 2)))  # noqa: E731
    ego_cat = ActorCategory(uid=new(), name=text(rng), description=text(rng, 1), tags=("Ego vehicle",), actor_type=ActorType.VEHICLE)
    other_cats = [
        ActorCategory(uid=new(), description=text(rng, 1), actor_type=rng.choice(list(ActorType)), tags=pick_tags())
        for _ in range(rng.randint(0, 2))
    ]
    actors = [
        Actor(
            uid=new(),
            name=text(rng),
            symbol="ego",
            category=ego_cat,
            tags=pick_tags(),
            initial_state=_state(rng, rng.sample("xyva", rng.randint(1, 4))),
            desired_state=_state(rng, rng.sample("xv", rng.randint(1, 2))) if rng.random() < 0.5 else None,
            properties={"length": Property(4.5, "m")} if rng.random() < 0.3 else {},
        )
    ]
    for i in range(rng.randint(0, 3)):
        actors.append(
            Actor(
                uid=new(),
                symbol=f"a{i}",
                category=rng.choice(other_cats or [ego_cat]),
                initial_state=_state(rng, rng.sample("xyv", rng.randint(1, 3))),
                desired_state=_state(rng, "x"),
            )
        )
    symbols = [a.symbol for a in actors]
    variables = ("t",) + tuple(f"{v}_{s}" for s in symbols for v in "xyva")
    phys_cat = PhysicalElementCategory(uid=new(), description=text(rng, 1), tags=pick_tags())
    phys = tuple(
        PhysicalElement(uid=new(), category=phys_cat, properties={text(rng, 1): _property(rng) for _ in range(rng.randint(0, 3))})
        for _ in range(rng.randint(0, 2))
    )
    activity_uids = [new() for _ in range(rng.randint(0, 4))]
    start = Event(uid=new(), condition="t >= 0")

    def event():
        expr = boolean(rng, rng.randint(1, 4), variables, tuple(symbols), tuple(activity_uids))
        labels = {}
        if isinstance(expr, c.Or) and rng.random() < 0.5:
            labels = {c.to_text(d): text(rng, 1) for d in expr.operands if rng.random() < 0.5}
        return Event(uid=new(), name=text(rng), condition=expr, labels=labels, tags=pick_tags())

    end = event()
    middle = [event() for _ in range(rng.randint(0, 3))]
    all_events = [start, *middle, end]
    act_cats = []
    for _ in range(rng.randint(1, 3)):
        model = rng.choice(list(_MODEL_PARAMS))
        act_cats.append(
            ActivityCategory(
                uid=new(), description=text(rng, 1), model=model, state_variables=tuple(rng.sample("xyv", rng.randint(1, 2))), tags=pick_tags()
            )
        )
    activities = []
    for uid in activity_uids:
        cat = rng.choice(act_cats)
        s_ev, e_ev = rng.sample(all_events, 2)
        activities.append(
            Activity(uid=uid, category=cat, parameters=_MODEL_PARAMS[cat.model](rng), start_event=s_ev, end_event=e_ev, tags=pick_tags())
        )
    acts = []
    for v in activities:
        for a in rng.sample(actors, rng.randint(1, min(2, len(actors)))):
            acts.append((a, v))
    if not any(a is actors[0] for a, _ in acts) and actors[0].desired_state is None:
        actors[0] = actors[0].evolve(desired_state=_state(rng, "x"))
    return Scenario(
        uid=new(),
        name=text(rng),
        tags=pick_tags(),
        start_event=start,
        end_event=end,
        physical_elements=phys,
        actors=tuple(actors),
        activities=tuple(activities),
        events=tuple(all_events),
        acts=_unique_pairs(acts),
    )


def valid_category(rng: random.Random) -> ScenarioCategory:
    sc = valid_scenario(rng)
    actor_cats = tuple(dict.fromkeys(a.category for a in sc.actors))
    activity_cats = tuple(dict.fromkeys(v.category for v in sc.activities))
    phys = tuple(dict.fromkeys(p.category for p in sc.physical_elements))
    acts = tuple(dict.fromkeys(CategoryAct(a.actor.category, a.activity.category) for a in sc.acts))
    return ScenarioCategory(
        uid=sc.uid + " category",
        description=text(rng, 1),
        tags=sc.tags,
        physical_element_categories=phys,
        actor_categories=actor_cats,
        activity_categories=activity_cats,
        acts=acts,
    )
