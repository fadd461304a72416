"""Domain types for scenario categories (qualitative) and scenarios (quantitative).

Every element is a frozen dataclass carrying a caller-supplied ``uid``, a
``name`` and a tuple of tag labels.  Elements reference each other directly,
so one instance can be shared by several scenarios or categories.

Construction only normalises containers; the structural rules are checked by
:func:`validate`, which reports every violation at once.  :func:`build_scenario`
combines both and refuses to hand out an invalid scenario.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field, fields, replace
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Union

from . import conditions as cond
from .dynamics import get_model, model_names
from .tags import EGO_VEHICLE, Tag, TagError, TagRegistry, default_registry

__all__ = [
    "ActorType",
    "ScenarioElement",
    "QualitativeElement",
    "PhysicalElementCategory",
    "ActorCategory",
    "ActivityCategory",
    "Property",
    "StateVector",
    "PhysicalElement",
    "Actor",
    "Event",
    "Activity",
    "Act",
    "CategoryAct",
    "TimeInterval",
    "Scenario",
    "ScenarioCategory",
    "IssueCode",
    "Issue",
    "ValidationReport",
    "ScenarioValidationError",
    "STATE_SCHEMA",
    "validate",
    "build_scenario",
    "derived_tags",
    "iter_elements",
]

# Simulator state schema: variable -> canonical unit.
STATE_SCHEMA: Mapping[str, str] = MappingProxyType({"x": "m", "y": "m", "v": "m/s", "a": "m/s^2"})
_UNIT_ALIASES = {"m/s²": "m/s^2", "m/s2": "m/s^2"}
_IDENTIFIER = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class ActorType(str, enum.Enum):
    VEHICLE = "vehicle"
    PEDESTRIAN = "pedestrian"
    CYCLIST = "cyclist"
    ROADSIDE_UNIT = "roadside_unit"
    OTHER = "other"


def _frozen_map(value) -> Mapping:
    return MappingProxyType(dict(value or {}))


@dataclass(frozen=True, kw_only=True)
class ScenarioElement:
    uid: str
    name: str = ""
    tags: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tags", tuple(self.tags))

    def evolve(self, **changes):
        """Copy with ``changes`` applied; elements are never mutated in place."""
        return replace(self, **changes)


@dataclass(frozen=True, kw_only=True)
class QualitativeElement(ScenarioElement):
    description: str = ""


@dataclass(frozen=True, kw_only=True)
class PhysicalElementCategory(QualitativeElement):
    pass


@dataclass(frozen=True, kw_only=True)
class ActorCategory(PhysicalElementCategory):
    actor_type: ActorType = ActorType.OTHER

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "actor_type", ActorType(self.actor_type))


@dataclass(frozen=True, kw_only=True)
class ActivityCategory(QualitativeElement):
    state_variables: tuple[str, ...] = ()
    model: str = ""

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "state_variables", tuple(self.state_variables))


@dataclass(frozen=True)
class Property:
    """A scalar or text value with an optional unit."""

    value: Union[float, int, str, bool]
    unit: str | None = None


@dataclass(frozen=True)
class StateVector:
    """Named state values with unit annotations, e.g. ``x: -20 m``."""

    values: Mapping[str, float] = field(default_factory=dict)
    units: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_map({k: float(v) for k, v in self.values.items()}))
        object.__setattr__(self, "units", _frozen_map(self.units))

    @classmethod
    def of(cls, **entries) -> "StateVector":
        """Build from ``name=value`` or ``name=(value, unit)`` keywords."""
        values, units = {}, {}
        for key, entry in entries.items():
            if isinstance(entry, tuple):
                values[key], units[key] = entry
            else:
                values[key] = entry
        return cls(values, units)

    def __getitem__(self, key: str) -> float:
        return self.values[key]

    def __contains__(self, key: str) -> bool:
        return key in self.values

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True, kw_only=True)
class PhysicalElement(ScenarioElement):
    category: PhysicalElementCategory
    properties: Mapping[str, Property] = field(default_factory=dict)

    def __post_init__(self):
        super().__post_init__()
        props = {k: v if isinstance(v, Property) else Property(v) for k, v in dict(self.properties).items()}
        object.__setattr__(self, "properties", _frozen_map(props))


@dataclass(frozen=True, kw_only=True)
class Actor(PhysicalElement):
    """A physical element that moves.

    ``symbol`` is the short identifier used for this actor inside event
    conditions (``x_<symbol>``, ``collision(<symbol>, ...)``); it defaults to
    the uid.
    """

    category: ActorCategory
    initial_state: StateVector = field(default_factory=StateVector)
    desired_state: StateVector | None = None
    symbol: str = ""

    def __post_init__(self):
        super().__post_init__()
        if not self.symbol:
            object.__setattr__(self, "symbol", self.uid)


@dataclass(frozen=True, kw_only=True)
class Event(ScenarioElement):
    """An instant defined by a condition becoming true.

    ``labels`` optionally names the alternatives of an OR condition, keyed by
    their canonical text, so outcomes read "collision" rather than the raw
    expression.
    """

    condition: cond.ConditionExpr
    labels: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        super().__post_init__()
        if isinstance(self.condition, str):
            object.__setattr__(self, "condition", cond.parse(self.condition))
        object.__setattr__(self, "labels", _frozen_map(self.labels))

    @property
    def condition_text(self) -> str:
        return cond.to_text(self.condition)

    def label_of(self, disjunct) -> str:
        text = cond.to_text(disjunct)
        return self.labels.get(text, text)


@dataclass(frozen=True, kw_only=True)
class Activity(ScenarioElement):
    category: ActivityCategory
    parameters: Mapping[str, float] = field(default_factory=dict)
    start_event: Event
    end_event: Event

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "parameters", _frozen_map(self.parameters))


@dataclass(frozen=True)
class Act:
    actor: Actor
    activity: Activity


@dataclass(frozen=True)
class CategoryAct:
    actor_category: ActorCategory
    activity_category: ActivityCategory


@dataclass(frozen=True, kw_only=True)
class TimeInterval(ScenarioElement):
    start_event: Event
    end_event: Event


@dataclass(frozen=True, kw_only=True)
class Scenario(TimeInterval):
    physical_elements: tuple[PhysicalElement, ...] = ()
    actors: tuple[Actor, ...] = ()
    activities: tuple[Activity, ...] = ()
    events: tuple[Event, ...] = ()
    acts: tuple[Act, ...] = ()

    def __post_init__(self):
        super().__post_init__()
        for name in ("physical_elements", "actors", "activities", "events"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "acts", tuple(_as_act(a) for a in self.acts))

    def all_events(self) -> tuple[Event, ...]:
        """Scenario events plus the start/end events, deduplicated, in document order."""
        seen: dict[int, Event] = {}
        for ev in (self.start_event, *self.events, self.end_event):
            seen.setdefault(id(ev), ev)
        return tuple(seen.values())

    def actor(self, key: str) -> Actor:
        for a in self.actors:
            if key in (a.uid, a.symbol):
                return a
        raise KeyError(key)

    def ego(self) -> Actor:
        for a in self.actors:
            if _carries_ego(a):
                return a
        raise KeyError("no actor tagged 'Ego vehicle'")

    def activities_of(self, actor: Actor) -> tuple[Activity, ...]:
        return tuple(act.activity for act in self.acts if act.actor is actor or act.actor == actor)


@dataclass(frozen=True, kw_only=True)
class ScenarioCategory(QualitativeElement):
    physical_element_categories: tuple[PhysicalElementCategory, ...] = ()
    actor_categories: tuple[ActorCategory, ...] = ()
    activity_categories: tuple[ActivityCategory, ...] = ()
    acts: tuple[CategoryAct, ...] = ()

    def __post_init__(self):
        super().__post_init__()
        for name in ("physical_element_categories", "actor_categories", "activity_categories"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "acts", tuple(_as_category_act(a) for a in self.acts))


def _as_act(item) -> Act:
    return item if isinstance(item, Act) else Act(*item)


def _as_category_act(item) -> CategoryAct:
    return item if isinstance(item, CategoryAct) else CategoryAct(*item)


def _carries_ego(actor: Actor) -> bool:
    return EGO_VEHICLE in actor.tags or EGO_VEHICLE in actor.category.tags


# --- traversal ---------------------------------------------------------------


def iter_elements(root) -> Iterator[ScenarioElement]:
    """Yield every element reachable from ``root`` once, depth first, root first."""
    seen: set[int] = set()
    stack = [root]
    order: list[ScenarioElement] = []
    while stack:
        obj = stack.pop()
        if isinstance(obj, ScenarioElement):
            if id(obj) in seen:
                continue
            seen.add(id(obj))
            order.append(obj)
        children = list(_children(obj))
        stack.extend(reversed(children))
    return iter(order)


def _children(obj) -> Iterable:
    if isinstance(obj, (ScenarioElement, Act, CategoryAct)):
        for f in fields(obj):
            value = getattr(obj, f.name)
            if isinstance(value, (ScenarioElement, Act, CategoryAct)):
                yield value
            elif isinstance(value, tuple):
                yield from (v for v in value if isinstance(v, (ScenarioElement, Act, CategoryAct)))


# --- validation ----------------------------------------------------------------


class IssueCode(str, enum.Enum):
    MISSING_EGO = "MissingEgo"
    DANGLING_REFERENCE = "DanglingReference"
    PARAMETER_SCHEMA_MISMATCH = "ParameterSchemaMismatch"
    UNKNOWN_VARIABLE = "UnknownVariable"
    UNRESOLVED_TAG = "UnresolvedTag"
    DUPLICATE_UID = "DuplicateUid"
    EMPTY_FIELD = "EmptyField"
    EGO_NOT_VEHICLE = "EgoNotVehicle"
    DUPLICATE_STATE_VARIABLE = "DuplicateStateVariable"
    UNKNOWN_MODEL = "UnknownModel"
    SAME_START_END = "SameStartEnd"
    UNIT_MISMATCH = "UnitMismatch"
    NO_BEHAVIOR = "NoBehavior"
    NON_FINITE = "NonFinite"
    DUPLICATE_SYMBOL = "DuplicateSymbol"
    UNKNOWN_LABEL = "UnknownLabel"


@dataclass(frozen=True)
class Issue:
    code: IssueCode
    uid: str
    message: str

    def __str__(self) -> str:
        return f"{self.code.value} [{self.uid}]: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[Issue, ...] = ()

    def __bool__(self) -> bool:
        # truthy when clean, mirroring "report is empty iff valid"
        return not self.issues

    @property
    def ok(self) -> bool:
        return not self.issues

    @property
    def codes(self) -> set[IssueCode]:
        return {i.code for i in self.issues}

    def __iter__(self):
        return iter(self.issues)

    def __len__(self) -> int:
        return len(self.issues)

    def __str__(self) -> str:
        return "\n".join(str(i) for i in self.issues) if self.issues else "valid"


class ScenarioValidationError(ValueError):
    def __init__(self, report: ValidationReport):
        self.report = report
        super().__init__(str(report))

    @property
    def codes(self) -> set[IssueCode]:
        return self.report.codes


def _canonical_unit(unit: str) -> str:
    return _UNIT_ALIASES.get(unit, unit)


class _Checker:
    def __init__(self, registry: TagRegistry):
        self.registry = registry
        self.issues: list[Issue] = []

    def add(self, code: IssueCode, uid: str, message: str) -> None:
        self.issues.append(Issue(code, uid, message))

    def element(self, el: ScenarioElement) -> None:
        if not el.uid:
            self.add(IssueCode.EMPTY_FIELD, el.uid, f"{type(el).__name__} has an empty uid")
        for tag in el.tags:
            try:
                self.registry.resolve(tag)
            except TagError as exc:
                self.add(IssueCode.UNRESOLVED_TAG, el.uid, str(exc))
        if isinstance(el, QualitativeElement) and not el.description.strip():
            self.add(IssueCode.EMPTY_FIELD, el.uid, "description is empty")
        if isinstance(el, ActorCategory) and EGO_VEHICLE in el.tags and el.actor_type is not ActorType.VEHICLE:
            self.add(IssueCode.EGO_NOT_VEHICLE, el.uid, "a category tagged 'Ego vehicle' must be a vehicle")
        if isinstance(el, ActivityCategory):
            self.activity_category(el)
        if isinstance(el, Actor):
            self.actor(el)
        if isinstance(el, Activity):
            self.activity(el)
        if isinstance(el, Event):
            alternatives = {cond.to_text(d) for d in cond.disjuncts(el.condition)}
            for key in el.labels:
                if key not in alternatives:
                    self.add(IssueCode.UNKNOWN_LABEL, el.uid, f"label key {key!r} is not an alternative of the condition")

    def activity_category(self, el: ActivityCategory) -> None:
        if not el.state_variables:
            self.add(IssueCode.EMPTY_FIELD, el.uid, "no state variables")
        if len(set(el.state_variables)) != len(el.state_variables):
            self.add(IssueCode.DUPLICATE_STATE_VARIABLE, el.uid, f"repeated state variables {el.state_variables}")
        if el.model not in model_names():
            self.add(IssueCode.UNKNOWN_MODEL, el.uid, f"unknown model {el.model!r}")

    def actor(self, el: Actor) -> None:
        if not _IDENTIFIER.match(el.symbol):
            self.add(IssueCode.EMPTY_FIELD, el.uid, f"symbol {el.symbol!r} is not an identifier")
        if not el.initial_state.values:
            self.add(IssueCode.EMPTY_FIELD, el.uid, "initial state is empty")
        vectors = [("initial", el.initial_state)]
        if el.desired_state is not None:
            vectors.append(("desired", el.desired_state))
            for key in el.desired_state.values:
                if key not in el.initial_state and key not in STATE_SCHEMA:
                    self.add(IssueCode.UNKNOWN_VARIABLE, el.uid, f"desired state variable {key!r} is unknown")
        seen_units: dict[str, str] = {}
        for label, vec in vectors:
            for key, value in vec.values.items():
                if not math.isfinite(value):
                    self.add(IssueCode.NON_FINITE, el.uid, f"{label} {key}={value!r}")
            for key, unit in vec.units.items():
                unit = _canonical_unit(unit)
                expected = STATE_SCHEMA.get(key)
                if expected is not None and unit != expected:
                    self.add(IssueCode.UNIT_MISMATCH, el.uid, f"{label} {key} in {unit!r}, expected {expected!r}")
                elif key in seen_units and seen_units[key] != unit:
                    self.add(IssueCode.UNIT_MISMATCH, el.uid, f"{key} given in {seen_units[key]!r} and {unit!r}")
                seen_units.setdefault(key, unit)

    def activity(self, el: Activity) -> None:
        if el.start_event is el.end_event or el.start_event.uid == el.end_event.uid:
            self.add(IssueCode.SAME_START_END, el.uid, "start and end event are the same")
        try:
            model = get_model(el.category.model)
        except ValueError:
            return  # reported on the category
        for problem in model.check(el.parameters):
            self.add(IssueCode.PARAMETER_SCHEMA_MISMATCH, el.uid, problem)

    def unique_uids(self, root) -> None:
        by_uid: dict[str, ScenarioElement] = {}
        for el in iter_elements(root):
            other = by_uid.setdefault(el.uid, el)
            if other is not el and other != el:
                self.add(IssueCode.DUPLICATE_UID, el.uid, "uid used by two different elements")

    def scenario(self, sc: Scenario) -> None:
        if not any(_carries_ego(a) for a in sc.actors):
            self.add(IssueCode.MISSING_EGO, sc.uid, "no actor carries the tag 'Ego vehicle'")
        actor_ids = {id(a) for a in sc.actors}
        activity_ids = {id(v) for v in sc.activities}
        for act in sc.acts:
            if id(act.actor) not in actor_ids:
                self.add(IssueCode.DANGLING_REFERENCE, act.actor.uid, f"act actor {act.actor.uid!r} is not in the scenario")
            if id(act.activity) not in activity_ids:
                self.add(
                    IssueCode.DANGLING_REFERENCE,
                    act.activity.uid,
                    f"act activity {act.activity.uid!r} is not in the scenario",
                )
        event_ids = {id(e) for e in sc.all_events()}
        for activity in sc.activities:
            for which in ("start_event", "end_event"):
                ev = getattr(activity, which)
                if id(ev) not in event_ids:
                    self.add(IssueCode.DANGLING_REFERENCE, activity.uid, f"{which} {ev.uid!r} is not a scenario event")
        symbols: dict[str, str] = {}
        for a in sc.actors:
            if a.symbol in symbols and symbols[a.symbol] != a.uid:
                self.add(IssueCode.DUPLICATE_SYMBOL, a.uid, f"symbol {a.symbol!r} also used by {symbols[a.symbol]!r}")
            symbols.setdefault(a.symbol, a.uid)
            has_acts = any(act.actor is a for act in sc.acts)
            if not has_acts and a.desired_state is None:
                self.add(IssueCode.NO_BEHAVIOR, a.uid, "actor has neither activities nor a desired state")
        allowed = {"t"} | {f"{var}_{s}" for s in symbols for var in STATE_SCHEMA}
        activity_uids = {v.uid for v in sc.activities}
        for ev in sc.all_events():
            for name in sorted(cond.free_variables(ev.condition) - allowed):
                self.add(IssueCode.UNKNOWN_VARIABLE, ev.uid, f"condition uses unknown variable {name!r}")
            for node in cond.iter_nodes(ev.condition):
                if isinstance(node, cond.Collision):
                    for s in (node.first, node.second):
                        if s not in symbols:
                            self.add(IssueCode.DANGLING_REFERENCE, ev.uid, f"collision() names unknown actor {s!r}")
                elif isinstance(node, cond.Linked) and node.activity not in activity_uids:
                    self.add(IssueCode.DANGLING_REFERENCE, ev.uid, f"linked() names unknown activity {node.activity!r}")

    def category(self, cat: ScenarioCategory) -> None:
        actor_ids = {id(a) for a in cat.actor_categories}
        activity_ids = {id(v) for v in cat.activity_categories}
        for act in cat.acts:
            if id(act.actor_category) not in actor_ids:
                self.add(IssueCode.DANGLING_REFERENCE, act.actor_category.uid, "act actor category is not in the category")
            if id(act.activity_category) not in activity_ids:
                self.add(
                    IssueCode.DANGLING_REFERENCE, act.activity_category.uid, "act activity category is not in the category"
                )


def validate(element: Union[Scenario, ScenarioCategory], registry: TagRegistry | None = None) -> ValidationReport:
    """Check every structural rule; the report is empty iff ``element`` is valid."""
    checker = _Checker(registry or default_registry())
    checker.unique_uids(element)
    for el in iter_elements(element):
        checker.element(el)
    if isinstance(element, Scenario):
        checker.scenario(element)
    elif isinstance(element, ScenarioCategory):
        checker.category(element)
    return ValidationReport(tuple(checker.issues))


def build_scenario(*, registry: TagRegistry | None = None, **parts) -> Scenario:
    """Construct a :class:`Scenario` and validate it.

    Raises :class:`ScenarioValidationError` listing every violated rule.
    """
    scenario = Scenario(**parts)
    report = validate(scenario, registry)
    if report.issues:
        raise ScenarioValidationError(report)
    return scenario


def derived_tags(scenario: Scenario, registry: TagRegistry | None = None) -> frozenset[Tag]:
    """Tags of the scenario and everything in it, closed under ancestors."""
    registry = registry or default_registry()
    labels: list[str] = list(scenario.tags)
    for group in (scenario.physical_elements, scenario.actors, scenario.activities):
        for el in group:
            labels.extend(el.tags)
            labels.extend(el.category.tags)
    return registry.closure(labels)
