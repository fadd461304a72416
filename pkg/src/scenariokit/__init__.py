"""Object-oriented driving-scenario definitions.

Typed qualitative and quantitative scenario models, parametric activity
dynamics, condition-triggered events, category matching over tag trees, an
event-driven executor and a JSON file format with cross-file references.
"""

from .conditions import EvaluationContext, evaluate, parse, to_text
from .dynamics import ModelParams, displacement, fit, natural_end, state
from .matching import comprises, includes, select
from .model import (
    Act,
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
    build_scenario,
    derived_tags,
    validate,
)
from .persistence import Library, bundled_fixtures, dumps, load, loads, save
from .simulation import SimConfig, Trace, WorldState, run_test_scenario, simulate, state_at
from .tags import Tag, TagRegistry, default_registry

__version__ = "0.1.0"

__all__ = [
    "Act",
    "Activity",
    "ActivityCategory",
    "Actor",
    "ActorCategory",
    "ActorType",
    "CategoryAct",
    "EvaluationContext",
    "Event",
    "Library",
    "ModelParams",
    "PhysicalElement",
    "PhysicalElementCategory",
    "Property",
    "Scenario",
    "ScenarioCategory",
    "SimConfig",
    "StateVector",
    "Tag",
    "TagRegistry",
    "Trace",
    "WorldState",
    "build_scenario",
    "bundled_fixtures",
    "comprises",
    "default_registry",
    "derived_tags",
    "displacement",
    "dumps",
    "evaluate",
    "fit",
    "includes",
    "load",
    "loads",
    "natural_end",
    "parse",
    "run_test_scenario",
    "save",
    "select",
    "simulate",
    "state",
    "state_at",
    "to_text",
    "validate",
]
