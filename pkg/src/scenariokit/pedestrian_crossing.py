"""The pedestrian-crossing example built in code.

An ego vehicle approaches a non-signalised crossing, brakes to a stop, waits
while a pedestrian crosses and then accelerates away.  Coordinates: origin at
the crossing centre, ``x`` along the ego's travel, ``y`` along the
pedestrian's travel; the ego lane spans ``y`` in ``[-3.5, 0]``.

The bundled ``fixtures/*.scn.json`` files are these objects saved with
:mod:`scenariokit.persistence`.
"""

from __future__ import annotations

from functools import lru_cache

from .model import (
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
)

EGO_LANE_Y = -1.75
# Real-world scenario: walking at 1 m/s from t=0 the pedestrian leaves the ego
# lane at t=6, before the ego pulls away at t=7.
PEDESTRIAN_START_Y = -6.0
# Test scenario: walking at 1 m/s from the moment the ego is 2.5 s from the
# crossing, the pedestrian reaches the ego's path as the ego arrives.
TEST_PEDESTRIAN_START_Y = -4.25
TEST_EGO_START_X = -60.0


@lru_cache(maxsize=None)
def qualitative_parts() -> dict:
    crossing = PhysicalElementCategory(
        uid="pedestrian crossing qualitative",
        name="Pedestrian crossing qualitative",
        description="Straight road with two lanes and a non-signalised pedestrian crossing",
    )
    ego = ActorCategory(
        uid="ego qualitative",
        name="Ego qualitative",
        description="Passenger car under test",
        tags=("Ego vehicle",),
        actor_type=ActorType.VEHICLE,
    )
    pedestrian = ActorCategory(
        uid="pedestrian qualitative",
        name="Pedestrian qualitative",
        description="Pedestrian using the crossing",
        actor_type=ActorType.PEDESTRIAN,
    )
    braking = ActivityCategory(
        uid="braking",
        name="Braking",
        description="Vehicle slows down smoothly",
        tags=("Decelerating",),
        state_variables=("v",),
        model="Sinusoidal",
    )
    stationary = ActivityCategory(
        uid="stationary",
        name="Stationary",
        description="Vehicle stands still",
        tags=("Standing still",),
        state_variables=("v",),
        model="Constant",
    )
    accelerating = ActivityCategory(
        uid="accelerating",
        name="Accelerating",
        description="Vehicle speeds up at a constant rate",
        tags=("Accelerating",),
        state_variables=("v",),
        model="Linear",
    )
    walking = ActivityCategory(
        uid="walking straight",
        name="Walking straight",
        description="Pedestrian walks straight across the road",
        state_variables=("y",),
        model="Linear",
    )
    return dict(
        crossing=crossing,
        ego=ego,
        pedestrian=pedestrian,
        braking=braking,
        stationary=stationary,
        accelerating=accelerating,
        walking=walking,
    )


@lru_cache(maxsize=None)
def scenario_category() -> ScenarioCategory:
    q = qualitative_parts()
    return ScenarioCategory(
        uid="pedestrian crossing category",
        name="Pedestrian crossing",
        description="Ego vehicle stops for a pedestrian at a crossing and drives on once the pedestrian has passed",
        physical_element_categories=(q["crossing"],),
        actor_categories=(q["ego"], q["pedestrian"]),
        activity_categories=(q["braking"], q["stationary"], q["accelerating"], q["walking"]),
        acts=(
            CategoryAct(q["ego"], q["braking"]),
            CategoryAct(q["ego"], q["stationary"]),
            CategoryAct(q["ego"], q["accelerating"]),
            CategoryAct(q["pedestrian"], q["walking"]),
        ),
    )


@lru_cache(maxsize=None)
def test_scenario_category() -> ScenarioCategory:
    q = qualitative_parts()
    return ScenarioCategory(
        uid="pedestrian crossing test category",
        name="Pedestrian crossing test",
        description="Ego vehicle approaches a crossing while a pedestrian starts to cross",
        physical_element_categories=(q["crossing"],),
        actor_categories=(q["ego"], q["pedestrian"]),
        activity_categories=(q["walking"],),
        acts=(CategoryAct(q["pedestrian"], q["walking"]),),
    )


@lru_cache(maxsize=None)
def quantitative_parts() -> dict:
    q = qualitative_parts()
    start = Event(uid="start scenario", name="Start scenario", condition="t >= 0")
    ego_stops = Event(uid="ego stops", name="Ego stops", condition='linked("ego braking", end)')
    ego_starts = Event(uid="ego starts", name="Ego starts", condition="t >= 7 s")
    end = Event(uid="end scenario", name="End scenario", condition="t >= 12 s")
    ego = Actor(
        uid="ego",
        name="Ego",
        category=q["ego"],
        initial_state=StateVector.of(x=(-20.0, "m"), y=(EGO_LANE_Y, "m"), v=(8.0, "m/s")),
    )
    pedestrian = Actor(
        uid="pedestrian",
        name="Pedestrian",
        symbol="ped",
        category=q["pedestrian"],
        initial_state=StateVector.of(x=(0.0, "m"), y=(PEDESTRIAN_START_Y, "m")),
    )
    crossing = PhysicalElement(
        uid="pedestrian crossing",
        name="Pedestrian crossing",
        category=q["crossing"],
        properties={
            "lanes": Property(2),
            "lane_width": Property(3.5, "m"),
            "footway_width": Property(3.0, "m"),
            "road_network": Property("opaque external reference"),
        },
    )
    braking = Activity(
        uid="ego braking",
        name="Ego braking",
        category=q["braking"],
        parameters={"A": -8.0, "T": 4.0, "t0": 0.0, "z0": 8.0},
        start_event=start,
        end_event=ego_stops,
    )
    stationary = Activity(
        uid="ego stationary",
        name="Ego stationary",
        category=q["stationary"],
        parameters={"z0": 0.0},
        start_event=ego_stops,
        end_event=ego_starts,
    )
    accelerating = Activity(
        uid="ego accelerating",
        name="Ego accelerating",
        category=q["accelerating"],
        parameters={"s": 1.5, "t0": 7.0, "z0": 0.0},
        start_event=ego_starts,
        end_event=end,
    )
    walking = Activity(
        uid="pedestrian walking",
        name="Pedestrian walking",
        category=q["walking"],
        parameters={"s": 1.0, "t0": 0.0, "z0": PEDESTRIAN_START_Y},
        start_event=start,
        end_event=end,
    )
    return dict(
        start=start,
        ego_stops=ego_stops,
        ego_starts=ego_starts,
        end=end,
        ego=ego,
        pedestrian=pedestrian,
        crossing=crossing,
        braking=braking,
        stationary=stationary,
        accelerating=accelerating,
        walking=walking,
    )


def quantitative_scenario_parts() -> dict:
    """Keyword arguments for :func:`build_scenario` giving the real-world scenario."""
    p = quantitative_parts()
    return dict(
        uid="pedestrian crossing scenario",
        name="Ego braking for crossing pedestrian",
        start_event=p["start"],
        end_event=p["end"],
        physical_elements=(p["crossing"],),
        actors=(p["ego"], p["pedestrian"]),
        activities=(p["braking"], p["stationary"], p["accelerating"], p["walking"]),
        events=(p["start"], p["ego_stops"], p["ego_starts"], p["end"]),
        acts=(
            (p["ego"], p["braking"]),
            (p["ego"], p["stationary"]),
            (p["ego"], p["accelerating"]),
            (p["pedestrian"], p["walking"]),
        ),
    )


@lru_cache(maxsize=None)
def quantitative_scenario() -> Scenario:
    return build_scenario(**quantitative_scenario_parts())


@lru_cache(maxsize=None)
def _test_parts() -> dict:
    q = qualitative_parts()
    ego = Actor(
        uid="ego test",
        name="Ego",
        symbol="ego",
        tags=("Cruising", "Going straight"),
        category=q["ego"],
        initial_state=StateVector.of(x=(TEST_EGO_START_X, "m"), y=(EGO_LANE_Y, "m"), v=(8.0, "m/s")),
        desired_state=StateVector.of(x=(TEST_EGO_START_X + 80.0, "m"), v=(8.0, "m/s")),
    )
    trigger = Event(
        uid="pedestrian starts walking",
        name="Pedestrian starts walking",
        condition="x_ego / v_ego >= -2.5 s",
    )
    end = Event(
        uid="end test",
        name="End test",
        condition="x_ego >= 20 m || collision(ego, ped) || y_ego <= -2 m || y_ego >= 1 m || t > 100 s",
        labels={
            "x_ego >= 20 m": "destination",
            "collision(ego, ped)": "collision",
            "y_ego <= -2 m": "deviation",
            "y_ego >= 1 m": "deviation",
            "t > 100 s": "timeout",
        },
    )
    pedestrian = Actor(
        uid="pedestrian test",
        name="Pedestrian",
        symbol="ped",
        category=q["pedestrian"],
        initial_state=StateVector.of(x=(0.0, "m"), y=(TEST_PEDESTRIAN_START_Y, "m")),
    )
    return dict(ego=ego, pedestrian=pedestrian, trigger=trigger, end=end)


@lru_cache(maxsize=None)
def test_scenario() -> Scenario:
    """Test scenario: the ego has a goal instead of activities."""
    q = qualitative_parts()
    p = quantitative_parts()
    t = _test_parts()
    walking = Activity(
        uid="pedestrian walking test",
        name="Pedestrian walking",
        category=q["walking"],
        parameters={"s": 1.0, "t0": 5.0, "z0": TEST_PEDESTRIAN_START_Y},
        start_event=t["trigger"],
        end_event=t["end"],
    )
    return build_scenario(
        uid="pedestrian crossing test scenario",
        name="Pedestrian crossing test",
        start_event=p["start"],
        end_event=t["end"],
        physical_elements=(p["crossing"],),
        actors=(t["ego"], t["pedestrian"]),
        activities=(walking,),
        events=(p["start"], t["trigger"], t["end"]),
        acts=((t["pedestrian"], walking),),
    )


@lru_cache(maxsize=None)
def test_scenario_speed_up() -> Scenario:
    """Test scenario where the pedestrian hurries once the ego is close."""
    q = qualitative_parts()
    p = quantitative_parts()
    t = _test_parts()
    notices = Event(
        uid="pedestrian notices ego",
        name="Pedestrian notices ego",
        condition="abs(x_ego / v_ego) <= 1 s && y_ped < 0 m",
    )
    walking = Activity(
        uid="pedestrian walking before noticing",
        name="Pedestrian walking",
        category=q["walking"],
        parameters={"s": 1.0, "t0": 5.0, "z0": TEST_PEDESTRIAN_START_Y},
        start_event=t["trigger"],
        end_event=notices,
    )
    hurrying = Activity(
        uid="pedestrian hurrying",
        name="Pedestrian hurrying",
        category=q["walking"],
        parameters={"s": 2.0, "t0": 6.5, "z0": TEST_PEDESTRIAN_START_Y + 1.5},
        start_event=notices,
        end_event=t["end"],
    )
    return build_scenario(
        uid="pedestrian crossing test scenario speed-up",
        name="Pedestrian crossing test with hurrying pedestrian",
        start_event=p["start"],
        end_event=t["end"],
        physical_elements=(p["crossing"],),
        actors=(t["ego"], t["pedestrian"]),
        activities=(walking, hurrying),
        events=(p["start"], t["trigger"], notices, t["end"]),
        acts=((t["pedestrian"], walking), (t["pedestrian"], hurrying)),
    )


FIXTURE_FILES = (
    ("tag_trees.scn.json", None),
    ("pedestrian_crossing_qualitative.scn.json", scenario_category),
    ("pedestrian_crossing_test_category.scn.json", test_scenario_category),
    ("pedestrian_crossing_quantitative.scn.json", quantitative_scenario),
    ("pedestrian_crossing_test.scn.json", test_scenario),
    ("pedestrian_crossing_test_speed_up.scn.json", test_scenario_speed_up),
)


def export_fixtures(directory) -> list:
    """Write the example as a library into ``directory``; returns the paths.

    Later files reference elements of earlier ones instead of repeating them.
    """
    from pathlib import Path

    from .persistence import Library
    from .tags import default_registry

    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    library = Library(root)
    written = []
    for name, build in FIXTURE_FILES:
        element = default_registry() if build is None else build()
        written.append(library.save(element, name))
    library.rebuild_index(write=True)
    return written
