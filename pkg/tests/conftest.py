import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from evcharge.config import (
    AgentConfig,
    BehaviorConfig,
    ScenarioConfig,
    StationSpec,
    SubstationSpec,
    TripSpec,
    VehicleSpec,
)

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("default")

DAY = 86400
PROFILES = ["ConstantLoading", "WorkloadProportional", "Random", "LinUCB_Disjunct", "LinUCB_Hybrid", "QLearning"]
CHARGING = ["AlwaysLoad", "PriceAware", "AlwaysLoadHomeOnly", "PriceAwareHomeOnly"]
DIVERSION = ["DoNotDivert", "DivertToCheapest", "DivertToHighestPower"]


def two_trip_vehicle(vid, home, work, leave=8 * 3600, back=17 * 3600, km=10.0, duration=1200, soc=1.0):
    trips = [
        TripSpec(home, work, leave, km, duration),
        TripSpec(work, home, back, km, duration),
    ]
    return VehicleSpec(vid, trips, soc)


def tiny_config(vehicles=(), n_stations=2, spaces=2, rated=100.0, days=1, **kw) -> ScenarioConfig:
    subs = [SubstationSpec(0, rated, "residential", [1]), SubstationSpec(1, rated, "commercial", [0])]
    stations = [StationSpec(i, i, i % 2, spaces) for i in range(n_stations)]
    return ScenarioConfig(
        substations=subs,
        stations=stations,
        vehicles=list(vehicles),
        duration_steps=days * DAY,
        **kw,
    )


@st.composite
def small_scenarios(draw, profiles=PROFILES, allow_variant_a=True):
    """Randomized small worlds: 1-3 substations, 1-4 stations, up to 10 vehicles, 1-2 days."""
    n_sub = draw(st.integers(1, 3))
    subs = [
        SubstationSpec(
            i,
            draw(st.sampled_from([20.0, 50.0, 100.0])),
            draw(st.sampled_from(["residential", "commercial", "industrial"])),
            [j for j in range(n_sub) if j != i],
            draw(st.floats(0.0, 0.9)),
        )
        for i in range(n_sub)
    ]
    n_st = draw(st.integers(1, 4))
    stations = [StationSpec(i, i, draw(st.integers(0, n_sub - 1)), draw(st.integers(1, 3))) for i in range(n_st)]
    n_areas = n_st + 1  # one area without a station
    walking = {}
    if n_st > 1:
        for s in range(n_st):
            near = draw(st.lists(st.integers(0, n_st - 1).filter(lambda j, s=s: j != s), max_size=2, unique=True))
            if near:
                walking[s] = near

    vehicles = []
    for vid in range(draw(st.integers(1, 10))):
        n = draw(st.integers(2, 4 if n_areas > 2 else 2))
        areas = [draw(st.integers(0, n_areas - 1))]
        for i in range(n - 1):
            # the last stop must differ from both its predecessor and the home area
            banned = {areas[-1], areas[0]} if i == n - 2 else {areas[-1]}
            areas.append(draw(st.integers(0, n_areas - 1).filter(lambda a, b=frozenset(banned): a not in b)))
        departs = sorted(draw(st.lists(st.integers(0, 23), min_size=n, max_size=n, unique=True)))
        trips = []
        for i in range(n):
            gap = (departs[i + 1] if i + 1 < n else departs[0] + 24) - departs[i]
            dur = draw(st.integers(60, gap * 3600 - 60))
            trips.append(TripSpec(areas[i], areas[(i + 1) % n], departs[i] * 3600, draw(st.floats(0.5, 60.0)), dur))
        vehicles.append(VehicleSpec(vid, trips, draw(st.floats(0.0, 1.0))))

    profile = draw(st.sampled_from(profiles))
    variant_a = allow_variant_a and profile in ("QLearning", "Random", "ConstantLoading") and draw(st.booleans())
    agents = AgentConfig(
        profile=profile,
        variant="A" if variant_a else "B",
        target="Price" if variant_a else draw(st.sampled_from(["Power", "Price"])),
        utility=draw(st.sampled_from(["Income", "Price"])),
        gamma=draw(st.floats(0.0, 1.0)),
        alpha=draw(st.floats(0.0, 2.0)),
        epsilon=draw(st.floats(0.01, 1.0)),
    )
    behavior = BehaviorConfig(draw(st.sampled_from(CHARGING)), draw(st.sampled_from(DIVERSION)))
    return ScenarioConfig(
        substations=subs,
        stations=stations,
        vehicles=vehicles,
        walking=walking,
        agents=agents,
        behavior=behavior,
        duration_steps=draw(st.integers(DAY // 2, 2 * DAY)),
        seed=draw(st.integers(0, 2**32)),
        name="hyp",
    )


# one line per acceptance criterion, echoed again in the terminal summary
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def planted_trips(n_cycles=50, n_noise=200, seed=0):
    """Trip fixture with known disjoint cycles plus dead-end noise.

    Each cycle uses its own edge names. Noise trips may start on any edge but
    always end on a fresh noise edge with a higher index, so no path through
    a noise trip ever closes.
    """
    from evcharge.tours import TripRecord

    rng = np.random.default_rng(seed)
    trips, cycles = [], []
    for c in range(n_cycles):
        n = int(rng.integers(2, 5))
        departs = np.sort(rng.choice(86400, size=n, replace=False))
        edges = [f"c{c}e{i}" for i in range(n)]
        cycle = [
            TripRecord(f"p{c}_{i}", edges[i], edges[(i + 1) % n], int(departs[i])) for i in range(n)
        ]
        cycles.append(cycle)
        trips.extend(cycle)
    planted_edges = sorted({t.from_edge for t in trips})
    for k in range(n_noise):
        if k and rng.random() < 0.5:
            src = f"n{int(rng.integers(k))}"
        else:
            src = planted_edges[int(rng.integers(len(planted_edges)))]
        trips.append(TripRecord(f"z{k}", src, f"n{k}", int(rng.integers(86400))))
    order = rng.permutation(len(trips))
    return [trips[i] for i in order], cycles
