"""Synthetic "desk" scenarios: a handful of substations, stations and commuter tours.

Substations sit at random points in a square; each lists its nearest
substations as neighbors. Stations are spread over substations with
Zipf-like weights (``skew``), so one net attracts much more traffic than the
rest. Vehicles commute between a home station on a residential net and a work
station elsewhere, optionally with one or two extra stops.
"""

from __future__ import annotations

import math

import numpy as np

from .config import (
    AgentConfig,
    BehaviorConfig,
    ScenarioConfig,
    StationSpec,
    SubstationSpec,
    TripSpec,
    VehicleSpec,
)
from .grid import MAX_NEIGHBORS

DAY = 86400
H = 3600


def _zipf(n: int, skew: float) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** skew
    return w / w.sum()


def _trip(rng, pos, a: int, b: int, depart: float, speed_kmh: float, detour: float) -> TripSpec:
    km = max(2.0, float(np.linalg.norm(pos[a] - pos[b])) * detour)
    duration = int(round(km / speed_kmh * H)) + 120
    return TripSpec(origin=a, destination=b, depart=int(depart), distance_km=round(km, 3), duration_s=duration)


def _feasible(trips: list[TripSpec]) -> bool:
    for i, t in enumerate(trips):
        nxt = trips[(i + 1) % len(trips)]
        next_depart = nxt.depart + (DAY if i == len(trips) - 1 else 0)
        if i < len(trips) - 1 and nxt.depart <= t.depart:
            return False
        if t.depart + t.duration_s + 600 >= next_depart:
            return False
    return True


def desk_scenario(
    seed: int = 0,
    n_substations: int = 8,
    n_stations: int = 20,
    n_vehicles: int = 200,
    days: int = 10,
    skew: float = 1.2,
    area_km: float = 20.0,
    rated_kva: tuple[float, ...] = (160.0, 250.0, 400.0),
    base_peak_loading: float = 0.55,
    speed_kmh: float = 35.0,
    detour: float = 1.4,
    agents: AgentConfig | None = None,
    behavior: BehaviorConfig | None = None,
    name: str = "desk",
) -> ScenarioConfig:
    rng = np.random.default_rng([seed, 0xDE5C])

    # substations: the most popular net is residential and small
    types = ["residential"] * n_substations
    for i in range(n_substations):
        if i % 4 == 1:
            types[i] = "commercial"
        elif i % 4 == 3:
            types[i] = "industrial"
    sub_pos = rng.uniform(0, area_km, size=(n_substations, 2))
    rated = [float(rated_kva[0])] + [float(rng.choice(rated_kva)) for _ in range(n_substations - 1)]
    substations = []
    for i in range(n_substations):
        d = np.linalg.norm(sub_pos - sub_pos[i], axis=1)
        order = [int(j) for j in np.argsort(d, kind="stable") if j != i][:MAX_NEIGHBORS]
        substations.append(
            SubstationSpec(i, rated[i], types[i], order, base_peak_loading)
        )

    # stations: every substation gets one, the rest follow the skewed weights
    sub_weights = _zipf(n_substations, skew)
    owners = list(range(min(n_substations, n_stations)))
    owners += list(rng.choice(n_substations, size=n_stations - len(owners), p=sub_weights))
    owners = sorted(int(o) for o in owners)
    st_pos = np.array([sub_pos[o] + rng.normal(0, 0.4, size=2) for o in owners])

    walking: dict[int, list[int]] = {}
    for s in range(n_stations):
        d = np.linalg.norm(st_pos - st_pos[s], axis=1)
        near = [int(j) for j in np.argsort(d, kind="stable") if j != s and d[j] <= 1.0]
        if near:
            walking[s] = near[:3]

    residential = np.array([types[o] == "residential" for o in owners])
    weight = sub_weights[owners] / np.bincount(owners, minlength=n_substations)[owners]
    home_p = np.where(residential, weight, 0.05 * weight)
    home_p = home_p / home_p.sum()
    work_p = np.where(residential, 0.3 * weight, weight)
    work_p = work_p / work_p.sum()

    vehicles = []
    use = np.zeros(n_stations, dtype=int)
    while len(vehicles) < n_vehicles:
        home = int(rng.choice(n_stations, p=home_p))
        work = int(rng.choice(n_stations, p=work_p))
        if work == home:
            continue
        n_trips = int(rng.choice([2, 3, 4], p=[0.6, 0.3, 0.1]))
        leave = rng.uniform(6.5 * H, 9.0 * H)
        back = rng.uniform(16.0 * H, 18.5 * H)
        if n_trips == 2:
            stops = [(home, leave), (work, back)]
        elif n_trips == 3:
            other = int(rng.integers(n_stations))
            if other in (home, work):
                continue
            stops = [(home, leave), (work, back), (other, back + rng.uniform(1.0 * H, 2.0 * H))]
        else:
            other = int(rng.integers(n_stations))
            if other in (home, work):
                continue
            lunch = rng.uniform(11.5 * H, 13.0 * H)
            stops = [(home, leave), (work, lunch), (other, lunch + rng.uniform(0.75 * H, 1.25 * H)), (work, back)]
        trips = [
            _trip(rng, st_pos, a, stops[(i + 1) % len(stops)][0], dep, speed_kmh, detour)
            for i, (a, dep) in enumerate(stops)
        ]
        if not _feasible(trips):
            continue
        for a, _ in stops:
            use[a] += 1
        vehicles.append(VehicleSpec(id=len(vehicles), trips=trips))

    stations = [
        StationSpec(id=s, area=s, substation=owners[s], spaces=int(max(4, math.ceil(0.6 * use[s]))))
        for s in range(n_stations)
    ]
    return ScenarioConfig(
        substations=substations,
        stations=stations,
        vehicles=vehicles,
        walking=walking,
        agents=agents or AgentConfig(),
        behavior=behavior or BehaviorConfig(),
        duration_steps=days * DAY,
        seed=seed,
        name=name,
    )


def base_case(cfg: ScenarioConfig) -> ScenarioConfig:
    """The same grid without any vehicles."""
    return cfg.replace(vehicles=[], tours_file=None, name=f"{cfg.name}-base")


def uncontrolled(cfg: ScenarioConfig) -> ScenarioConfig:
    return cfg.replace(
        agents=AgentConfig(profile="ConstantLoading", variant="B", target="Power"),
        behavior=BehaviorConfig(charging="AlwaysLoad", diversion="DoNotDivert"),
        name=f"{cfg.name}-uncontrolled",
    )


def controlled(cfg: ScenarioConfig, alpha: float = 0.3, gamma: float = 0.01) -> ScenarioConfig:
    """LinUCB with disjoint contexts, variant B, Income utility, power target."""
    return cfg.replace(
        agents=AgentConfig(
            profile="LinUCB_Disjunct", variant="B", target="Power", utility="Income", gamma=gamma, alpha=alpha
        ),
        behavior=BehaviorConfig(charging="AlwaysLoad", diversion="DivertToHighestPower"),
        name=f"{cfg.name}-linucb",
    )
