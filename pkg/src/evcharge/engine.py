"""Deterministic simulation loop.

Time advances in 1 s steps. Each step: vehicles due at that second transition
in id order; arrivals at stations are shuffled with the run's order stream and
handled one at a time (the station agent settles its last reward, observes,
decides and updates its offer, then the vehicle decides whether to plug in).
Grid windows close every 300 s. Steps in which nothing is due are skipped;
since all state between transitions is linear in time this is equivalent to
visiting every second.

Random streams are PCG64 generators seeded from ``[seed, stream, ...]``:
stream 1 orders arrivals within a step, stream 2 (plus the station id) drives
each agent's own choices and tie-breaks. Adding agents does not shift others.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .agents import Observation, StationAgent, build_context, discretize_state, make_policy
from .config import ScenarioConfig, build_tours, validate
from .errors import ConfigError
from .grid import SYNC_INTERVAL, GridState, Substation, window_from_loadings
from .metrics import MetricsRecord, VehicleLedger
from .mobility import (
    Arrival,
    ChargingBehavior,
    ChargingSession,
    ChargingStation,
    Departure,
    DiversionBehavior,
    Vehicle,
    advance_vehicle,
    consider_diversion,
    should_charge,
)

log = logging.getLogger(__name__)

ORDER_STREAM = 1
AGENT_STREAM = 2


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *key])))


@dataclass
class World:
    config: ScenarioConfig
    grid: GridState
    substations: dict[int, Substation]
    stations: dict[int, ChargingStation]
    station_by_area: dict[int, ChargingStation]
    vehicles: list[Vehicle]
    agents: dict[int, StationAgent]
    charging: ChargingBehavior
    diversion: DiversionBehavior
    order_rng: np.random.Generator
    published: dict[int, float] = field(default_factory=dict)
    sessions: dict[int, list[ChargingSession]] = field(default_factory=dict)
    t: int = 0
    arrivals: int = 0
    arrivals_at_stations: int = 0
    arrivals_with_space: int = 0

    def refresh_published(self) -> None:
        self.published = {sid: float(v) for sid, v in zip(self.substations, self.grid.published)}

    def observe(self, station: ChargingStation, t: int, soc: float) -> Observation:
        sub = self.substations[station.substation]
        x, z = build_context(station, self.published, sub.neighbors, t, soc)
        own = self.published[station.substation]
        return Observation(x, z, discretize_state(own, t, soc), own)

    def reward_window(self, agent: StationAgent, end: int):
        start = agent.pending.time
        end = min(max(end, start + 1), self.grid.duration)
        station = agent.station
        mean, peak = self.grid.interval_stats(station.substation, start, end)
        live = [s for s in self.sessions[station.id] if s.end > start]
        self.sessions[station.id] = live
        transactions = []
        for s in live:
            if s.start < end:
                energy = s.delivered(start, end)
                if energy > 0:
                    transactions.append((s.price, energy))
        return window_from_loadings(mean, peak, transactions, start, end)


def build_world(config: ScenarioConfig) -> World:
    validate(config)
    duration = config.duration_steps
    substations = {
        s.id: Substation(s.id, s.rated_power, s.grid_type, list(s.neighbors), s.base_peak_loading)
        for s in config.substations
    }
    grid = GridState(list(substations.values()), duration)
    stations = {
        s.id: ChargingStation(s.id, s.area, s.substation, s.spaces, offered_price=config.initial_price)
        for s in config.stations
    }
    model = config.agents.action_model()
    utility = config.agents.utility_params()
    agents = {}
    for sid in sorted(stations):
        policy = make_policy(config.agents.profile, model, config.agents.alpha, config.agents.q_config())
        agents[sid] = StationAgent(stations[sid], policy, utility, stream(config.seed, AGENT_STREAM, sid))
    vehicles = [
        Vehicle(tour.vehicle_id, tour, config.battery_kwh, config.consumption_kwh_per_km)
        for tour in sorted(build_tours(config), key=lambda tr: tr.vehicle_id)
    ]
    if len({v.id for v in vehicles}) != len(vehicles):
        raise ConfigError("vehicle ids from inline vehicles and tours_file collide")
    world = World(
        config=config,
        grid=grid,
        substations=substations,
        stations=stations,
        station_by_area={s.area: s for s in stations.values()},
        vehicles=vehicles,
        agents=agents,
        charging=ChargingBehavior(config.behavior.charging),
        diversion=DiversionBehavior(config.behavior.diversion),
        order_rng=stream(config.seed, ORDER_STREAM),
        sessions={sid: [] for sid in stations},
    )
    world.refresh_published()
    return world


def _register_power(grid: GridState, sub_id: int, session: ChargingSession) -> None:
    full = session.full_at
    if full <= session.start:
        return
    if full < session.end:
        last = (session.capacity - session.energy_at(full - 1)) * 3600.0
        grid.add_power(sub_id, session.start, full - 1, session.kw)
        grid.add_power(sub_id, full - 1, full, min(last, session.kw))
    else:
        grid.add_power(sub_id, session.start, session.end, session.kw)


def _handle_departure(world: World, v: Vehicle, ev: Departure) -> None:
    if ev.session is not None:
        world.stations[ev.session.station_id].occupied.discard(v.id)
    if world.diversion is DiversionBehavior.DO_NOT_DIVERT:
        return
    target = ev.target
    candidates = []
    for area in [target, *world.config.walking.get(target, [])]:
        st = world.station_by_area.get(area)
        if st is not None and (area == target or st.has_space):
            candidates.append(st)
    area = consider_diversion(v, target, candidates, world.diversion)
    if area != target:
        v.divert(area)


def _handle_arrival(world: World, v: Vehicle, station: ChargingStation, t: int) -> None:
    if not station.has_space:
        return
    world.arrivals_with_space += 1
    agent = world.agents[station.id]
    obs = world.observe(station, t, v.soc)
    if agent.pending is not None and not agent.pending.resolved:
        agent.resolve(world.reward_window(agent, t), obs)
    agent.decide(obs, t)
    price = station.offered_price
    if should_charge(v, price, world.charging):
        session = v.start_charging(station, t)
        station.occupied.add(v.id)
        world.sessions[station.id].append(session)
        _register_power(world.grid, station.substation, session)
    v.price_history.append(price)


def step(world: World, t: int, due: list[Vehicle]) -> None:
    arrived: list[tuple[Vehicle, ChargingStation]] = []
    for v in due:
        for ev in advance_vehicle(v, t):
            if isinstance(ev, Departure):
                _handle_departure(world, v, ev)
            elif isinstance(ev, Arrival):
                world.arrivals += 1
                st = world.station_by_area.get(ev.area)
                if st is not None:
                    world.arrivals_at_stations += 1
                    arrived.append((v, st))
    if len(arrived) > 1:
        arrived = [arrived[i] for i in world.order_rng.permutation(len(arrived))]
    for v, st in arrived:
        _handle_arrival(world, v, st, t)


def run(
    config: ScenarioConfig,
    observer: Callable[[World, int], None] | None = None,
    world: World | None = None,
) -> MetricsRecord:
    """Simulate ``config`` to its terminal step and return the collected metrics."""
    world = world or build_world(config)
    grid = world.grid
    duration = grid.duration
    heap = [(v.next_time, v.id) for v in world.vehicles]
    heapq.heapify(heap)
    by_id = {v.id: v for v in world.vehicles}
    next_sync = SYNC_INTERVAL
    while True:
        t_due = heap[0][0] if heap else duration
        if next_sync < duration and next_sync <= t_due:
            grid.sync_tick(next_sync)
            world.refresh_published()
            world.t = next_sync
            next_sync += SYNC_INTERVAL
            if observer:
                observer(world, world.t)
            continue
        if t_due >= duration:
            break
        due = []
        while heap and heap[0][0] == t_due:
            due.append(by_id[heapq.heappop(heap)[1]])
        due.sort(key=lambda v: v.id)
        world.t = t_due
        step(world, t_due, due)
        for v in due:
            heapq.heappush(heap, (v.next_time, v.id))
        if observer:
            observer(world, t_due)

    log.debug("run %s finished: %d arrivals", config.name, world.arrivals)
    return finish(world)


def finish(world: World) -> MetricsRecord:
    """Terminal step: flush pending decisions, close the grid, settle vehicles."""
    duration = world.grid.duration
    for agent in world.agents.values():
        if agent.pending is not None and not agent.pending.resolved:
            # no vehicle at hand; reuse the SoC seen at decision time
            obs = world.observe(agent.station, duration, float(agent.pending.x[-1]))
            agent.resolve(world.reward_window(agent, duration), obs)
    world.grid.finalize()
    for v in world.vehicles:
        v.finish(duration)
    world.t = duration
    return collect(world)


def collect(world: World) -> MetricsRecord:
    cfg = world.config
    grid = world.grid
    rewards = []
    for sid, agent in sorted(world.agents.items()):
        rewards.extend((sid, day, t, a, r) for day, t, a, r in agent.rewards)
    rewards.sort(key=lambda row: (row[2], row[0]))
    return MetricsRecord(
        name=cfg.name,
        profile=cfg.agents.profile,
        seed=cfg.seed,
        duration=cfg.duration_steps,
        substation_ids=list(world.substations),
        window_mean=grid.window_mean.tolist(),
        window_max=grid.window_max.tolist(),
        rewards=rewards,
        decisions={sid: a.decisions for sid, a in sorted(world.agents.items())},
        vehicles=[
            VehicleLedger(v.id, v.initial_energy, v.charged, v.driven, v.energy, v.stranded, len(v.sessions))
            for v in world.vehicles
        ],
        arrivals=world.arrivals,
        arrivals_at_stations=world.arrivals_at_stations,
        arrivals_with_space=world.arrivals_with_space,
    )
