"""Schedule-driven vehicle model.

Vehicles repeat a daily tour of 2-4 trips. Driving drains the battery at a
constant rate per km, spread evenly over the trip duration; charging adds
``fraction * 11 kW`` per second until the battery is full. Time is counted in
whole seconds and a quantity "at t" means its value at the start of second t.

Energy is settled lazily: between transitions the battery level is linear in
time, so ``advance_vehicle`` may be called every second or only at the
vehicle's ``next_time`` with identical results.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .errors import ContractError

DAY = 86400
BATTERY_KWH = 22.0
VERIFIED_RANGE_KM = 104.0
CONSUMPTION_KWH_PER_KM = BATTERY_KWH / VERIFIED_RANGE_KM
MAX_POWER_PER_SPACE_KW = 11.0
FORCED_CHARGE_SOC = 0.20
PRICE_HISTORY_LEN = 20
POWER_LEVELS = (0.10, 0.25, 0.50, 0.75, 1.00)


class VehicleState(str, Enum):
    PARKED = "parked"
    DRIVING = "driving"
    CHARGING = "charging"


class ChargingBehavior(str, Enum):
    ALWAYS_LOAD = "AlwaysLoad"
    PRICE_AWARE = "PriceAware"
    ALWAYS_LOAD_HOME_ONLY = "AlwaysLoadHomeOnly"
    PRICE_AWARE_HOME_ONLY = "PriceAwareHomeOnly"

    @property
    def home_only(self) -> bool:
        return self in (ChargingBehavior.ALWAYS_LOAD_HOME_ONLY, ChargingBehavior.PRICE_AWARE_HOME_ONLY)

    @property
    def price_aware(self) -> bool:
        return self in (ChargingBehavior.PRICE_AWARE, ChargingBehavior.PRICE_AWARE_HOME_ONLY)


class DiversionBehavior(str, Enum):
    DO_NOT_DIVERT = "DoNotDivert"
    DIVERT_TO_CHEAPEST = "DivertToCheapest"
    DIVERT_TO_HIGHEST_POWER = "DivertToHighestPower"


@dataclass(frozen=True)
class Trip:
    origin: int
    destination: int
    depart: int  # seconds of day
    distance: float  # km
    duration: int  # s

    def __post_init__(self):
        if not self.distance > 0:
            raise ContractError(f"trip distance must be > 0, got {self.distance}")
        if not self.duration > 0:
            raise ContractError(f"trip duration must be > 0, got {self.duration}")
        if not 0 <= self.depart < DAY:
            raise ContractError(f"trip depart must lie in [0, {DAY}), got {self.depart}")


@dataclass(frozen=True)
class Tour:
    vehicle_id: int
    trips: tuple[Trip, ...]

    def __post_init__(self):
        trips = self.trips
        if not 2 <= len(trips) <= 4:
            raise ContractError(f"tour of vehicle {self.vehicle_id} has {len(trips)} trips, need 2-4")
        for i, trip in enumerate(trips):
            nxt = trips[(i + 1) % len(trips)]
            if trip.destination != nxt.origin:
                raise ContractError(f"tour of vehicle {self.vehicle_id} is not closed at trip {i}")
            next_depart = nxt.depart + (DAY if i == len(trips) - 1 else 0)
            if i < len(trips) - 1 and nxt.depart <= trip.depart:
                raise ContractError(f"tour of vehicle {self.vehicle_id}: departures not increasing")
            if trip.depart + trip.duration >= next_depart:
                raise ContractError(
                    f"tour of vehicle {self.vehicle_id}: trip {i} arrives after the next departure"
                )

    @property
    def home(self) -> int:
        return self.trips[0].origin


@dataclass
class ChargingSession:
    vehicle_id: int
    station_id: int
    start: int
    end: int  # planned end (vehicle departure); exclusive
    price: float
    fraction: float
    kw: float
    energy_start: float
    capacity: float

    def energy_at(self, t: int) -> float:
        """Battery energy at second ``t``, clamped to the session span."""
        t = min(max(t, self.start), self.end)
        return min(self.capacity, self.energy_start + self.kw * (t - self.start) / 3600.0)

    def delivered(self, a: int, b: int) -> float:
        """Energy delivered on seconds ``[a, b)``."""
        if b <= a:
            return 0.0
        return self.energy_at(b) - self.energy_at(a)

    @property
    def full_at(self) -> int:
        """First second at which the battery is full (or ``end`` if never)."""
        if self.kw <= 0:
            return self.end
        need = (self.capacity - self.energy_start) * 3600.0 / self.kw
        return min(self.end, self.start + math.ceil(need - 1e-9))


@dataclass
class ChargingStation:
    id: int
    area: int
    substation: int
    spaces: int
    offered_price: float = 0.25
    offered_power_fraction: float = 1.0
    max_power_per_space: float = MAX_POWER_PER_SPACE_KW
    occupied: set[int] = field(default_factory=set)

    def __post_init__(self):
        if self.spaces < 1:
            raise ContractError(f"station {self.id}: spaces must be >= 1")
        if not 0 < self.offered_power_fraction <= 1:
            raise ContractError(f"station {self.id}: power fraction must lie in (0, 1]")

    @property
    def offered_power(self) -> float:
        return self.offered_power_fraction * self.max_power_per_space

    @property
    def has_space(self) -> bool:
        return len(self.occupied) < self.spaces

    @property
    def relative_load(self) -> float:
        return len(self.occupied) / self.spaces


@dataclass(frozen=True)
class Departure:
    vehicle_id: int
    time: int
    origin: int
    target: int
    session: ChargingSession | None


@dataclass(frozen=True)
class Arrival:
    vehicle_id: int
    time: int
    area: int


class Vehicle:
    """A battery electric vehicle following a repeating daily tour."""

    def __init__(
        self,
        id: int,
        tour: Tour,
        battery_capacity: float = BATTERY_KWH,
        consumption: float = CONSUMPTION_KWH_PER_KM,
        soc: float = 1.0,
        start_time: int = 0,
    ):
        if not 0.0 <= soc <= 1.0:
            raise ContractError(f"vehicle {id}: initial soc must lie in [0, 1]")
        self.id = id
        self.tour = tour
        self.battery_capacity = battery_capacity
        self.consumption = consumption
        self.price_history: deque[float] = deque(maxlen=PRICE_HISTORY_LEN)
        self.state = VehicleState.PARKED
        self.area = tour.trips[0].origin
        self.destination: int | None = None
        self.initial_energy = soc * battery_capacity
        self._energy = self.initial_energy
        self._since = start_time
        self._drain = 0.0  # kWh per second while driving
        self.session: ChargingSession | None = None
        self.sessions: list[ChargingSession] = []
        self.charged = 0.0
        self.driven = 0.0
        self.stranded = 0
        self.trip_index = 0
        # first departure at or after start_time
        day, sod = divmod(start_time, DAY)
        idx = next((i for i, tr in enumerate(tour.trips) if tr.depart >= sod), None)
        if idx is None:
            day, idx = day + 1, 0
        self.trip_index = idx
        self.next_time = day * DAY + tour.trips[idx].depart

    @property
    def trip(self) -> Trip:
        return self.tour.trips[self.trip_index]

    @property
    def home(self) -> int:
        return self.tour.home

    def energy_at(self, t: int) -> float:
        if self.state is VehicleState.DRIVING:
            return max(0.0, self._energy - self._drain * (t - self._since))
        if self.state is VehicleState.CHARGING:
            return self.session.energy_at(t)
        return self._energy

    def soc_at(self, t: int) -> float:
        return self.energy_at(t) / self.battery_capacity

    @property
    def soc(self) -> float:
        """State of charge; exact while parked or at the current settle time."""
        return self.soc_at(self._since)

    def start_charging(self, station: ChargingStation, t: int) -> ChargingSession:
        if self.state is not VehicleState.PARKED or self.area != station.area:
            raise ContractError(f"vehicle {self.id} is not parked at station {station.id}")
        session = ChargingSession(
            vehicle_id=self.id,
            station_id=station.id,
            start=t,
            end=self.next_time,
            price=station.offered_price,
            fraction=station.offered_power_fraction,
            kw=station.offered_power,
            energy_start=self._energy,
            capacity=self.battery_capacity,
        )
        self.session = session
        self.sessions.append(session)
        self.state = VehicleState.CHARGING
        self._since = t
        return session

    def _depart(self, t: int) -> Departure:
        session = self.session
        if session is not None:
            end_energy = session.energy_at(t)
            self.charged += end_energy - session.energy_start
            self._energy = end_energy
            self.session = None
        trip = self.trip
        self.state = VehicleState.DRIVING
        origin = self.area
        self.destination = trip.destination
        self._since = t
        self._drain = trip.distance * self.consumption / trip.duration
        self.next_time = t + trip.duration
        return Departure(self.id, t, origin, trip.destination, session)

    def _arrive(self, t: int) -> Arrival:
        need = self.trip.distance * self.consumption
        if need > self._energy:
            self.stranded += 1
        end_energy = max(0.0, self._energy - need)
        self.driven += self._energy - end_energy
        self._energy = end_energy
        self.state = VehicleState.PARKED
        self.area = self.destination
        self.destination = None
        self._since = t
        self._drain = 0.0
        n = len(self.tour.trips)
        day = (t - self.trip.duration) // DAY
        if self.trip_index == n - 1:
            day += 1
        self.trip_index = (self.trip_index + 1) % n
        self.next_time = day * DAY + self.trip.depart
        return Arrival(self.id, t, self.area)

    def divert(self, area: int) -> None:
        if self.state is not VehicleState.DRIVING:
            raise ContractError(f"vehicle {self.id} can only divert while driving")
        self.destination = area

    def finish(self, t: int) -> None:
        """Settle energy bookkeeping at the end of a run (time ``t``)."""
        if self.state is VehicleState.CHARGING:
            end_energy = self.session.energy_at(t)
            self.charged += end_energy - self.session.energy_start
            self.session.end = min(self.session.end, t)
            self._energy = end_energy
            self.session = None
            self.state = VehicleState.PARKED
        elif self.state is VehicleState.DRIVING:
            end_energy = self.energy_at(t)
            self.driven += self._energy - end_energy
            self._energy = end_energy
            self._drain = 0.0
            self.state = VehicleState.PARKED  # frozen mid-trip
        self._since = t

    @property
    def energy(self) -> float:
        return self._energy


def advance_vehicle(v: Vehicle, t: int) -> list[Departure | Arrival]:
    """Apply every transition of ``v`` that is due at or before second ``t``."""
    events: list[Departure | Arrival] = []
    while v.next_time <= t:
        when = v.next_time
        if v.state is VehicleState.DRIVING:
            events.append(v._arrive(when))
        else:
            events.append(v._depart(when))
    return events


def should_charge(
    v: Vehicle,
    offered_price: float,
    behavior: ChargingBehavior | str,
) -> bool:
    """Decide whether a just-arrived vehicle plugs in at the offered price."""
    behavior = ChargingBehavior(behavior)
    soc = v.soc
    if soc < FORCED_CHARGE_SOC:
        return True
    if behavior.home_only and v.area != v.home:
        return False
    if not behavior.price_aware:
        return True
    history = v.price_history
    if not history:
        return True
    cheaper_or_equal = sum(1 for c in history if c <= offered_price)
    return soc <= cheaper_or_equal / len(history)


def consider_diversion(
    v: Vehicle | None,
    target: int,
    alternatives: list[ChargingStation],
    behavior: DiversionBehavior | str,
) -> int:
    """Area the vehicle drives to instead of ``target``.

    ``alternatives`` are the stations within walking range of the target
    (the target's own station may be among them). Ties prefer the original
    target, then the lowest station id.
    """
    behavior = DiversionBehavior(behavior)
    if behavior is DiversionBehavior.DO_NOT_DIVERT or not alternatives:
        return target
    if behavior is DiversionBehavior.DIVERT_TO_CHEAPEST:
        def key(st):
            return (st.offered_price, st.area != target, st.id)
    else:
        def key(st):
            return (-st.offered_power, st.area != target, st.id)
    return min(alternatives, key=key).area
