import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evcharge.errors import ContractError
from evcharge.mobility import (
    BATTERY_KWH,
    CONSUMPTION_KWH_PER_KM,
    ChargingStation,
    Tour,
    Trip,
    Vehicle,
    VehicleState,
    advance_vehicle,
    consider_diversion,
    should_charge,
)

H = 3600


def commuter(km=10.4, soc=1.0, leave=8 * H, back=17 * H, duration=1200):
    tour = Tour(0, [Trip(0, 1, leave, km, duration), Trip(1, 0, back, km, duration)])
    return Vehicle(0, tour, soc=soc)


def test_consumption_from_verified_range():
    assert CONSUMPTION_KWH_PER_KM == pytest.approx(22.0 / 104.0)


def test_parked_before_departure_emits_nothing():
    v = commuter()
    assert advance_vehicle(v, 8 * H - 1) == []
    assert v.state is VehicleState.PARKED and v.soc == 1.0


def test_trip_soc_drop():
    v = commuter(km=10.4)
    events = advance_vehicle(v, 8 * H + 1200)
    assert [type(e).__name__ for e in events] == ["Departure", "Arrival"]
    drop = 10.4 * CONSUMPTION_KWH_PER_KM
    assert drop == pytest.approx(2.2, abs=1e-12)
    assert 1.0 - v.soc == pytest.approx(drop / 22.0, abs=1e-12)
    assert 1.0 - v.soc == pytest.approx(0.09998, abs=1e-4)
    assert v.area == 1


def test_mid_trip_energy_is_prorated():
    v = commuter(km=10.4, duration=1000)
    advance_vehicle(v, 8 * H)
    assert v.energy_at(8 * H + 250) == pytest.approx(BATTERY_KWH - 0.25 * 2.2)


def test_one_hour_full_power_charge():
    v = commuter(soc=0.2, leave=20 * H, back=22 * H)
    st_ = ChargingStation(0, 0, 0, 2)
    v.start_charging(st_, 0)
    assert v.energy_at(H) - v.energy_at(0) == pytest.approx(11.0)
    # capped at capacity
    assert v.energy_at(3 * H) == pytest.approx(BATTERY_KWH)
    advance_vehicle(v, 20 * H)
    assert v.charged == pytest.approx(BATTERY_KWH * 0.8)


def test_charging_ends_on_departure():
    v = commuter(soc=0.0, leave=1800)
    st_ = ChargingStation(0, 0, 0, 2, offered_power_fraction=0.5)
    session = v.start_charging(st_, 0)
    advance_vehicle(v, 1800)
    assert session.delivered(0, 1800) == pytest.approx(5.5 * 0.5)
    assert v.state is VehicleState.DRIVING


def test_should_charge_examples():
    v = commuter(soc=0.10)
    for behavior in ("AlwaysLoad", "PriceAware", "AlwaysLoadHomeOnly", "PriceAwareHomeOnly"):
        assert should_charge(v, 99.0, behavior)

    v = commuter(soc=0.60)
    v.price_history.extend([0.2, 0.3, 0.4])
    assert should_charge(v, 0.3, "PriceAware")
    assert not should_charge(v, 0.15, "PriceAware")
    assert should_charge(v, 0.15, "AlwaysLoad")


def test_price_aware_with_empty_history_charges():
    assert should_charge(commuter(soc=0.9), 0.45, "PriceAware")


def test_home_only_refuses_away_from_home():
    v = commuter(soc=0.5)
    assert should_charge(v, 0.25, "AlwaysLoadHomeOnly")
    advance_vehicle(v, 8 * H + 1200)
    assert v.area == 1
    assert not should_charge(v, 0.25, "AlwaysLoadHomeOnly")
    assert should_charge(v, 0.25, "AlwaysLoad")


def test_diversion_examples():
    a = ChargingStation(0, 10, 0, 2, offered_price=0.30)
    b = ChargingStation(1, 11, 0, 2, offered_price=0.20)
    assert consider_diversion(None, 10, [a, b], "DoNotDivert") == 10
    assert consider_diversion(None, 10, [a, b], "DivertToCheapest") == 11
    b.offered_price = 0.30
    assert consider_diversion(None, 10, [b, a], "DivertToCheapest") == 10
    assert consider_diversion(None, 10, [], "DivertToCheapest") == 10

    a.offered_power_fraction, b.offered_power_fraction = 0.5, 0.75
    assert consider_diversion(None, 10, [a, b], "DivertToHighestPower") == 11
    c = ChargingStation(2, 12, 0, 2, offered_power_fraction=0.75)
    # tie between two alternatives -> lowest station id
    assert consider_diversion(None, 10, [c, b, a], "DivertToHighestPower") == 11


def test_tour_validation():
    with pytest.raises(ContractError):
        Tour(0, [Trip(0, 1, 100, 1.0, 60)])
    with pytest.raises(ContractError):
        Tour(0, [Trip(0, 1, 100, 1.0, 60), Trip(1, 2, 500, 1.0, 60)])
    with pytest.raises(ContractError):
        Tour(0, [Trip(0, 1, 500, 1.0, 60), Trip(1, 0, 100, 1.0, 60)])
    with pytest.raises(ContractError):
        Tour(0, [Trip(0, 1, 100, 1.0, 1000), Trip(1, 0, 500, 1.0, 60)])


def test_stranding_clamps_at_zero():
    v = commuter(km=200.0, soc=0.5)
    advance_vehicle(v, 8 * H + 1200)
    assert v.soc == 0.0 and v.stranded == 1
    assert v.driven == pytest.approx(0.5 * BATTERY_KWH)


tours = st.integers(2, 4).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(0, 23), min_size=n, max_size=n, unique=True).map(sorted),
        st.lists(st.floats(0.5, 80.0), min_size=n, max_size=n),
        st.lists(st.floats(0.05, 0.95), min_size=n, max_size=n),
        st.lists(st.booleans(), min_size=n, max_size=n),
        st.floats(0.0, 1.0),
    )
)


def build(case):
    hours, kms, fills, plug, soc = case
    n = len(hours)
    trips = []
    for i in range(n):
        gap = ((hours[i + 1] if i + 1 < n else hours[0] + 24) - hours[i]) * H
        trips.append(Trip(i, (i + 1) % n, hours[i] * H, kms[i], max(60, int(fills[i] * (gap - 60)))))
    return Vehicle(0, Tour(0, trips), soc=soc), plug


@settings(max_examples=30)
@given(tours)
def test_event_skipping_matches_per_second_stepping(case):
    horizon = 2 * 86400
    dense, plug = build(case)
    sparse, _ = build(case)
    station = [ChargingStation(i, i, 0, 1) for i in range(4)]
    trace = []
    for t in range(0, horizon, 1):
        for ev in advance_vehicle(dense, t):
            if type(ev).__name__ == "Arrival" and plug[dense.trip_index - 1]:
                dense.start_charging(station[ev.area], t)
        if t % 997 == 0:
            trace.append((t, dense.energy_at(t)))
    t = 0
    for probe, energy in trace:
        while sparse.next_time <= probe:
            t = sparse.next_time
            for ev in advance_vehicle(sparse, t):
                if type(ev).__name__ == "Arrival" and plug[sparse.trip_index - 1]:
                    sparse.start_charging(station[ev.area], t)
        assert sparse.energy_at(probe) == pytest.approx(energy, abs=1e-9)
        assert 0.0 <= sparse.soc_at(probe) <= 1.0


@given(tours)
def test_energy_ledger_balances(case):
    v, plug = build(case)
    station = [ChargingStation(i, i, 0, 1) for i in range(4)]
    horizon = 3 * 86400 + 1234
    while v.next_time < horizon:
        t = v.next_time
        for ev in advance_vehicle(v, t):
            if type(ev).__name__ == "Arrival" and plug[v.trip_index - 1]:
                v.start_charging(station[ev.area], t)
    v.finish(horizon)
    assert v.initial_energy + v.charged - v.driven == pytest.approx(v.energy, abs=1e-9)
    assert 0.0 <= v.energy <= BATTERY_KWH


def test_offer_is_latched_at_session_start():
    v = commuter(soc=0.0, leave=20 * H, back=22 * H)
    st_ = ChargingStation(0, 0, 0, 2, offered_price=0.3)
    session = v.start_charging(st_, 0)
    st_.offered_power_fraction, st_.offered_price = 0.1, 0.05
    assert session.kw == 11.0 and session.price == 0.3
    assert v.energy_at(H) == pytest.approx(11.0)
