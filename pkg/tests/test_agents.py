import math

import numpy as np
import pytest

from evcharge.agents import (
    DECREASE,
    INCREASE,
    KEEP,
    N_STATES,
    ActionModel,
    Observation,
    StationAgent,
    UtilityParams,
    build_context,
    compute_reward,
    discretize_state,
    make_policy,
    resolve_pending,
    time_features,
    valid_actions,
)
from evcharge.bandits import QLearnerConfig
from evcharge.errors import ContractError
from evcharge.grid import LoadWindow, Substation, instantaneous_loading
from evcharge.mobility import POWER_LEVELS, ChargingStation


def window(mean=0.0, peak=0.0, price=0.0, income=0.0):
    return LoadWindow(mean, peak, price, income, 0, 300)


def obs_for(x=None, state=0, own=0.0):
    x = np.zeros(10) if x is None else np.asarray(x, float)
    return Observation(x, x[7:10].copy(), state, own)


def test_context_at_midnight_on_empty_grid():
    st = ChargingStation(0, 0, 0, 4)
    x, z = build_context(st, {0: 0.0, 1: 0.0}, [1], 0, 1.0)
    np.testing.assert_allclose(x, [0, 0, 0, 0, 0, 0, 0, 0, 1, 1], atol=1e-15)
    np.testing.assert_allclose(z, [0, 1, 1], atol=1e-15)


def test_time_features_quarter_day():
    s, c = time_features(6 * 3600)
    assert s == pytest.approx(1.0) and c == pytest.approx(0.0, abs=1e-15)


def test_context_own_loading_from_grid_example():
    sub = Substation(0, 400.0, "industrial", [], 0.5)
    own = instantaneous_loading(sub, 10 * 3600, 110.0)
    st = ChargingStation(0, 0, 0, 4, occupied={1, 2})
    x, _ = build_context(st, {0: own, 1: 3.0, 2: 0.75}, [1, 2], 10 * 3600, 0.4)
    assert x[0] == 0.5
    assert x[1] == pytest.approx(0.775)
    # neighbor loadings are clipped at 150 % and scaled to [0, 1]
    assert x[2] == 1.0 and x[3] == pytest.approx(0.5)
    assert x[4:7].tolist() == [0.0, 0.0, 0.0]
    assert x[9] == 0.4


def test_valid_actions():
    b = ActionModel("B", "Power")
    assert valid_actions(b, 0.25) == {0, 1, 2, 3, 4}
    a = ActionModel("A", "Price")
    assert valid_actions(a, 0.50) == {KEEP, DECREASE}
    assert valid_actions(a, 0.05) == {KEEP, INCREASE}
    assert valid_actions(a, 0.25) == {KEEP, INCREASE, DECREASE}
    assert valid_actions(a, 0.25, {DECREASE}) == {KEEP, DECREASE}


def test_variant_a_requires_price_target():
    with pytest.raises(ContractError):
        ActionModel("A", "Power")


def test_rewards():
    assert compute_reward(window(), UtilityParams("Income", 0.1)) == 0.0
    assert compute_reward(window(0.5, 0.8, price=0.25), UtilityParams("Price", 0.1)) == pytest.approx(-1.325)
    assert compute_reward(window(0.5, 0.8, income=2.0), UtilityParams("Income", 0.1)) == pytest.approx(-1.1)


def test_constant_and_workload_policies(rng):
    model = ActionModel("B", "Power")
    st = ChargingStation(0, 0, 0, 2)
    const = make_policy("ConstantLoading", model)
    assert POWER_LEVELS[const.choose(obs_for(), st, {0, 1, 2, 3, 4}, rng)] == 1.0
    wl = make_policy("WorkloadProportional", model)
    assert wl.choose(obs_for(own=0.0), st, set(range(5)), rng) == 4
    assert wl.choose(obs_for(own=0.9), st, set(range(5)), rng) == 0
    assert wl.choose(obs_for(own=0.5), st, set(range(5)), rng) == 2


def test_workload_price_target(rng):
    model = ActionModel("B", "Price", price_min=0.05, price_max=0.5)
    st = ChargingStation(0, 0, 0, 2)
    wl = make_policy("WorkloadProportional", model)
    a = wl.choose(obs_for(own=1.0), st, set(range(5)), rng)
    assert model.price_level(a) == 0.5


def test_agent_records_one_reward_per_decision(rng):
    st = ChargingStation(0, 0, 0, 2)
    agent = StationAgent(st, make_policy("LinUCB_Disjunct", ActionModel()), UtilityParams("Price", 0.1), rng)
    o = obs_for(np.linspace(0, 1, 10))
    a = agent.decide(o, 100)
    assert st.offered_power_fraction == POWER_LEVELS[a]
    r = agent.resolve(window(0.5, 0.8, price=0.25), o)
    assert r == pytest.approx(-1.325)
    arm = agent.policy.learner.arms[a]
    np.testing.assert_allclose(arm.b, -1.325 * o.x)
    with pytest.raises(ContractError):
        agent.resolve(window(), o)
    assert agent.rewards == [(0, 100, a, r)] and agent.decisions == 1


def test_decide_twice_without_resolution_fails(rng):
    agent = StationAgent(ChargingStation(0, 0, 0, 2), make_policy("Random", ActionModel()), UtilityParams(), rng)
    agent.decide(obs_for(), 0)
    with pytest.raises(ContractError):
        agent.decide(obs_for(), 1)


def test_resolve_pending_checks_ownership(rng):
    a1 = StationAgent(ChargingStation(0, 0, 0, 2), make_policy("Random", ActionModel()), UtilityParams(), rng)
    a2 = StationAgent(ChargingStation(1, 1, 0, 2), make_policy("Random", ActionModel()), UtilityParams(), rng)
    a1.decide(obs_for(), 0)
    a2.decide(obs_for(), 0)
    with pytest.raises(ContractError):
        resolve_pending(a1, a2.pending, window(), obs_for())
    resolve_pending(a1, a1.pending, window(), obs_for())


def test_qlearning_resolution_uses_next_state(rng):
    cfg = QLearnerConfig(learning_rate=1.0, discount=0.5, epsilon=0.5)
    policy = make_policy("QLearning", ActionModel("A", "Price"), q_config=cfg)
    policy.table.set(7, KEEP, 2.0)
    agent = StationAgent(ChargingStation(0, 0, 0, 2), policy, UtilityParams("Income", 0.0), rng)
    a = agent.decide(obs_for(state=3), 0)
    agent.resolve(window(0.1, 0.2), obs_for(state=7))
    assert policy.table.get(3, a) == pytest.approx(-0.3 + 0.5 * 2.0)


def test_variant_a_price_moves_within_bounds(rng):
    model = ActionModel("A", "Price", 0.05, 0.5, 0.05)
    st = ChargingStation(0, 0, 0, 2, offered_price=0.25)
    agent = StationAgent(st, make_policy("Random", model), UtilityParams(), rng)
    for t in range(400):
        agent.decide(obs_for(), t // 3)
        agent.resolve(window(), obs_for())
        assert 0.05 - 1e-9 <= st.offered_price <= 0.5 + 1e-9
        # snapped to the step grid
        assert abs(st.offered_price / 0.05 - round(st.offered_price / 0.05)) < 1e-6


def test_state_discretization_covers_range():
    ids = {
        discretize_state(load, h * 3600, soc)
        for load in (0.0, 0.3, 0.6, 0.9, 1.2, 5.0)
        for h in range(24)
        for soc in (0.0, 0.3, 0.6, 1.0)
    }
    assert min(ids) == 0 and max(ids) == N_STATES - 1 and len(ids) == N_STATES


def test_hour_encoding_is_periodic():
    for t in (0, 3 * 3600, 86399):
        s1, c1 = time_features(t)
        s2, c2 = time_features(t + 86400)
        assert math.isclose(s1, s2) and math.isclose(c1, c2)
