"""Charging-station decision agents.

An agent fires whenever a vehicle arrives at its station with a free space.
It first settles the reward of its previous decision over the interval since
that decision, then picks a new action and applies it to the station offer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .bandits import (
    LinUCB,
    LinUcbConfig,
    QLearnerConfig,
    QTable,
    epsilon_greedy_select,
    q_update,
)
from .errors import ContractError
from .grid import DAY, LoadWindow
from .mobility import POWER_LEVELS, ChargingStation

CONTEXT_DIM = 10
SHARED_DIM = 3
NEIGHBOR_SLOTS = 5
NEIGHBOR_CLIP = 1.5

# Q-learning state grid: 5 loading bins x 6 hour bins x 4 SoC bins
LOAD_BINS, HOUR_BINS, SOC_BINS = 5, 6, 4
N_STATES = LOAD_BINS * HOUR_BINS * SOC_BINS

KEEP, INCREASE, DECREASE = 0, 1, 2


class Variant(str, Enum):
    A = "A"
    B = "B"


class Target(str, Enum):
    PRICE = "Price"
    POWER = "Power"


class UtilityVariant(str, Enum):
    PRICE = "Price"
    INCOME = "Income"


class Profile(str, Enum):
    CONSTANT_LOADING = "ConstantLoading"
    WORKLOAD_PROPORTIONAL = "WorkloadProportional"
    RANDOM = "Random"
    LINUCB_DISJUNCT = "LinUCB_Disjunct"
    LINUCB_HYBRID = "LinUCB_Hybrid"
    QLEARNING = "QLearning"


@dataclass(frozen=True)
class ActionModel:
    variant: Variant = Variant.B
    target: Target = Target.POWER
    price_min: float = 0.05
    price_max: float = 0.50
    price_step: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "target", Target(self.target))
        if self.variant is Variant.A and self.target is not Target.PRICE:
            raise ContractError("action variant A only supports the Price target")
        if not 0 <= self.price_min <= self.price_max:
            raise ContractError("price bounds must satisfy 0 <= min <= max")
        if self.variant is Variant.A and not self.price_step > 0:
            raise ContractError("price_step must be > 0")

    @property
    def n_actions(self) -> int:
        return 3 if self.variant is Variant.A else len(POWER_LEVELS)

    def price_level(self, action: int) -> float:
        return round(self.price_max * POWER_LEVELS[action], 10)

    def apply(self, station: ChargingStation, action: int) -> None:
        if not 0 <= action < self.n_actions:
            raise ContractError(f"action {action} out of range for variant {self.variant.value}")
        if self.variant is Variant.A:
            if action == INCREASE:
                station.offered_price = round(station.offered_price + self.price_step, 10)
            elif action == DECREASE:
                station.offered_price = round(station.offered_price - self.price_step, 10)
        elif self.target is Target.POWER:
            station.offered_power_fraction = POWER_LEVELS[action]
        else:
            station.offered_price = self.price_level(action)

    def nearest_level(self, value: float, levels: Sequence[float]) -> int:
        return min(range(len(levels)), key=lambda i: (abs(levels[i] - value), i))


@dataclass(frozen=True)
class UtilityParams:
    variant: UtilityVariant = UtilityVariant.INCOME
    gamma: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "variant", UtilityVariant(self.variant))
        if not math.isfinite(self.gamma):
            raise ContractError("utility gamma must be finite")


@dataclass
class Observation:
    x: np.ndarray
    z: np.ndarray
    state_id: int
    own_loading: float


@dataclass
class PendingDecision:
    agent_id: int
    action: int
    obs: Observation
    time: int
    resolved: bool = False

    @property
    def x(self) -> np.ndarray:
        return self.obs.x

    @property
    def z(self) -> np.ndarray:
        return self.obs.z

    @property
    def state_id(self) -> int:
        return self.obs.state_id


def time_features(t: int) -> tuple[float, float]:
    angle = 2.0 * math.pi * ((t % DAY) / 3600.0) / 24.0
    return math.sin(angle), math.cos(angle)


def build_context(
    station: ChargingStation,
    published: Mapping[int, float],
    neighbors: Sequence[int],
    t: int,
    soc: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Arm context ``x`` (d=10) and shared context ``z`` (k=3).

    x = [station occupancy, own substation loading, 5 neighbor loadings,
         sin(hour), cos(hour), SoC]; neighbors are zero-padded and scaled by
    ``min(l, 1.5) / 1.5``. z = [sin(hour), cos(hour), SoC].
    """
    x = np.zeros(CONTEXT_DIM)
    x[0] = station.relative_load
    x[1] = published[station.substation]
    for slot, sub in enumerate(neighbors[:NEIGHBOR_SLOTS]):
        x[2 + slot] = min(published[sub], NEIGHBOR_CLIP) / NEIGHBOR_CLIP
    s, c = time_features(t)
    x[7], x[8], x[9] = s, c, soc
    return x, np.array([s, c, soc])


def discretize_state(own_loading: float, t: int, soc: float) -> int:
    load_bin = min(max(int(own_loading / 0.25), 0), LOAD_BINS - 1)
    hour_bin = min(int((t % DAY) / 3600) // 4, HOUR_BINS - 1)
    soc_bin = min(max(int(soc * SOC_BINS), 0), SOC_BINS - 1)
    return (load_bin * HOUR_BINS + hour_bin) * SOC_BINS + soc_bin


def valid_actions(model: ActionModel, current_price: float, actions_this_step: set[int] = frozenset()) -> set[int]:
    """Actions available to an agent given its price and the actions it already took this step."""
    if model.variant is Variant.B:
        return set(range(model.n_actions))
    eps = 1e-9
    valid = {KEEP}
    if current_price + model.price_step <= model.price_max + eps and DECREASE not in actions_this_step:
        valid.add(INCREASE)
    if current_price - model.price_step >= model.price_min - eps and INCREASE not in actions_this_step:
        valid.add(DECREASE)
    return valid


def compute_reward(window: LoadWindow, params: UtilityParams) -> float:
    load_term = -window.mean_load - window.max_load
    if params.variant is UtilityVariant.PRICE:
        return load_term - params.gamma * window.mean_price
    return load_term + params.gamma * window.income


# -- policies -----------------------------------------------------------------


class Policy:
    learns = False

    def __init__(self, model: ActionModel):
        self.model = model

    def choose(self, obs: Observation, station: ChargingStation, valid: set[int], rng) -> int:
        raise NotImplementedError

    def learn(self, pending: PendingDecision, reward: float, obs_next: Observation) -> None:
        pass


class ConstantPolicy(Policy):
    """Never changes the offer: keep the price, or 100 % power."""

    def choose(self, obs, station, valid, rng):
        m = self.model
        if m.variant is Variant.A:
            return KEEP
        if m.target is Target.POWER:
            return len(POWER_LEVELS) - 1
        levels = [m.price_level(i) for i in range(m.n_actions)]
        return m.nearest_level(station.offered_price, levels)


class RandomPolicy(Policy):
    def choose(self, obs, station, valid, rng):
        options = sorted(valid)
        return options[int(rng.integers(len(options)))]


class WorkloadProportionalPolicy(Policy):
    """Offer power falling, or price rising, with the own substation's loading."""

    def choose(self, obs, station, valid, rng):
        m = self.model
        load = obs.own_loading
        if m.target is Target.POWER:
            wanted = min(max(1.0 - load, POWER_LEVELS[0]), POWER_LEVELS[-1])
            return m.nearest_level(wanted, POWER_LEVELS)
        price = m.price_min + (m.price_max - m.price_min) * min(max(load, 0.0), 1.0)
        if m.variant is Variant.B:
            return m.nearest_level(price, [m.price_level(i) for i in range(m.n_actions)])
        half = m.price_step / 2
        if price > station.offered_price + half and INCREASE in valid:
            return INCREASE
        if price < station.offered_price - half and DECREASE in valid:
            return DECREASE
        return KEEP


class LinUCBPolicy(Policy):
    learns = True

    def __init__(self, model: ActionModel, alpha: float, hybrid: bool):
        super().__init__(model)
        self.hybrid = hybrid
        self.learner = LinUCB(
            LinUcbConfig(
                alpha=alpha,
                dimension=CONTEXT_DIM,
                shared_dimension=SHARED_DIM if hybrid else 0,
                arm_count=model.n_actions,
            )
        )

    def choose(self, obs, station, valid, rng):
        return self.learner.select(obs.x, valid, rng, z=obs.z if self.hybrid else None)

    def learn(self, pending, reward, obs_next):
        self.learner.update(pending.action, pending.x, reward, z=pending.z if self.hybrid else None)


class QLearningPolicy(Policy):
    learns = True

    def __init__(self, model: ActionModel, cfg: QLearnerConfig):
        super().__init__(model)
        self.cfg = cfg
        self.table = QTable(n_actions=model.n_actions, initial_value=cfg.initial_value)

    def choose(self, obs, station, valid, rng):
        return epsilon_greedy_select(self.table, self.cfg, obs.state_id, valid, rng)

    def learn(self, pending, reward, obs_next):
        q_update(self.table, self.cfg, pending.state_id, pending.action, reward, obs_next.state_id)


def make_policy(
    profile: Profile | str,
    model: ActionModel,
    alpha: float = 1.0,
    q_config: QLearnerConfig | None = None,
) -> Policy:
    profile = Profile(profile)
    if profile is Profile.CONSTANT_LOADING:
        return ConstantPolicy(model)
    if profile is Profile.RANDOM:
        return RandomPolicy(model)
    if profile is Profile.WORKLOAD_PROPORTIONAL:
        return WorkloadProportionalPolicy(model)
    if profile is Profile.LINUCB_DISJUNCT:
        return LinUCBPolicy(model, alpha, hybrid=False)
    if profile is Profile.LINUCB_HYBRID:
        return LinUCBPolicy(model, alpha, hybrid=True)
    return QLearningPolicy(model, q_config or QLearnerConfig())


@dataclass
class StationAgent:
    station: ChargingStation
    policy: Policy
    utility: UtilityParams
    rng: np.random.Generator
    pending: PendingDecision | None = None
    rewards: list[tuple[int, int, int, float]] = field(default_factory=list)  # (day, t, action, r)
    decisions: int = 0
    _step: int = -1
    _step_actions: set[int] = field(default_factory=set)

    @property
    def id(self) -> int:
        return self.station.id

    @property
    def model(self) -> ActionModel:
        return self.policy.model

    def valid(self, t: int) -> set[int]:
        if t != self._step:
            self._step, self._step_actions = t, set()
        return valid_actions(self.model, self.station.offered_price, self._step_actions)

    def decide(self, obs: Observation, t: int) -> int:
        if self.pending is not None and not self.pending.resolved:
            raise ContractError(f"agent {self.id} decides with an unresolved pending decision")
        valid = self.valid(t)
        action = self.policy.choose(obs, self.station, valid, self.rng)
        if action not in valid:
            raise ContractError(f"agent {self.id} chose invalid action {action}")
        self.model.apply(self.station, action)
        self._step_actions.add(action)
        self.pending = PendingDecision(self.id, action, obs, t)
        self.decisions += 1
        return action

    def resolve(self, window: LoadWindow, obs_next: Observation) -> float:
        pending = self.pending
        if pending is None or pending.resolved:
            raise ContractError(f"agent {self.id} has no pending decision to resolve")
        reward = compute_reward(window, self.utility)
        self.policy.learn(pending, reward, obs_next)
        pending.resolved = True
        self.rewards.append((pending.time // DAY, pending.time, pending.action, reward))
        return reward


def resolve_pending(agent: StationAgent, pending: PendingDecision, window: LoadWindow, obs_next: Observation) -> float:
    if agent.pending is not pending:
        raise ContractError("pending decision does not belong to this agent")
    return agent.resolve(window, obs_next)
