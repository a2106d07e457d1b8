"""Decision algorithms: LinUCB (disjoint and hybrid) and tabular Q-learning.

LinUCB keeps, per arm, the ridge-regression design matrix ``A`` and the
reward-weighted context sum ``b``. Matrices are stored explicitly and solved
on demand; dimensions here are small (d <= ~12) so no inverse caching.

Hybrid mode follows Li, Chu, Langford and Schapire (2010), Algorithm 2. With
``z`` the shared features (dimension k) and ``x`` the arm features
(dimension d)::

    beta  = A0^-1 b0
    theta = A^-1 (b - B beta)
    s     = z' A0^-1 z
            - 2 z' A0^-1 B' A^-1 x
            + x' A^-1 x
            + x' A^-1 B A0^-1 B' A^-1 x
    p     = z' beta + x' theta + alpha * sqrt(s)

and the update of the chosen arm::

    A0 += B' A^-1 B            b0 += B' A^-1 b
    A  += x x'                 B  += x z'          b += r x
    A0 += z z' - B' A^-1 B     b0 += r z - B' A^-1 b

where the last line uses the *updated* A, B and b.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractError

SNAPSHOT_FORMAT = "evcharge-learner"
SNAPSHOT_VERSION = 1


def as_context(values, dim: int | None = None) -> np.ndarray:
    """Validate and convert a context vector to a float array."""
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ContractError(f"context must be a non-empty 1-d vector, got shape {x.shape}")
    if dim is not None and x.size != dim:
        raise ContractError(f"context has length {x.size}, expected {dim}")
    if not np.all(np.isfinite(x)):
        raise ContractError("context contains non-finite entries")
    return x


@dataclass
class ArmState:
    arm_id: int
    A: np.ndarray
    b: np.ndarray
    B: np.ndarray | None = None  # d x k cross term, hybrid only

    @classmethod
    def fresh(cls, arm_id: int, d: int, k: int = 0) -> "ArmState":
        return cls(
            arm_id=arm_id,
            A=np.eye(d),
            b=np.zeros(d),
            B=np.zeros((d, k)) if k else None,
        )

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    def theta(self, beta: np.ndarray | None = None) -> np.ndarray:
        rhs = self.b if beta is None else self.b - self.B @ beta
        return np.linalg.solve(self.A, rhs)


@dataclass
class SharedState:
    A0: np.ndarray
    b0: np.ndarray

    @classmethod
    def fresh(cls, k: int) -> "SharedState":
        return cls(A0=np.eye(k), b0=np.zeros(k))

    @property
    def dim(self) -> int:
        return self.b0.shape[0]

    def beta(self) -> np.ndarray:
        return np.linalg.solve(self.A0, self.b0)


@dataclass
class LinUcbConfig:
    alpha: float = 1.0
    dimension: int = 10
    shared_dimension: int = 0
    arm_count: int = 5

    def __post_init__(self):
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise ContractError(f"alpha must be finite and >= 0, got {self.alpha}")
        if self.dimension < 1:
            raise ContractError("dimension must be >= 1")
        if self.shared_dimension < 0:
            raise ContractError("shared_dimension must be >= 0")
        if self.arm_count < 2:
            raise ContractError("arm_count must be >= 2")

    @property
    def hybrid(self) -> bool:
        return self.shared_dimension > 0


def _check_mode(arm: ArmState, shared: SharedState | None, z) -> np.ndarray | None:
    hybrid = arm.B is not None
    if hybrid != (shared is not None) or hybrid != (z is not None):
        raise ContractError("shared state and shared context must be given iff the arm is hybrid")
    if not hybrid:
        return None
    return as_context(z, shared.dim)


def linucb_predict(
    arm: ArmState,
    shared: SharedState | None,
    x,
    z=None,
    alpha: float = 1.0,
) -> float:
    """Upper confidence bound of the expected reward of ``arm`` for context ``x``."""
    x = as_context(x, arm.dim)
    z = _check_mode(arm, shared, z)
    Ainv_x = np.linalg.solve(arm.A, x)
    if z is None:
        theta = arm.theta()
        var = float(x @ Ainv_x)
        mean = float(theta @ x)
    else:
        beta = shared.beta()
        theta = arm.theta(beta)
        A0inv_z = np.linalg.solve(shared.A0, z)
        Bt_Ainv_x = arm.B.T @ Ainv_x
        A0inv_Bt_Ainv_x = np.linalg.solve(shared.A0, Bt_Ainv_x)
        var = float(
            z @ A0inv_z
            - 2.0 * (A0inv_z @ Bt_Ainv_x)
            + x @ Ainv_x
            + Bt_Ainv_x @ A0inv_Bt_Ainv_x
        )
        mean = float(z @ beta + theta @ x)
    # roundoff can push a zero variance slightly negative
    return mean + alpha * math.sqrt(max(var, 0.0))


def linucb_select(
    arms: Sequence[ArmState],
    shared: SharedState | None,
    contexts: Sequence,
    valid: Iterable[int],
    alpha: float,
    rng: np.random.Generator,
    z=None,
    atol: float = 1e-12,
) -> int:
    """Arm id maximizing ``linucb_predict`` over ``valid``; ties broken uniformly via ``rng``.

    ``contexts`` holds one context per arm, indexed like ``arms``.
    """
    valid = sorted(set(valid))
    if not valid:
        raise ContractError("valid arm set is empty")
    if len(contexts) != len(arms):
        raise ContractError(f"need one context per arm ({len(arms)}), got {len(contexts)}")
    by_id = {arm.arm_id: i for i, arm in enumerate(arms)}
    scores = []
    for a in valid:
        if a not in by_id:
            raise ContractError(f"unknown arm id {a}")
        i = by_id[a]
        scores.append(linucb_predict(arms[i], shared, contexts[i], z, alpha))
    best = max(scores)
    tied = [a for a, p in zip(valid, scores) if p >= best - atol]
    if len(tied) == 1:
        return tied[0]
    return tied[int(rng.integers(len(tied)))]


def linucb_update(arm: ArmState, shared: SharedState | None, x, r: float, z=None) -> None:
    """Fold one observed (context, reward) pair into the arm (and shared) history."""
    if not math.isfinite(r):
        raise ContractError(f"reward must be finite, got {r}")
    x = as_context(x, arm.dim)
    z = _check_mode(arm, shared, z)
    if z is None:
        arm.A += np.outer(x, x)
        arm.b += r * x
        return
    Ainv_B = np.linalg.solve(arm.A, arm.B)
    Ainv_b = np.linalg.solve(arm.A, arm.b)
    shared.A0 += arm.B.T @ Ainv_B
    shared.b0 += arm.B.T @ Ainv_b
    arm.A += np.outer(x, x)
    arm.B += np.outer(x, z)
    arm.b += r * x
    Ainv_B = np.linalg.solve(arm.A, arm.B)
    Ainv_b = np.linalg.solve(arm.A, arm.b)
    shared.A0 += np.outer(z, z) - arm.B.T @ Ainv_B
    shared.b0 += r * z - arm.B.T @ Ainv_b
    # keep A0 exactly symmetric against roundoff drift
    shared.A0 = 0.5 * (shared.A0 + shared.A0.T)


class LinUCB:
    """A LinUCB learner owning its arm states (and shared state in hybrid mode)."""

    def __init__(self, config: LinUcbConfig):
        self.config = config
        d, k = config.dimension, config.shared_dimension
        self.arms = [ArmState.fresh(a, d, k) for a in range(config.arm_count)]
        self.shared = SharedState.fresh(k) if config.hybrid else None

    @property
    def alpha(self) -> float:
        return self.config.alpha

    def predict(self, arm_id: int, x, z=None) -> float:
        return linucb_predict(self.arms[arm_id], self.shared, x, z, self.alpha)

    def select(self, x, valid, rng, z=None) -> int:
        contexts = [x] * len(self.arms)
        return linucb_select(self.arms, self.shared, contexts, valid, self.alpha, rng, z=z)

    def update(self, arm_id: int, x, r: float, z=None) -> None:
        linucb_update(self.arms[arm_id], self.shared, x, r, z)

    def to_dict(self) -> dict:
        return {
            "format": SNAPSHOT_FORMAT,
            "version": SNAPSHOT_VERSION,
            "kind": "linucb",
            "alpha": self.config.alpha,
            "dimension": self.config.dimension,
            "shared_dimension": self.config.shared_dimension,
            "arms": [
                {
                    "arm_id": arm.arm_id,
                    "A": _matrix(arm.A),
                    "b": _matrix(arm.b),
                    "B": _matrix(arm.B) if arm.B is not None else None,
                }
                for arm in self.arms
            ],
            "shared": (
                {"A0": _matrix(self.shared.A0), "b0": _matrix(self.shared.b0)}
                if self.shared is not None
                else None
            ),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LinUCB":
        _check_header(data, "linucb")
        cfg = LinUcbConfig(
            alpha=data["alpha"],
            dimension=data["dimension"],
            shared_dimension=data["shared_dimension"],
            arm_count=len(data["arms"]),
        )
        learner = cls(cfg)
        for arm, raw in zip(learner.arms, data["arms"]):
            arm.arm_id = raw["arm_id"]
            arm.A = _unmatrix(raw["A"])
            arm.b = _unmatrix(raw["b"])
            arm.B = _unmatrix(raw["B"]) if raw["B"] is not None else None
        if data["shared"] is not None:
            learner.shared = SharedState(_unmatrix(data["shared"]["A0"]), _unmatrix(data["shared"]["b0"]))
        return learner


# -- Q-learning ---------------------------------------------------------------


@dataclass
class QLearnerConfig:
    learning_rate: float = 0.1
    discount: float = 0.9
    epsilon: float = 0.1
    initial_value: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.learning_rate <= 1.0:
            raise ContractError(f"learning_rate must lie in [0, 1], got {self.learning_rate}")
        if not 0.0 <= self.discount <= 1.0:
            raise ContractError(f"discount must lie in [0, 1], got {self.discount}")
        if not 0.0 < self.epsilon <= 1.0:
            raise ContractError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if not math.isfinite(self.initial_value):
            raise ContractError("initial_value must be finite")


@dataclass
class QTable:
    """Sparse action-value table; unseen pairs read as ``initial_value``."""

    n_actions: int
    initial_value: float = 0.0
    values: dict[tuple[int, int], float] = field(default_factory=dict)

    def get(self, s: int, a: int) -> float:
        return self.values.get((s, a), self.initial_value)

    def set(self, s: int, a: int, v: float) -> None:
        self.values[(s, a)] = v

    def row(self, s: int) -> list[float]:
        return [self.get(s, a) for a in range(self.n_actions)]

    def to_dict(self) -> dict:
        return {
            "format": SNAPSHOT_FORMAT,
            "version": SNAPSHOT_VERSION,
            "kind": "qtable",
            "n_actions": self.n_actions,
            "initial_value": self.initial_value,
            "entries": [[s, a, v] for (s, a), v in sorted(self.values.items())],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QTable":
        _check_header(data, "qtable")
        table = cls(n_actions=data["n_actions"], initial_value=data["initial_value"])
        for s, a, v in data["entries"]:
            table.values[(int(s), int(a))] = float(v)
        return table


def q_update(table: QTable, cfg: QLearnerConfig, s: int, a: int, r: float, s_next: int) -> float:
    """One temporal-difference step; returns the new Q(s, a)."""
    if not math.isfinite(r):
        raise ContractError(f"reward must be finite, got {r}")
    q = table.get(s, a)
    target = r + cfg.discount * max(table.row(s_next))
    q_new = q + cfg.learning_rate * (target - q)
    table.set(s, a, q_new)
    return q_new


def epsilon_greedy_select(
    table: QTable,
    cfg: QLearnerConfig,
    s: int,
    valid: Iterable[int],
    rng: np.random.Generator,
) -> int:
    """Greedy with probability 1 - epsilon, else a uniform non-optimal valid action.

    When every valid action is tied-optimal there is nothing to explore, so the
    draw is uniform over all of them.
    """
    valid = sorted(set(valid))
    if not valid:
        raise ContractError("valid action set is empty")
    if len(valid) == 1:
        return valid[0]
    q = [table.get(s, a) for a in valid]
    best = max(q)
    optimal = [a for a, v in zip(valid, q) if v == best]
    others = [a for a, v in zip(valid, q) if v != best]
    explore = rng.random() < cfg.epsilon
    pool = others if explore and others else optimal
    if len(pool) == 1:
        return pool[0]
    return pool[int(rng.integers(len(pool)))]


# -- snapshots ----------------------------------------------------------------


def _matrix(arr: np.ndarray) -> dict:
    arr = np.asarray(arr, dtype=float)
    return {"shape": list(arr.shape), "data": arr.ravel(order="C").tolist()}


def _unmatrix(raw: dict) -> np.ndarray:
    return np.asarray(raw["data"], dtype=float).reshape(raw["shape"], order="C")


def _check_header(data: dict, kind: str) -> None:
    if data.get("format") != SNAPSHOT_FORMAT:
        raise ContractError(f"not a learner snapshot: format={data.get('format')!r}")
    if data.get("version") != SNAPSHOT_VERSION:
        raise ContractError(f"unsupported snapshot version {data.get('version')!r}")
    if data.get("kind") != kind:
        raise ContractError(f"snapshot holds {data.get('kind')!r}, expected {kind!r}")


def dump_snapshot(learner: LinUCB | QTable) -> str:
    """Serialize a learner to JSON text. Floats are written with full precision."""
    return json.dumps(learner.to_dict(), sort_keys=True)


def load_snapshot(text: str) -> LinUCB | QTable:
    data = json.loads(text)
    if data.get("kind") == "linucb":
        return LinUCB.from_dict(data)
    return QTable.from_dict(data)
