"""Run metrics, their JSON serialization, and CSV reports."""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .grid import DAY, SYNC_INTERVAL

OVERLOAD = 1.0
WINDOWS_PER_DAY = DAY // SYNC_INTERVAL


@dataclass
class VehicleLedger:
    id: int
    initial_kwh: float
    charged_kwh: float
    driven_kwh: float
    final_kwh: float
    stranded: int
    sessions: int

    @property
    def balance_error(self) -> float:
        return self.final_kwh - (self.initial_kwh + self.charged_kwh - self.driven_kwh)


@dataclass
class MetricsRecord:
    name: str
    profile: str
    seed: int
    duration: int
    substation_ids: list[int] = field(default_factory=list)
    window_mean: list[list[float]] = field(default_factory=list)
    window_max: list[list[float]] = field(default_factory=list)
    # (agent id, day, decision time, action, reward)
    rewards: list[tuple[int, int, int, int, float]] = field(default_factory=list)
    decisions: dict[int, int] = field(default_factory=dict)
    vehicles: list[VehicleLedger] = field(default_factory=list)
    arrivals: int = 0
    arrivals_at_stations: int = 0
    arrivals_with_space: int = 0

    @property
    def n_windows(self) -> int:
        return len(self.window_max[0]) if self.window_max else 0

    def max_array(self) -> np.ndarray:
        return np.asarray(self.window_max, dtype=float).reshape(len(self.substation_ids), self.n_windows)

    def mean_array(self) -> np.ndarray:
        return np.asarray(self.window_mean, dtype=float).reshape(len(self.substation_ids), self.n_windows)

    def global_max(self) -> float:
        arr = self.max_array()
        return float(arr.max()) if arr.size else 0.0

    def daily_means(self) -> np.ndarray:
        """Mean loading per (substation, day)."""
        arr = self.mean_array()
        days = np.arange(arr.shape[1]) // WINDOWS_PER_DAY
        n_days = int(days.max()) + 1 if days.size else 0
        out = np.zeros((arr.shape[0], n_days))
        for d in range(n_days):
            out[:, d] = arr[:, days == d].mean(axis=1)
        return out

    def mean_daily_mean(self) -> float:
        dm = self.daily_means()
        return float(dm.mean()) if dm.size else 0.0

    def reward_by_day(self) -> dict[int, list[float]]:
        out: dict[int, list[float]] = defaultdict(list)
        for _agent, day, _t, _a, r in self.rewards:
            out[day].append(r)
        return dict(sorted(out.items()))

    def day_mean_reward(self, day: int) -> float:
        values = self.reward_by_day().get(day, [])
        return float(np.mean(values)) if values else float("nan")

    def overload_counts(self) -> dict[int, int]:
        arr = self.max_array()
        return {sid: int((arr[i] > OVERLOAD).sum()) for i, sid in enumerate(self.substation_ids)}

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MetricsRecord":
        data = json.loads(text)
        data["vehicles"] = [VehicleLedger(**v) for v in data["vehicles"]]
        data["rewards"] = [tuple(r) for r in data["rewards"]]
        data["decisions"] = {int(k): v for k, v in data["decisions"].items()}
        return cls(**data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8", newline="")

    @classmethod
    def load(cls, path: str | Path) -> "MetricsRecord":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


REPORT_FILES = {
    "substation_daily": ["day", "substation", "max_loading", "mean_loading"],
    "daily_maxima": ["day", "max_of_5min_maxima", "mean_of_5min_maxima"],
    "daily_reward": ["day", "profile", "mean_reward", "count"],
    "reward_change": ["profile", "first_day", "last_day", "first_day_mean", "last_day_mean", "delta"],
    "overloads": ["substation", "overload_windows", "max_loading"],
    "vehicle_energy": [
        "vehicle", "initial_kwh", "charged_kwh", "driven_kwh", "final_kwh", "balance_error", "stranded", "sessions",
    ],
}


def _write(path: Path, header: list[str], rows) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=",", lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _f(x: float) -> str:
    return repr(float(x))


def report(metrics: MetricsRecord, out_dir: str | Path) -> list[Path]:
    """Write the CSV reports into ``out_dir``; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    maxima = metrics.max_array()
    means = metrics.mean_array()
    n_win = maxima.shape[1] if maxima.size else 0
    days = np.arange(n_win) // WINDOWS_PER_DAY
    n_days = int(days.max()) + 1 if n_win else 0

    rows = {name: [] for name in REPORT_FILES}
    for d in range(n_days):
        sel = days == d
        for i, sid in enumerate(metrics.substation_ids):
            rows["substation_daily"].append([d, sid, _f(maxima[i, sel].max()), _f(means[i, sel].mean())])
        block = maxima[:, sel]
        rows["daily_maxima"].append([d, _f(block.max()), _f(block.mean())])

    by_day = metrics.reward_by_day()
    for d, values in by_day.items():
        rows["daily_reward"].append([d, metrics.profile, _f(np.mean(values)), len(values)])
    if by_day:
        first, last = min(by_day), max(by_day)
        a, b = np.mean(by_day[first]), np.mean(by_day[last])
        rows["reward_change"].append([metrics.profile, first, last, _f(a), _f(b), _f(b - a)])

    for i, sid in enumerate(metrics.substation_ids):
        count = int((maxima[i] > OVERLOAD).sum()) if n_win else 0
        peak = _f(maxima[i].max()) if n_win else ""
        rows["overloads"].append([sid, count, peak])

    for v in metrics.vehicles:
        rows["vehicle_energy"].append([
            v.id, _f(v.initial_kwh), _f(v.charged_kwh), _f(v.driven_kwh), _f(v.final_kwh),
            _f(v.balance_error), v.stranded, v.sessions,
        ])

    paths = []
    for name, header in REPORT_FILES.items():
        path = out / f"{name}.csv"
        _write(path, header, rows[name])
        paths.append(path)
    return paths
