"""Transformer-loading surrogate for low-voltage distribution grids.

Loading of a substation at second ``t`` is ``(base_kw(t) + charging_kw(t)) / rated_kw``.
Charging power is registered as piecewise-constant segments; the grid is
evaluated in 300 s windows, each yielding the window mean and maximum of the
per-second loading. Agents only see the means published at the last sync.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractError

SYNC_INTERVAL = 300
DAY = 86400
MAX_NEIGHBORS = 5
# charging power is accumulated in integer microwatts so segments cancel exactly
_UW_PER_KW = 1_000_000_000


class GridType(str, Enum):
    RESIDENTIAL = "residential"
    COMMERCIAL = "commercial"
    INDUSTRIAL = "industrial"


# Normalized daily shapes (hour, fraction of daily peak), linear in between.
BASE_SHAPES: dict[GridType, tuple[tuple[float, ...], tuple[float, ...]]] = {
    GridType.RESIDENTIAL: (
        (0, 3, 6, 8, 11, 14, 17, 19, 21, 24),
        (0.45, 0.35, 0.45, 0.65, 0.55, 0.55, 0.75, 1.0, 0.8, 0.45),
    ),
    GridType.COMMERCIAL: (
        (0, 6, 8, 12, 17, 19, 24),
        (0.3, 0.3, 0.85, 1.0, 0.95, 0.45, 0.3),
    ),
    GridType.INDUSTRIAL: (
        (0, 6, 7, 15, 17, 22, 24),
        (0.5, 0.5, 1.0, 1.0, 0.8, 0.55, 0.5),
    ),
}


def base_profile_day(grid_type: GridType | str, peak_kw: float) -> np.ndarray:
    """Per-second base load in kW over one day; the maximum equals ``peak_kw``."""
    hours, shape = BASE_SHAPES[GridType(grid_type)]
    seconds = np.arange(DAY, dtype=float)
    return peak_kw * np.interp(seconds, np.asarray(hours) * 3600.0, shape)


@dataclass
class Substation:
    id: int
    rated_power: float
    grid_type: GridType = GridType.RESIDENTIAL
    neighbors: list[int] = field(default_factory=list)
    base_peak_loading: float = 0.55

    def __post_init__(self):
        self.grid_type = GridType(self.grid_type)
        if not self.rated_power > 0:
            raise ContractError(f"substation {self.id}: rated_power must be > 0")
        if len(self.neighbors) > MAX_NEIGHBORS:
            raise ContractError(f"substation {self.id}: at most {MAX_NEIGHBORS} neighbors")
        if self.id in self.neighbors:
            raise ContractError(f"substation {self.id} lists itself as a neighbor")
        if self.base_peak_loading < 0:
            raise ContractError(f"substation {self.id}: base_peak_loading must be >= 0")
        self._day: np.ndarray | None = None

    @property
    def base_day(self) -> np.ndarray:
        if self._day is None:
            self._day = base_profile_day(self.grid_type, self.base_peak_loading * self.rated_power)
        return self._day

    def base_profile(self, t: int) -> float:
        """Base load in kW at simulation second ``t``."""
        return float(self.base_day[int(t) % DAY])


@dataclass(frozen=True)
class LoadSample:
    time: int
    loading: float


@dataclass(frozen=True)
class LoadWindow:
    mean_load: float
    max_load: float
    mean_price: float
    income: float
    start: int
    end: int


def instantaneous_loading(sub: Substation, t: int, charging_kw: float) -> float:
    if charging_kw < 0:
        raise ContractError(f"charging power must be >= 0, got {charging_kw}")
    return (sub.base_profile(t) + charging_kw) / sub.rated_power


def _price_terms(transactions: Iterable[tuple[float, float]]) -> tuple[float, float]:
    prices = []
    income = 0.0
    for price, energy in transactions:
        prices.append(price)
        income += price * energy
    return (sum(prices) / len(prices) if prices else 0.0), income


def window_from_loadings(
    mean_load: float,
    max_load: float,
    transactions: Iterable[tuple[float, float]],
    start: int,
    end: int,
) -> LoadWindow:
    mean_price, income = _price_terms(transactions)
    return LoadWindow(mean_load, max_load, mean_price, income, start, end)


def aggregate_window(
    samples: Sequence[LoadSample],
    transactions: Iterable[tuple[float, float]] = (),
    start: int | None = None,
    end: int | None = None,
) -> LoadWindow:
    """Reduce load samples and ``(price, energy_kwh)`` transactions to a LoadWindow.

    The window defaults to ``[first sample time, last sample time + 1)``.
    """
    if not samples:
        raise ContractError("cannot aggregate an empty sample list")
    loadings = np.fromiter((s.loading for s in samples), dtype=float, count=len(samples))
    start = samples[0].time if start is None else start
    end = samples[-1].time + 1 if end is None else end
    return window_from_loadings(float(loadings.mean()), float(loadings.max()), transactions, start, end)


class GridState:
    """Charging-power bookkeeping and 5-minute window evaluation for all substations.

    ``add_power`` registers constant power over a span of seconds. Windows are
    closed by ``sync_tick`` (every 300 s) and by ``finalize`` at the end of a run.
    """

    def __init__(self, substations: Sequence[Substation], duration: int):
        if duration < 1:
            raise ContractError("duration must be >= 1")
        self.substations = list(substations)
        self.index = {s.id: i for i, s in enumerate(self.substations)}
        self.duration = duration
        self.n_windows = math.ceil(duration / SYNC_INTERVAL)
        n = len(self.substations)
        self.rated = np.array([s.rated_power for s in self.substations], dtype=float)
        self.base = (
            np.stack([s.base_day for s in self.substations]) if n else np.zeros((0, DAY))
        )
        # deltas[w] holds (substation index, offset in window, delta uW)
        self._deltas: list[list[tuple[int, int, int]]] = [[] for _ in range(self.n_windows + 1)]
        self._carry = np.zeros((self.n_windows + 1, n), dtype=np.int64)
        self._closed = 0  # windows [0, _closed) are final
        self.window_mean = np.zeros((n, self.n_windows))
        self.window_max = np.zeros((n, self.n_windows))
        self.window_sum = np.zeros((n, self.n_windows))
        self.published = self.base[:, 0] / self.rated if n else np.zeros(0)
        self.published_at = 0

    # -- registration -----------------------------------------------------

    def add_power(self, sub_id: int, start: int, end: int, kw: float) -> None:
        """Add ``kw`` of charging load on seconds ``[start, end)``."""
        if kw < 0:
            raise ContractError(f"charging power must be >= 0, got {kw}")
        end = min(end, self.duration)
        if end <= start or kw == 0:
            return
        if start < self._closed * SYNC_INTERVAL:
            raise ContractError(f"cannot add power at t={start}: window already closed")
        i = self.index[sub_id]
        uw = int(round(kw * _UW_PER_KW))
        for t, delta in ((start, uw), (end, -uw)):
            w, off = divmod(t, SYNC_INTERVAL)
            self._deltas[w].append((i, off, delta))

    # -- evaluation -------------------------------------------------------

    def _window_len(self, w: int) -> int:
        return min(SYNC_INTERVAL, self.duration - w * SYNC_INTERVAL)

    def _carry_for(self, w: int) -> np.ndarray:
        if w <= self._closed:
            return self._carry[w]
        carry = self._carry[self._closed].copy()
        for v in range(self._closed, w):
            for i, _off, delta in self._deltas[v]:
                carry[i] += delta
        return carry

    def _window_loadings(self, w: int, row: int | None = None) -> np.ndarray:
        """Per-second loading of window ``w``: shape (n_sub, len), or (len,) for one row."""
        length = self._window_len(w)
        carry = self._carry_for(w)
        t0 = w * SYNC_INTERVAL
        secs = np.arange(t0, t0 + length) % DAY
        if row is not None:
            diff = np.zeros(SYNC_INTERVAL, dtype=np.int64)
            for i, off, delta in self._deltas[w]:
                if i == row:
                    diff[off] += delta
            charging_uw = carry[row] + np.cumsum(diff[:length])
            return (self.base[row, secs] + charging_uw / _UW_PER_KW) / self.rated[row]
        n = len(self.substations)
        diff = np.zeros((n, SYNC_INTERVAL), dtype=np.int64)
        if self._deltas[w]:
            idx, off, delta = zip(*self._deltas[w])
            np.add.at(diff, (np.array(idx), np.array(off)), np.array(delta, dtype=np.int64))
        charging_uw = carry[:, None] + np.cumsum(diff[:, :length], axis=1)
        return (self.base[:, secs] + charging_uw / _UW_PER_KW) / self.rated[:, None]

    def _close(self, w: int) -> None:
        loading = self._window_loadings(w)
        self.window_mean[:, w] = loading.mean(axis=1)
        self.window_max[:, w] = loading.max(axis=1)
        self.window_sum[:, w] = loading.sum(axis=1)
        total = np.zeros(len(self.substations), dtype=np.int64)
        for i, _off, delta in self._deltas[w]:
            total[i] += delta
        self._carry[w + 1] = self._carry[w] + total
        self._closed = w + 1

    def sync_tick(self, t: int) -> None:
        """Close the window ending at ``t`` and publish its mean loadings."""
        if t % SYNC_INTERVAL:
            raise ContractError(f"sync_tick at t={t}, not a multiple of {SYNC_INTERVAL}")
        if t == 0:
            return
        w = t // SYNC_INTERVAL - 1
        if w >= self.n_windows:
            raise ContractError(f"sync_tick at t={t} beyond duration {self.duration}")
        while self._closed <= w:
            self._close(self._closed)
        self.published = self.window_mean[:, w].copy()
        self.published_at = t

    def finalize(self) -> None:
        while self._closed < self.n_windows:
            self._close(self._closed)

    def published_loading(self, sub_id: int) -> float:
        return float(self.published[self.index[sub_id]])

    def loadings(self, sub_id: int, start: int, end: int) -> np.ndarray:
        """Per-second loading of one substation on ``[start, end)``."""
        i = self.index[sub_id]
        parts = []
        for w in range(start // SYNC_INTERVAL, (end - 1) // SYNC_INTERVAL + 1):
            arr = self._window_loadings(w, row=i)
            t0 = w * SYNC_INTERVAL
            parts.append(arr[max(start - t0, 0) : end - t0])
        return np.concatenate(parts) if parts else np.zeros(0)

    def interval_stats(self, sub_id: int, start: int, end: int) -> tuple[float, float]:
        """Mean and max of the per-second loading of one substation on ``[start, end)``."""
        if end <= start:
            raise ContractError(f"empty interval [{start}, {end})")
        end = min(end, self.duration)
        i = self.index[sub_id]
        total = 0.0
        peak = -math.inf
        w_first, w_last = start // SYNC_INTERVAL, (end - 1) // SYNC_INTERVAL
        for w in range(w_first, w_last + 1):
            t0 = w * SYNC_INTERVAL
            t1 = t0 + self._window_len(w)
            if w < self._closed and start <= t0 and t1 <= end:
                total += self.window_sum[i, w]
                peak = max(peak, self.window_max[i, w])
                continue
            arr = self._window_loadings(w, row=i)[max(start - t0, 0) : end - t0]
            total += float(arr.sum())
            peak = max(peak, float(arr.max()))
        return total / (end - start), float(peak)
