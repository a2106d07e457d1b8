"""Recover per-vehicle tours from anonymous trip records.

Trips are nodes; ``f -> g`` is an edge when g starts on the edge f ended on
and departs later. A tour is a path of 2-4 trips whose last trip ends where
the first one started (the closing hop ignores time, as the tour repeats the
next day). Tours are extracted greedily: roots in (depart, id) order,
shortest closing path first, trips consumed on acceptance.

File formats (UTF-8, ',' delimiter, LF):

trips::

    # evcharge-trips v1          (optional)
    id,from_edge,to_edge,depart
    t1,e12,e40,28800

tours::

    # evcharge-tours v1
    vehicle_id,position,trip_id,from_edge,to_edge,depart
"""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ContractError

DAY = 86400
TRIPS_HEADER = "# evcharge-trips v1"
TOURS_HEADER = "# evcharge-tours v1"
TRIP_COLUMNS = ["id", "from_edge", "to_edge", "depart"]
TOUR_COLUMNS = ["vehicle_id", "position", "trip_id", "from_edge", "to_edge", "depart"]


@dataclass(frozen=True)
class TripRecord:
    id: str
    from_edge: str
    to_edge: str
    depart: int

    def __post_init__(self):
        if not 0 <= self.depart < DAY:
            raise ContractError(f"trip {self.id}: depart {self.depart} outside [0, {DAY})")


@dataclass
class TripGraph:
    nodes: list[TripRecord]
    succ: dict[str, list[str]] = field(default_factory=dict)

    @property
    def edges(self) -> list[tuple[str, str]]:
        return [(f, g) for f in self.succ for g in self.succ[f]]

    def node(self, trip_id: str) -> TripRecord:
        return self._by_id[trip_id]

    def __post_init__(self):
        self._by_id = {n.id: n for n in self.nodes}


def _order(trip: TripRecord) -> tuple[int, str]:
    return trip.depart, trip.id


def build_graph(trips: list[TripRecord]) -> TripGraph:
    seen = set()
    for trip in trips:
        if trip.id in seen:
            raise ContractError(f"duplicate trip id {trip.id!r}")
        seen.add(trip.id)
    starting_on: dict[str, list[TripRecord]] = defaultdict(list)
    for trip in trips:
        starting_on[trip.from_edge].append(trip)
    for group in starting_on.values():
        group.sort(key=_order)
    succ = {}
    for f in trips:
        succ[f.id] = [g.id for g in starting_on.get(f.to_edge, ()) if g.depart > f.depart]
    return TripGraph(nodes=list(trips), succ=succ)


def extract_tours(g: TripGraph, min_len: int = 2, max_len: int = 4) -> list[list[TripRecord]]:
    """Vertex-disjoint closing paths of ``min_len``..``max_len`` trips."""
    used: set[str] = set()
    tours = []

    def search(path: list[str], length: int) -> list[str] | None:
        last = path[-1]
        if len(path) == length:
            return path if g.node(last).to_edge == g.node(path[0]).from_edge else None
        for nxt in g.succ[last]:
            if nxt in used or nxt in path:
                continue
            found = search(path + [nxt], length)
            if found:
                return found
        return None

    for root in sorted(g.nodes, key=_order):
        if root.id in used:
            continue
        for length in range(max(min_len, 1), max_len + 1):
            found = search([root.id], length)
            if found:
                used.update(found)
                tours.append([g.node(i) for i in found])
                break
    return tours


def is_valid_tour(trips: list[TripRecord], min_len: int = 2, max_len: int = 4) -> bool:
    if not min_len <= len(trips) <= max_len:
        return False
    for a, b in zip(trips, trips[1:]):
        if a.to_edge != b.from_edge or not b.depart > a.depart:
            return False
    return trips[-1].to_edge == trips[0].from_edge


# -- I/O ----------------------------------------------------------------------


def _data_lines(text: str, header: str, required: bool) -> list[str]:
    lines = text.splitlines()
    if lines and lines[0].startswith("#"):
        if lines[0].strip() != header:
            raise ContractError(f"unsupported format line {lines[0]!r}, expected {header!r}")
        lines = lines[1:]
    elif required:
        raise ContractError(f"missing format line {header!r}")
    return lines


def parse_trips(text: str) -> list[TripRecord]:
    rows = list(csv.reader(_data_lines(text, TRIPS_HEADER, required=False)))
    if not rows or [c.strip() for c in rows[0]] != TRIP_COLUMNS:
        raise ContractError(f"trip file needs the header row {','.join(TRIP_COLUMNS)}")
    trips = []
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 4:
            raise ContractError(f"trip line {n}: expected 4 fields, got {len(row)}")
        try:
            depart = int(row[3])
        except ValueError:
            raise ContractError(f"trip line {n}: depart {row[3]!r} is not an integer") from None
        trips.append(TripRecord(row[0].strip(), row[1].strip(), row[2].strip(), depart))
    return trips


def read_trips(path: str | Path) -> list[TripRecord]:
    return parse_trips(Path(path).read_text(encoding="utf-8"))


def format_tours(tours: list[list[TripRecord]]) -> str:
    buf = io.StringIO()
    buf.write(TOURS_HEADER + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TOUR_COLUMNS)
    for vid, tour in enumerate(tours):
        for pos, trip in enumerate(tour):
            writer.writerow([vid, pos, trip.id, trip.from_edge, trip.to_edge, trip.depart])
    return buf.getvalue()


def parse_tours(text: str) -> list[list[TripRecord]]:
    rows = list(csv.reader(_data_lines(text, TOURS_HEADER, required=True)))
    if not rows or rows[0] != TOUR_COLUMNS:
        raise ContractError(f"tours file needs the header row {','.join(TOUR_COLUMNS)}")
    grouped: dict[int, list[tuple[int, TripRecord]]] = defaultdict(list)
    for row in rows[1:]:
        if not row:
            continue
        vid, pos, tid, fe, te, dep = row
        grouped[int(vid)].append((int(pos), TripRecord(tid, fe, te, int(dep))))
    return [[t for _, t in sorted(grouped[v])] for v in sorted(grouped)]


def write_tours(path: str | Path, tours: list[list[TripRecord]]) -> None:
    Path(path).write_text(format_tours(tours), encoding="utf-8", newline="")


def read_tours(path: str | Path) -> list[list[TripRecord]]:
    return parse_tours(Path(path).read_text(encoding="utf-8"))


def retention_rate(trips: list[TripRecord], tours: list[list[TripRecord]]) -> float:
    """Share of input trips that ended up in some tour."""
    if not trips:
        return 0.0
    return sum(len(t) for t in tours) / len(trips)
