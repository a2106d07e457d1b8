"""Scenario configuration.

Scenarios are YAML (or JSON) documents with ``schema_version: 1``. Unknown
keys anywhere are errors. Vehicles are declared inline with explicit trips, or
loaded from a tours file (output of ``evcharge tours-extract``) together with
an edge-to-area map.
"""

from __future__ import annotations

import dataclasses
import math
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .agents import ActionModel, Profile, Target, UtilityParams, UtilityVariant, Variant
from .bandits import QLearnerConfig
from .errors import ConfigError, ContractError
from .grid import MAX_NEIGHBORS, GridType
from .mobility import (
    BATTERY_KWH,
    CONSUMPTION_KWH_PER_KM,
    DAY,
    ChargingBehavior,
    DiversionBehavior,
    Tour,
    Trip,
)
from .tours import read_tours

SCHEMA_VERSION = 1
DEFAULT_DURATION = 864000


@dataclass
class SubstationSpec:
    id: int
    rated_power: float
    grid_type: str = "residential"
    neighbors: list[int] = field(default_factory=list)
    base_peak_loading: float = 0.55


@dataclass
class StationSpec:
    id: int
    area: int
    substation: int
    spaces: int = 4


@dataclass
class TripSpec:
    origin: int
    destination: int
    depart: int
    distance_km: float
    duration_s: int


@dataclass
class VehicleSpec:
    id: int
    trips: list[TripSpec]
    soc: float = 1.0


@dataclass
class ToursFileSpec:
    path: str
    edge_areas: dict[str, int]
    distance_km: float = 10.0
    speed_kmh: float = 30.0


@dataclass
class AgentConfig:
    profile: str = "ConstantLoading"
    variant: str = "B"
    target: str = "Power"
    utility: str = "Income"
    gamma: float = 0.1
    alpha: float = 1.0
    epsilon: float = 0.1
    learning_rate: float = 0.1
    discount: float = 0.9
    q_initial: float = 0.0
    price_min: float = 0.05
    price_max: float = 0.50
    price_step: float = 0.05

    def action_model(self) -> ActionModel:
        return ActionModel(Variant(self.variant), Target(self.target), self.price_min, self.price_max, self.price_step)

    def utility_params(self) -> UtilityParams:
        return UtilityParams(UtilityVariant(self.utility), self.gamma)

    def q_config(self) -> QLearnerConfig:
        return QLearnerConfig(self.learning_rate, self.discount, self.epsilon, self.q_initial)


@dataclass
class BehaviorConfig:
    charging: str = "AlwaysLoad"
    diversion: str = "DoNotDivert"


@dataclass
class ScenarioConfig:
    substations: list[SubstationSpec]
    stations: list[StationSpec] = field(default_factory=list)
    vehicles: list[VehicleSpec] = field(default_factory=list)
    walking: dict[int, list[int]] = field(default_factory=dict)
    agents: AgentConfig = field(default_factory=AgentConfig)
    behavior: BehaviorConfig = field(default_factory=BehaviorConfig)
    tours_file: ToursFileSpec | None = None
    duration_steps: int = DEFAULT_DURATION
    seed: int = 0
    initial_price: float = 0.25
    battery_kwh: float = BATTERY_KWH
    consumption_kwh_per_km: float = CONSUMPTION_KWH_PER_KM
    name: str = "scenario"
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return _to_plain(self)

    def replace(self, **changes) -> "ScenarioConfig":
        new = dataclasses.replace(self, **changes)
        if hasattr(self, "_base_dir"):
            new._base_dir = self._base_dir
        return new

    def validate(self, base_dir: Path | None = None) -> None:
        validate(self, base_dir)

    def tours(self, base_dir: Path | None = None) -> list[Tour]:
        return build_tours(self, base_dir)


# -- strict dict -> dataclass ---------------------------------------------------


def _convert(tp, value, where: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        (inner,) = [a for a in args if a is not type(None)]
        return _convert(inner, value, where)
    if dataclasses.is_dataclass(tp):
        return _from_dict(tp, value, where)
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list")
        return [_convert(args[0], v, f"{where}[{i}]") for i, v in enumerate(value)]
    if origin is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected a mapping")
        return {
            _convert(args[0], k, f"{where} key"): _convert(args[1], v, f"{where}.{k}")
            for k, v in value.items()
        }
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if tp is int:
        if isinstance(value, bool):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        if isinstance(value, str):
            try:
                return int(value)
            except ValueError:
                raise ConfigError(f"{where}: expected an integer, got {value!r}") from None
        if isinstance(value, float) and value.is_integer():
            return int(value)
        if not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    return value


def _from_dict(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in data:
            kwargs[f.name] = _convert(hints[f.name], data[f.name], f"{where}.{f.name}")
        elif f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
            raise ConfigError(f"{where}: missing required key {f.name!r}")
    return cls(**kwargs)


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, list):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _to_plain(v) for k, v in obj.items()}
    return obj


def from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("scenario must be a mapping")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    return _from_dict(ScenarioConfig, data, "scenario")


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML/JSON: {exc}") from None
    cfg = from_dict(data)
    validate(cfg, path.parent)
    cfg._base_dir = path.parent
    return cfg


def dump_config(cfg: ScenarioConfig, path: str | Path) -> None:
    text = yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None, width=120)
    Path(path).write_text(text, encoding="utf-8")


# -- validation -----------------------------------------------------------------


def _enum(enum_cls, value, where):
    try:
        return enum_cls(value)
    except ValueError:
        options = ", ".join(e.value for e in enum_cls)
        raise ConfigError(f"{where}: {value!r} is not one of {options}") from None


def build_tours(cfg: ScenarioConfig, base_dir: Path | None = None) -> list[Tour]:
    tours = []
    for v in cfg.vehicles:
        trips = tuple(
            Trip(t.origin, t.destination, t.depart, t.distance_km, t.duration_s) for t in v.trips
        )
        tours.append(Tour(v.id, trips))
    if cfg.tours_file is not None:
        spec = cfg.tours_file
        base = base_dir or getattr(cfg, "_base_dir", None) or Path(".")
        path = Path(spec.path)
        if not path.is_absolute():
            path = base / path
        next_id = max((v.id for v in cfg.vehicles), default=-1) + 1
        duration = max(1, round(spec.distance_km / spec.speed_kmh * 3600))
        for records in read_tours(path):
            try:
                areas = [spec.edge_areas[r.from_edge] for r in records]
            except KeyError as exc:
                raise ConfigError(f"tours_file: edge {exc.args[0]!r} has no area in edge_areas") from None
            trips = tuple(
                Trip(areas[i], areas[(i + 1) % len(areas)], r.depart, spec.distance_km, duration)
                for i, r in enumerate(records)
            )
            tours.append(Tour(next_id, trips))
            next_id += 1
    return tours


def validate(cfg: ScenarioConfig, base_dir: Path | None = None) -> None:
    """Check ranges and cross-references; raises ConfigError on the first problem."""
    if cfg.schema_version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
    if cfg.duration_steps < 1:
        raise ConfigError("duration_steps must be >= 1")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    for name in ("initial_price", "battery_kwh", "consumption_kwh_per_km"):
        value = getattr(cfg, name)
        if not (math.isfinite(value) and value >= 0):
            raise ConfigError(f"{name} must be finite and >= 0")
    if cfg.battery_kwh <= 0:
        raise ConfigError("battery_kwh must be > 0")

    sub_ids = [s.id for s in cfg.substations]
    if len(set(sub_ids)) != len(sub_ids):
        raise ConfigError("duplicate substation ids")
    for s in cfg.substations:
        where = f"substation {s.id}"
        _enum(GridType, s.grid_type, f"{where}.grid_type")
        if not s.rated_power > 0:
            raise ConfigError(f"{where}: rated_power must be > 0")
        if len(s.neighbors) > MAX_NEIGHBORS:
            raise ConfigError(f"{where}: at most {MAX_NEIGHBORS} neighbors")
        for n in s.neighbors:
            if n == s.id or n not in sub_ids:
                raise ConfigError(f"{where}: invalid neighbor {n}")

    st_ids = [s.id for s in cfg.stations]
    if len(set(st_ids)) != len(st_ids):
        raise ConfigError("duplicate station ids")
    areas = [s.area for s in cfg.stations]
    if len(set(areas)) != len(areas):
        raise ConfigError("at most one charging station per area")
    for s in cfg.stations:
        if s.substation not in sub_ids:
            raise ConfigError(f"station {s.id}: unknown substation {s.substation}")
        if s.spaces < 1:
            raise ConfigError(f"station {s.id}: spaces must be >= 1")

    for area, near in cfg.walking.items():
        if area in near:
            raise ConfigError(f"walking[{area}] lists the area itself")

    a = cfg.agents
    _enum(Profile, a.profile, "agents.profile")
    _enum(Variant, a.variant, "agents.variant")
    _enum(Target, a.target, "agents.target")
    _enum(UtilityVariant, a.utility, "agents.utility")
    _enum(ChargingBehavior, cfg.behavior.charging, "behavior.charging")
    _enum(DiversionBehavior, cfg.behavior.diversion, "behavior.diversion")
    try:
        model = a.action_model()
        a.utility_params()
        a.q_config()
    except ContractError as exc:
        raise ConfigError(f"agents: {exc}") from None
    if not (a.alpha >= 0 and math.isfinite(a.alpha)):
        raise ConfigError("agents.alpha must be finite and >= 0")
    if model.variant is Variant.A and not (
        a.price_min - 1e-9 <= cfg.initial_price <= a.price_max + 1e-9
    ):
        raise ConfigError("initial_price must lie within the agent price bounds")

    vids = [v.id for v in cfg.vehicles]
    if len(set(vids)) != len(vids):
        raise ConfigError("duplicate vehicle ids")
    for v in cfg.vehicles:
        if not 0.0 <= v.soc <= 1.0:
            raise ConfigError(f"vehicle {v.id}: soc must lie in [0, 1]")
        for t in v.trips:
            if not 0 <= t.depart < DAY:
                raise ConfigError(f"vehicle {v.id}: depart {t.depart} outside one day")
    try:
        build_tours(cfg, base_dir)
    except (ContractError, OSError) as exc:
        raise ConfigError(str(exc)) from None
