"""Scenario configuration: nested TOML sections mapped onto dataclasses."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .agent import Hyperparams
from .emissions import CepCurve, EmissionParams
from .encoding import CellGrid, build_grid
from .rewards import RewardWeights
from .sim import APPROACHES, DemandProfile, Geometry, IDMParams


class ConfigValidationError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class GridParams:
    cells_per_lane: int = 10
    coverage: float = 200.0
    growth: float = 1.35
    first_cell: float = 7.0
    include_phase: bool = True
    max_green: float = 60.0

    def build(self) -> CellGrid:
        return build_grid(self.cells_per_lane, self.coverage, self.growth, self.first_cell)


@dataclass(frozen=True)
class SignalParams:
    min_green: int = 10
    yellow: int = 4
    saturation_flow: float = 1800.0
    gap_time: float = 3.0
    max_green: int = 60


@dataclass(frozen=True)
class RewardParams:
    weights: RewardWeights = RewardWeights()
    window: int = 500
    warmup: int = 50
    scales: tuple[float, float, float] = (10.0, 100.0, 1000.0)
    entropy_reweight: int = 0


@dataclass(frozen=True)
class RunParams:
    episode_length: int = 3600
    episodes: int = 200
    train_seed: int = 0
    agent_seed: int = 0
    eval_seeds: tuple[int, ...] = tuple(range(10_000, 10_010))
    demand_scale: float = 1.0


DEFAULT_DEMAND = DemandProfile(
    {"W": 700.0, "E": 700.0, "N": 400.0, "S": 400.0},
    {a: (0.2, 0.6, 0.2) for a in APPROACHES},
)


@dataclass(frozen=True)
class ScenarioConfig:
    demand: DemandProfile = field(default_factory=lambda: dataclasses.replace(DEFAULT_DEMAND))
    geometry: Geometry = Geometry()
    idm: IDMParams = IDMParams()
    emission: EmissionParams = EmissionParams()
    cep: CepCurve = CepCurve()
    grid: GridParams = GridParams()
    signal: SignalParams = SignalParams()
    reward: RewardParams = RewardParams()
    agent: Hyperparams = Hyperparams()
    run: RunParams = RunParams()

    @property
    def effective_demand(self) -> DemandProfile:
        if self.run.demand_scale == 1.0:
            return self.demand
        return self.demand.scaled(self.run.demand_scale)

    def training_seed(self, episode: int) -> int:
        return self.run.train_seed + episode

    def replace(self, **sections) -> "ScenarioConfig":
        return dataclasses.replace(self, **sections)

    def with_run(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, run=dataclasses.replace(self.run, **changes))

    def with_agent(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, agent=dataclasses.replace(self.agent, **changes))


_TUPLE_FIELDS = {"eval_seeds", "scales", "hidden", "power_kw", "rate_gph"}


def _build(cls, section: str, data: dict[str, Any]):
    if not isinstance(data, dict):
        raise ConfigValidationError(f"[{section}] must be a table")
    known = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigValidationError(f"unknown field {section}.{key}")
        if key in _TUPLE_FIELDS:
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigValidationError(f"[{section}]: {exc}") from exc


def config_from_dict(data: dict[str, Any]) -> ScenarioConfig:
    sections = {
        "geometry": Geometry,
        "idm": IDMParams,
        "emission": EmissionParams,
        "cep": CepCurve,
        "grid": GridParams,
        "signal": SignalParams,
        "agent": Hyperparams,
        "run": RunParams,
    }
    known = set(sections) | {"demand", "reward"}
    for key in data:
        if key not in known:
            raise ConfigValidationError(f"unknown section [{key}]")
    kwargs: dict[str, Any] = {}
    for name, cls in sections.items():
        if name in data:
            kwargs[name] = _build(cls, name, data[name])
    if "demand" in data:
        d = data["demand"]
        rates = d.get("rates", DEFAULT_DEMAND.rates)
        splits = d.get("splits", DEFAULT_DEMAND.splits)
        extra = set(d) - {"rates", "splits"}
        if extra:
            raise ConfigValidationError(f"unknown field demand.{sorted(extra)[0]}")
        try:
            kwargs["demand"] = DemandProfile(dict(rates), {k: tuple(v) for k, v in dict(splits).items()})
        except (TypeError, ValueError) as exc:
            raise ConfigValidationError(str(exc)) from exc
    if "reward" in data:
        r = dict(data["reward"])
        if "weights" in r:
            try:
                r["weights"] = RewardWeights.from_sequence(r["weights"])
            except (TypeError, ValueError) as exc:
                raise ConfigValidationError(f"reward.weights: {exc}") from exc
        kwargs["reward"] = _build(RewardParams, "reward", r)
    cfg = ScenarioConfig(**kwargs)
    validate(cfg)
    return cfg


def validate(cfg: ScenarioConfig) -> None:
    run = cfg.run
    if run.episode_length < 1:
        raise ConfigValidationError("run.episode_length must be >= 1")
    if run.episodes < 0:
        raise ConfigValidationError("run.episodes must be >= 0")
    if run.demand_scale < 0:
        raise ConfigValidationError("run.demand_scale must be >= 0")
    train = set(range(run.train_seed, run.train_seed + run.episodes))
    if train & set(run.eval_seeds):
        raise ConfigValidationError("run.eval_seeds must be disjoint from the training seeds")
    if cfg.signal.min_green < 1 or cfg.signal.yellow < 1:
        raise ConfigValidationError("signal.min_green and signal.yellow must be >= 1")
    if cfg.signal.yellow != cfg.geometry.yellow_time:
        raise ConfigValidationError("signal.yellow must equal geometry.yellow_time")
    if cfg.reward.window < 1 or cfg.reward.warmup < 0:
        raise ConfigValidationError("reward.window must be >= 1 and reward.warmup >= 0")


def load_config(path) -> ScenarioConfig:
    with open(Path(path), "rb") as fh:
        return config_from_dict(tomllib.load(fh))
