"""Pipeline configuration: YAML file -> validated, immutable settings."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .gp import GpHyperparams
from .mission import MissionParams, TrackerParams
from .routing import GaParams
from .scenario import Region, RfSource, Scenario, make_wind

DESK_FACTOR = 0.1
# shrinking every distance by DESK_FACTOR raises free-space received power by this much
DESK_POWER_SHIFT_DB = -20.0 * math.log10(DESK_FACTOR)


def default_config_text() -> str:
    return resources.files("windipp").joinpath("data/default.yaml").read_text(encoding="utf-8")


def _section(raw: dict, name: str) -> dict:
    sec = raw.get(name)
    if not isinstance(sec, dict):
        raise ConfigError(f"missing or malformed section [{name}]")
    return sec


def _get(sec: dict, key: str, where: str, kind=float, default=None):
    if key not in sec:
        if default is not None:
            return default
        raise ConfigError(f"{where}.{key} is required")
    value = sec[key]
    try:
        if kind is int:
            if isinstance(value, bool) or float(value) != int(value):
                raise ValueError
            return int(value)
        if kind is float:
            value = float(value)
            if not math.isfinite(value):
                raise ValueError
            return value
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.{key} has invalid value {value!r}") from None


def _positive(value, name):
    if not value > 0:
        raise ConfigError(f"{name} must be positive, got {value}")
    return value


def _point(value, name):
    try:
        p = tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a point [x, y]") from None
    if len(p) != 2 or not all(math.isfinite(v) for v in p):
        raise ConfigError(f"{name} must be a point [x, y]")
    return p


def desk_scale(raw: dict) -> dict:
    """Shrink every length (and the sensing period, at fixed speed) by DESK_FACTOR.

    The vehicle's turn radius is a vehicle property and is left alone.
    """
    raw = copy.deepcopy(raw)
    f = DESK_FACTOR
    sc = raw["scenario"]
    sc["region"]["bounds"] = [f * v for v in sc["region"]["bounds"]]
    sc["region"]["obstacles"] = [[[f * x, f * y] for x, y in poly]
                                 for poly in sc["region"].get("obstacles") or []]
    wind = sc["wind"]
    wind["spacing"] = f * wind["spacing"]
    params = wind.setdefault("params", {})
    for key in ("length", "core_radius"):
        if key in params:
            params[key] = f * params[key]
    if "center" in params:
        params["center"] = [f * v for v in params["center"]]
    src = sc["source"]
    src["position"] = [f * v for v in src["position"]]
    for key in ("shadowing_length", "altitude"):
        if key in src:
            src[key] = f * src[key]
    gp = raw["gp"]
    gp["length_scales"] = [f * v for v in gp["length_scales"]]
    gp["prior_mean"] = gp["prior_mean"] + DESK_POWER_SHIFT_DB
    raw["placement"]["grid_spacing"] = f * raw["placement"]["grid_spacing"]
    raw["planner"]["n_samples"] = raw["planner"].get("desk_n_samples", raw["planner"]["n_samples"])
    mission = raw["mission"]
    mission["depots"] = [[f * x, f * y] for x, y in mission["depots"]]
    mission["period"] = f * mission["period"]
    return raw


@dataclass(frozen=True)
class ScenarioConfig:
    bounds: tuple
    obstacles: tuple
    wind_kind: str
    wind_params: dict
    wind_spacing: float
    source: RfSource


@dataclass(frozen=True)
class PlacementConfig:
    n_tasks: int
    grid_spacing: float
    noise_factor: float
    length_factor: float
    restarts: int
    seed: int
    max_iter: int | None


@dataclass(frozen=True)
class PlannerConfig:
    n_samples: int
    gamma: float
    v0: float
    seed: int


@dataclass(frozen=True)
class RoutingConfig:
    ga: GaParams
    seed: int


@dataclass(frozen=True)
class MissionConfig:
    depots: tuple
    params: MissionParams
    seed: int


@dataclass(frozen=True)
class PipelineConfig:
    scenario: ScenarioConfig
    sensor: GpHyperparams
    prior_mean: float
    placement: PlacementConfig
    planner: PlannerConfig
    routing: RoutingConfig
    mission: MissionConfig
    output: str
    raw: dict

    @property
    def m(self) -> int:
        return len(self.mission.depots)

    @property
    def h_plan(self) -> GpHyperparams:
        return self.sensor.leveled(self.placement.noise_factor, self.placement.length_factor)

    def build_region(self) -> Region:
        return Region(self.scenario.bounds, self.scenario.obstacles)

    def build_scenario(self) -> Scenario:
        region = self.build_region()
        sc = self.scenario
        wind = make_wind(sc.wind_kind, sc.wind_params, region, sc.wind_spacing)
        return Scenario(region, wind, sc.source)


def _seed(sec, where, override):
    if override is not None:
        return int(override)
    if "seed" not in sec:
        raise ConfigError(f"{where}.seed is required")
    return _get(sec, "seed", where, int)


def parse_config(raw: dict, seed: int | None = None) -> PipelineConfig:
    """Validate a raw nested mapping. ``seed`` overrides every seed in it."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping of sections")
    raw = copy.deepcopy(raw)

    sc = _section(raw, "scenario")
    reg = _section(sc, "region")
    bounds = reg.get("bounds")
    if not isinstance(bounds, (list, tuple)) or len(bounds) != 4:
        raise ConfigError("scenario.region.bounds must be [xmin, ymin, xmax, ymax]")
    bounds = tuple(float(v) for v in bounds)
    obstacles = tuple(tuple(_point(v, "obstacle vertex") for v in poly)
                      for poly in (reg.get("obstacles") or []))
    wind = _section(sc, "wind")
    wind_kind = str(wind.get("kind", ""))
    wind_params = dict(wind.get("params") or {})
    if seed is not None and "seed" in wind_params:
        wind_params["seed"] = int(seed)
    wind_spacing = _positive(_get(wind, "spacing", "scenario.wind"), "scenario.wind.spacing")
    src = _section(sc, "source")
    try:
        source = RfSource(
            position=_point(src.get("position"), "scenario.source.position"),
            tx_power=_get(src, "tx_power", "scenario.source", default=30.0),
            frequency=_get(src, "frequency", "scenario.source", default=146e6),
            gain_tx=_get(src, "gain_tx", "scenario.source", default=6.0),
            gain_rx=_get(src, "gain_rx", "scenario.source", default=2.0),
            shadowing_sigma=_get(src, "shadowing_sigma", "scenario.source", default=4.0),
            shadowing_length=_get(src, "shadowing_length", "scenario.source", default=1000.0),
            seed=_seed(src, "scenario.source", seed),
            altitude=_get(src, "altitude", "scenario.source", default=0.0),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"scenario.source: {exc}") from None
    scenario = ScenarioConfig(bounds, obstacles, wind_kind, wind_params, wind_spacing, source)

    gp = _section(raw, "gp")
    try:
        sensor = GpHyperparams(_get(gp, "sigma_f", "gp"), _get(gp, "sigma_n", "gp"),
                               tuple(float(v) for v in gp.get("length_scales", ())))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"gp: {exc}") from None
    prior_mean = _get(gp, "prior_mean", "gp")

    pl = _section(raw, "placement")
    max_iter = pl.get("max_iter")
    placement = PlacementConfig(
        n_tasks=_get(pl, "n_tasks", "placement", int),
        grid_spacing=_positive(_get(pl, "grid_spacing", "placement"), "placement.grid_spacing"),
        noise_factor=_positive(_get(pl, "noise_factor", "placement", default=0.1), "placement.noise_factor"),
        length_factor=_positive(_get(pl, "length_factor", "placement", default=1.5),
                                "placement.length_factor"),
        restarts=_get(pl, "restarts", "placement", int, default=5),
        seed=_seed(pl, "placement", seed),
        max_iter=None if max_iter is None else _get(pl, "max_iter", "placement", int),
    )
    if placement.n_tasks < 1:
        raise ConfigError("placement.n_tasks must be at least 1")
    if placement.restarts < 1:
        raise ConfigError("placement.restarts must be at least 1")

    pn = _section(raw, "planner")
    planner = PlannerConfig(
        n_samples=_get(pn, "n_samples", "planner", int),
        gamma=_positive(_get(pn, "gamma", "planner", default=2.0), "planner.gamma"),
        v0=_positive(_get(pn, "v0", "planner"), "planner.v0"),
        seed=_seed(pn, "planner", seed),
    )
    if planner.n_samples < 1:
        raise ConfigError("planner.n_samples must be at least 1")

    rt = _section(raw, "routing")
    defaults = GaParams()
    ga = GaParams(
        population=_get(rt, "population", "routing", int, default=defaults.population),
        generations=_get(rt, "generations", "routing", int, default=defaults.generations),
        tournament=_get(rt, "tournament", "routing", int, default=defaults.tournament),
        crossover_rate=_get(rt, "crossover_rate", "routing", default=defaults.crossover_rate),
        mutation_rate=_get(rt, "mutation_rate", "routing", default=defaults.mutation_rate),
        split_mutation_rate=_get(rt, "split_mutation_rate", "routing",
                                 default=defaults.split_mutation_rate),
        elitism=_get(rt, "elitism", "routing", int, default=defaults.elitism),
    )
    if ga.population < 2 or ga.generations < 0 or ga.tournament < 1 or ga.elitism < 0:
        raise ConfigError("routing GA parameters out of range")
    routing = RoutingConfig(ga, _seed(rt, "routing", seed))

    ms = _section(raw, "mission")
    depots = ms.get("depots")
    if not isinstance(depots, (list, tuple)) or len(depots) < 1:
        raise ConfigError("mission.depots must list at least one depot position (m >= 1)")
    depots = tuple(_point(d, "mission.depots entry") for d in depots)
    params = MissionParams(
        speed=_positive(_get(ms, "speed", "mission"), "mission.speed"),
        r_min=_positive(_get(ms, "r_min", "mission"), "mission.r_min"),
        period=_positive(_get(ms, "period", "mission"), "mission.period"),
        refit_every=_get(ms, "refit_every", "mission", int, default=20),
        refit=bool(ms.get("refit", True)),
        noise=bool(ms.get("noise", True)),
        tracker=TrackerParams(),
    )
    if params.refit_every < 1:
        raise ConfigError("mission.refit_every must be at least 1")
    mission = MissionConfig(depots, params, _seed(ms, "mission", seed))

    cfg = PipelineConfig(scenario, sensor, prior_mean, placement, planner, routing, mission,
                         str(raw.get("output", "out")), raw)
    try:
        region = cfg.build_region()
    except ValueError as exc:
        raise ConfigError(f"scenario.region: {exc}") from None
    inside = region.contains(np.array(depots))
    for k, ok in enumerate(inside):
        if not ok:
            raise ConfigError(f"mission.depots[{k}] {depots[k]} is not in free space")
    return cfg


def load_config(path=None, desk: bool = False, seed: int | None = None) -> PipelineConfig:
    """Read a YAML config (the bundled default when ``path`` is None)."""
    if path is None:
        text = default_config_text()
    else:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    if desk:
        try:
            raw = desk_scale(raw)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"cannot apply desk-scale preset: missing {exc}") from None
    return parse_config(raw, seed)
