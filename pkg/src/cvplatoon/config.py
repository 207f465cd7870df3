"""YAML run configuration: one document drives every CLI subcommand.

Six optional sections (idm, connectivity, composition, scenario, sim,
grid) mirror the library's parameter objects; omitted fields fall back to
the built-in defaults.  Unknown keys anywhere are a hard error so typos
cannot silently change a run, and a parsed document serializes back to an
equivalent one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import yaml

from .model import (
    ConnectivityParams,
    GeometricWeights,
    IdmParams,
    InverseDistanceWeights,
    UniformWeights,
    WeightScheme,
    equilibrium_state,
)
from .simulation import (
    Integrator,
    OpenRoad,
    PerturbationSpec,
    PlatoonComposition,
    PositionOffset,
    RingRoad,
    ScenarioSpec,
    SimConfig,
    SpeedProfile,
    VelocityPulse,
)
from .stability import GridSpec


class ConfigError(ValueError):
    """Malformed or unknown configuration content."""


@dataclass(frozen=True)
class ScenarioConfig:
    boundary: str = "ring"           # 'ring' | 'open'
    v_e: float = 20.0                # equilibrium speed the platoon starts at
    circumference: Optional[float] = None
    leader_profile: SpeedProfile = SpeedProfile(points=((0.0, 20.0),))
    perturbation: Optional[PerturbationSpec] = PerturbationSpec()


@dataclass(frozen=True)
class GridConfig:
    a_m_min: float = 0.3
    a_m_max: float = 2.5
    a_m_step: float = 2.2 / 49.0
    t_d_min: float = 0.5
    t_d_max: float = 2.5
    t_d_step: float = 2.0 / 49.0
    v_e: float = 20.0
    cv_spacing: int = 3
    m_cv: int = 2
    overlay_m: tuple = ()


@dataclass(frozen=True)
class RunConfig:
    idm: IdmParams = field(default_factory=IdmParams)
    connectivity: ConnectivityParams = field(default_factory=ConnectivityParams)
    composition: PlatoonComposition = field(default_factory=PlatoonComposition)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    grid: GridConfig = field(default_factory=GridConfig)

    def scenario_spec(self) -> ScenarioSpec:
        eq = equilibrium_state(self.scenario.v_e, self.idm)
        if self.scenario.boundary == "ring":
            boundary = RingRoad(circumference=self.scenario.circumference)
        else:
            boundary = OpenRoad(leader_profile=self.scenario.leader_profile)
        return ScenarioSpec(boundary=boundary, composition=self.composition,
                            initial=eq, perturbation=self.scenario.perturbation,
                            p=self.idm, cp=self.connectivity)

    def grid_spec(self) -> GridSpec:
        g = self.grid
        return GridSpec(a_m_min=g.a_m_min, a_m_max=g.a_m_max, a_m_step=g.a_m_step,
                        t_d_min=g.t_d_min, t_d_max=g.t_d_max, t_d_step=g.t_d_step,
                        idm=self.idm, cp=self.connectivity, v_e=g.v_e,
                        cv_spacing=g.cv_spacing, m_cv=g.m_cv)


def _require_mapping(obj, where: str) -> dict:
    if obj is None:
        return {}
    if not isinstance(obj, dict):
        raise ConfigError(f"section '{where}' must be a mapping")
    return obj


def _take(data: dict, where: str, known: dict) -> dict:
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown key '{sorted(unknown)[0]}' in section '{where}'")
    out = {}
    for key, convert in known.items():
        if key in data:
            out[key] = convert(data[key], f"{where}.{key}")
    return out


def _as_float(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{where}' must be a number")
    return float(value)


def _as_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{where}' must be an integer")
    return value


def _as_str(value, where: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"'{where}' must be a string")
    return value


def _as_opt_float(value, where: str) -> Optional[float]:
    if value is None:
        return None
    return _as_float(value, where)


def _parse_weights(data, where: str) -> WeightScheme:
    data = _require_mapping(data, where)
    scheme = data.get("scheme", "geometric")
    if scheme == "geometric":
        kw = _take(data, where, {"scheme": _as_str, "ratio": _as_float})
        kw.pop("scheme", None)
        return GeometricWeights(**kw)
    if scheme == "inverse_distance":
        kw = _take(data, where, {"scheme": _as_str, "exponent": _as_float,
                                 "reference_gap": _as_float})
        kw.pop("scheme", None)
        return InverseDistanceWeights(**kw)
    if scheme == "uniform":
        kw = _take(data, where, {"scheme": _as_str, "value": _as_float})
        kw.pop("scheme", None)
        return UniformWeights(**kw)
    raise ConfigError(f"'{where}.scheme' must be geometric, inverse_distance or uniform")


def _parse_perturbation(data, where: str) -> Optional[PerturbationSpec]:
    if data is None:
        return None
    data = _require_mapping(data, where)
    kw = _take(data, where, {"target": _as_int, "kind": _as_str,
                             "magnitude": _as_float, "at": _as_float})
    kind = kw.get("kind", "velocity")
    magnitude = kw.get("magnitude", -0.5)
    at = kw.get("at", 10.0)
    if kind == "velocity":
        k = VelocityPulse(dv=magnitude, at=at)
    elif kind == "position":
        k = PositionOffset(dx=magnitude, at=at)
    else:
        raise ConfigError(f"'{where}.kind' must be velocity or position")
    return PerturbationSpec(target=kw.get("target", 0), kind=k)


def _parse_profile(data, where: str) -> SpeedProfile:
    if not isinstance(data, list) or not all(
            isinstance(p, list) and len(p) == 2 for p in data):
        raise ConfigError(f"'{where}' must be a list of [time, speed] pairs")
    return SpeedProfile(points=tuple((float(t), float(v)) for t, v in data))


def _parse_range(data, where: str) -> dict:
    data = _require_mapping(data, where)
    return _take(data, where, {"min": _as_float, "max": _as_float, "step": _as_float})


def parse_config(text: str) -> RunConfig:
    """Parse a YAML run configuration; empty text yields all defaults."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    doc = _require_mapping(doc, "<root>")
    unknown = set(doc) - {"idm", "connectivity", "composition", "scenario", "sim", "grid"}
    if unknown:
        raise ConfigError(f"unknown section '{sorted(unknown)[0]}'")

    idm_kw = _take(_require_mapping(doc.get("idm"), "idm"), "idm", {
        "v0": _as_float, "T": _as_float, "a0": _as_float, "b0": _as_float,
        "delta": _as_float, "s0": _as_float, "length": _as_float,
        "t_react": _as_float,
    })
    idm = IdmParams(**idm_kw)

    conn_raw = _require_mapping(doc.get("connectivity"), "connectivity")
    conn_kw = _take(conn_raw, "connectivity", {
        "kv": _as_float, "ka": _as_float, "m": _as_int,
        "comm_range": _as_float, "weights": lambda v, w: v,
    })
    if "weights" in conn_kw:
        conn_kw["weights"] = _parse_weights(conn_raw["weights"], "connectivity.weights")
    connectivity = ConnectivityParams(**conn_kw)

    comp_kw = _take(_require_mapping(doc.get("composition"), "composition"),
                    "composition", {"pattern": _as_str, "n_vehicles": _as_int})
    composition = PlatoonComposition(**comp_kw)

    scen_raw = _require_mapping(doc.get("scenario"), "scenario")
    scen_kw = _take(scen_raw, "scenario", {
        "boundary": _as_str, "v_e": _as_float, "circumference": _as_opt_float,
        "leader_profile": lambda v, w: v, "perturbation": lambda v, w: v,
    })
    if scen_kw.get("boundary", "ring") not in ("ring", "open"):
        raise ConfigError("'scenario.boundary' must be ring or open")
    if "leader_profile" in scen_kw:
        scen_kw["leader_profile"] = _parse_profile(scen_raw["leader_profile"],
                                                   "scenario.leader_profile")
    if "perturbation" in scen_raw:
        scen_kw["perturbation"] = _parse_perturbation(scen_raw["perturbation"],
                                                      "scenario.perturbation")
    scenario = ScenarioConfig(**scen_kw)

    sim_raw = _require_mapping(doc.get("sim"), "sim")
    sim_kw = _take(sim_raw, "sim", {
        "dt": _as_float, "duration": _as_float, "integrator": _as_str,
        "t_react": _as_opt_float, "t_react_cv": _as_opt_float,
        "t_react_hv": _as_opt_float, "velocity_floor": _as_float,
        "deceleration_cap": _as_opt_float, "sample_stride": _as_int,
    })
    if "integrator" in sim_kw:
        try:
            sim_kw["integrator"] = Integrator(sim_kw["integrator"])
        except ValueError:
            raise ConfigError("'sim.integrator' must be euler or heun") from None
    sim = SimConfig(**sim_kw)

    grid_raw = _require_mapping(doc.get("grid"), "grid")
    grid_kw = _take(grid_raw, "grid", {
        "a_m": lambda v, w: v, "t_d": lambda v, w: v, "v_e": _as_float,
        "cv_spacing": _as_int, "m_cv": _as_int, "overlay_m": lambda v, w: v,
    })
    mapped = {}
    for axis, prefix in (("a_m", "a_m"), ("t_d", "t_d")):
        if axis in grid_kw:
            rng = _parse_range(grid_raw[axis], f"grid.{axis}")
            for src, dst in (("min", f"{prefix}_min"), ("max", f"{prefix}_max"),
                             ("step", f"{prefix}_step")):
                if src in rng:
                    mapped[dst] = rng[src]
            del grid_kw[axis]
    if "overlay_m" in grid_kw:
        raw = grid_kw["overlay_m"]
        if not isinstance(raw, list) or not all(
                isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in raw):
            raise ConfigError("'grid.overlay_m' must be a list of nonnegative integers")
        grid_kw["overlay_m"] = tuple(raw)
    grid = GridConfig(**grid_kw, **mapped)

    return RunConfig(idm=idm, connectivity=connectivity, composition=composition,
                     scenario=scenario, sim=sim, grid=grid)


def _weights_doc(scheme: WeightScheme) -> dict:
    if isinstance(scheme, GeometricWeights):
        return {"scheme": "geometric", "ratio": scheme.ratio}
    if isinstance(scheme, InverseDistanceWeights):
        return {"scheme": "inverse_distance", "exponent": scheme.exponent,
                "reference_gap": scheme.reference_gap}
    return {"scheme": "uniform", "value": scheme.value}


def _perturbation_doc(pert: Optional[PerturbationSpec]):
    if pert is None:
        return None
    if isinstance(pert.kind, VelocityPulse):
        return {"target": pert.target, "kind": "velocity",
                "magnitude": pert.kind.dv, "at": pert.kind.at}
    return {"target": pert.target, "kind": "position",
            "magnitude": pert.kind.dx, "at": pert.kind.at}


def serialize_config(cfg: RunConfig) -> str:
    """Render the configuration back to YAML; parse(serialize(c)) == c."""
    doc = {
        "idm": {"v0": cfg.idm.v0, "T": cfg.idm.T, "a0": cfg.idm.a0,
                "b0": cfg.idm.b0, "delta": cfg.idm.delta, "s0": cfg.idm.s0,
                "length": cfg.idm.length, "t_react": cfg.idm.t_react},
        "connectivity": {"kv": cfg.connectivity.kv, "ka": cfg.connectivity.ka,
                         "m": cfg.connectivity.m,
                         "comm_range": cfg.connectivity.comm_range,
                         "weights": _weights_doc(cfg.connectivity.weights)},
        "composition": {"pattern": cfg.composition.pattern,
                        "n_vehicles": cfg.composition.n_vehicles},
        "scenario": {"boundary": cfg.scenario.boundary, "v_e": cfg.scenario.v_e,
                     "circumference": cfg.scenario.circumference,
                     "leader_profile": [[t, v] for t, v in cfg.scenario.leader_profile.points],
                     "perturbation": _perturbation_doc(cfg.scenario.perturbation)},
        "sim": {"dt": cfg.sim.dt, "duration": cfg.sim.duration,
                "integrator": cfg.sim.integrator.value, "t_react": cfg.sim.t_react,
                "t_react_cv": cfg.sim.t_react_cv, "t_react_hv": cfg.sim.t_react_hv,
                "velocity_floor": cfg.sim.velocity_floor,
                "deceleration_cap": cfg.sim.deceleration_cap,
                "sample_stride": cfg.sim.sample_stride},
        "grid": {"a_m": {"min": cfg.grid.a_m_min, "max": cfg.grid.a_m_max,
                         "step": cfg.grid.a_m_step},
                 "t_d": {"min": cfg.grid.t_d_min, "max": cfg.grid.t_d_max,
                         "step": cfg.grid.t_d_step},
                 "v_e": cfg.grid.v_e, "cv_spacing": cfg.grid.cv_spacing,
                 "m_cv": cfg.grid.m_cv, "overlay_m": list(cfg.grid.overlay_m)},
    }
    # YAML has no native inf literal in all emitters; .inf round-trips with safe_load
    return yaml.safe_dump(doc, sort_keys=True, default_flow_style=False)


def load_config(path: Optional[str]) -> RunConfig:
    """Read a config file; None yields the built-in defaults."""
    if path is None:
        return RunConfig()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
