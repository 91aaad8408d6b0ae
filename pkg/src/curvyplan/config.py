"""Scenario config files: JSON schema, parsing into typed objects, bundled cases."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, List, Tuple

import jsonschema
import numpy as np

from .maneuver import CostWeights
from .planner import PlannerConfig
from .riskfield import FieldParams
from .sim import ROLES, Road, Scenario, VehicleSpec, build_scenario
from .trajectory import DynamicLimits, VehicleGeometry

BUNDLED = ("case1", "case2", "wide-road")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_pair = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "type": "object",
    "required": ["vehicles"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "road": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"center": _pair, "r_inner_edge": _num, "r_outer_edge": _num, "lane_width": _num},
        },
        "vehicles": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["role", "lane", "angle_deg", "speed"],
                "additionalProperties": False,
                "properties": {
                    "role": {"enum": list(ROLES)},
                    "lane": {"enum": [1, 2]},
                    "angle_deg": _num,
                    "speed": _num,
                },
            },
        },
        "dt": _pos,
        "horizon": {"type": "integer", "minimum": 1},
        "ref_lane": {"enum": [1, 2]},
        "seed": {"type": "integer", "minimum": 0},
        "field_params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                **{k: _num for k in ("alpha", "beta", "R1", "gamma0", "sigma0", "alpha_v", "beta_v",
                                     "lambda_decay", "v_safe", "delta_theta", "lambda_lc", "xi", "min_gap",
                                     "phi_unsafe", "eps_den")},
                "W": {"type": "array", "items": _pair, "minItems": 2, "maxItems": 2},
            },
        },
        "swarm": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_particles": {"type": "integer", "minimum": 2},
                "iterations": {"type": "integer", "minimum": 1},
                "mode": {"enum": ["ipso", "pso"]},
            },
        },
        "thresholds": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"u_b": _num, "u_c": _num},
        },
        "planner": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "duration": _pair,
                "advance": _pair,
                "clearance": _num,
                "lookahead": _num,
                "check_dt": _num,
                "weights": {"type": "array", "items": _num, "minItems": 5, "maxItems": 5},
                "x_te_max": _num,
                "ay_max_g": _num,
                "mu": _num,
                "beta_max_deg": _num,
                "delta_max_deg": _num,
                "wheelbase": _num,
                "lr": _num,
            },
        },
    },
}


class ConfigError(ValueError):
    """Schema or invariant failure; ``path`` is the dotted key path."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path or '<root>'}: {msg}")
        self.path = path


@dataclass(frozen=True, eq=False)
class RunConfig:
    name: str
    scenario: Scenario
    params: FieldParams
    planner: PlannerConfig
    seed: int
    raw: dict

    def summary(self) -> str:
        roles = ", ".join(f"{v.role}(lane {v.lane}, {v.angle_deg:g} deg, {v.speed:g} m/s)"
                          for v in self.scenario.vehicles)
        (t_lo, t_hi), (s_lo, s_hi) = self.planner.bounds
        return (f"{self.name}: {len(self.scenario.vehicles)} vehicles [{roles}]; dt={self.scenario.dt:g} s, "
                f"horizon={self.scenario.horizon} steps; thresholds={self.planner.thresholds}; "
                f"duration in [{t_lo:g}, {t_hi:g}] s, advance in [{s_lo:g}, {s_hi:g}] m; seed={self.seed}")


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def _section(path: str, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(path, str(exc)) from None


def parse_config(data: Any) -> RunConfig:
    """Validate a decoded config document and build the typed objects."""
    errors = sorted(jsonschema.Draft7Validator(SCHEMA).iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(_path(e.absolute_path), e.message)

    road = _section("road", Road, **{**data.get("road", {}),
                                     **({"center": tuple(data["road"]["center"])}
                                        if "center" in data.get("road", {}) else {})})
    vehicles = []
    for i, v in enumerate(data["vehicles"]):
        vehicles.append(_section(f"vehicles[{i}]", VehicleSpec, **v))
    scn_spec = dict(road=road, vehicles=vehicles, dt=data.get("dt", 0.1), horizon=data.get("horizon", 200),
                    name=data.get("name", "scenario"), ref_lane=data.get("ref_lane", 1))
    scenario = _section("vehicles", build_scenario, scn_spec)

    fp = dict(data.get("field_params", {}))
    params = _section("field_params", FieldParams, **fp)

    thr = data.get("thresholds", {})
    thresholds = (float(thr.get("u_b", 10.0)), float(thr.get("u_c", 100.0)))
    for key, val in zip(("u_b", "u_c"), thresholds):
        if not val > 0:
            raise ConfigError(f"thresholds.{key}", "must be positive")

    pl = data.get("planner", {})
    duration = pl.get("duration", [2.0, 30.0])
    advance = pl.get("advance", [5.0, 60.0])
    for key, (lo, hi) in (("duration", duration), ("advance", advance)):
        if not 0 < lo < hi:
            raise ConfigError(f"planner.{key}", "need 0 < low < high")
    for key in ("clearance", "lookahead", "check_dt"):
        if key in pl and not pl[key] > 0:
            raise ConfigError(f"planner.{key}", "must be positive")
    limits = _section("planner", DynamicLimits,
                      ay_max=pl.get("ay_max_g", 0.4) * 9.81,
                      mu=pl.get("mu", 0.85),
                      beta_max=math.radians(pl.get("beta_max_deg", 10.0)),
                      delta_max=math.radians(pl.get("delta_max_deg", 2.0)))
    vehicle = VehicleGeometry(pl.get("wheelbase", 2.7), pl.get("lr", 1.35))
    if not 0 < vehicle.lr < vehicle.wheelbase:
        raise ConfigError("planner.lr", "need 0 < lr < wheelbase")
    weights = _section("planner.weights", CostWeights, w=pl.get("weights", [0.2] * 5),
                       x_te_max=pl.get("x_te_max", 60.0))
    sw = data.get("swarm", {})
    planner = PlannerConfig(
        thresholds=thresholds,
        bounds=np.array([duration, advance], dtype=float),
        clearance=pl.get("clearance", 2.5),
        lookahead=pl.get("lookahead", 10.0),
        check_dt=pl.get("check_dt", 0.05),
        limits=limits,
        vehicle=vehicle,
        weights=weights,
        n_particles=sw.get("n_particles", 40),
        iterations=sw.get("iterations", 100),
        mode=sw.get("mode", "ipso"),
    )
    return RunConfig(scenario.name, scenario, params, planner, int(data.get("seed", 0)), data)


def load_config(path) -> RunConfig:
    """Read and parse a config file; a bundled case name ('case1') also works."""
    text = read_config_text(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"not valid JSON: {exc}") from None
    return parse_config(data)


def read_config_text(path) -> str:
    p = Path(path)
    if p.exists():
        return p.read_text()
    name = p.name[:-4] if p.name.endswith(".cfg") else p.name
    if str(path) == p.name and name in BUNDLED:
        return bundled_path(name).read_text()
    raise FileNotFoundError(f"config file not found: {path}")


def bundled_path(name: str):
    return resources.files("curvyplan") / "configs" / f"{name}.cfg"


def load_waypoints_csv(path) -> List[Tuple[float, float]]:
    """Two-column ``x,y`` waypoint file; a non-numeric first row is taken as a header."""
    pts = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or not "".join(row).strip():
                continue
            try:
                pts.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if i == 0:
                    continue
                raise ConfigError(f"row {i + 1}", f"expected two numbers, got {row}") from None
    return pts
