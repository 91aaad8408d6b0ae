"""Curvy two-lane road scenarios, HDV motion and the fixed-step loop.

Lane 1 is the outer lane, lane 2 the inner one. Vehicles drive counter-
clockwise around the road centre; initial positions are polar angles in
degrees. Vehicles are points: a centre distance below ``COLLISION_RADIUS``
ends the run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import ReferencePath, SystemState, VehicleState, circle_path, project_to_path
from .planner import (
    CHANGING,
    COMPLETED,
    LaneView,
    Maneuver,
    PlannerConfig,
    PlannerInfeasibleError,
    PlannerState,
    plan_step,
)
from .riskfield import FieldParams
from .trajectory import eval_trajectory

ROLES = ("SV", "PV", "IV", "RV")
LANES = (1, 2)
COLLISION_RADIUS = 1.0
OVERLAP_RADIUS = 2.0


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Road:
    center: Tuple[float, float] = (0.0, 0.0)
    r_inner_edge: float = 64.0
    r_outer_edge: float = 70.0
    lane_width: float = 3.0

    def __post_init__(self):
        if not self.lane_width > 0:
            raise ScenarioError("road.lane_width must be positive")
        if not 0 < self.r_inner_edge < self.r_outer_edge:
            raise ScenarioError("road edges need 0 < r_inner_edge < r_outer_edge")
        if self.r_inner_edge + 2 * self.lane_width > self.r_outer_edge + 1e-9:
            raise ScenarioError("two lanes do not fit between the road edges")

    def lane_radius(self, lane: int) -> float:
        # two lanes centred in the band between the edges
        mid = 0.5 * (self.r_inner_edge + self.r_outer_edge)
        return mid + 0.5 * self.lane_width if lane == 1 else mid - 0.5 * self.lane_width


@dataclass(frozen=True)
class VehicleSpec:
    role: str
    lane: int
    angle_deg: float
    speed: float

    def __post_init__(self):
        if self.role not in ROLES:
            raise ScenarioError(f"unknown role {self.role!r}, expected one of {ROLES}")
        if self.lane not in LANES:
            raise ScenarioError(f"lane must be 1 (outer) or 2 (inner), got {self.lane!r}")
        if not self.speed >= 0:
            raise ScenarioError(f"{self.role}: speed must be >= 0")


@dataclass(frozen=True, eq=False)
class Scenario:
    road: Road
    vehicles: Tuple[VehicleSpec, ...]
    dt: float = 0.1
    horizon: int = 200
    name: str = "scenario"
    lanes: Dict[int, ReferencePath] = field(default_factory=dict, repr=False)
    ref_lane: int = 1

    def initial_state(self, role: str) -> VehicleState:
        spec = self.spec(role)
        return place_on_lane(self.lanes[spec.lane], math.radians(spec.angle_deg), spec.speed)

    def spec(self, role: str) -> VehicleSpec:
        for v in self.vehicles:
            if v.role == role:
                return v
        raise KeyError(role)

    def has(self, role: str) -> bool:
        return any(v.role == role for v in self.vehicles)


def place_on_lane(lane: ReferencePath, angle: float, speed: float) -> VehicleState:
    cx, cy, R = lane.circle
    s = (angle % (2 * math.pi)) * R
    return _lane_state(lane, s, speed)


def _lane_state(lane: ReferencePath, s: float, v: float) -> VehicleState:
    x, y = lane.point_at(s)
    k = lane.curvature_at(s)
    return VehicleState(float(x), float(y), lane.heading_at(s), v, 0.0, k, v * k)


def build_scenario(spec) -> Scenario:
    """Scenario from a mapping {road, vehicles, dt, horizon, name} or a Scenario-like object."""
    if isinstance(spec, Scenario):
        road, vehicles, dt, horizon, name, ref_lane = (spec.road, spec.vehicles, spec.dt, spec.horizon,
                                                       spec.name, spec.ref_lane)
    else:
        road = spec.get("road", Road())
        road = road if isinstance(road, Road) else Road(**road)
        vehicles = tuple(v if isinstance(v, VehicleSpec) else VehicleSpec(**v) for v in spec["vehicles"])
        dt, horizon = float(spec.get("dt", 0.1)), int(spec.get("horizon", 200))
        name, ref_lane = spec.get("name", "scenario"), int(spec.get("ref_lane", 1))
    roles = [v.role for v in vehicles]
    if len(set(roles)) != len(roles):
        raise ScenarioError(f"roles must be unique, got {roles}")
    if "SV" not in roles:
        raise ScenarioError("scenario needs an SV")
    if not dt > 0 or horizon < 1:
        raise ScenarioError("need dt > 0 and horizon >= 1")
    lanes = {ln: circle_path(road.center, road.lane_radius(ln)) for ln in LANES}
    for ln, path in lanes.items():
        R = path.circle[2]
        if not road.r_inner_edge <= R <= road.r_outer_edge:
            raise ScenarioError(f"lane {ln} centre radius {R} outside the road")
    scn = Scenario(road, vehicles, dt, horizon, name, lanes, ref_lane)
    pos = {r: scn.initial_state(r).position for r in roles}
    for i, a in enumerate(roles):
        for b in roles[i + 1:]:
            gap = float(np.hypot(*(pos[a] - pos[b])))
            if gap < OVERLAP_RADIUS:
                raise ScenarioError(f"{a} and {b} start {gap:.3f} m apart (< {OVERLAP_RADIUS} m)")
    return scn


def advance_hdv(state: VehicleState, lane: ReferencePath, dt: float) -> VehicleState:
    """Constant speed along the lane centreline."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    s, _, _ = project_to_path((state.x, state.y), lane)
    return _lane_state(lane, s + state.v * dt, state.v)


def predict_hdv(states: Sequence[VehicleState], lanes: Sequence[ReferencePath], times) -> np.ndarray:
    """(M, K, 2) positions under constant-speed lane following."""
    times = np.asarray(times, dtype=float)
    out = np.empty((len(states), len(times), 2))
    for m, (st, lane) in enumerate(zip(states, lanes)):
        s0, _, _ = project_to_path((st.x, st.y), lane)
        if lane.circle is not None:
            cx, cy, R = lane.circle
            ang = (s0 + st.v * times) / R
            out[m, :, 0] = cx + R * np.cos(ang)
            out[m, :, 1] = cy + R * np.sin(ang)
        else:
            out[m] = [lane.point_at(s0 + st.v * t) for t in times]
    return out


# ---- SV motion --------------------------------------------------------------


@dataclass
class _Ego:
    lane: int
    s: float
    v: float
    maneuver: Optional[Maneuver] = None


def _controls_keeping(lane: ReferencePath, s: float, v: float, planner_cfg: PlannerConfig) -> dict:
    k = lane.curvature_at(s)
    L, lr = planner_cfg.vehicle.wheelbase, planner_cfg.vehicle.lr
    return dict(d=0.0, d_dot=0.0, d_ddot=0.0, v_x=v, a_y=v * v * k, psi_dot=v * k,
                beta=math.atan(lr * k), delta=math.atan(L * k), delta_man=0.0)


def _maneuver_kinematics(m: Maneuver, t: float, vehicle):
    y, yd, ydd = eval_trajectory(m.trajectory, min(max(t, m.trajectory.t_s), m.t_e))
    s = m.s0 + m.rate * (t - m.trajectory.t_s)
    k = m.path.curvature_at(s)
    v_x = m.rate * (1.0 - k * y)
    v_x_dot = -m.rate * k * yd
    k_road = k / (1.0 - k * y)
    k_lat = (v_x * ydd - yd * v_x_dot) / (v_x ** 2 + yd ** 2) ** 1.5
    k_tot = k_road + k_lat
    L, lr = vehicle.wheelbase, vehicle.lr
    delta = math.atan(L * k_tot)
    ctl = dict(d=y, d_dot=yd, d_ddot=ydd, v_x=v_x, a_y=v_x ** 2 * k_tot, psi_dot=v_x * k_tot,
               beta=math.atan(lr * k_tot), delta=delta, delta_man=delta - math.atan(L * k_road))
    return s, y, yd, v_x, k_tot, ctl


def _ego_state(ego: _Ego, lanes, t: float, cfg: PlannerConfig):
    """Current SV pose and its control row."""
    if ego.maneuver is None:
        lane = lanes[ego.lane]
        return _lane_state(lane, ego.s, ego.v), _controls_keeping(lane, ego.s, ego.v, cfg)
    m = ego.maneuver
    s, y, yd, v_x, k_tot, ctl = _maneuver_kinematics(m, t, cfg.vehicle)
    psi = m.path.heading_at(s)
    xp, yp = m.path.point_at(s)
    speed = math.hypot(v_x, yd)
    st = VehicleState(float(xp - y * math.sin(psi)), float(yp + y * math.cos(psi)),
                      psi + math.atan2(yd, v_x), speed, 0.0, k_tot, speed * k_tot)
    return st, ctl


# ---- trace ------------------------------------------------------------------

TRACE_COLUMNS = (
    "step", "t", "phase", "lane",
    "sv_x", "sv_y", "sv_theta", "sv_v", "sv_d",
    "pv_x", "pv_y", "iv_x", "iv_y", "rv_x", "rv_y",
    "u_a", "u_b", "u_c", "u_total", "u_a_adj", "triggered",
    "v_x", "a_y", "psi_dot", "beta", "delta", "delta_man", "yaw_limit",
    "min_dist",
)


@dataclass
class SimTrace:
    """Per-step rows (dicts keyed by TRACE_COLUMNS) plus state snapshots."""

    rows: List[dict]
    states: List[SystemState]
    dt: float
    status: str = "ok"
    failure_reason: str = ""
    trigger_step: Optional[int] = None
    maneuver: Optional[Maneuver] = None
    name: str = "scenario"

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def truncate(self, n: int) -> "SimTrace":
        trig = self.trigger_step if self.trigger_step is not None and self.trigger_step < n else None
        return SimTrace(self.rows[:n], self.states[:n], self.dt, self.status, self.failure_reason, trig,
                        self.maneuver if trig is not None else None, self.name)

    @property
    def passed(self) -> bool:
        return self.status == "ok"


def _min_dist(ego: VehicleState, others) -> float:
    d = [math.hypot(ego.x - o.x, ego.y - o.y) for o in others]
    return min(d) if d else math.inf


def run_scenario(scn: Scenario, params: FieldParams, cfg: PlannerConfig, seed: int = 0,
                 thresholds: Optional[Tuple[float, float]] = None) -> SimTrace:
    """Fixed-step loop over ``scn.horizon`` steps.

    Each step assembles the system state at t, lets the planner decide,
    records one row, then advances every vehicle to t + dt. A collision ends
    the run with status ``collision``; an infeasible plan with ``infeasible``.
    """
    lanes = scn.lanes
    thr = cfg.thresholds if thresholds is None else thresholds
    sv = scn.spec("SV")
    sv_lane = lanes[sv.lane]
    ego = _Ego(sv.lane, (math.radians(sv.angle_deg) % (2 * math.pi)) * sv_lane.circle[2], sv.speed)
    hdv = {r: scn.initial_state(r) for r in ROLES[1:] if scn.has(r)}
    hdv_lane = {r: scn.spec(r).lane for r in hdv}
    planner = PlannerState(thresholds=tuple(thr))
    rows: List[dict] = []
    states: List[SystemState] = []
    status, reason = "ok", ""
    last_maneuver = None

    for k in range(scn.horizon):
        t = k * scn.dt
        ego_st, ctl = _ego_state(ego, lanes, t, cfg)
        cur_lane = ego.lane
        adj_lane = 1 if cur_lane == 2 else 2
        ego_path = lanes[cur_lane]
        s_ego, _, _ = project_to_path((ego_st.x, ego_st.y), ego_path)

        front = _nearest_ahead(hdv, hdv_lane, cur_lane, s_ego, ego_path)
        rear = hdv.get("RV")
        adjacent = tuple(hdv[r] for r in ("IV",) if r in hdv)
        sys = SystemState(ego_st, front, rear, adjacent)
        states.append(sys)

        roles = list(hdv)
        view = LaneView(
            ego_path=ego_path,
            adjacent_path=lanes[adj_lane],
            ref_path=lanes[scn.ref_lane],
            adjacent_lane=adj_lane,
            t=t,
            step=k,
            predict=lambda times, roles=roles: predict_hdv([hdv[r] for r in roles],
                                                           [lanes[hdv_lane[r]] for r in roles], times),
            seed=seed,
        )
        try:
            out = plan_step(sys, planner, params, cfg, view)
        except PlannerInfeasibleError as exc:
            status, reason = "infeasible", str(exc)
            rows.append(_row(k, t, planner.phase, cur_lane, ego_st, hdv, None, math.nan, False, ctl, cfg, sys))
            break
        prev_phase = planner.phase
        planner = out.planner
        if out.triggered:
            ego.maneuver = last_maneuver = planner.maneuver
            ego_st, ctl = _ego_state(ego, lanes, t, cfg)
        elif prev_phase == CHANGING and planner.phase == COMPLETED:
            # hand over to the target lane at the current position
            m = ego.maneuver
            ego.lane = m.target_lane
            ego.s, _, _ = project_to_path((ego_st.x, ego_st.y), lanes[ego.lane])
            ego.v = ctl["v_x"]
            ego.maneuver = None
            ego_st, ctl = _ego_state(ego, lanes, t, cfg)
        rows.append(_row(k, t, planner.phase, ego.lane, ego_st, hdv, out, out.u_a_adjacent, out.triggered, ctl,
                         cfg, sys))

        dist = rows[-1]["min_dist"]
        if dist < COLLISION_RADIUS:
            status, reason = "collision", f"SV within {dist:.3f} m of another vehicle at t={t:.2f} s"
            break

        # advance to t + dt
        if ego.maneuver is None:
            ego.s += ego.v * scn.dt
        hdv = {r: advance_hdv(st, lanes[hdv_lane[r]], scn.dt) for r, st in hdv.items()}

    return SimTrace(rows, states, scn.dt, status, reason, planner.trigger_step, last_maneuver, scn.name)


def _nearest_ahead(hdv, hdv_lane, lane, s_ego, path: ReferencePath) -> Optional[VehicleState]:
    best, best_gap = None, math.inf
    L = path.total_length
    for r, st in hdv.items():
        if hdv_lane[r] != lane:
            continue
        s, _, _ = project_to_path((st.x, st.y), path)
        gap = (s - s_ego) % L if path.closed else s - s_ego
        if 0 < gap < 0.5 * L and gap < best_gap:
            best, best_gap = st, gap
    return best


def _row(k, t, phase, lane, ego_st, hdv, out, u_a_adj, triggered, ctl, cfg: PlannerConfig, sys) -> dict:
    nan = math.nan

    def xy(role):
        st = hdv.get(role)
        return (st.x, st.y) if st is not None else (nan, nan)

    sample = out.sample if out is not None else None
    row = {
        "step": k, "t": t, "phase": phase, "lane": lane,
        "sv_x": ego_st.x, "sv_y": ego_st.y, "sv_theta": ego_st.theta, "sv_v": ego_st.v, "sv_d": ctl["d"],
        "pv_x": xy("PV")[0], "pv_y": xy("PV")[1], "iv_x": xy("IV")[0], "iv_y": xy("IV")[1],
        "rv_x": xy("RV")[0], "rv_y": xy("RV")[1],
        "u_a": sample.u_a if sample else nan, "u_b": sample.u_b if sample else nan,
        "u_c": sample.u_c if sample else nan, "u_total": sample.u_total if sample else nan,
        "u_a_adj": u_a_adj, "triggered": int(bool(triggered)),
        "v_x": ctl["v_x"], "a_y": ctl["a_y"], "psi_dot": ctl["psi_dot"], "beta": ctl["beta"],
        "delta": ctl["delta"], "delta_man": ctl["delta_man"],
        "yaw_limit": float(cfg.limits.yaw_rate_limit(ctl["v_x"])),
        "min_dist": _min_dist(ego_st, list(hdv.values())),
    }
    return row


@dataclass(frozen=True)
class Metrics:
    steps: int
    status: str
    collision: bool
    trigger_step: Optional[int]
    maneuver_duration: Optional[float]
    lane_changes: int
    final_lane: int
    min_distance: float
    max_abs_a_y: float
    max_abs_delta: float
    max_abs_delta_man: float
    max_abs_psi_dot: float
    max_yaw_ratio: float
    max_abs_beta: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def extract_metrics(trace: SimTrace) -> Metrics:
    if not len(trace):
        raise ValueError("empty trace")
    col = trace.column
    lanes = [r["lane"] for r in trace.rows]
    changes = sum(1 for a, b in zip(lanes, lanes[1:]) if a != b)
    dur = None
    if trace.trigger_step is not None and trace.maneuver is not None:
        dur = float(trace.maneuver.trajectory.duration)
    return Metrics(
        steps=len(trace),
        status=trace.status,
        collision=trace.status == "collision",
        trigger_step=trace.trigger_step,
        maneuver_duration=dur,
        lane_changes=changes,
        final_lane=int(lanes[-1]),
        min_distance=float(np.min(col("min_dist"))),
        max_abs_a_y=float(np.max(np.abs(col("a_y")))),
        max_abs_delta=float(np.max(np.abs(col("delta")))),
        max_abs_delta_man=float(np.max(np.abs(col("delta_man")))),
        max_abs_psi_dot=float(np.max(np.abs(col("psi_dot")))),
        max_yaw_ratio=float(np.max(np.abs(col("psi_dot")) / col("yaw_limit"))),
        max_abs_beta=float(np.max(np.abs(col("beta")))),
    )
