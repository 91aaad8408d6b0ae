"""Risk fields: lane attraction, front-vehicle repulsion, lane-change risk.

Field values are dimensionless risk units. Positions enter the fields only
through (x, y); headings enter through angle differences on the circle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

from .geometry import ReferencePath, SystemState, VehicleState, angle_diff, project_to_path

TWO_PI = 2.0 * math.pi


class FieldError(ValueError):
    pass


class DegenerateAngleError(FieldError):
    """Front and ego headings coincide to within ``eps_den``."""


class MissingVehicleError(FieldError):
    pass


@dataclass(frozen=True, eq=False)
class FieldParams:
    # attraction
    alpha: float = 1.0
    beta: float = 0.5
    R1: float = 65.5
    W: np.ndarray = field(default_factory=lambda: np.eye(2))
    # repulsion
    gamma0: float = 50.0
    sigma0: float = 5.0
    alpha_v: float = 0.5
    beta_v: float = 0.5
    lambda_decay: float = 0.5
    v_safe: float = 15.0
    delta_theta: float = 0.15
    # lane change
    lambda_lc: float = 80.0
    xi: float = 1.0
    min_gap: float = 4.0
    phi_unsafe: float = 10.0
    eps_den: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "W", np.asarray(self.W, dtype=float))
        for name in ("alpha", "beta", "gamma0", "alpha_v", "beta_v", "lambda_decay", "lambda_lc", "xi", "min_gap"):
            if getattr(self, name) < 0:
                raise ValueError(f"FieldParams.{name} must be >= 0")
        for name in ("R1", "sigma0", "v_safe", "eps_den", "delta_theta", "phi_unsafe"):
            if not getattr(self, name) > 0:
                raise ValueError(f"FieldParams.{name} must be > 0")
        W = self.W
        if W.shape != (2, 2) or not np.allclose(W, W.T) or np.any(np.linalg.eigvalsh(W) <= 0):
            raise ValueError("FieldParams.W must be a symmetric positive-definite 2x2 matrix")

    def replace(self, **kw) -> "FieldParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class FieldSample:
    u_a: float
    u_b: float
    u_c: float
    u_total: float
    force: Tuple[float, float] = (0.0, 0.0)


def _guard(x: float, eps: float) -> float:
    if abs(x) >= eps:
        return x
    return eps if x >= 0 else -eps


def polar_angle(p, center) -> float:
    """Polar angle of ``p`` about ``center`` in [0, 2*pi)."""
    return math.atan2(p[1] - center[1], p[0] - center[0]) % TWO_PI


def attraction(ego: VehicleState, ref_state: VehicleState, params: FieldParams, circle_center=(0.0, 0.0)) -> float:
    """Lane-keeping attraction at the ego pose.

    The first term grows with the radius of the ego's circle about
    ``circle_center`` and with the remaining angle to the exit direction
    (+x axis); the second is the W-weighted squared tracking error.
    """
    cx, cy = circle_center
    R = math.hypot(ego.x - cx, ego.y - cy)
    theta = polar_angle((ego.x, ego.y), circle_center)
    e = np.array([ego.x - ref_state.x, ego.y - ref_state.y])
    return params.alpha * (R / params.R1) ** 2 * (TWO_PI - theta) ** 2 + params.beta * float(e @ params.W @ e)


def adaptive_gamma(v_ego: float, v_front: float, params: FieldParams) -> float:
    return params.gamma0 * (1.0 + params.alpha_v * v_ego / params.v_safe + params.beta_v * v_front / params.v_safe)


def adaptive_sigma(v_ego: float, v_front: float, params: FieldParams) -> float:
    return params.sigma0 * (1.0 + params.lambda_decay * max(v_ego, v_front) / params.v_safe)


def angular_ratio(ego: VehicleState, front: VehicleState, delta_theta: float, eps: float, guard: bool = False) -> float:
    diff = angle_diff(front.theta, ego.theta)
    if abs(diff) < eps:
        if not guard:
            raise DegenerateAngleError(f"heading difference {diff:.3g} rad below {eps:g}")
        diff = _guard(diff, eps)
    return delta_theta / diff


def repulsion(ego: VehicleState, front: VehicleState, params: FieldParams, delta_theta: Optional[float] = None,
              guard: bool = False) -> float:
    """Front-vehicle repulsion with speed-adapted strength and decay length."""
    dth = params.delta_theta if delta_theta is None else delta_theta
    ratio = angular_ratio(ego, front, dth, params.eps_den, guard)
    gamma = adaptive_gamma(ego.v, front.v, params)
    sigma = adaptive_sigma(ego.v, front.v, params)
    r2 = (ego.x - front.x) ** 2 + (ego.y - front.y) ** 2
    return gamma * ratio * math.exp(-r2 / (2.0 * sigma ** 2))


def repulsion_gradient(ego: VehicleState, front: VehicleState, params: FieldParams,
                       delta_theta: Optional[float] = None, guard: bool = False) -> Tuple[float, float]:
    """Repulsive force -grad U_b with respect to the ego position.

    The angular factor depends on headings only and is constant here.
    """
    u = repulsion(ego, front, params, delta_theta, guard)
    sigma = adaptive_sigma(ego.v, front.v, params)
    k = u / sigma ** 2
    return k * (ego.x - front.x), k * (ego.y - front.y)


def _arc_offset(v: VehicleState, s_ego: float, path: ReferencePath) -> float:
    s_v, _, _ = project_to_path((v.x, v.y), path)
    ds = s_v - s_ego
    if path.closed:
        L = path.total_length
        ds = (ds + 0.5 * L) % L - 0.5 * L
    return ds


def feasibility_factor(state: SystemState, params: FieldParams, ego_path: ReferencePath) -> float:
    """1 when every adjacent-lane vehicle is at least ``min_gap`` of arc
    length away from the ego along ``ego_path``, else ``phi_unsafe``."""
    s_ego, _, _ = project_to_path((state.ego.x, state.ego.y), ego_path)
    others = list(state.adjacent) + ([state.rear] if state.rear is not None else [])
    for v in others:
        if abs(_arc_offset(v, s_ego, ego_path)) < params.min_gap:
            return params.phi_unsafe
    return 1.0


def lane_change_field(state: SystemState, params: FieldParams, phi: float = 1.0) -> float:
    """Target-lane risk from the rear (RV) and adjacent (IV) vehicles.

    The nearest adjacent vehicle, ``state.adjacent[0]``, plays IV.
    ``phi`` is the lane-change feasibility factor.
    """
    if state.rear is None or not state.adjacent:
        raise MissingVehicleError("lane-change field needs a rear and an adjacent vehicle")
    ego, rear, adj = state.ego, state.rear, state.adjacent[0]
    num = ego.v - max(rear.v, adj.v) + params.xi * params.delta_theta
    den = (adj.v - rear.v) + params.xi * angle_diff(adj.theta, rear.theta)
    den = _guard(den, params.eps_den)
    return params.lambda_lc * abs(num / den) * phi


def _ref_point(ego: VehicleState, ref_path: ReferencePath) -> VehicleState:
    s, _, foot = project_to_path((ego.x, ego.y), ref_path)
    return VehicleState(float(foot[0]), float(foot[1]), ref_path.heading_at(s), ego.v)


def _center(path: ReferencePath):
    return path.circle[:2] if path.circle is not None else (0.0, 0.0)


def attraction_on_path(ego: VehicleState, params: FieldParams, ref_path: ReferencePath, center=None) -> float:
    """Attraction with the reference state taken as the ego's foot point on ``ref_path``."""
    center = _center(ref_path) if center is None else center
    return attraction(ego, _ref_point(ego, ref_path), params, center)


def total_field(state: SystemState, params: FieldParams, ego_path: ReferencePath,
                ref_path: Optional[ReferencePath] = None) -> FieldSample:
    """Evaluate all three fields and their sum.

    ``ego_path`` is the ego's current lane (arc gaps for the feasibility
    factor); ``ref_path`` is the reference lane of the attraction field and
    defaults to ``ego_path``. A missing front vehicle gives u_b = 0; a
    missing rear or adjacent vehicle gives u_c = 0.
    """
    ref_path = ego_path if ref_path is None else ref_path
    u_a = attraction_on_path(state.ego, params, ref_path)
    u_b, force = 0.0, (0.0, 0.0)
    if state.front is not None:
        u_b = repulsion(state.ego, state.front, params, guard=True)
        force = repulsion_gradient(state.ego, state.front, params, guard=True)
    u_c = 0.0
    if state.rear is not None and state.adjacent:
        u_c = lane_change_field(state, params, feasibility_factor(state, params, ego_path))
    return FieldSample(u_a, u_b, u_c, u_a + u_b + u_c, force)


def _advance(v: Optional[VehicleState], rate, dt: float) -> Optional[VehicleState]:
    if v is None or rate is None:
        return v
    return VehicleState.from_array(v.as_array() + np.asarray(rate, dtype=float) * dt)


def advance_system(state: SystemState, rates: Mapping, dt: float) -> SystemState:
    """Euler step of every vehicle; ``rates`` maps role -> 7-vector
    (``adjacent`` -> sequence of 7-vectors)."""
    adj_rates: Sequence = rates.get("adjacent") or [None] * len(state.adjacent)
    return SystemState(
        ego=_advance(state.ego, rates.get("ego"), dt),
        front=_advance(state.front, rates.get("front"), dt),
        rear=_advance(state.rear, rates.get("rear"), dt),
        adjacent=[_advance(v, r, dt) for v, r in zip(state.adjacent, adj_rates)],
    )


def field_evolution_rate(state: SystemState, rates: Mapping, params: FieldParams, dt_probe: float,
                         ego_path: ReferencePath, ref_path: Optional[ReferencePath] = None,
                         component: str = "u_total") -> float:
    """Forward-difference estimate of dU/dt along the vehicles' motion.

    Parameters are time-invariant, so the explicit partial in t is zero and
    the rate is the state-sensitivity term alone.
    """
    if dt_probe <= 0:
        raise ValueError("dt_probe must be positive")
    u0 = getattr(total_field(state, params, ego_path, ref_path), component)
    u1 = getattr(total_field(advance_system(state, rates, dt_probe), params, ego_path, ref_path), component)
    return (u1 - u0) / dt_probe


def should_change_lane(sample: FieldSample, u_a_adjacent: float, thresholds: Tuple[float, float]) -> bool:
    """All three trigger conditions, with strict inequalities."""
    u_b_thr, u_c_thr = thresholds
    if u_b_thr <= 0 or u_c_thr <= 0:
        raise ValueError("thresholds must be positive")
    return sample.u_b > u_b_thr and sample.u_c < u_c_thr and sample.u_a > u_a_adjacent
