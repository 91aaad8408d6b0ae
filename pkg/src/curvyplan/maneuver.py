"""The lane-change selection problem searched by the swarm.

A candidate is ``(duration, advance)``: the maneuver lasts ``duration``
seconds and moves the ego ``advance`` metres of arc length along the
reference lane at constant rate, while the lateral offset follows a
rest-to-rest quintic to the target lane. After the maneuver the ego keeps
that rate in the target lane.

Cost terms, each a maximum over the sampled maneuver normalized by its
limit: advance / x_te_max, lateral acceleration, yaw rate (against the
pointwise bound mu*g/v_x), side slip, and maneuver steering. Constraints
are the same four ratios minus one plus a clearance term against the
predicted other vehicles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from . import _kernels
from .geometry import ReferencePath
from .optimizer import Problem
from .trajectory import (
    BoundaryConditions,
    DynamicLimits,
    VehicleGeometry,
    Violation,
    check_constraints,
    eval_trajectory,
    reconstruct_controls,
    sample_times,
    solve_quintic,
)

CONSTRAINT_NAMES = ("a_y", "psi_dot", "beta", "delta", "clearance")
MIN_DURATION = 0.1


@dataclass(frozen=True, eq=False)
class CostWeights:
    w: np.ndarray = field(default_factory=lambda: np.full(5, 0.2))
    x_te_max: float = 60.0

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.shape != (5,) or np.any(w < 0):
            raise ValueError("need five non-negative cost weights")
        if not self.x_te_max > 0:
            raise ValueError("x_te_max must be positive")
        object.__setattr__(self, "w", w)


@dataclass(frozen=True, eq=False)
class PlanningContext:
    """Everything a candidate maneuver is scored against.

    ``hdv_positions`` holds predicted (x, y) of the other vehicles at
    ``k * dt`` seconds after the maneuver start, k = 0..K-1; clearance is
    checked over that whole window.
    """

    path: ReferencePath
    s0: float
    d_target: float
    hdv_positions: np.ndarray
    d0: float = 0.0
    d_dot0: float = 0.0
    d_ddot0: float = 0.0
    t0: float = 0.0
    dt: float = 0.05
    bounds: np.ndarray = field(default_factory=lambda: np.array([[2.0, 30.0], [5.0, 60.0]]))
    clearance: float = 2.5
    limits: DynamicLimits = DynamicLimits()
    vehicle: VehicleGeometry = VehicleGeometry()
    weights: CostWeights = CostWeights()
    station_step: float = 0.25
    _window: tuple = field(init=False, repr=False)

    def __post_init__(self):
        hdv = np.asarray(self.hdv_positions, dtype=float)
        if hdv.ndim != 3 or hdv.shape[2] != 2:
            raise ValueError("hdv_positions must be (M, K, 2)")
        object.__setattr__(self, "hdv_positions", np.ascontiguousarray(hdv))
        object.__setattr__(self, "bounds", np.asarray(self.bounds, dtype=float))
        object.__setattr__(self, "_window", self._build_window())

    @property
    def horizon(self) -> float:
        return (self.hdv_positions.shape[1] - 1) * self.dt

    def _build_window(self):
        (t_lo, _), (_, ds_hi) = self.bounds
        reach = ds_hi + ds_hi / t_lo * self.horizon + 2.0 * self.station_step
        if not self.path.closed:
            reach = min(reach, self.path.total_length - self.s0)
        n = max(int(math.ceil(reach / self.station_step)), 1) + 1
        s = self.s0 + self.station_step * np.arange(n)
        if not self.path.closed:
            s = np.minimum(s, self.path.total_length)
        pts = np.array([self.path.point_at(q) for q in s])
        ph = np.unwrap([self.path.heading_at(q) for q in s])
        pk = np.array([self.path.curvature_at(q) for q in s])
        return (
            np.array([self.s0, self.station_step]),
            np.ascontiguousarray(pts[:, 0]),
            np.ascontiguousarray(pts[:, 1]),
            np.ascontiguousarray(ph),
            np.ascontiguousarray(pk),
        )

    def boundary(self, duration: float) -> BoundaryConditions:
        return BoundaryConditions(self.t0, self.t0 + duration, self.d0, self.d_dot0, self.d_ddot0, self.d_target)


def _terms_from_extremes(cand: np.ndarray, ext: np.ndarray, ctx: PlanningContext):
    lim, wts = ctx.limits, ctx.weights
    ratios = np.column_stack([
        cand[:, 1] / wts.x_te_max,
        ext[:, _kernels.OUT_AY] / lim.ay_max,
        ext[:, _kernels.OUT_YAW],
        ext[:, _kernels.OUT_BETA] / lim.beta_max,
        ext[:, _kernels.OUT_DELTA] / lim.delta_max,
    ])
    J = ratios @ wts.w
    G = np.column_stack([ratios[:, 1:] - 1.0, 1.0 - ext[:, _kernels.OUT_MIN_DIST] / ctx.clearance])
    return J, G, ratios


def batch_terms(X, ctx: PlanningContext, kernel=None):
    """Vectorized (J, G, ratios) for an (N, 2) candidate array."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    kernel = _kernels.maneuver_batch if kernel is None else kernel
    lim, veh = ctx.limits, ctx.vehicle
    win, px, py, ph, pk = ctx._window
    bc = np.array([ctx.d0, ctx.d_dot0, ctx.d_ddot0, ctx.d_target, ctx.s0])
    ext = kernel(X, bc, win, px, py, ph, pk, ctx.hdv_positions, ctx.dt,
                 np.array([veh.wheelbase, veh.lr, lim.mu * lim.g]))
    J, G, ratios = _terms_from_extremes(X, ext, ctx)
    bad = (X[:, 0] < MIN_DURATION) | (X[:, 1] <= 0)
    J[bad] = np.inf
    return J, G, ratios


class LaneChangeProblem(Problem):
    def __init__(self, ctx: PlanningContext, kernel=None):
        self.ctx = ctx
        self.bounds = ctx.bounds
        self.kernel = kernel

    def evaluate(self, X):
        J, G, _ = batch_terms(X, self.ctx, self.kernel)
        return J, G


def min_clearance(candidate, ctx: PlanningContext) -> float:
    """Smallest distance to any predicted vehicle, sampled on the context grid."""
    T, ds = float(candidate[0]), float(candidate[1])
    traj = solve_quintic(ctx.boundary(T))
    vm = ds / T
    best = math.inf
    n_t = ctx.hdv_positions.shape[1]
    for k in range(n_t):
        t = k * ctx.dt
        if t <= T + 1e-9:
            d = float(np.polyval(traj.local_coeffs[::-1], t))
            s = ctx.s0 + vm * t
        else:
            d = ctx.d_target
            s = ctx.s0 + ds + vm * (t - T)
        psi = ctx.path.heading_at(s)
        xp, yp = ctx.path.point_at(s)
        x, y = xp - d * math.sin(psi), yp + d * math.cos(psi)
        for m in range(ctx.hdv_positions.shape[0]):
            best = min(best, math.hypot(x - ctx.hdv_positions[m, k, 0], y - ctx.hdv_positions[m, k, 1]))
    return best


def maneuver_trace(candidate, ctx: PlanningContext):
    """ControlTrace of a candidate, sampled at ``ctx.dt`` from the maneuver start."""
    T, ds = float(candidate[0]), float(candidate[1])
    traj = solve_quintic(ctx.boundary(T))
    vm = ds / T
    times = sample_times(traj.t_s, traj.t_e, ctx.dt)
    y, yd, _ = eval_trajectory(traj, times)
    kap = np.array([ctx.path.curvature_at(ctx.s0 + vm * (t - ctx.t0)) for t in times])
    v_x = vm * (1.0 - kap * y)
    return traj, reconstruct_controls(traj, v_x, ctx.path, ctx.vehicle, ctx.dt, ctx.s0, v_x_dot=-vm * kap * yd)


def evaluate_cost(candidate, ctx: PlanningContext):
    """Scalar route: cost J and violation records for one candidate.

    Builds the quintic, reconstructs the controls and checks them; a
    clearance shortfall is reported as a ``clearance`` violation in metres.
    Candidates that cannot be decoded cost ``inf``.
    """
    T, ds = float(candidate[0]), float(candidate[1])
    if T < MIN_DURATION or ds <= 0:
        return math.inf, [Violation("decode", ctx.t0, math.inf)]
    _, trace = maneuver_trace(candidate, ctx)
    lim, w = ctx.limits, ctx.weights.w
    ratios = np.array([
        ds / ctx.weights.x_te_max,
        np.max(np.abs(trace.a_y)) / lim.ay_max,
        np.max(np.abs(trace.psi_dot) / lim.yaw_rate_limit(trace.v_x)),
        np.max(np.abs(trace.beta)) / lim.beta_max,
        np.max(np.abs(trace.delta_man)) / lim.delta_max,
    ])
    violations: List[Violation] = check_constraints(trace, lim)
    gap = min_clearance(candidate, ctx)
    if gap < ctx.clearance:
        violations.append(Violation("clearance", ctx.t0, ctx.clearance - gap))
    return float(ratios @ w), violations


def grid_oracle(ctx: PlanningContext, n: int = 100):
    """Exhaustive n x n search over the decision box.

    Returns ``(best_x, best_J)`` among candidates with no violation.
    """
    (t_lo, t_hi), (s_lo, s_hi) = ctx.bounds
    tt, ss = np.meshgrid(np.linspace(t_lo, t_hi, n), np.linspace(s_lo, s_hi, n), indexing="ij")
    X = np.column_stack([tt.ravel(), ss.ravel()])
    J, G, _ = batch_terms(X, ctx)
    J = np.where(np.all(G <= 0, axis=1), J, np.inf)
    i = int(np.argmin(J))
    return X[i], float(J[i])
