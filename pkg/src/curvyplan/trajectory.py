"""Quintic lateral trajectories, control reconstruction and feasibility checks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .geometry import ReferencePath

G = 9.81


class TrajectoryError(ValueError):
    pass


@dataclass(frozen=True)
class BoundaryConditions:
    t_s: float
    t_e: float
    y_s: float = 0.0
    yd_s: float = 0.0
    ydd_s: float = 0.0
    y_e: float = 0.0
    yd_e: float = 0.0
    ydd_e: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.as_vector()) or not (
            math.isfinite(self.t_s) and math.isfinite(self.t_e)
        ):
            raise TrajectoryError("non-finite boundary conditions")
        if self.t_e <= self.t_s:
            raise TrajectoryError(f"t_e={self.t_e} must exceed t_s={self.t_s}")

    def as_vector(self) -> np.ndarray:
        return np.array([self.y_s, self.yd_s, self.ydd_s, self.y_e, self.yd_e, self.ydd_e], dtype=float)


@dataclass(frozen=True, eq=False)
class QuinticTrajectory:
    """Quintic on [t_s, t_e], stored in shifted time tau = t - t_s."""

    local_coeffs: np.ndarray
    t_s: float
    t_e: float

    @property
    def coeffs(self) -> np.ndarray:
        """a0..a5 of the polynomial in absolute time t."""
        return _shift_coeffs(self.local_coeffs, self.t_s)

    @property
    def duration(self) -> float:
        return self.t_e - self.t_s


@dataclass(frozen=True)
class DynamicLimits:
    ay_max: float = 0.4 * G
    mu: float = 0.85
    beta_max: float = math.radians(10.0)
    delta_max: float = math.radians(2.0)
    g: float = G
    v_floor: float = 0.1

    def __post_init__(self):
        for name in ("ay_max", "mu", "beta_max", "delta_max", "g", "v_floor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"DynamicLimits.{name} must be positive")

    def yaw_rate_limit(self, v_x):
        return self.mu * self.g / np.maximum(v_x, self.v_floor)


@dataclass(frozen=True)
class VehicleGeometry:
    wheelbase: float = 2.7
    lr: float = 1.35


@dataclass(frozen=True, eq=False)
class ControlTrace:
    """Sampled maneuver.

    ``delta`` is the total front-wheel angle; ``delta_man`` is the part of
    it beyond the road-following feed-forward ``arctan(L * kappa_road)``,
    and is what the steering limit applies to.
    """

    times: np.ndarray
    y: np.ndarray
    y_dot: np.ndarray
    y_ddot: np.ndarray
    a_y: np.ndarray
    psi_dot: np.ndarray
    beta: np.ndarray
    delta: np.ndarray
    v_x: np.ndarray
    delta_man: Optional[np.ndarray] = None

    def __post_init__(self):
        n = len(self.times)
        for name in ("y", "y_dot", "y_ddot", "a_y", "psi_dot", "beta", "delta", "v_x"):
            if len(getattr(self, name)) != n:
                raise TrajectoryError(f"ControlTrace.{name} length mismatch")
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise TrajectoryError("times must be strictly increasing")
        if self.delta_man is None:
            object.__setattr__(self, "delta_man", np.asarray(self.delta))


@dataclass(frozen=True)
class Violation:
    constraint: str
    time: float
    magnitude: float


CONSTRAINTS = ("a_y", "psi_dot", "beta", "delta")


def boundary_matrix(t_s: float, t_e: float) -> np.ndarray:
    """6x6 matrix mapping coefficients to boundary position/velocity/acceleration."""
    rows = []
    for t in (t_s, t_e):
        rows.append([t ** i for i in range(6)])
        rows.append([0.0] + [i * t ** (i - 1) for i in range(1, 6)])
        rows.append([0.0, 0.0] + [i * (i - 1) * t ** (i - 2) for i in range(2, 6)])
    return np.array(rows, dtype=float)


def _shift_coeffs(c: np.ndarray, shift: float) -> np.ndarray:
    """Coefficients of p(t) given those of q(tau) with tau = t - shift."""
    out = np.zeros(6)
    for k, ck in enumerate(c):
        for i in range(k + 1):
            out[i] += ck * math.comb(k, i) * (-shift) ** (k - i)
    return out


def solve_quintic(bc: BoundaryConditions) -> QuinticTrajectory:
    """Solve ``M(t_s, t_e) a = b`` for the quintic coefficients.

    The system is solved in shifted time tau = t - t_s, where M stays well
    conditioned for any t_s; ``coeffs`` on the result converts back.
    """
    T = bc.t_e - bc.t_s
    if T < 0.1:
        raise TrajectoryError(f"maneuver duration {T:.3g} s is below 0.1 s")
    M = boundary_matrix(0.0, T)
    local = np.linalg.solve(M, bc.as_vector())
    assert np.all(np.isfinite(local)), "singular boundary matrix"
    return QuinticTrajectory(local, bc.t_s, bc.t_e)


def _horner(c, tau):
    y = np.zeros_like(tau)
    for ck in c[::-1]:
        y = y * tau + ck
    return y


def eval_trajectory(traj: QuinticTrajectory, t):
    """Position, velocity and acceleration at time(s) ``t`` inside the window."""
    t_arr = np.asarray(t, dtype=float)
    tol = 1e-9 * max(1.0, abs(traj.t_e))
    if np.any(t_arr < traj.t_s - tol) or np.any(t_arr > traj.t_e + tol):
        raise TrajectoryError(f"t outside [{traj.t_s}, {traj.t_e}]")
    c = traj.local_coeffs
    tau = t_arr - traj.t_s
    dc = c[1:] * np.arange(1, 6)
    ddc = dc[1:] * np.arange(1, 5)
    y, yd, ydd = _horner(c, tau), _horner(dc, tau), _horner(ddc, tau)
    if np.ndim(t) == 0:
        return float(y), float(yd), float(ydd)
    return y, yd, ydd


def sample_times(t_s: float, t_e: float, dt: float) -> np.ndarray:
    n = int(math.floor((t_e - t_s) / dt + 1e-9))
    return t_s + dt * np.arange(n + 1)


def reconstruct_controls(
    traj: QuinticTrajectory,
    v_x_profile,
    path: ReferencePath,
    vehicle: VehicleGeometry = VehicleGeometry(),
    dt: float = 0.05,
    s0: float = 0.0,
    v_x_dot=None,
) -> ControlTrace:
    """Sample the maneuver and rebuild curvature-derived controls.

    ``v_x_profile`` is the along-track speed, a scalar or one value per
    sample. The offset trajectory is placed on ``path`` starting at arc
    length ``s0``; arc length advances at ``v_x / (1 - kappa*d)``.
    """
    if dt <= 0:
        raise TrajectoryError("dt must be positive")
    times = sample_times(traj.t_s, traj.t_e, dt)
    y, yd, ydd = eval_trajectory(traj, times)
    v_x = np.broadcast_to(np.asarray(v_x_profile, dtype=float), times.shape).copy()
    if np.any(v_x <= 0):
        raise TrajectoryError("v_x must be positive")
    if v_x_dot is None:
        v_x_dot = np.gradient(v_x, times) if len(times) > 1 else np.zeros_like(v_x)
    v_x_dot = np.broadcast_to(np.asarray(v_x_dot, dtype=float), times.shape)

    # arc length along the path: s_dot = v_x / (1 - kappa d), trapezoidal in time
    s = np.empty_like(times)
    s[0] = s0
    kap = np.empty_like(times)
    kap[0] = path.curvature_at(s0)
    for i in range(1, len(times)):
        rate0 = v_x[i - 1] / (1.0 - kap[i - 1] * y[i - 1])
        guess = s[i - 1] + rate0 * (times[i] - times[i - 1])
        k_i = path.curvature_at(guess)
        rate1 = v_x[i] / (1.0 - k_i * y[i])
        s[i] = s[i - 1] + 0.5 * (rate0 + rate1) * (times[i] - times[i - 1])
        kap[i] = path.curvature_at(s[i])

    k_road = kap / (1.0 - kap * y)
    k_lat = (v_x * ydd - yd * v_x_dot) / (v_x ** 2 + yd ** 2) ** 1.5
    k_tot = k_road + k_lat
    L, lr = vehicle.wheelbase, vehicle.lr
    delta = np.arctan(L * k_tot)
    return ControlTrace(
        times=times,
        y=y,
        y_dot=yd,
        y_ddot=ydd,
        a_y=v_x ** 2 * k_tot,
        psi_dot=v_x * k_tot,
        beta=np.arctan(lr * k_tot),
        delta=delta,
        v_x=v_x,
        delta_man=delta - np.arctan(L * k_road),
    )


def violation_series(trace: ControlTrace, limits: DynamicLimits) -> dict:
    """Pointwise max(0, |value| - limit) for each constraint."""
    return {
        "a_y": np.maximum(0.0, np.abs(trace.a_y) - limits.ay_max),
        "psi_dot": np.maximum(0.0, np.abs(trace.psi_dot) - limits.yaw_rate_limit(trace.v_x)),
        "beta": np.maximum(0.0, np.abs(trace.beta) - limits.beta_max),
        "delta": np.maximum(0.0, np.abs(trace.delta_man) - limits.delta_max),
    }


def check_constraints(trace: ControlTrace, limits: DynamicLimits) -> List[Violation]:
    """One record per constraint that is violated, at its worst sample.

    Empty iff every sample satisfies all four limits.
    """
    out = []
    for name, series in violation_series(trace, limits).items():
        if series.size and series.max() > 0.0:
            i = int(np.argmax(series))
            out.append(Violation(name, float(trace.times[i]), float(series[i])))
    return out
