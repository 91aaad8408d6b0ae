"""Reference paths, vehicle states and Frenet <-> global transforms.

Paths are arc-length resampled polylines. A path built with
:func:`circle_path` additionally remembers its analytic circle, and every
lookup on it (point, heading, curvature, projection) is then exact; the
simulator relies on this for drift-free lane following.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels

TWO_PI = 2.0 * math.pi
SINGULARITY_EPS = 1e-6


class GeometryError(ValueError):
    """Invalid path or degenerate transform."""


class SingularityError(GeometryError):
    """Raised when 1 - kappa*d is too close to zero."""


def normalize_angle(a):
    """Wrap angle(s) to [-pi, pi)."""
    return (a + math.pi) % TWO_PI - math.pi


def angle_diff(a: float, b: float) -> float:
    """a - b measured on the circle, in [-pi, pi)."""
    return normalize_angle(a - b)


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    theta: float
    v: float
    a: float = 0.0
    kappa: float = 0.0
    psi_dot: float = 0.0

    def __post_init__(self):
        vals = (self.x, self.y, self.theta, self.v, self.a, self.kappa, self.psi_dot)
        if not all(math.isfinite(float(q)) for q in vals):
            raise ValueError(f"non-finite vehicle state: {vals}")
        if self.v < 0:
            raise ValueError(f"negative speed {self.v}")
        object.__setattr__(self, "theta", float(normalize_angle(float(self.theta))))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta, self.v, self.a, self.kappa, self.psi_dot])

    @classmethod
    def from_array(cls, arr) -> "VehicleState":
        x, y, theta, v, a, kappa, psi_dot = (float(q) for q in arr)
        return cls(x, y, theta, max(v, 0.0), a, kappa, psi_dot)


@dataclass(frozen=True)
class SystemState:
    ego: VehicleState
    front: Optional[VehicleState] = None
    rear: Optional[VehicleState] = None
    adjacent: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "adjacent", tuple(self.adjacent))


@dataclass(frozen=True)
class FrenetState:
    s: float
    d: float
    s_dot: float = 0.0
    d_dot: float = 0.0
    s_ddot: float = 0.0
    d_ddot: float = 0.0

    def __post_init__(self):
        vals = (self.s, self.d, self.s_dot, self.d_dot, self.s_ddot, self.d_ddot)
        if not all(math.isfinite(float(q)) for q in vals):
            raise ValueError(f"non-finite Frenet state: {vals}")


@dataclass(frozen=True, eq=False)
class ReferencePath:
    """Arc-length parameterized polyline with heading and curvature samples.

    ``circle`` is ``(cx, cy, radius)`` for analytic counter-clockwise
    circles, else None. ``closed`` paths wrap s modulo ``total_length``.
    """

    waypoints: np.ndarray
    cumulative_s: np.ndarray
    headings: np.ndarray
    curvatures: np.ndarray
    closed: bool = False
    circle: Optional[tuple] = None
    _seg_headings: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        seg = np.diff(self.waypoints, axis=0)
        object.__setattr__(self, "_seg_headings", np.arctan2(seg[:, 1], seg[:, 0]))

    @property
    def total_length(self) -> float:
        if self.circle is not None:
            return TWO_PI * self.circle[2]
        return float(self.cumulative_s[-1])

    def _wrap(self, s):
        if self.closed:
            return np.mod(s, self.total_length)
        return s

    def _check_s(self, s: float) -> float:
        if self.closed:
            return float(self._wrap(s))
        if s < -1e-9 or s > self.total_length + 1e-9:
            raise GeometryError(f"s={s} outside [0, {self.total_length}]")
        return min(max(s, 0.0), self.total_length)

    def point_at(self, s: float) -> np.ndarray:
        s = self._check_s(s)
        if self.circle is not None:
            cx, cy, r = self.circle
            phi = s / r
            return np.array([cx + r * math.cos(phi), cy + r * math.sin(phi)])
        i = self._segment_index(s)
        s0 = self.cumulative_s[i]
        h = self._seg_headings[i]
        return self.waypoints[i] + (s - s0) * np.array([math.cos(h), math.sin(h)])

    def heading_at(self, s: float) -> float:
        """Tangent direction used by the Frenet transforms.

        For polylines this is the heading of the containing segment, which
        makes the position transform an exact inverse of the projection.
        """
        s = self._check_s(s)
        if self.circle is not None:
            return float(normalize_angle(s / self.circle[2] + math.pi / 2))
        return float(self._seg_headings[self._segment_index(s)])

    def curvature_at(self, s: float) -> float:
        s = self._check_s(s)
        if self.circle is not None:
            return 1.0 / self.circle[2]
        return float(np.interp(s, self.cumulative_s, self.curvatures))

    def _segment_index(self, s: float) -> int:
        i = int(np.searchsorted(self.cumulative_s, s, side="right")) - 1
        return min(max(i, 0), len(self.cumulative_s) - 2)


def _vertex_geometry(pts: np.ndarray, cum_s: np.ndarray, closed: bool):
    """Heading and curvature at the raw vertices by finite differences."""
    if closed:
        core, s_core = pts[:-1], cum_s[:-1]
        period = cum_s[-1]
        s_nxt = np.roll(s_core, -1)
        s_nxt[-1] += period
        s_prv = np.roll(s_core, 1)
        s_prv[0] -= period
        tang = np.roll(core, -1, axis=0) - np.roll(core, 1, axis=0)
        hd = np.unwrap(np.arctan2(tang[:, 1], tang[:, 0]))
        k = normalize_angle(np.roll(hd, -1) - np.roll(hd, 1)) / (s_nxt - s_prv)
        hd = np.append(hd, hd[-1] + normalize_angle(hd[0] - hd[-1]))
        return hd, np.append(k, k[0])
    dx = np.gradient(pts[:, 0], cum_s)
    dy = np.gradient(pts[:, 1], cum_s)
    hd = np.unwrap(np.arctan2(dy, dx))
    return hd, np.gradient(hd, cum_s)


def build_reference_path(waypoints: Sequence, resample_step: float = 0.5, closed: bool = False) -> ReferencePath:
    """Resample ``waypoints`` to ``resample_step`` spacing along arc length.

    Heading is the central difference of position and curvature the
    difference of unwrapped heading over s, both taken at the input vertices
    (one-sided at open ends) and interpolated onto the resampled stations.
    """
    pts = np.asarray(waypoints, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise GeometryError("waypoints must be an (N, 2) array")
    if len(pts) < 3:
        raise GeometryError(f"need at least 3 waypoints, got {len(pts)}")
    if resample_step <= 0:
        raise GeometryError("resample_step must be positive")
    if closed and not np.allclose(pts[0], pts[-1]):
        pts = np.vstack([pts, pts[:1]])
    seglen = np.hypot(*np.diff(pts, axis=0).T)
    if np.any(seglen <= 1e-12):
        i = int(np.argmax(seglen <= 1e-12))
        raise GeometryError(f"duplicate consecutive waypoints at index {i}")
    raw_s = np.concatenate([[0.0], np.cumsum(seglen)])
    raw_h, raw_k = _vertex_geometry(pts, raw_s, closed)

    n = max(int(math.ceil(raw_s[-1] / resample_step - 1e-9)), 2)
    s = np.linspace(0.0, raw_s[-1], n + 1)
    res = np.column_stack([np.interp(s, raw_s, pts[:, 0]), np.interp(s, raw_s, pts[:, 1])])
    cum = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(res, axis=0).T))])
    headings = normalize_angle(np.interp(s, raw_s, raw_h))
    curv = np.interp(s, raw_s, raw_k)
    return ReferencePath(res, cum, headings, curv, closed=closed)


def circle_path(center=(0.0, 0.0), radius: float = 65.5, resample_step: float = 0.5) -> ReferencePath:
    """Closed counter-clockwise circle starting on the +x axis."""
    if radius <= 0:
        raise GeometryError("radius must be positive")
    n = max(int(math.ceil(TWO_PI * radius / resample_step)), 8)
    phi = np.linspace(0.0, TWO_PI, n + 1)
    cx, cy = center
    pts = np.column_stack([cx + radius * np.cos(phi), cy + radius * np.sin(phi)])
    cum = phi * radius
    headings = normalize_angle(phi + math.pi / 2)
    curv = np.full(n + 1, 1.0 / radius)
    return ReferencePath(pts, cum, headings, curv, closed=True, circle=(float(cx), float(cy), float(radius)))


def project_to_path(p, path: ReferencePath):
    """Closest point on ``path`` to ``p``.

    Returns ``(s, d, foot)``; d is positive left of the path direction.
    Ties between segments resolve to the smallest s.
    """
    px, py = float(p[0]), float(p[1])
    if path.circle is not None:
        cx, cy, r = path.circle
        rho = math.hypot(px - cx, py - cy)
        phi = math.atan2(py - cy, px - cx) % TWO_PI if rho > 0 else 0.0
        foot = np.array([cx + r * math.cos(phi), cy + r * math.sin(phi)])
        return phi * r, r - rho, foot
    s, d, fx, fy = _kernels.project_polyline(path.waypoints, path.cumulative_s, px, py)
    return float(s), float(d), np.array([fx, fy])


def _frenet_frame(path: ReferencePath, s: float, d: float):
    psi = path.heading_at(s)
    kappa = path.curvature_at(s)
    one_minus = 1.0 - kappa * d
    if one_minus <= SINGULARITY_EPS:
        raise SingularityError(f"1 - kappa*d = {one_minus:.3g} at s={s:.3f}, d={d:.3f}")
    return psi, kappa, one_minus


def global_to_frenet(state: VehicleState, path: ReferencePath) -> FrenetState:
    """Global vehicle state to (s, d) and their first two time derivatives."""
    s, d, _ = project_to_path((state.x, state.y), path)
    psi, kappa, om = _frenet_frame(path, s, d)
    c, sn = math.cos(state.theta), math.sin(state.theta)
    xd, yd = state.v * c, state.v * sn
    # tangential a along heading plus centripetal v^2*kappa to the left
    an = state.v ** 2 * state.kappa
    xdd = state.a * c - an * sn
    ydd = state.a * sn + an * c
    cp, sp = math.cos(psi), math.sin(psi)
    s_dot = (xd * cp + yd * sp) / om
    d_dot = yd * cp - xd * sp
    s_ddot = (xdd * cp + ydd * sp) / om + kappa * s_dot ** 2 / om
    d_ddot = ydd * cp - xdd * sp - kappa * s_dot ** 2
    return FrenetState(s, d, s_dot, d_dot, s_ddot, d_ddot)


def frenet_to_global(fs: FrenetState, path: ReferencePath) -> VehicleState:
    """Inverse of :func:`global_to_frenet`, including accelerations."""
    s = path._check_s(fs.s)
    psi, kappa, om = _frenet_frame(path, s, fs.d)
    xp, yp = path.point_at(s)
    cp, sp = math.cos(psi), math.sin(psi)
    x = xp - fs.d * sp
    y = yp + fs.d * cp
    lon = fs.s_dot * om
    theta = psi + math.atan2(fs.d_dot, lon)
    xd = cp * lon - sp * fs.d_dot
    yd = sp * lon + cp * fs.d_dot
    v = math.hypot(xd, yd)
    # undo the acceleration rows of the forward transform
    lon_acc = (fs.s_ddot - kappa * fs.s_dot ** 2 / om) * om
    lat_acc = fs.d_ddot + kappa * fs.s_dot ** 2
    xdd = cp * lon_acc - sp * lat_acc
    ydd = sp * lon_acc + cp * lat_acc
    if v > 1e-12:
        a = (xdd * xd + ydd * yd) / v
        kappa_v = (xd * ydd - yd * xdd) / v ** 3
    else:
        a, kappa_v = math.hypot(xdd, ydd), 0.0
    return VehicleState(x, y, theta, v, a, kappa_v, v * kappa_v)
