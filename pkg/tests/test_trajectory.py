import math

import numpy as np
import pytest

from curvyplan.geometry import build_reference_path, circle_path
from curvyplan.trajectory import (
    BoundaryConditions,
    ControlTrace,
    DynamicLimits,
    TrajectoryError,
    boundary_matrix,
    check_constraints,
    eval_trajectory,
    reconstruct_controls,
    solve_quintic,
)


def rest_to_rest(t, D=3.0, T=5.0):
    tau = t / T
    return D * (10 * tau ** 3 - 15 * tau ** 4 + 6 * tau ** 5)


def test_rest_to_rest_closed_form():
    traj = solve_quintic(BoundaryConditions(0.0, 5.0, y_e=3.0))
    t = np.linspace(0, 5, 501)
    y, yd, ydd = eval_trajectory(traj, t)
    assert np.max(np.abs(y - rest_to_rest(t))) < 1e-9
    assert yd[0] == pytest.approx(0, abs=1e-12) and yd[-1] == pytest.approx(0, abs=1e-9)


def test_residual_random_boundaries():
    rng = np.random.default_rng(1)
    for _ in range(100):
        t_s = rng.uniform(0, 50)
        T = rng.uniform(1, 10)
        b = rng.uniform(-5, 5, 6)
        bc = BoundaryConditions(t_s, t_s + T, *b)
        traj = solve_quintic(bc)
        # residual in the frame the system is solved in
        res = boundary_matrix(0.0, T) @ traj.local_coeffs - b
        assert np.max(np.abs(res)) < 1e-8
        y0, v0, a0 = eval_trajectory(traj, t_s)
        y1, v1, a1 = eval_trajectory(traj, t_s + T)
        assert np.allclose([y0, v0, a0, y1, v1, a1], b, atol=1e-7)


def test_absolute_coefficients_match_local():
    bc = BoundaryConditions(12.0, 17.0, 0.5, 0.1, 0.0, 3.0)
    traj = solve_quintic(bc)
    t = np.linspace(12, 17, 11)
    assert np.allclose(np.polyval(traj.coeffs[::-1], t), eval_trajectory(traj, t)[0], atol=1e-7)


def test_shifted_time_window_far_from_origin():
    traj = solve_quintic(BoundaryConditions(1e4, 1e4 + 5, y_e=3.0))
    t = 1e4 + np.linspace(0, 5, 51)
    assert np.max(np.abs(eval_trajectory(traj, t)[0] - rest_to_rest(t - 1e4))) < 1e-9


def test_boundary_errors():
    with pytest.raises(TrajectoryError):
        BoundaryConditions(5.0, 5.0)
    with pytest.raises(TrajectoryError):
        solve_quintic(BoundaryConditions(0.0, 0.05, y_e=1.0))
    with pytest.raises(TrajectoryError):
        BoundaryConditions(0.0, 1.0, y_e=float("nan"))
    traj = solve_quintic(BoundaryConditions(0.0, 5.0, y_e=3.0))
    with pytest.raises(TrajectoryError):
        eval_trajectory(traj, 6.0)


def test_null_maneuver_on_straight_road():
    path = build_reference_path([(0, 0), (100, 0), (200, 0)])
    traj = solve_quintic(BoundaryConditions(0.0, 5.0))
    tr = reconstruct_controls(traj, 10.0, path)
    for arr in (tr.a_y, tr.psi_dot, tr.beta, tr.delta):
        assert np.allclose(arr, 0.0)
    assert check_constraints(tr, DynamicLimits()) == []


def test_straight_road_lateral_oracle():
    # on a straight road the lateral curvature reduces to the planar curve formula
    path = build_reference_path([(0, 0), (200, 0), (400, 0)])
    traj = solve_quintic(BoundaryConditions(0.0, 5.0, y_e=3.0))
    v = 10.0
    tr = reconstruct_controls(traj, v, path, dt=0.05)
    k = v * tr.y_ddot / (v ** 2 + tr.y_dot ** 2) ** 1.5
    assert np.allclose(tr.psi_dot, v * k)
    assert np.allclose(tr.delta, np.arctan(2.7 * k))


def test_lane_keeping_on_circle_feed_forward():
    path = circle_path(radius=65.5)
    traj = solve_quintic(BoundaryConditions(0.0, 5.0))
    tr = reconstruct_controls(traj, 5.0, path)
    assert np.allclose(tr.a_y, 25 / 65.5)
    assert np.allclose(tr.delta, math.atan(2.7 / 65.5))
    assert np.allclose(tr.delta_man, 0.0)


def test_check_constraints_reports_worst_sample():
    path = build_reference_path([(0, 0), (200, 0), (400, 0)])
    traj = solve_quintic(BoundaryConditions(0.0, 2.0, y_e=3.0))
    tr = reconstruct_controls(traj, 15.0, path)
    v = check_constraints(tr, DynamicLimits())
    names = {x.constraint for x in v}
    assert "delta" in names
    for x in v:
        assert x.magnitude > 0 and 0 <= x.time <= 2.0
    slow = reconstruct_controls(solve_quintic(BoundaryConditions(0.0, 20.0, y_e=3.0)), 3.0, path)
    assert check_constraints(slow, DynamicLimits()) == []


def test_exact_limit_is_allowed():
    lim = DynamicLimits()
    t = np.array([0.0, 0.1])
    z = np.zeros(2)
    tr = ControlTrace(t, z, z, z, np.full(2, lim.ay_max), z, z, z, np.ones(2))
    assert check_constraints(tr, lim) == []
    tr = ControlTrace(t, z, z, z, np.array([0.0, lim.ay_max * 1.01]), z, z, z, np.ones(2))
    (v,) = check_constraints(tr, lim)
    assert v.constraint == "a_y" and v.time == pytest.approx(0.1)


def test_control_trace_validation():
    z = np.zeros(3)
    with pytest.raises(TrajectoryError):
        ControlTrace(np.array([0.0, 0.1, 0.1]), z, z, z, z, z, z, z, z)
    with pytest.raises(TrajectoryError):
        ControlTrace(np.arange(3.0), z[:2], z, z, z, z, z, z, z)
