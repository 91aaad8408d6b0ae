import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from curvyplan.geometry import SystemState, VehicleState, circle_path
from curvyplan.riskfield import (
    DegenerateAngleError,
    FieldParams,
    FieldSample,
    MissingVehicleError,
    adaptive_gamma,
    adaptive_sigma,
    attraction,
    feasibility_factor,
    field_evolution_rate,
    lane_change_field,
    repulsion,
    repulsion_gradient,
    should_change_lane,
    total_field,
)

P = FieldParams()
INNER = circle_path(radius=65.5)
OUTER = circle_path(radius=68.5)


def on(path, angle_deg, v):
    s = math.radians(angle_deg) * path.circle[2]
    x, y = path.point_at(s)
    return VehicleState(x, y, path.heading_at(s), v)


def test_params_validation():
    with pytest.raises(ValueError):
        FieldParams(sigma0=0)
    with pytest.raises(ValueError):
        FieldParams(W=[[1, 0], [0, -1]])
    with pytest.raises(ValueError):
        FieldParams(lambda_lc=-1)
    assert P.replace(min_gap=2.0).min_gap == 2.0


def test_attraction_zero_at_exit_on_reference():
    ego = VehicleState(65.5, -1e-12, 0.0, 5.0)
    ref = VehicleState(65.5, -1e-12, 0.0, 5.0)
    # polar angle just below 2*pi, so the remaining angle is ~0
    assert attraction(ego, ref, P) == pytest.approx(0.0, abs=1e-9)
    ego0 = VehicleState(65.5, 0.0, math.pi / 2, 5.0)
    assert attraction(ego0, ego0, P) == pytest.approx(4 * math.pi ** 2)


def test_attraction_tracking_term():
    ego = VehicleState(65.5, 1.0, 0.0, 5.0)
    ref = VehicleState(68.5, 1.0, 0.0, 5.0)
    base = attraction(ego, ego, P)
    assert attraction(ego, ref, P) - base == pytest.approx(P.beta * 9.0)


def test_adaptive_coefficients():
    assert adaptive_gamma(0, 0, P) == P.gamma0
    assert adaptive_sigma(0, 0, P) == P.sigma0
    assert adaptive_gamma(15, 15, P) == pytest.approx(P.gamma0 * 2.0)
    assert adaptive_sigma(3, 15, P) == pytest.approx(P.sigma0 * 1.5)


def test_repulsion_decays_with_distance():
    ego = on(INNER, 0, 5)
    near, far = on(INNER, 5, 2), on(INNER, 20, 2)
    assert repulsion(ego, near, P) > repulsion(ego, far, P) > 0


def test_degenerate_angle():
    a = VehicleState(0, 0, 0.3, 1.0)
    b = VehicleState(3, 0, 0.3, 1.0)
    with pytest.raises(DegenerateAngleError):
        repulsion(a, b, P)
    assert math.isfinite(repulsion(a, b, P, guard=True))


def _fd_grad(ego, front, h=1e-5):
    def u(x, y):
        return repulsion(VehicleState(x, y, ego.theta, ego.v), front, P)

    gx = (u(ego.x + h, ego.y) - u(ego.x - h, ego.y)) / (2 * h)
    gy = (u(ego.x, ego.y + h) - u(ego.x, ego.y - h)) / (2 * h)
    return np.array([gx, gy])


@settings(max_examples=300, deadline=None)
@given(dx=st.floats(-15, 15), dy=st.floats(-15, 15), th=st.floats(-3, 3), dth=st.floats(0.02, 1.0),
       ve=st.floats(0, 20), vf=st.floats(0, 20))
def test_gradient_matches_finite_differences(dx, dy, th, dth, ve, vf):
    # relative error is ill-posed where the gradient vanishes at zero separation
    assume(math.hypot(dx, dy) > 0.1)
    ego = VehicleState(0.0, 0.0, th, ve)
    front = VehicleState(dx, dy, th + dth, vf)
    force = np.array(repulsion_gradient(ego, front, P))
    grad = _fd_grad(ego, front)
    scale = max(np.linalg.norm(grad), 1e-8)
    assert np.linalg.norm(force + grad) / scale < 1e-4


def test_gradient_at_coincident_positions_is_zero():
    ego = VehicleState(1.0, 2.0, 0.0, 3.0)
    front = VehicleState(1.0, 2.0, 0.5, 3.0)
    assert repulsion_gradient(ego, front, P) == (0.0, 0.0)


def test_lane_change_field_values():
    ego, rear, adj = on(INNER, 0, 5), on(OUTER, -6, 3.5), on(OUTER, 2, 1.5)
    sys = SystemState(ego, None, rear, [adj])
    num = 5 - 3.5 + 0.15
    den = (1.5 - 3.5) + math.radians(8)
    assert lane_change_field(sys, P) == pytest.approx(P.lambda_lc * abs(num / den))
    assert lane_change_field(sys, P, phi=10.0) == pytest.approx(10 * lane_change_field(sys, P))
    with pytest.raises(MissingVehicleError):
        lane_change_field(SystemState(ego), P)


def test_lane_change_field_equal_speeds_guarded():
    ego, rear, adj = on(INNER, 0, 5), on(OUTER, 0, 3.0), on(OUTER, 0, 3.0)
    val = lane_change_field(SystemState(ego, None, rear, [adj]), P)
    assert math.isfinite(val) and val > 1e6


def test_feasibility_factor_uses_arc_gap():
    ego = on(INNER, 0, 5)
    close = SystemState(ego, None, on(OUTER, -20, 3), [on(OUTER, 2, 1.5)])
    clear = SystemState(ego, None, on(OUTER, -20, 3), [on(OUTER, 10, 1.5)])
    assert feasibility_factor(close, P, INNER) == P.phi_unsafe
    assert feasibility_factor(clear, P, INNER) == 1.0


def test_total_field_missing_vehicles():
    ego = on(INNER, 0, 5)
    s = total_field(SystemState(ego), P, INNER, OUTER)
    assert s.u_b == 0 and s.u_c == 0 and s.u_total == s.u_a and s.force == (0.0, 0.0)


def test_total_field_is_sum():
    sys = SystemState(on(INNER, 0, 5), on(INNER, 10, 2), on(OUTER, -6, 3.5), [on(OUTER, 2, 1.5)])
    s = total_field(sys, P, INNER, OUTER)
    assert s.u_total == pytest.approx(s.u_a + s.u_b + s.u_c)


def test_trigger_predicate_strict():
    thr = (10.0, 100.0)
    assert should_change_lane(FieldSample(5.0, 10.1, 99.0, 0), 4.0, thr)
    assert not should_change_lane(FieldSample(5.0, 10.0, 99.0, 0), 4.0, thr)
    assert not should_change_lane(FieldSample(5.0, 20.0, 100.0, 0), 4.0, thr)
    assert not should_change_lane(FieldSample(4.0, 20.0, 50.0, 0), 4.0, thr)
    with pytest.raises(ValueError):
        should_change_lane(FieldSample(5.0, 20.0, 50.0, 0), 4.0, (0.0, 1.0))


def test_field_evolution_rate_static_is_zero():
    sys = SystemState(on(INNER, 0, 5), on(INNER, 10, 2), on(OUTER, -6, 3.5), [on(OUTER, 2, 1.5)])
    assert field_evolution_rate(sys, {}, P, 0.1, INNER, OUTER) == 0.0


def test_field_evolution_rate_matches_difference():
    sys = SystemState(on(INNER, 0, 5), on(INNER, 10, 2))
    rate = {"ego": np.array([0.0, 5.0, 0, 0, 0, 0, 0])}
    r = field_evolution_rate(sys, rate, P, 1e-4, INNER, component="u_b")
    moved = SystemState(VehicleState(sys.ego.x, sys.ego.y + 1e-4 * 5, sys.ego.theta, 5), sys.front)
    fd = (total_field(moved, P, INNER).u_b - total_field(sys, P, INNER).u_b) / 1e-4
    assert r == pytest.approx(fd)
    with pytest.raises(ValueError):
        field_evolution_rate(sys, rate, P, 0.0, INNER)
