import math

import numpy as np
import pytest

from curvyplan.geometry import circle_path
from curvyplan.sim import (
    ScenarioError,
    advance_hdv,
    build_scenario,
    extract_metrics,
    place_on_lane,
    run_scenario,
)


def test_case_construction(case1_cfg, case2_cfg):
    scn = case1_cfg.scenario
    sv = scn.initial_state("SV")
    assert (sv.x, sv.y, sv.v) == pytest.approx((65.5, 0.0, 5.0))
    assert scn.lanes[2].circle[2] == 65.5 and scn.lanes[1].circle[2] == 68.5
    pv = scn.initial_state("PV")
    assert math.hypot(pv.x, pv.y) == pytest.approx(65.5)
    assert math.degrees(math.atan2(pv.y, pv.x)) == pytest.approx(10.0)
    assert case2_cfg.scenario.spec("IV").speed == 12.5 and case2_cfg.scenario.spec("RV").speed == 6.0


def test_scenario_errors():
    sv = dict(role="SV", lane=2, angle_deg=0, speed=5)
    with pytest.raises(ScenarioError, match="apart"):
        build_scenario(dict(vehicles=[sv, dict(role="PV", lane=2, angle_deg=0, speed=1)]))
    with pytest.raises(ScenarioError, match="unique"):
        build_scenario(dict(vehicles=[sv, sv]))
    with pytest.raises(ScenarioError, match="role"):
        build_scenario(dict(vehicles=[sv, dict(role="XV", lane=1, angle_deg=40, speed=1)]))
    with pytest.raises(ScenarioError):
        build_scenario(dict(vehicles=[sv], road=dict(lane_width=-3.0)))


def test_advance_hdv_properties():
    lane = circle_path(radius=65.5)
    st = place_on_lane(lane, 0.3, 0.0)
    moved = advance_hdv(st, lane, 0.1)
    assert (moved.x, moved.y) == pytest.approx((st.x, st.y), abs=1e-12)

    v, dt = 4.0, 0.1
    st = place_on_lane(lane, 0.0, v)
    prev = math.atan2(st.y, st.x)
    for _ in range(50):
        st = advance_hdv(st, lane, dt)
        ang = math.atan2(st.y, st.x)
        step = (ang - prev) % (2 * math.pi)
        assert abs(step - v * dt / 65.5) < 1e-12
        prev = ang
    assert st.kappa == pytest.approx(1 / 65.5) and st.a == 0.0
    with pytest.raises(ValueError):
        advance_hdv(st, lane, 0.0)


def test_full_loop_returns_to_start():
    lane = circle_path(radius=65.5)
    v = 5.0
    n = 1000
    dt = 2 * math.pi * 65.5 / v / n
    st0 = place_on_lane(lane, 0.7, v)
    st = st0
    for _ in range(n):
        st = advance_hdv(st, lane, dt)
    assert math.hypot(st.x - st0.x, st.y - st0.y) < 1e-3


def test_trace_shape_and_continuity(case1_trace, case1_cfg):
    t = case1_trace.column("t")
    assert len(case1_trace) == case1_cfg.scenario.horizon
    assert np.allclose(np.diff(t), case1_cfg.scenario.dt)
    xy = np.column_stack([case1_trace.column("sv_x"), case1_trace.column("sv_y")])
    step = np.hypot(*np.diff(xy, axis=0).T)
    v_max = max(case1_trace.column("sv_v").max(), 5.0)
    assert np.all(step <= (v_max + 1) * case1_cfg.scenario.dt)


def test_case1_outcome(case1_trace):
    m = extract_metrics(case1_trace)
    assert m.lane_changes == 1 and not m.collision and m.final_lane == 1
    assert m.min_distance > 2.0
    assert m.max_abs_a_y <= 0.4 * 9.81


def test_case_ordering(case1_trace, case2_trace):
    assert case2_trace.trigger_step < case1_trace.trigger_step


def test_determinism(case1_cfg, case1_trace):
    c = case1_cfg
    again = run_scenario(c.scenario, c.params, c.planner, c.seed)
    assert again.rows == case1_trace.rows


def test_truncated_metrics_are_prefix_metrics(case1_trace):
    n = 120
    short = case1_trace.truncate(n)
    m = extract_metrics(short)
    assert m.steps == n
    assert m.min_distance == pytest.approx(case1_trace.column("min_dist")[:n].min())
    assert m.max_abs_a_y == pytest.approx(np.abs(case1_trace.column("a_y")[:n]).max())
    early = extract_metrics(case1_trace.truncate(case1_trace.trigger_step))
    assert early.trigger_step is None and early.maneuver_duration is None


def test_lane_keeping_metrics(case1_cfg):
    scn = build_scenario(dict(vehicles=[dict(role="SV", lane=2, angle_deg=0, speed=5),
                                        dict(role="PV", lane=1, angle_deg=90, speed=5)], horizon=30))
    c = case1_cfg
    tr = run_scenario(scn, c.params, c.planner)
    m = extract_metrics(tr)
    assert m.trigger_step is None and m.lane_changes == 0
    geo = np.hypot(tr.column("sv_x") - tr.column("pv_x"), tr.column("sv_y") - tr.column("pv_y")).min()
    assert m.min_distance == pytest.approx(geo, abs=1e-12)


def test_collision_ends_run(case1_cfg):
    scn = build_scenario(dict(vehicles=[dict(role="SV", lane=2, angle_deg=0, speed=5),
                                        dict(role="PV", lane=2, angle_deg=5, speed=0)], horizon=100))
    tr = run_scenario(scn, case1_cfg.params, case1_cfg.planner, thresholds=(1e12, 100.0))
    assert tr.status == "collision" and len(tr) < 100
    assert extract_metrics(tr).collision
    with pytest.raises(ValueError):
        extract_metrics(tr.truncate(0))
