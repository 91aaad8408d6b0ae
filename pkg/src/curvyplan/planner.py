"""Per-step decision logic: trigger, maneuver selection, maneuver lifecycle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Tuple

import numpy as np

from .geometry import ReferencePath, SystemState, VehicleState, project_to_path
from .maneuver import CostWeights, LaneChangeProblem, PlanningContext
from .optimizer import OptimizeResult, SwarmConfig, optimize
from .riskfield import FieldParams, FieldSample, attraction_on_path, should_change_lane, total_field
from .trajectory import DynamicLimits, QuinticTrajectory, VehicleGeometry, solve_quintic

KEEPING, CHANGING, COMPLETED = "keeping", "changing", "completed"
KEEP, START_CHANGE, CONTINUE_CHANGE = "keep", "start_change", "continue_change"


class PlannerInfeasibleError(RuntimeError):
    """Every candidate the optimizer found violates a constraint."""

    def __init__(self, msg, result: Optional[OptimizeResult] = None):
        super().__init__(msg)
        self.result = result


@dataclass(frozen=True, eq=False)
class PlannerConfig:
    thresholds: Tuple[float, float] = (10.0, 100.0)
    bounds: np.ndarray = field(default_factory=lambda: np.array([[2.0, 30.0], [5.0, 60.0]]))
    clearance: float = 2.5
    lookahead: float = 10.0
    check_dt: float = 0.05
    limits: DynamicLimits = DynamicLimits()
    vehicle: VehicleGeometry = VehicleGeometry()
    weights: CostWeights = CostWeights()
    n_particles: int = 40
    iterations: int = 100
    mode: str = "ipso"

    def swarm(self, seed: int) -> SwarmConfig:
        return SwarmConfig(bounds=self.bounds, n_particles=self.n_particles, T=self.iterations,
                           seed=seed, mode=self.mode)


@dataclass(frozen=True, eq=False)
class Maneuver:
    trajectory: QuinticTrajectory
    target_lane: int
    path: ReferencePath  # lane the offset is measured from
    s0: float
    rate: float  # arc length per second along ``path``
    advance: float
    result: Optional[OptimizeResult] = None
    context: Optional[PlanningContext] = None

    @property
    def t_e(self) -> float:
        return self.trajectory.t_e


@dataclass(frozen=True)
class PlannerState:
    phase: str = KEEPING
    maneuver: Optional[Maneuver] = None
    trigger_step: Optional[int] = None
    thresholds: Tuple[float, float] = (10.0, 100.0)

    def __post_init__(self):
        if (self.maneuver is not None) != (self.phase == CHANGING) and self.phase != COMPLETED:
            raise ValueError("a maneuver is held exactly while changing lanes")


@dataclass(frozen=True, eq=False)
class LaneView:
    """What the planner sees of the road at one step.

    ``predict(times)`` returns (M, K, 2) positions of the other vehicles at
    ``times`` seconds from now.
    """

    ego_path: ReferencePath
    adjacent_path: ReferencePath
    ref_path: ReferencePath
    adjacent_lane: int
    t: float
    step: int
    predict: Callable[[np.ndarray], np.ndarray]
    seed: int = 0


@dataclass(frozen=True)
class StepOutput:
    action: str
    planner: PlannerState
    sample: FieldSample
    u_a_adjacent: float
    triggered: bool


def adjacent_attraction(ego: VehicleState, params: FieldParams, view: LaneView) -> float:
    """Attraction with the ego moved onto the adjacent centerline at the same station."""
    s, _, foot = project_to_path((ego.x, ego.y), view.adjacent_path)
    moved = VehicleState(float(foot[0]), float(foot[1]), view.adjacent_path.heading_at(s), ego.v)
    return attraction_on_path(moved, params, view.ref_path)


def build_context(sys: SystemState, view: LaneView, cfg: PlannerConfig) -> PlanningContext:
    ego = sys.ego
    s0, d0, _ = project_to_path((ego.x, ego.y), view.ego_path)
    _, _, foot = project_to_path((ego.x, ego.y), view.adjacent_path)
    _, d_target, _ = project_to_path(foot, view.ego_path)
    horizon = float(cfg.bounds[0][1]) + cfg.lookahead
    n = int(math.ceil(horizon / cfg.check_dt)) + 1
    times = cfg.check_dt * np.arange(n)
    return PlanningContext(
        path=view.ego_path,
        s0=s0,
        d_target=d_target,
        hdv_positions=view.predict(times),
        d0=d0,
        t0=view.t,
        dt=cfg.check_dt,
        bounds=cfg.bounds,
        clearance=cfg.clearance,
        limits=cfg.limits,
        vehicle=cfg.vehicle,
        weights=cfg.weights,
    )


def select_maneuver(ctx: PlanningContext, cfg: PlannerConfig, seed: int, target_lane: int) -> Maneuver:
    result = optimize(LaneChangeProblem(ctx), cfg.swarm(seed))
    if not result.feasible:
        raise PlannerInfeasibleError(
            f"no feasible maneuver: best violations {np.round(result.violations, 4).tolist()}", result)
    T, ds = (float(q) for q in result.x)
    traj = solve_quintic(ctx.boundary(T))
    return Maneuver(traj, target_lane, ctx.path, ctx.s0, ds / T, ds, result, ctx)


def plan_step(sys: SystemState, planner: PlannerState, params: FieldParams, cfg: PlannerConfig,
              view: LaneView) -> StepOutput:
    """Advance the keeping -> changing -> completed state machine by one step.

    The trigger is evaluated only while keeping and fires at most once; a
    started maneuver always runs to completion.
    """
    sample = total_field(sys, params, view.ego_path, view.ref_path)
    u_a_adj = adjacent_attraction(sys.ego, params, view)

    if planner.phase == CHANGING:
        if view.t > planner.maneuver.t_e + 1e-9:
            return StepOutput(KEEP, replace(planner, phase=COMPLETED, maneuver=None), sample, u_a_adj, False)
        return StepOutput(CONTINUE_CHANGE, planner, sample, u_a_adj, False)
    if planner.phase == COMPLETED or planner.trigger_step is not None:
        return StepOutput(KEEP, planner, sample, u_a_adj, False)

    if not should_change_lane(sample, u_a_adj, planner.thresholds):
        return StepOutput(KEEP, planner, sample, u_a_adj, False)

    ctx = build_context(sys, view, cfg)
    maneuver = select_maneuver(ctx, cfg, view.seed, view.adjacent_lane)
    new = PlannerState(CHANGING, maneuver, view.step, planner.thresholds)
    return StepOutput(START_CHANGE, new, sample, u_a_adj, True)
