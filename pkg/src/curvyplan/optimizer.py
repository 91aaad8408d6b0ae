"""Particle swarm optimizer with time-varying inertia and learning factors.

Mode ``ipso`` uses the quadratic inertia decay and linearly crossing
cognitive/social factors; mode ``pso`` keeps (w, c1, c2) = (0.7, 2, 2) on
the same code path, so comparisons isolate the schedules.

Constraints are handled with adaptive penalties: each particle's fitness is
``J + penalty_scale * sum_j L_j * g_j`` where ``L_j`` is constraint j's share
of the swarm's total violation mass in the current iteration.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

PSO_CONSTANTS = (0.7, 2.0, 2.0)


@dataclass(frozen=True, eq=False)
class SwarmConfig:
    bounds: np.ndarray  # (D, 2) rows of (low, high)
    n_particles: int = 40
    T: int = 100
    w_max: float = 0.9
    w_min: float = 0.4
    c1_start: float = 2.5
    c1_end: float = 0.5
    c2_start: float = 0.5
    c2_end: float = 2.5
    v_max: Optional[np.ndarray] = None
    v_min: Optional[np.ndarray] = None
    seed: int = 0
    mode: str = "ipso"
    early_stop_tol: float = 1e-8
    early_stop_patience: int = 15
    penalty_scale: float = 100.0

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.bounds, dtype=float))
        if b.ndim != 2 or b.shape[1] != 2 or np.any(b[:, 1] <= b[:, 0]):
            raise ValueError("bounds must be (D, 2) with high > low")
        object.__setattr__(self, "bounds", b)
        vmax = 0.2 * (b[:, 1] - b[:, 0]) if self.v_max is None else np.broadcast_to(
            np.asarray(self.v_max, dtype=float), (len(b),)).copy()
        vmin = -vmax if self.v_min is None else np.broadcast_to(np.asarray(self.v_min, dtype=float), (len(b),)).copy()
        object.__setattr__(self, "v_max", vmax)
        object.__setattr__(self, "v_min", vmin)
        if np.any(vmax <= 0) or np.any(vmin >= vmax):
            raise ValueError("need v_max > 0 and v_min < v_max")
        if self.w_max < self.w_min:
            raise ValueError("w_max must be >= w_min")
        if self.n_particles < 2:
            raise ValueError("n_particles must be >= 2")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.mode not in ("ipso", "pso"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def dim(self) -> int:
        return len(self.bounds)


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    p_best: np.ndarray
    p_best_cost: float


@dataclass
class Swarm:
    """Particle data as (N, D) arrays; row i is particle i."""

    positions: np.ndarray
    velocities: np.ndarray
    p_best: np.ndarray
    p_best_cost: np.ndarray

    def __len__(self):
        return len(self.positions)

    def particle(self, i: int) -> Particle:
        return Particle(self.positions[i], self.velocities[i], self.p_best[i], float(self.p_best_cost[i]))

    @property
    def particles(self) -> List[Particle]:
        return [self.particle(i) for i in range(len(self))]


@dataclass
class OptimizeResult:
    x: np.ndarray
    cost: float
    history: List[float]
    wall_time: float
    iterations: int
    objective: float = float("nan")
    violations: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def feasible(self) -> bool:
        return not np.any(self.violations > 0)


class Problem:
    """Batch objective: ``evaluate(X)`` returns (J, G) for an (N, D) array,
    with J of shape (N,) and normalized violations G of shape (N, m)."""

    bounds: np.ndarray

    def evaluate(self, X: np.ndarray):
        raise NotImplementedError


class FunctionProblem(Problem):
    """Unconstrained problem from a row-wise scalar function."""

    def __init__(self, func: Callable[[np.ndarray], float], bounds):
        self.func = func
        self.bounds = np.asarray(bounds, dtype=float)

    def evaluate(self, X):
        J = np.array([self.func(x) for x in X], dtype=float)
        return J, np.zeros((len(X), 0))


def sphere(x) -> float:
    return float(np.sum(np.asarray(x) ** 2))


def adaptive_params(t: float, cfg: SwarmConfig):
    """(w, c1, c2) at iteration t of T."""
    if cfg.mode == "pso":
        return PSO_CONSTANTS
    if not 0 <= t <= cfg.T:
        raise ValueError(f"iteration {t} outside [0, {cfg.T}]")
    r = t / cfg.T
    w = cfg.w_max - (cfg.w_max - cfg.w_min) * (2.0 * r - r * r)
    c1 = cfg.c1_start + (cfg.c1_end - cfg.c1_start) * r
    c2 = cfg.c2_start + (cfg.c2_end - cfg.c2_start) * r
    return w, c1, c2


def spawn_rngs(seed: int, n: int) -> List[np.random.Generator]:
    """One independent stream per particle from a single master seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def step_swarm(swarm: Swarm, g_best: np.ndarray, t: float, cfg: SwarmConfig,
               rngs: Sequence[np.random.Generator], coeffs=None) -> Swarm:
    """Velocity and position update, in place; returns ``swarm``.

    Random factors are drawn per particle and per dimension. Velocities are
    clamped to [v_min, v_max]; a position leaving the box is clamped and its
    velocity on that dimension zeroed.
    """
    w, c1, c2 = adaptive_params(t, cfg) if coeffs is None else coeffs
    n, dim = swarm.positions.shape
    r = np.stack([g.random((2, dim)) for g in rngs[:n]])
    X = swarm.positions
    V = w * swarm.velocities + c1 * r[:, 0] * (swarm.p_best - X) + c2 * r[:, 1] * (g_best - X)
    V = np.clip(V, cfg.v_min, cfg.v_max)
    X = X + V
    lo, hi = cfg.bounds[:, 0], cfg.bounds[:, 1]
    out = (X < lo) | (X > hi)
    X = np.clip(X, lo, hi)
    V[out] = 0.0
    swarm.positions = X
    swarm.velocities = V
    return swarm


def penalty(G, m: Optional[int] = None):
    """Adaptive penalty per constraint.

    ``G`` is an (N, m) table of constraint values g_j(x_i); only positive
    parts count. Returns ``(phi, L)`` with L_j the share of total violation
    mass owned by constraint j (all zero when nothing is violated) and
    phi_j = L_j * sum_i max(0, g_j(x_i)).
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    if m is not None and G.shape[1] != m:
        raise ValueError(f"expected {m} constraints, got {G.shape[1]}")
    if G.shape[1] < 1:
        return np.zeros(0), np.zeros(0)
    mass = np.maximum(G, 0.0).sum(axis=0)
    total = mass.sum()
    if total <= 0.0:
        return np.zeros_like(mass), np.zeros_like(mass)
    L = mass / total
    return L * mass, L


def penalized_fitness(J, G, penalty_scale: float):
    J = np.asarray(J, dtype=float)
    G = np.asarray(G, dtype=float)
    if G.shape[1] == 0:
        return J.copy()
    _, L = penalty(G)
    return J + penalty_scale * (np.maximum(G, 0.0) @ L)


def optimize(problem: Problem, cfg: SwarmConfig) -> OptimizeResult:
    """Run the swarm for up to ``cfg.T`` iterations.

    Stops early when the global best improves by less than
    ``early_stop_tol`` for ``early_stop_patience`` consecutive iterations.
    ``history[k]`` is the global-best fitness after iteration k (index 0 is
    the initial swarm).
    """
    t_start = time.perf_counter()
    rngs = spawn_rngs(cfg.seed, cfg.n_particles)
    lo, hi = cfg.bounds[:, 0], cfg.bounds[:, 1]
    X = np.stack([lo + g.random(cfg.dim) * (hi - lo) for g in rngs])
    V = np.stack([cfg.v_min + g.random(cfg.dim) * (cfg.v_max - cfg.v_min) for g in rngs])

    J, G = problem.evaluate(X)
    fit = penalized_fitness(J, G, cfg.penalty_scale)
    swarm = Swarm(X, V, X.copy(), fit.copy())
    pb_J, pb_G = J.copy(), G.copy()
    gi = int(np.argmin(fit))
    g_best, g_cost = X[gi].copy(), float(fit[gi])
    g_J, g_G = float(J[gi]), G[gi].copy()
    history = [g_cost]

    stall = 0
    it = 0
    for it in range(1, cfg.T + 1):
        step_swarm(swarm, g_best, it, cfg, rngs)
        J, G = problem.evaluate(swarm.positions)
        fit = penalized_fitness(J, G, cfg.penalty_scale)
        better = fit < swarm.p_best_cost
        swarm.p_best[better] = swarm.positions[better]
        swarm.p_best_cost[better] = fit[better]
        pb_J[better] = J[better]
        pb_G[better] = G[better]
        # first index wins ties, independent of evaluation order
        gi = int(np.argmin(swarm.p_best_cost))
        prev = g_cost
        if swarm.p_best_cost[gi] < g_cost:
            g_best, g_cost = swarm.p_best[gi].copy(), float(swarm.p_best_cost[gi])
            g_J, g_G = float(pb_J[gi]), pb_G[gi].copy()
        history.append(g_cost)
        stall = stall + 1 if prev - g_cost < cfg.early_stop_tol else 0
        if stall >= cfg.early_stop_patience:
            break

    return OptimizeResult(
        x=g_best,
        cost=g_cost,
        history=history,
        wall_time=time.perf_counter() - t_start,
        iterations=it,
        objective=g_J,
        violations=g_G,
    )


def iterations_to(history: Sequence[float], target: float) -> int:
    """First iteration whose global best is at or below ``target``; len(history) if never."""
    for k, c in enumerate(history):
        if c <= target:
            return k
    return len(history)
