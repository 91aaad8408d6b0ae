import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from curvyplan.optimizer import (
    FunctionProblem,
    Swarm,
    SwarmConfig,
    adaptive_params,
    iterations_to,
    optimize,
    penalized_fitness,
    penalty,
    spawn_rngs,
    sphere,
    step_swarm,
)

BOX4 = np.array([[-5.0, 5.0]] * 4)


def test_schedule_endpoints():
    cfg = SwarmConfig(bounds=BOX4, T=100)
    assert adaptive_params(0, cfg) == (0.9, 2.5, 0.5)
    w, c1, c2 = adaptive_params(100, cfg)
    assert (w, c1, c2) == (0.4, 0.5, 2.5)
    assert adaptive_params(50, cfg)[0] == pytest.approx(0.9 - 0.75 * 0.5, abs=1e-15)
    assert adaptive_params(37, SwarmConfig(bounds=BOX4, mode="pso")) == (0.7, 2.0, 2.0)
    with pytest.raises(ValueError):
        adaptive_params(101, cfg)


def test_config_invariants():
    with pytest.raises(ValueError):
        SwarmConfig(bounds=BOX4, w_max=0.3, w_min=0.4)
    with pytest.raises(ValueError):
        SwarmConfig(bounds=BOX4, n_particles=1)
    with pytest.raises(ValueError):
        SwarmConfig(bounds=np.array([[1.0, 1.0]]))
    with pytest.raises(ValueError):
        SwarmConfig(bounds=BOX4, v_max=0.0)
    with pytest.raises(ValueError):
        SwarmConfig(bounds=BOX4, mode="ga")


def _swarm(n=5, dim=2, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (n, dim))
    return Swarm(X.copy(), np.zeros((n, dim)), X.copy(), np.zeros(n))


def test_null_update_and_fixed_point():
    cfg = SwarmConfig(bounds=np.array([[-2.0, 2.0]] * 2))
    sw = _swarm()
    x0 = sw.positions.copy()
    sw.velocities[:] = 0.3
    step_swarm(sw, np.zeros(2), 1, cfg, spawn_rngs(0, 5), coeffs=(0.0, 0.0, 0.0))
    assert np.array_equal(sw.positions, x0)
    sw = Swarm(np.ones((1, 2)), np.zeros((1, 2)), np.ones((1, 2)), np.zeros(1))
    step_swarm(sw, np.ones(2), 1, cfg, spawn_rngs(0, 1))
    assert np.array_equal(sw.positions, np.ones((1, 2)))


def test_velocity_clamp_and_boundary_repair():
    cfg = SwarmConfig(bounds=np.array([[-1.0, 1.0]] * 2), v_max=0.5)
    sw = Swarm(np.zeros((1, 2)), np.array([[10.0, -10.0]]), np.zeros((1, 2)), np.zeros(1))
    step_swarm(sw, np.zeros(2), 1, cfg, spawn_rngs(0, 1), coeffs=(1.0, 0.0, 0.0))
    assert np.array_equal(sw.velocities, [[0.5, -0.5]])
    sw = Swarm(np.array([[0.9, 0.0]]), np.array([[0.5, 0.1]]), np.zeros((1, 2)), np.zeros(1))
    step_swarm(sw, np.zeros(2), 1, cfg, spawn_rngs(0, 1), coeffs=(1.0, 0.0, 0.0))
    assert sw.positions[0, 0] == 1.0 and sw.velocities[0, 0] == 0.0
    assert sw.positions[0, 1] == pytest.approx(0.1) and sw.velocities[0, 1] == pytest.approx(0.1)


def test_penalty_cases():
    phi, L = penalty(np.zeros((4, 3)))
    assert not phi.any() and not L.any()
    G = np.array([[0.5, -1.0], [0.25, -0.2]])
    phi, L = penalty(G)
    assert np.array_equal(L, [1.0, 0.0]) and phi[0] == pytest.approx(0.75)
    with pytest.raises(ValueError):
        penalty(G, m=3)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 20), st.integers(1, 6)),
              elements=st.floats(-10, 10, allow_nan=False)))
def test_penalty_shares_sum_to_one(G):
    _, L = penalty(G)
    if np.any(G > 0):
        assert abs(L.sum() - 1.0) <= 1e-12
    else:
        assert L.sum() == 0.0
    assert np.all(L >= 0)


def test_penalized_fitness_feasible_rows_untouched():
    J = np.array([1.0, 2.0])
    G = np.array([[-1.0, -1.0], [0.5, 0.0]])
    f = penalized_fitness(J, G, 100.0)
    assert f[0] == 1.0 and f[1] == pytest.approx(2.0 + 50.0)


def test_sphere_converges_and_history_monotone():
    hits = 0
    for seed in range(30):
        res = optimize(FunctionProblem(sphere, BOX4), SwarmConfig(bounds=BOX4, seed=seed))
        assert np.all(np.diff(res.history) <= 0)
        assert res.iterations <= 100
        hits += res.cost < 1e-4
    assert hits >= 28


def test_ipso_beats_pso_on_sphere_iterations():
    med = {}
    for mode in ("ipso", "pso"):
        its = [iterations_to(optimize(FunctionProblem(sphere, BOX4), SwarmConfig(bounds=BOX4, seed=s, mode=mode)).history,
                             1e-3) for s in range(30)]
        med[mode] = np.median(its)
    assert med["ipso"] < med["pso"]


def test_determinism_and_bounds():
    cfg = SwarmConfig(bounds=BOX4, seed=11, T=30)
    a = optimize(FunctionProblem(sphere, BOX4), cfg)
    b = optimize(FunctionProblem(sphere, BOX4), cfg)
    assert a.history == b.history and np.array_equal(a.x, b.x)
    assert np.all(a.x >= BOX4[:, 0]) and np.all(a.x <= BOX4[:, 1])


def test_evaluation_order_does_not_matter():
    # a problem that evaluates rows in reverse must give the same result
    class Reversed(FunctionProblem):
        def evaluate(self, X):
            J = np.array([self.func(x) for x in X[::-1]])[::-1]
            return J, np.zeros((len(X), 0))

    cfg = SwarmConfig(bounds=BOX4, seed=5, T=40)
    assert optimize(Reversed(sphere, BOX4), cfg).history == optimize(FunctionProblem(sphere, BOX4), cfg).history


def test_early_stop():
    flat = FunctionProblem(lambda x: 1.0, BOX4)
    res = optimize(flat, SwarmConfig(bounds=BOX4, T=100))
    assert res.iterations == 15 and len(res.history) == 16


def test_constrained_problem_prefers_feasible():
    class Disk:
        bounds = np.array([[-2.0, 2.0]] * 2)

        def evaluate(self, X):
            J = -X[:, 0]  # push right
            G = (X ** 2).sum(axis=1, keepdims=True) - 1.0  # stay in the unit disk
            return J, G

    res = optimize(Disk(), SwarmConfig(bounds=Disk.bounds, seed=2))
    assert res.feasible
    assert res.x[0] == pytest.approx(1.0, abs=2e-2)


def test_iterations_to():
    assert iterations_to([5, 3, 1], 3) == 1
    assert iterations_to([5, 3, 1], 0) == 3
