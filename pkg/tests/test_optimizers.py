import math

import numpy as np
import pytest

from qaoaml.errors import DomainError, ObjectiveError
from qaoaml.graphs import Graph, cut_table, erdos_renyi
from qaoaml.optimizers import (
    KINDS,
    OptimizerConfig,
    fd_gradient,
    minimize,
    multistart_solve,
    random_params,
    solve_instance,
)
from qaoaml.simulator import ParameterVector, expectation, make_objective, parameter_bounds

from oracles import p1_grid_max

K2 = cut_table(Graph("k2", 2, [(0, 1)]))
CYCLE4 = cut_table(Graph("c4", 4, [(0, 1), (1, 2), (2, 3), (3, 0)]))


class Recorder:
    """External call counter that also checks every probe against the box."""

    def __init__(self, fun, bounds):
        self.fun = fun
        self.lo = np.array([b[0] for b in bounds])
        self.hi = np.array([b[1] for b in bounds])
        self.calls = 0
        self.values = []

    def __call__(self, x):
        assert np.all(x >= self.lo) and np.all(x <= self.hi), f"out-of-bounds probe {x}"
        self.calls += 1
        v = self.fun(x)
        self.values.append(v)
        return v


@pytest.mark.parametrize("kind", KINDS)
def test_convex_quadratic(kind):
    bounds = [(-5, 5), (-5, 5)]
    res = minimize(lambda x: (x[0] - 1) ** 2 + (x[1] + 2) ** 2, [0.0, 0.0], bounds, OptimizerConfig(kind, ftol=1e-12))
    assert np.max(np.abs(res.x - [1, -2])) < 1e-3
    assert res.f < 1e-6
    assert res.converged


@pytest.mark.parametrize("kind", KINDS)
def test_linear_objective_hits_lower_bound(kind):
    res = minimize(lambda x: x[0], [1.0], [(0.0, math.pi)], OptimizerConfig(kind))
    assert abs(res.x[0]) < 1e-6


@pytest.mark.parametrize("kind", KINDS)
def test_eval_count_matches_external_wrapper(kind):
    rng = np.random.default_rng(2)
    table = cut_table(erdos_renyi(7, 0.5, 3))
    for p in (1, 3):
        bounds = parameter_bounds(p)
        rec = Recorder(make_objective(table), bounds)
        x0 = random_params(p, rng).to_array()
        res = minimize(rec, x0, bounds, OptimizerConfig(kind))
        assert res.evals == rec.calls
        assert res.f == min(rec.values)
        assert np.all(res.x >= rec.lo) and np.all(res.x <= rec.hi)


@pytest.mark.parametrize("kind", KINDS)
def test_budget_exhaustion_returns_best_so_far(kind):
    bounds = [(-5, 5)] * 3
    rec = Recorder(lambda x: float(np.sum((x - 0.3) ** 2)), bounds)
    res = minimize(rec, [4.0, -4.0, 4.0], bounds, OptimizerConfig(kind, max_evals=9))
    assert not res.converged
    assert res.evals == rec.calls == 9
    assert res.f == min(rec.values)


@pytest.mark.parametrize("kind", KINDS)
def test_non_finite_objective_aborts(kind):
    with pytest.raises(ObjectiveError):
        minimize(lambda x: math.nan, [0.5], [(0, 1)], OptimizerConfig(kind))


def test_input_validation():
    with pytest.raises(DomainError):
        minimize(lambda x: 0.0, [2.0], [(0, 1)])
    with pytest.raises(DomainError):
        minimize(lambda x: 0.0, [0.5, 0.5], [(0, 1)])
    with pytest.raises(DomainError):
        OptimizerConfig("cobyla")
    assert OptimizerConfig("nelder-mead").kind == "nelder_mead"


def test_fd_gradient_matches_central_difference():
    def f(x):
        return math.sin(x[0]) * math.exp(0.3 * x[1]) + x[2] ** 3

    lo, hi = np.full(3, -10.0), np.full(3, 10.0)
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.uniform(-2, 2, 3)
        g = fd_gradient(f, x, f(x), lo, hi, 1e-8)
        h = 1e-5
        ref = np.array([(f(x + h * e) - f(x - h * e)) / (2 * h) for e in np.eye(3)])
        assert np.all(np.abs(g - ref) <= 1e-4 * np.maximum(1.0, np.abs(ref)))


def test_fd_gradient_steps_backward_at_upper_bound():
    lo, hi = np.zeros(1), np.ones(1)
    probes = []

    def f(x):
        probes.append(x[0])
        return x[0] ** 2

    g = fd_gradient(f, np.ones(1), 1.0, lo, hi, 1e-8)
    assert probes[0] < 1.0
    assert abs(g[0] - 2.0) < 1e-5


def test_random_params():
    pv = random_params(3, np.random.default_rng(1))
    assert pv.p == 3 and pv.to_array().size == 6 and pv.in_bounds()
    assert random_params(3, np.random.default_rng(1)) == pv
    b = np.array([random_params(1, np.random.default_rng(s)).beta[0] for s in range(10_000)])
    sigma = math.pi / math.sqrt(12) / math.sqrt(b.size)
    assert abs(b.mean() - math.pi / 2) < 3 * sigma


@pytest.mark.parametrize("kind", KINDS)
def test_single_edge_optimum(kind):
    best, runs = multistart_solve(K2, 1, 20, OptimizerConfig(kind), np.random.default_rng(0))
    assert abs(best.value - 1.0) < 1e-4
    warm = solve_instance(K2, 1, ParameterVector([math.pi / 2], [math.pi / 8]), OptimizerConfig(kind))
    assert abs(warm.value - 1.0) < 1e-9
    assert warm.fc < min(r.fc for r in runs) + 10


@pytest.mark.parametrize("kind", KINDS)
def test_four_cycle_multistart(kind):
    best, runs = multistart_solve(CYCLE4, 1, 20, OptimizerConfig(kind), np.random.default_rng(4))
    assert abs(best.value - 3.0) < 1e-3
    assert abs(best.ar - 0.75) < 1e-3
    assert best.value == max(r.value for r in runs)
    for r in runs:
        assert abs(expectation(CYCLE4, r.params) - r.value) < 1e-12
        assert r.params.in_bounds()


def test_multistart_single_restart_and_ties():
    cfg = OptimizerConfig()
    best, runs = multistart_solve(K2, 1, 1, cfg, np.random.default_rng(3))
    assert len(runs) == 1 and best == runs[0]
    best, runs = multistart_solve(K2, 1, 8, cfg, np.random.default_rng(3))
    top = max(r.value for r in runs)
    tied = [r for r in runs if r.value == top]
    assert best.fc == min(r.fc for r in tied)
    with pytest.raises(DomainError):
        multistart_solve(K2, 1, 0, cfg, np.random.default_rng(3))


def test_multistart_matches_grid_search_on_random_graph():
    table = cut_table(erdos_renyi(8, 0.5, 21))
    grid = p1_grid_max(table, 400)
    best, _ = multistart_solve(table, 1, 20, OptimizerConfig(), np.random.default_rng(0))
    assert best.value >= grid - 1e-3 * table.max_cut
