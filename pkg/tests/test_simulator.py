import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qaoaml import kernels
from qaoaml.errors import DomainError, ResourceError
from qaoaml.graphs import Graph, cut_table, erdos_renyi
from qaoaml.simulator import (
    BETA_PERIOD,
    ParameterVector,
    apply_mixer,
    apply_phase_separator,
    canonical,
    evolve,
    expectation,
    initial_state,
)

from oracles import dense_expectation, p1_grid_max, random_edges, single_edge_closed_form

K2 = cut_table(Graph("k2", 2, [(0, 1)]))
CYCLE4 = cut_table(Graph("c4", 4, [(0, 1), (1, 2), (2, 3), (3, 0)]))

BACKENDS = ["numpy"] + (["numba"] if kernels.NUMBA_AVAILABLE else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    monkeypatch.setattr(kernels, "backend", kernels.get_backend(request.param))
    return request.param


def test_initial_state():
    np.testing.assert_allclose(initial_state(1), [2**-0.5, 2**-0.5])
    np.testing.assert_allclose(initial_state(2), [0.5] * 4)
    for n in range(1, 11):
        assert abs(np.linalg.norm(initial_state(n)) - 1) < 1e-12
    with pytest.raises(ResourceError):
        initial_state(17)


def test_phase_separator_examples(backend):
    psi = initial_state(2)
    np.testing.assert_allclose(apply_phase_separator(psi, K2, 0.0), psi)
    np.testing.assert_allclose(apply_phase_separator(psi, K2, 2 * math.pi), psi, atol=1e-12)
    np.testing.assert_allclose(
        apply_phase_separator(psi, K2, math.pi / 2), [0.5, -0.5j, -0.5j, 0.5], atol=1e-12
    )
    with pytest.raises(DomainError):
        apply_phase_separator(initial_state(3), K2, 0.1)


def test_mixer_examples(backend):
    psi = np.array([1.0, 0.0], dtype=complex)
    np.testing.assert_allclose(apply_mixer(psi, 0.0), psi)
    np.testing.assert_allclose(apply_mixer(psi, math.pi / 2), [0, -1j], atol=1e-12)
    rng = np.random.default_rng(0)
    phi = rng.normal(size=8) + 1j * rng.normal(size=8)
    phi /= np.linalg.norm(phi)
    np.testing.assert_allclose(np.abs(apply_mixer(phi, math.pi)) ** 2, np.abs(phi) ** 2, atol=1e-12)
    with pytest.raises(DomainError):
        apply_mixer(np.ones(3, dtype=complex), 0.1)


def test_gates_do_not_mutate_input(backend):
    psi = initial_state(2)
    before = psi.copy()
    apply_mixer(apply_phase_separator(psi, K2, 0.3), 0.2)
    np.testing.assert_array_equal(psi, before)


def test_expectation_examples(backend):
    g = erdos_renyi(6, 0.5, 4)
    t = cut_table(g)
    assert abs(expectation(t, ParameterVector([0.0, 0.0], [0.4, 1.1])) - g.num_edges / 2) < 1e-12
    assert abs(expectation(K2, ParameterVector([math.pi / 2], [math.pi / 8])) - 1.0) < 1e-12


def test_four_cycle_grid_maximum():
    assert abs(p1_grid_max(CYCLE4, 200) - 3.0) < 1e-3


def test_single_edge_closed_form(backend):
    for g in np.linspace(0, 2 * math.pi, 50):
        for b in np.linspace(0, math.pi, 50):
            got = expectation(K2, ParameterVector([g], [b]))
            assert abs(got - single_edge_closed_form(g, b)) < 1e-9


def test_dense_matrix_equivalence(backend):
    rng = np.random.default_rng(123)
    for _ in range(60):
        n = int(rng.integers(2, 5))
        edges = random_edges(n, rng) or [(0, 1)]
        p = int(rng.integers(1, 4))
        gam = rng.uniform(-7, 7, p)
        bet = rng.uniform(-4, 4, p)
        got = expectation(cut_table(Graph("r", n, edges)), ParameterVector(gam, bet))
        assert abs(got - dense_expectation(n, edges, gam, bet)) < 1e-8


def test_backends_agree():
    if not kernels.NUMBA_AVAILABLE:
        pytest.skip("numba not installed")
    rng = np.random.default_rng(5)
    t = cut_table(erdos_renyi(8, 0.5, 1))
    a, b = kernels.get_backend("numpy"), kernels.get_backend("numba")
    for _ in range(20):
        gam, bet = rng.uniform(0, 6, 4), rng.uniform(0, 3, 4)
        assert abs(a.expectation(t.values, gam, bet) - b.expectation(t.values, gam, bet)) < 1e-12
        np.testing.assert_allclose(a.evolve(t.values, gam, bet), b.evolve(t.values, gam, bet), atol=1e-12)


params_strategy = st.integers(1, 4).flatmap(
    lambda p: st.tuples(
        st.lists(st.floats(-10, 10), min_size=p, max_size=p),
        st.lists(st.floats(-10, 10), min_size=p, max_size=p),
    )
)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 5000), n=st.integers(2, 7), gb=params_strategy, shift=st.integers(0, 3))
def test_invariants(seed, n, gb, shift):
    gam, bet = np.array(gb[0]), np.array(gb[1])
    t = cut_table(erdos_renyi(n, 0.6, seed))
    pv = ParameterVector(gam, bet)
    f = expectation(t, pv)
    assert abs(np.linalg.norm(evolve(t, pv)) - 1) < 1e-10
    assert -1e-12 <= f <= t.max_cut + 1e-12
    i = shift % pv.p
    g2, b2 = gam.copy(), bet.copy()
    g2[i] += 2 * math.pi
    b2[i] += math.pi
    assert abs(expectation(t, ParameterVector(g2, bet)) - f) < 1e-9
    assert abs(expectation(t, ParameterVector(gam, b2)) - f) < 1e-9
    assert abs(expectation(t, ParameterVector(-gam, -bet)) - f) < 1e-9


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 5000), gb=params_strategy)
def test_canonical_preserves_value(seed, gb):
    t = cut_table(erdos_renyi(6, 0.5, seed))
    pv = ParameterVector(np.mod(gb[0], 2 * math.pi), np.mod(gb[1], math.pi))
    c = canonical(pv)
    assert c.gamma[0] <= math.pi + 1e-12
    assert np.all((c.beta >= 0) & (c.beta < BETA_PERIOD))
    assert abs(expectation(t, c) - expectation(t, pv)) < 1e-9


def test_parameter_vector_layout():
    pv = ParameterVector([1.0, 2.0], [0.1, 0.2])
    np.testing.assert_array_equal(pv.to_array(), [1.0, 2.0, 0.1, 0.2])
    assert ParameterVector.from_array(pv.to_array()) == pv
    with pytest.raises(DomainError):
        ParameterVector([1.0], [0.1, 0.2])
