"""Independent reference implementations used as test oracles.

Nothing here imports the package's simulator: cut values are counted bit by
bit and circuits are built from explicit 2^n x 2^n matrices.
"""

import itertools
import math

import numpy as np


def brute_cut(n, edges, z):
    """Cut size of basis index ``z`` (bit j = node j)."""
    return sum(((z >> u) & 1) != ((z >> v) & 1) for u, v in edges)


def brute_max_cut(n, edges):
    return max(brute_cut(n, edges, z) for z in range(1 << n))


def dense_cost(n, edges):
    return np.diag([float(brute_cut(n, edges, z)) for z in range(1 << n)])


def dense_mixer(n, beta):
    """prod_j exp(-i beta X_j) as a dense matrix."""
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    one = math.cos(beta) * np.eye(2) - 1j * math.sin(beta) * x
    m = np.ones((1, 1), dtype=complex)
    for _ in range(n):
        m = np.kron(one, m)
    return m


def dense_expectation(n, edges, gammas, betas):
    c = dense_cost(n, edges)
    psi = np.full(1 << n, 1 / math.sqrt(1 << n), dtype=complex)
    for g, b in zip(gammas, betas):
        psi = np.diag(np.exp(-1j * g * np.diag(c))) @ psi
        psi = dense_mixer(n, b) @ psi
    return float(np.real(np.conj(psi) @ c @ psi))


def single_edge_closed_form(gamma, beta):
    return 0.5 * (1.0 + math.sin(gamma) * math.sin(4.0 * beta))


def random_edges(n, rng, prob=0.5):
    return [(u, v) for u, v in itertools.combinations(range(n), 2) if rng.random() < prob]


def p1_grid_max(table, size):
    """Maximum of the depth-1 expectation over a ``size`` x ``size`` grid on the full box."""
    from qaoaml.kernels import get_backend
    from qaoaml.simulator import BETA_MAX, GAMMA_MAX

    expect = get_backend().expectation
    gs = np.linspace(0.0, GAMMA_MAX, size)
    bs = np.linspace(0.0, BETA_MAX, size)
    best = -math.inf
    ga, be = np.empty(1), np.empty(1)
    for g in gs:
        ga[0] = g
        for b in bs:
            be[0] = b
            v = expect(table.values, ga, be)
            if v > best:
                best = v
    return best
