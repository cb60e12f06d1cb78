"""Exact statevector simulation of depth-p QAOA for MaxCut.

Convention: the phase separator is ``exp(-i*gamma*C)`` with ``C`` the
diagonal of cut counts, and the mixer is ``exp(-i*beta*X)`` on every qubit.
Under this convention ``gamma`` has period 2*pi and each ``beta`` has period
pi (in fact pi/2 for MaxCut, because the global bit flip commutes with ``C``),
so the optimisation box is gamma in [0, 2*pi], beta in [0, pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError, ResourceError
from .graphs import MAX_QUBITS, CutTable

GAMMA_MAX = 2.0 * math.pi
BETA_MAX = math.pi
BETA_PERIOD = 0.5 * math.pi


@dataclass(frozen=True, eq=False)
class ParameterVector:
    gamma: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=np.float64).reshape(-1)
        b = np.asarray(self.beta, dtype=np.float64).reshape(-1)
        if g.shape != b.shape or g.size == 0:
            raise DomainError(f"gamma/beta lengths differ or are empty: {g.size}, {b.size}")
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "beta", b)

    def __eq__(self, other):
        if not isinstance(other, ParameterVector):
            return NotImplemented
        return np.array_equal(self.gamma, other.gamma) and np.array_equal(self.beta, other.beta)

    __hash__ = None

    @property
    def p(self) -> int:
        return self.gamma.size

    def to_array(self) -> np.ndarray:
        """Flat layout ``[gamma_1..gamma_p, beta_1..beta_p]``."""
        return np.concatenate([self.gamma, self.beta])

    @classmethod
    def from_array(cls, x) -> "ParameterVector":
        x = np.asarray(x, dtype=np.float64)
        if x.size % 2:
            raise DomainError(f"flat parameter vector must have even length, got {x.size}")
        p = x.size // 2
        return cls(x[:p].copy(), x[p:].copy())

    def in_bounds(self) -> bool:
        return bool(
            np.all((self.gamma >= 0) & (self.gamma <= GAMMA_MAX))
            and np.all((self.beta >= 0) & (self.beta <= BETA_MAX))
        )

    def clipped(self) -> "ParameterVector":
        return ParameterVector(np.clip(self.gamma, 0.0, GAMMA_MAX), np.clip(self.beta, 0.0, BETA_MAX))


def parameter_bounds(p: int) -> list[tuple[float, float]]:
    """Box bounds for the flat layout of a depth-``p`` vector."""
    return [(0.0, GAMMA_MAX)] * p + [(0.0, BETA_MAX)] * p


def canonical(params: ParameterVector) -> ParameterVector:
    """Representative of ``params`` under the exact symmetries of the objective.

    Each beta is reduced modulo pi/2 and, when ``gamma_1 > pi``, the
    time-reversed copy ``(2*pi - gamma, -beta)`` is taken instead, so the
    result has ``gamma_1 <= pi`` and every beta in ``[0, pi/2)``. The
    expectation value is unchanged.
    """
    g = np.mod(params.gamma, GAMMA_MAX)
    b = params.beta
    if g[0] > math.pi:
        g = np.mod(GAMMA_MAX - g, GAMMA_MAX)
        b = -b
    b = np.mod(b, BETA_PERIOD)
    # mod can return the period itself for tiny negative inputs
    b = np.where(b >= BETA_PERIOD, 0.0, b)
    return ParameterVector(g, b)


def _check_qubits(n: int, max_qubits: int) -> None:
    if n < 1:
        raise DomainError(f"need at least one qubit, got {n}")
    if n > max_qubits:
        raise ResourceError(f"{n} qubits exceeds the {max_qubits}-qubit limit")


def initial_state(n: int, max_qubits: int = MAX_QUBITS) -> np.ndarray:
    """Uniform superposition ``|+>^n``."""
    _check_qubits(n, max_qubits)
    dim = 1 << n
    return np.full(dim, 1.0 / math.sqrt(dim), dtype=np.complex128)


def apply_phase_separator(state: np.ndarray, table: CutTable, gamma: float) -> np.ndarray:
    """Return ``exp(-i*gamma*C) |state>`` as a new array."""
    if state.shape[0] != table.values.shape[0]:
        raise DomainError(
            f"state length {state.shape[0]} does not match cut table length {table.values.shape[0]}"
        )
    out = np.array(state, dtype=np.complex128, copy=True)
    kernels.backend.phase_layer(out, table.values, float(gamma))
    return out


def apply_mixer(state: np.ndarray, beta: float) -> np.ndarray:
    """Return ``prod_j exp(-i*beta*X_j) |state>`` as a new array."""
    dim = state.shape[0]
    if dim < 2 or dim & (dim - 1):
        raise DomainError(f"state length {dim} is not a power of two")
    out = np.array(state, dtype=np.complex128, copy=True)
    kernels.backend.mixer_layer(out, dim.bit_length() - 1, float(beta))
    return out


def evolve(table: CutTable, params: ParameterVector) -> np.ndarray:
    """Output state of the depth-p circuit."""
    return kernels.backend.evolve(table.values, params.gamma, params.beta)


def expectation(table: CutTable, params: ParameterVector) -> float:
    """Expected cut size ``<psi(gamma, beta)| C |psi(gamma, beta)>``."""
    return float(kernels.backend.expectation(table.values, params.gamma, params.beta))


def make_objective(table: CutTable):
    """Negated expectation over the flat layout, for minimisers."""
    values = table.values
    expect = kernels.backend.expectation

    def objective(x: np.ndarray) -> float:
        p = x.shape[0] // 2
        return -expect(values, x[:p], x[p:])

    return objective
