"""Statevector kernels for the QAOA MaxCut circuit.

Two interchangeable implementations live here: loop kernels compiled with
numba, and a vectorised numpy path. The numba path is used when numba is
importable unless the environment variable ``QAOAML_NUMBA`` is set to ``0``
(or ``false``/``off``). Both paths operate in place on a complex128 array
indexed little-endian (bit ``j`` of the basis index is qubit ``j``).

``benchmarks/bench_kernels.py`` times the two against each other.
"""

from __future__ import annotations

import math
import os
from types import SimpleNamespace

import numpy as np

try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    NUMBA_AVAILABLE = False


def _numba_requested() -> bool:
    flag = os.environ.get("QAOAML_NUMBA", "1").strip().lower()
    return flag not in {"0", "false", "off", "no"}


# ---------------------------------------------------------------------------
# numpy path


def _np_phase_layer(psi, cut, gamma):
    psi *= np.exp(-1j * gamma * cut)


def _np_mixer_layer(psi, n, beta):
    c = math.cos(beta)
    s = -1j * math.sin(beta)
    dim = psi.shape[0]
    for j in range(n):
        view = psi.reshape(dim >> (j + 1), 2, 1 << j)
        a0 = view[:, 0, :].copy()
        a1 = view[:, 1, :]
        view[:, 0, :] = c * a0 + s * a1
        view[:, 1, :] = s * a0 + c * a1


def _np_evolve(cut, gammas, betas):
    dim = cut.shape[0]
    n = dim.bit_length() - 1
    psi = np.full(dim, 1.0 / math.sqrt(dim), dtype=np.complex128)
    cutf = cut.astype(np.float64)
    for layer in range(gammas.shape[0]):
        _np_phase_layer(psi, cutf, gammas[layer])
        _np_mixer_layer(psi, n, betas[layer])
    return psi


def _np_expectation(cut, gammas, betas):
    psi = _np_evolve(cut, gammas, betas)
    probs = psi.real**2 + psi.imag**2
    return float(probs @ cut.astype(np.float64))


# ---------------------------------------------------------------------------
# numba path
#
# The phase layer looks phases up by integer cut value, so only
# (max_cut + 1) complex exponentials are computed per layer.


def _nb_phase_layer(psi, cut, gamma):
    top = 0
    for z in range(cut.shape[0]):
        if cut[z] > top:
            top = cut[z]
    table = np.empty(top + 1, dtype=np.complex128)
    for k in range(top + 1):
        table[k] = complex(math.cos(gamma * k), -math.sin(gamma * k))
    for z in range(cut.shape[0]):
        psi[z] *= table[cut[z]]


def _nb_mixer_layer(psi, n, beta):
    c = math.cos(beta)
    s = math.sin(beta)
    dim = psi.shape[0]
    for j in range(n):
        step = 1 << j
        for base in range(0, dim, 2 * step):
            for k in range(base, base + step):
                a0 = psi[k]
                a1 = psi[k + step]
                # (a0, a1) -> (c*a0 - i*s*a1, -i*s*a0 + c*a1), written out in reals
                psi[k] = complex(c * a0.real + s * a1.imag, c * a0.imag - s * a1.real)
                psi[k + step] = complex(c * a1.real + s * a0.imag, c * a1.imag - s * a0.real)


def _nb_evolve(cut, gammas, betas):
    dim = cut.shape[0]
    n = 0
    while (1 << n) < dim:
        n += 1
    amp = 1.0 / math.sqrt(dim)
    psi = np.empty(dim, dtype=np.complex128)
    for z in range(dim):
        psi[z] = amp
    for layer in range(gammas.shape[0]):
        _nb_phase_layer(psi, cut, gammas[layer])
        _nb_mixer_layer(psi, n, betas[layer])
    return psi


def _nb_expectation(cut, gammas, betas):
    psi = _nb_evolve(cut, gammas, betas)
    acc = 0.0
    for z in range(cut.shape[0]):
        acc += (psi[z].real ** 2 + psi[z].imag ** 2) * cut[z]
    return acc


numpy_kernels = SimpleNamespace(
    name="numpy",
    phase_layer=_np_phase_layer,
    mixer_layer=_np_mixer_layer,
    evolve=_np_evolve,
    expectation=_np_expectation,
)

if NUMBA_AVAILABLE:
    _jit = numba.njit(cache=True, nogil=True)
    _nb_phase_layer = _jit(_nb_phase_layer)
    _nb_mixer_layer = _jit(_nb_mixer_layer)
    _nb_evolve = _jit(_nb_evolve)
    _nb_expectation = _jit(_nb_expectation)
    numba_kernels = SimpleNamespace(
        name="numba",
        phase_layer=_nb_phase_layer,
        mixer_layer=_nb_mixer_layer,
        evolve=_nb_evolve,
        expectation=_nb_expectation,
    )
else:  # pragma: no cover
    numba_kernels = None


def get_backend(name: str | None = None) -> SimpleNamespace:
    """Return the kernel namespace ``name`` (``"numba"`` or ``"numpy"``).

    With ``name=None`` the default selection rule applies.
    """
    if name is None:
        name = "numba" if (NUMBA_AVAILABLE and _numba_requested()) else "numpy"
    if name == "numba":
        if numba_kernels is None:
            raise RuntimeError("numba backend requested but numba is not installed")
        return numba_kernels
    if name == "numpy":
        return numpy_kernels
    raise ValueError(f"unknown kernel backend {name!r}")


backend = get_backend()
