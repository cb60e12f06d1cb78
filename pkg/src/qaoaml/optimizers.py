"""Box-constrained minimisers with exact evaluation counting, and the QAOA
optimisation loop built on them.

Two minimisers are provided:

* ``nelder_mead`` -- the simplex method with the usual coefficients
  (reflection 1, expansion 2, contraction 0.5, shrink 0.5). Trial points
  are clamped into the box.
* ``quasi_newton`` -- a projected limited-memory BFGS. Gradients are
  forward differences (backward at an upper bound) and every probe counts
  as a function call.

Both stop when the best value has improved by less than
``ftol * (1 + |f_best|)`` over a window (two iterations per dimension for
the simplex, one iteration for quasi-Newton).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import DomainError, ObjectiveError
from .graphs import CutTable
from .simulator import (
    BETA_MAX,
    GAMMA_MAX,
    ParameterVector,
    make_objective,
    parameter_bounds,
)

KINDS = ("nelder_mead", "quasi_newton")


def normalize_kind(kind: str) -> str:
    k = kind.strip().lower().replace("-", "_")
    if k not in KINDS:
        raise DomainError(f"unknown optimizer kind {kind!r}; expected one of {KINDS}")
    return k


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "quasi_newton"
    ftol: float = 1e-6
    max_evals: int = 10_000
    fd_step: float = 1e-8
    # initial simplex edge, as a fraction of each bound's width
    simplex_scale: float = 0.05
    memory: int = 10
    pgtol: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "kind", normalize_kind(self.kind))
        if not self.ftol > 0:
            raise DomainError(f"ftol must be positive, got {self.ftol}")
        if self.max_evals < 1:
            raise DomainError(f"max_evals must be >= 1, got {self.max_evals}")
        if not self.fd_step > 0:
            raise DomainError(f"fd_step must be positive, got {self.fd_step}")


class MinimizeResult(NamedTuple):
    x: np.ndarray
    f: float
    evals: int
    converged: bool


class _BudgetExhausted(Exception):
    pass


class _Counted:
    """Objective wrapper: counts calls, enforces the budget, keeps the best point."""

    def __init__(self, fun, max_evals):
        self.fun = fun
        self.max_evals = max_evals
        self.evals = 0
        self.best_x = None
        self.best_f = math.inf

    def __call__(self, x):
        if self.evals >= self.max_evals:
            raise _BudgetExhausted
        self.evals += 1
        f = float(self.fun(x))
        if not math.isfinite(f):
            raise ObjectiveError(f"objective returned {f} at x={x!r}")
        if f < self.best_f:
            self.best_f = f
            self.best_x = x.copy()
        return f


def _stalled(history, window, ftol):
    if len(history) <= window:
        return False
    new, old = history[-1], history[-1 - window]
    return abs(old - new) < ftol * (1.0 + abs(new))


def _nelder_mead(fun, x0, lo, hi, cfg):
    k = x0.size
    width = hi - lo
    simplex = np.empty((k + 1, k))
    simplex[0] = x0
    for j in range(k):
        pt = x0.copy()
        step = cfg.simplex_scale * width[j] if np.isfinite(width[j]) else cfg.simplex_scale * max(1.0, abs(x0[j]))
        if step == 0.0:
            step = cfg.simplex_scale
        pt[j] = x0[j] + step if x0[j] + step <= hi[j] else x0[j] - step
        simplex[j + 1] = np.clip(pt, lo, hi)
    fvals = np.array([fun(pt) for pt in simplex])

    window = 2 * k
    history = [fvals.min()]
    while True:
        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]

        xr = np.clip(centroid + (centroid - worst), lo, hi)
        fr = fun(xr)
        if fr < fvals[0]:
            xe = np.clip(centroid + 2.0 * (xr - centroid), lo, hi)
            fe = fun(xe)
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
        elif fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
        else:
            if fr < fvals[-1]:
                xc = np.clip(centroid + 0.5 * (xr - centroid), lo, hi)
                fc = fun(xc)
                accept = fc <= fr
            else:
                xc = np.clip(centroid + 0.5 * (worst - centroid), lo, hi)
                fc = fun(xc)
                accept = fc < fvals[-1]
            if accept:
                simplex[-1], fvals[-1] = xc, fc
            else:
                best = simplex[0]
                for i in range(1, k + 1):
                    simplex[i] = best + 0.5 * (simplex[i] - best)
                    fvals[i] = fun(simplex[i])

        history.append(fvals.min())
        if _stalled(history, window, cfg.ftol):
            return True


def fd_gradient(fun, x, fx, lo, hi, rel_step):
    """Forward-difference gradient; steps backward where a forward step leaves the box."""
    g = np.empty_like(x)
    for j in range(x.size):
        h = rel_step * max(1.0, abs(x[j]))
        probe = x.copy()
        if x[j] + h <= hi[j]:
            probe[j] = x[j] + h
            g[j] = (fun(probe) - fx) / h
        else:
            probe[j] = x[j] - h
            g[j] = (fx - fun(probe)) / h
    return g


def _two_loop(g, pairs):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    s, y, _ = pairs[-1]
    q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q


def _quasi_newton(fun, x0, lo, hi, cfg):
    x = x0.copy()
    f = fun(x)
    g = fd_gradient(fun, x, f, lo, hi, cfg.fd_step)
    pairs: deque = deque(maxlen=cfg.memory)

    while True:
        free = ~(((x <= lo) & (g > 0)) | ((x >= hi) & (g < 0)))
        pg = np.where(free, g, 0.0)
        if np.max(np.abs(pg)) <= cfg.pgtol:
            return True

        if pairs:
            d = -_two_loop(pg, list(pairs))
            d[~free] = 0.0
            if d @ pg >= 0.0:
                pairs.clear()
        if not pairs:
            d = -pg
        t = 1.0 if pairs else 1.0 / np.linalg.norm(pg)

        accepted = False
        for _ in range(30):
            x_new = np.clip(x + t * d, lo, hi)
            step = x_new - x
            if not np.any(step):
                break
            f_new = fun(x_new)
            if f_new <= f + 1e-4 * (g @ step):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            if pairs:
                pairs.clear()
                continue
            # no descent along the projected gradient at finite-difference resolution
            return True

        decrease = f - f_new
        x_old, g_old = x, g
        x, f = x_new, f_new
        if decrease < cfg.ftol * (1.0 + abs(f)):
            return True
        g = fd_gradient(fun, x, f, lo, hi, cfg.fd_step)
        s, y = x - x_old, g - g_old
        sy = s @ y
        if sy > 1e-10 * (y @ y):
            pairs.append((s, y, 1.0 / sy))


def minimize(
    objective: Callable[[np.ndarray], float],
    x0: Sequence[float],
    bounds: Sequence[tuple[float, float]],
    cfg: OptimizerConfig = OptimizerConfig(),
) -> MinimizeResult:
    """Minimise ``objective`` over a box starting from ``x0``.

    Running out of budget is not an error: the best point seen is returned
    with ``converged=False``. A non-finite objective value raises
    ``ObjectiveError``.
    """
    x0 = np.asarray(x0, dtype=np.float64).copy()
    b = np.asarray(bounds, dtype=np.float64)
    if x0.ndim != 1 or x0.size < 1 or b.shape != (x0.size, 2):
        raise DomainError(f"x0 of shape {x0.shape} does not match bounds of shape {b.shape}")
    lo, hi = b[:, 0], b[:, 1]
    if np.any(lo > hi):
        raise DomainError("lower bound above upper bound")
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise DomainError("x0 lies outside the bounds")

    counted = _Counted(objective, cfg.max_evals)
    run = _nelder_mead if cfg.kind == "nelder_mead" else _quasi_newton
    try:
        converged = run(counted, x0, lo, hi, cfg)
    except _BudgetExhausted:
        converged = False
    return MinimizeResult(counted.best_x, counted.best_f, counted.evals, converged)


# ---------------------------------------------------------------------------
# QAOA loop


@dataclass(frozen=True)
class SolveResult:
    params: ParameterVector
    value: float
    fc: int
    ar: float
    converged: bool
    restart: int = field(default=0, compare=False)


def random_params(p: int, rng: np.random.Generator) -> ParameterVector:
    """Uniform draw from the box: gamma in [0, 2*pi], beta in [0, pi]."""
    if p < 1:
        raise DomainError(f"depth must be >= 1, got {p}")
    gamma = rng.uniform(0.0, GAMMA_MAX, size=p)
    beta = rng.uniform(0.0, BETA_MAX, size=p)
    return ParameterVector(gamma, beta)


def solve_instance(
    table: CutTable, p: int, init: ParameterVector, cfg: OptimizerConfig = OptimizerConfig()
) -> SolveResult:
    """Maximise the expected cut at depth ``p`` from ``init``."""
    if init.p != p:
        raise DomainError(f"initial parameters have depth {init.p}, expected {p}")
    res = minimize(make_objective(table), init.to_array(), parameter_bounds(p), cfg)
    value = -res.f
    return SolveResult(
        params=ParameterVector.from_array(res.x),
        value=value,
        fc=res.evals,
        ar=value / table.max_cut,
        converged=res.converged,
    )


def multistart_solve(
    table: CutTable,
    p: int,
    restarts: int,
    cfg: OptimizerConfig,
    rng: np.random.Generator,
) -> tuple[SolveResult, list[SolveResult]]:
    """Best of ``restarts`` runs from random initial points.

    Ties on value go to the run with fewer function calls, then the earlier run.
    """
    if restarts < 1:
        raise DomainError(f"restarts must be >= 1, got {restarts}")
    inits = [random_params(p, rng) for _ in range(restarts)]
    runs = []
    for i, init in enumerate(inits):
        r = solve_instance(table, p, init, cfg)
        runs.append(SolveResult(r.params, r.value, r.fc, r.ar, r.converged, restart=i))
    best = min(runs, key=lambda r: (-r.value, r.fc, r.restart))
    return best, runs
