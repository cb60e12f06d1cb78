"""Two-level QAOA solving with regression warm starts, and the benchmark that
compares it against random initialisation."""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import DatasetRow, PredictorBank, bank_features, derive_rng
from .errors import DomainError, ObjectiveError
from .graphs import CutTable, Graph, cut_table
from .optimizers import OptimizerConfig, SolveResult, multistart_solve, random_params, solve_instance
from .simulator import BETA_MAX, GAMMA_MAX, ParameterVector, canonical

log = logging.getLogger(__name__)

REPORT_HEADER = [
    "optimizer", "p",
    "naive_fc_mean", "naive_fc_std", "naive_ar_mean", "naive_ar_std",
    "ml_fc_mean", "ml_fc_std", "ml_ar_mean", "ml_ar_std",
    "fc_reduction_pct",
]


def _query(bank: PredictorBank, p_t: int, features) -> ParameterVector:
    if not 2 <= p_t <= bank.p_max:
        raise DomainError(f"target depth {p_t} outside the bank's range 2..{bank.p_max}")
    gamma = np.empty(p_t)
    beta = np.empty(p_t)
    for i in range(1, p_t + 1):
        gamma[i - 1] = bank.predict(f"gamma_{i}", features)
        beta[i - 1] = bank.predict(f"beta_{i}", features)
    return ParameterVector(np.clip(gamma, 0.0, GAMMA_MAX), np.clip(beta, 0.0, BETA_MAX))


def predict_init(bank: PredictorBank, gamma1: float, beta1: float, p_t: int) -> ParameterVector:
    """Initial depth-``p_t`` schedule predicted from the depth-1 optimum."""
    if bank.m != 1:
        raise DomainError("hierarchical bank needs hierarchical_predict")
    return _query(bank, p_t, [gamma1, beta1, p_t])


def hierarchical_predict(
    bank: PredictorBank, p1_opt: tuple[float, float], pm_opt: ParameterVector, p_t: int
) -> ParameterVector:
    """Like ``predict_init`` but also conditioned on an intermediate-depth optimum."""
    if bank.m < 2:
        raise DomainError("bank was trained without intermediate-depth features")
    if pm_opt.p != bank.m:
        raise DomainError(f"bank expects a depth-{bank.m} optimum, got depth {pm_opt.p}")
    if p_t <= bank.m:
        raise DomainError(f"target depth {p_t} must exceed the intermediate depth {bank.m}")
    p1 = ParameterVector([p1_opt[0]], [p1_opt[1]])
    return _query(bank, p_t, bank_features(p1, p_t, pm_opt))


@dataclass(frozen=True)
class TwoLevelResult:
    stage1: SolveResult
    predicted_init: ParameterVector
    stage2: SolveResult

    @property
    def total_fc(self) -> int:
        return self.stage1.fc + self.stage2.fc

    @property
    def ar(self) -> float:
        return self.stage2.ar


def two_level_solve(
    table: CutTable,
    p_t: int,
    bank: PredictorBank,
    cfg: OptimizerConfig,
    rng: np.random.Generator,
    graph_id: str | None = None,
    stage1_restarts: int = 1,
) -> TwoLevelResult:
    """Solve depth 1 from a random start, predict the depth-``p_t`` start, solve again.

    ``stage1_restarts > 1`` runs the depth-1 stage as a multistart instead;
    its function calls are all counted.
    """
    if graph_id is not None and graph_id in set(bank.train_ids):
        warnings.warn(f"graph {graph_id} was used to train the predictor bank", RuntimeWarning, stacklevel=2)
    if stage1_restarts == 1:
        stage1 = solve_instance(table, 1, random_params(1, rng), cfg)
    else:
        best, runs = multistart_solve(table, 1, stage1_restarts, cfg, rng)
        stage1 = SolveResult(best.params, best.value, sum(r.fc for r in runs), best.ar, best.converged)
    p1 = canonical(stage1.params)
    init = predict_init(bank, float(p1.gamma[0]), float(p1.beta[0]), p_t)
    stage2 = solve_instance(table, p_t, init, cfg)
    return TwoLevelResult(stage1, init, stage2)


# ---------------------------------------------------------------------------
# prediction error


@dataclass
class DepthError:
    p: int
    n_graphs: int
    mean: float
    median: float
    p90: float
    per_parameter: dict


def relative_errors(pred: ParameterVector, actual: ParameterVector) -> np.ndarray:
    """|predicted - optimum| over the domain width, layout ``[gamma..., beta...]``."""
    g = np.abs(pred.gamma - actual.gamma) / GAMMA_MAX
    b = np.abs(pred.beta - actual.beta) / BETA_MAX
    return np.concatenate([g, b])


def prediction_error_report(bank: PredictorBank, test_rows: Sequence[DatasetRow], depths=None) -> dict:
    """Per-depth relative prediction errors, using each graph's stored depth-1 optimum as features."""
    by_graph = {}
    for r in test_rows:
        if r.usable:
            by_graph.setdefault(r.graph_id, {})[r.p] = r
    if depths is None:
        depths = sorted({p for d in by_graph.values() for p in d if 2 <= p <= bank.p_max and p > bank.m})
    report = {}
    for p in depths:
        errs = []
        for gid in sorted(by_graph):
            d = by_graph[gid]
            if 1 not in d or p not in d or (bank.m > 1 and bank.m not in d):
                continue
            if bank.m > 1:
                g1 = d[1].params
                pred = hierarchical_predict(bank, (g1.gamma[0], g1.beta[0]), d[bank.m].params, p)
            else:
                pred = predict_init(bank, d[1].gamma_opt[0], d[1].beta_opt[0], p)
            errs.append(relative_errors(pred, d[p].params))
        if not errs:
            continue
        E = np.array(errs)
        names = [f"gamma_{i}" for i in range(1, p + 1)] + [f"beta_{i}" for i in range(1, p + 1)]
        report[p] = DepthError(
            p, E.shape[0], float(E.mean()), float(np.median(E)), float(np.percentile(E, 90)),
            {n: float(v) for n, v in zip(names, E.mean(axis=0))},
        )
    return report


def parameter_mse(bank: PredictorBank, test_rows: Sequence[DatasetRow], p: int) -> float:
    """Mean squared error of predicted vs stored parameters at depth ``p`` (radians^2)."""
    by_graph = {}
    for r in test_rows:
        if r.usable:
            by_graph.setdefault(r.graph_id, {})[r.p] = r
    sq = []
    for gid in sorted(by_graph):
        d = by_graph[gid]
        if 1 not in d or p not in d or (bank.m > 1 and bank.m not in d):
            continue
        g1 = d[1].params
        if bank.m > 1:
            pred = hierarchical_predict(bank, (g1.gamma[0], g1.beta[0]), d[bank.m].params, p)
        else:
            pred = predict_init(bank, g1.gamma[0], g1.beta[0], p)
        sq.append((pred.to_array() - d[p].params.to_array()) ** 2)
    if not sq:
        raise DomainError(f"no test rows at depth {p}")
    return float(np.mean(sq))


# ---------------------------------------------------------------------------
# benchmark


@dataclass
class BenchRow:
    optimizer: str
    p: int
    naive_fc_mean: float
    naive_fc_std: float
    naive_ar_mean: float
    naive_ar_std: float
    ml_fc_mean: float
    ml_fc_std: float
    ml_ar_mean: float
    ml_ar_std: float
    fc_reduction_pct: float
    n_graphs: int = 0
    failures: int = 0
    naive_fc_total_mean: float = math.nan


@dataclass
class BenchReport:
    rows: list
    prediction_errors: dict
    records: list = field(default_factory=list)

    def cell(self, optimizer: str, p: int) -> BenchRow:
        for r in self.rows:
            if r.optimizer == optimizer and r.p == p:
                return r
        raise KeyError((optimizer, p))

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(REPORT_HEADER)
            for r in self.rows:
                w.writerow([r.optimizer, r.p] + [repr(float(getattr(r, k))) for k in REPORT_HEADER[2:]])

    def write_records(self, path: str | Path) -> None:
        keys = ["optimizer", "p", "graph_id", "flow", "restart", "fc", "ar", "value", "converged"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(keys)
            for rec in self.records:
                w.writerow([rec.get(k, "") for k in keys])


def _std(v):
    return float(np.std(v)) if len(v) else math.nan


def run_benchmark(
    graphs: Sequence[Graph],
    bank: PredictorBank,
    optimizers: Sequence[str] = ("nelder_mead", "quasi_newton"),
    depths: Sequence[int] = (2, 3, 4, 5),
    restarts: int = 20,
    cfg: OptimizerConfig = OptimizerConfig(),
    seed: int = 0,
    test_rows: Sequence[DatasetRow] | None = None,
    stage1_restarts: int = 1,
    progress=None,
) -> BenchReport:
    """Random multistart (naive) versus the two-level flow on every graph.

    Naive function calls are averaged per run over all restarts and graphs;
    naive AR is the per-graph best. The two-level flow runs once per graph.
    """
    train = set(bank.train_ids)
    if any(g.id in train for g in graphs):
        warnings.warn("benchmark graphs overlap the bank's training graphs", RuntimeWarning, stacklevel=2)
    tables = {g.id: cut_table(g) for g in graphs}
    out_rows, records = [], []
    for kind in optimizers:
        kcfg = OptimizerConfig(kind, cfg.ftol, cfg.max_evals, cfg.fd_step, cfg.simplex_scale, cfg.memory, cfg.pgtol)
        for p in depths:
            naive_fc, naive_tot, naive_ar, ml_fc, ml_ar = [], [], [], [], []
            failures = 0
            for g in graphs:
                table = tables[g.id]
                try:
                    best, runs = multistart_solve(table, p, restarts, kcfg, derive_rng(seed, kcfg.kind, p, g.id, 0))
                    res = two_level_solve(
                        table, p, bank, kcfg, derive_rng(seed, kcfg.kind, p, g.id, 1),
                        stage1_restarts=stage1_restarts,
                    )
                except ObjectiveError as exc:
                    failures += 1
                    log.warning("benchmark %s p=%d graph %s failed: %s", kcfg.kind, p, g.id, exc)
                    continue
                naive_fc.extend(r.fc for r in runs)
                naive_tot.append(sum(r.fc for r in runs))
                naive_ar.append(best.ar)
                ml_fc.append(res.total_fc)
                ml_ar.append(res.ar)
                for r in runs:
                    records.append(dict(optimizer=kcfg.kind, p=p, graph_id=g.id, flow="naive", restart=r.restart,
                                        fc=r.fc, ar=repr(r.ar), value=repr(r.value), converged=r.converged))
                records.append(dict(optimizer=kcfg.kind, p=p, graph_id=g.id, flow="ml", restart=0,
                                    fc=res.total_fc, ar=repr(res.ar), value=repr(res.stage2.value),
                                    converged=res.stage2.converged))
            nm = float(np.mean(naive_fc)) if naive_fc else math.nan
            mm = float(np.mean(ml_fc)) if ml_fc else math.nan
            row = BenchRow(
                kcfg.kind, p,
                nm, _std(naive_fc),
                float(np.mean(naive_ar)) if naive_ar else math.nan, _std(naive_ar),
                mm, _std(ml_fc),
                float(np.mean(ml_ar)) if ml_ar else math.nan, _std(ml_ar),
                100.0 * (1.0 - mm / nm) if naive_fc else math.nan,
                len(naive_ar), failures,
                float(np.mean(naive_tot)) if naive_tot else math.nan,
            )
            out_rows.append(row)
            if progress is not None:
                progress(row)
    errors = prediction_error_report(bank, test_rows, depths) if test_rows is not None else {}
    return BenchReport(out_rows, errors, records)
