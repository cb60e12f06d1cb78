"""Optimal-parameter dataset: generation, storage, analysis and model banks."""

from __future__ import annotations

import csv
import json
import logging
import math
import warnings
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, ObjectiveError
from .graphs import Graph, cut_table
from .optimizers import OptimizerConfig, SolveResult, multistart_solve, solve_instance
from .regressors import (
    BaselineConfig,
    GprConfig,
    ModelMetrics,
    fit_model,
    model_from_json,
    pearson,
    regression_metrics,
)
from .simulator import BETA_MAX, GAMMA_MAX, ParameterVector, canonical

log = logging.getLogger(__name__)

P_MAX = 6
ROW_KEYS = ("graph_id", "p", "gamma_opt", "beta_opt", "value", "max_cut", "ar", "fc", "restarts", "optimizer")


def derive_rng(*keys) -> np.random.Generator:
    """Generator seeded from a tuple of ints/strings, independent of call order."""
    ints = [zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(ints))


@dataclass
class DatasetRow:
    graph_id: str
    p: int
    gamma_opt: list
    beta_opt: list
    value: float
    max_cut: int
    ar: float
    fc: int
    restarts: int
    optimizer: str
    converged: bool = True
    failed: bool = False
    restart_fc: list = field(default_factory=list)
    continuation_won: bool = False

    def __post_init__(self):
        if not self.failed and (len(self.gamma_opt) != self.p or len(self.beta_opt) != self.p):
            raise DomainError(f"row {self.graph_id}/p={self.p}: parameter lengths do not match depth")

    @property
    def params(self) -> ParameterVector:
        return ParameterVector(self.gamma_opt, self.beta_opt)

    @property
    def usable(self) -> bool:
        return self.converged and not self.failed

    def to_json(self) -> dict:
        return {
            "graph_id": self.graph_id,
            "p": self.p,
            "gamma_opt": [float(v) for v in self.gamma_opt],
            "beta_opt": [float(v) for v in self.beta_opt],
            "value": float(self.value),
            "max_cut": int(self.max_cut),
            "ar": float(self.ar),
            "fc": int(self.fc),
            "restarts": int(self.restarts),
            "optimizer": self.optimizer,
            "converged": bool(self.converged),
            "failed": bool(self.failed),
            "restart_fc": [int(v) for v in self.restart_fc],
            "continuation_won": bool(self.continuation_won),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DatasetRow":
        return cls(**{k: obj[k] for k in cls.__dataclass_fields__ if k in obj})


def read_rows(path: str | Path) -> list[DatasetRow]:
    rows = []
    path = Path(path)
    if not path.exists():
        return rows
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(DatasetRow.from_json(json.loads(line)))
    return rows


def write_rows(rows: Iterable[DatasetRow], path: str | Path, append: bool = False) -> None:
    with open(path, "a" if append else "w") as fh:
        for r in rows:
            fh.write(json.dumps(r.to_json()) + "\n")


def export_csv(rows: Sequence[DatasetRow], path: str | Path, p_max: int = P_MAX) -> None:
    """Flat table, one column per stage parameter, blank beyond the row's depth."""
    header = (
        ["graph_id", "p"]
        + [f"gamma_{i}" for i in range(1, p_max + 1)]
        + [f"beta_{i}" for i in range(1, p_max + 1)]
        + ["value", "max_cut", "ar", "fc"]
    )
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            pad = [""] * (p_max - len(r.gamma_opt))
            w.writerow(
                [r.graph_id, r.p]
                + [repr(float(v)) for v in r.gamma_opt] + pad
                + [repr(float(v)) for v in r.beta_opt] + pad
                + [repr(float(r.value)), r.max_cut, repr(float(r.ar)), r.fc]
            )


def parameter_count(rows: Iterable[DatasetRow]) -> int:
    return sum(2 * r.p for r in rows)


# ---------------------------------------------------------------------------
# generation


def interpolate_init(prev: ParameterVector, p: int) -> ParameterVector:
    """Stretch a depth-(p-1) schedule onto ``p`` stages by linear interpolation."""
    if prev.p != p - 1:
        raise DomainError(f"need a depth-{p - 1} schedule, got depth {prev.p}")

    def stretch(v):
        padded = np.concatenate([[0.0], v, [0.0]])
        q = p - 1
        return np.array([(i - 1) / q * padded[i - 1] + (q - i + 1) / q * padded[i] for i in range(1, p + 1)])

    return ParameterVector(np.clip(stretch(prev.gamma), 0, GAMMA_MAX), np.clip(stretch(prev.beta), 0, BETA_MAX))


def _solve_depth(table, p, restarts, cfg, rng, prev):
    best, runs = multistart_solve(table, p, restarts, cfg, rng)
    won = False
    if prev is not None:
        cont = solve_instance(table, p, interpolate_init(prev, p), cfg)
        if cont.value > best.value:
            best, won = cont, True
    return best, runs, won


def build_dataset(
    graphs: Sequence[Graph],
    depths: Sequence[int],
    restarts: int = 20,
    cfg: OptimizerConfig = OptimizerConfig(),
    out: str | Path | None = None,
    seed: int = 0,
    continuation: bool = True,
) -> list[DatasetRow]:
    """Optimal parameters for every (graph, depth).

    Each depth is solved by ``restarts`` random starts (seeded from
    ``(seed, graph id, p)``). With ``continuation`` on, depths are visited in
    increasing order and one extra start interpolated from the previous
    depth's optimum competes with them. The stored parameters are the
    winner's, mapped to their canonical symmetry representative.

    When ``out`` is given, rows are appended graph by graph and rows already
    present in the file are not recomputed.
    """
    if not graphs:
        raise DomainError("no graphs given")
    if restarts < 1:
        raise DomainError(f"restarts must be >= 1, got {restarts}")
    depths = sorted(set(int(p) for p in depths))
    if not depths or depths[0] < 1:
        raise DomainError(f"depths must be positive integers, got {depths}")

    done = {}
    if out is not None:
        for r in read_rows(out):
            done[(r.graph_id, r.p)] = r

    rows = []
    for g in graphs:
        table = cut_table(g)
        new_rows = []
        prev = None
        for p in depths:
            key = (g.id, p)
            if key in done:
                row = done[key]
            else:
                rng = derive_rng(seed, g.id, p)
                usable_prev = prev if (continuation and prev is not None and prev.p == p - 1) else None
                try:
                    best, runs, won = _solve_depth(table, p, restarts, cfg, rng, usable_prev)
                    params = canonical(best.params)
                    row = DatasetRow(
                        g.id, p, params.gamma.tolist(), params.beta.tolist(), best.value,
                        table.max_cut, best.ar, best.fc, restarts, cfg.kind, best.converged,
                        False, [r.fc for r in runs], won,
                    )
                except ObjectiveError as exc:
                    log.warning("graph %s depth %d failed: %s", g.id, p, exc)
                    row = DatasetRow(g.id, p, [], [], math.nan, table.max_cut, math.nan, 0,
                                     restarts, cfg.kind, False, True)
                new_rows.append(row)
            rows.append(row)
            prev = row.params if not row.failed else None
        if out is not None and new_rows:
            write_rows(new_rows, out, append=True)
    return rows


# ---------------------------------------------------------------------------
# split


def split_dataset(rows_or_ids, train_fraction: float, seed: int) -> tuple[list[str], list[str]]:
    """Split graph ids (all depths of a graph stay together)."""
    ids = sorted({r if isinstance(r, str) else r.graph_id for r in rows_or_ids})
    if not 0.0 < train_fraction <= 1.0:
        raise DomainError(f"train fraction must lie in (0, 1], got {train_fraction}")
    n_train = math.floor(train_fraction * len(ids) + 1e-9)
    if n_train < 1:
        raise DomainError("training split would be empty")
    perm = np.random.default_rng(seed).permutation(len(ids))
    train = sorted(ids[i] for i in perm[:n_train])
    test = sorted(ids[i] for i in perm[n_train:])
    return train, test


# ---------------------------------------------------------------------------
# correlation and trend reports


PREDICTORS = ("gamma1_p1", "beta1_p1", "p")


@dataclass
class CorrelationEntry:
    predictor: str
    response: str
    depth: str  # "pooled" or the depth as a string
    r: float
    n: int

    @property
    def defined(self) -> bool:
        return not math.isnan(self.r)


@dataclass
class TrendSummary:
    p: int
    instances: int
    mean_gamma_step: float
    mean_beta_step: float
    frac_gamma_increasing: float
    frac_beta_decreasing: float
    frac_both: float


@dataclass
class CorrelationReport:
    entries: list
    trends: list

    def get(self, predictor: str, response: str, depth: str = "pooled") -> CorrelationEntry:
        for e in self.entries:
            if (e.predictor, e.response, e.depth) == (predictor, response, depth):
                return e
        raise KeyError((predictor, response, depth))

    def trend_fraction(self, min_p: int = 3) -> float:
        """Share of instances at depth >= ``min_p`` with rising gamma and falling beta."""
        tot = sum(t.instances for t in self.trends if t.p >= min_p)
        hit = sum(t.frac_both * t.instances for t in self.trends if t.p >= min_p)
        return hit / tot if tot else math.nan

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["section", "predictor", "response", "depth", "value", "n"])
            for e in self.entries:
                w.writerow(["correlation", e.predictor, e.response, e.depth, "" if math.isnan(e.r) else repr(e.r), e.n])
            for t in self.trends:
                for name in ("mean_gamma_step", "mean_beta_step", "frac_gamma_increasing", "frac_beta_decreasing", "frac_both"):
                    w.writerow(["trend", "", name, t.p, repr(float(getattr(t, name))), t.instances])


def _p1_features(rows):
    feats = {}
    for r in rows:
        if r.p == 1 and r.usable:
            feats[r.graph_id] = (r.gamma_opt[0], r.beta_opt[0])
    return feats


def correlation_report(rows: Sequence[DatasetRow], p_max: int | None = None) -> CorrelationReport:
    """Pearson R between the depth-1 features / depth and each stage parameter.

    The pooled column for stage ``i`` uses every row of depth ``>= i``;
    per-depth values are reported alongside.
    """
    rows = [r for r in rows if r.usable]
    if len({r.graph_id for r in rows}) < 3 or len({r.p for r in rows}) < 1:
        raise DomainError("correlation report needs at least three graphs")
    feats = _p1_features(rows)
    if p_max is None:
        p_max = max(r.p for r in rows)
    rows = [r for r in rows if r.graph_id in feats]
    depths = sorted({r.p for r in rows})

    entries = []
    for i in range(1, p_max + 1):
        for kind in ("gamma", "beta"):
            resp = f"{kind}_{i}"
            groups = [("pooled", [r for r in rows if r.p >= i])] + [
                (str(p), [r for r in rows if r.p == p]) for p in depths if p >= i
            ]
            for label, sel in groups:
                if len(sel) < 2:
                    continue
                y = [(r.gamma_opt if kind == "gamma" else r.beta_opt)[i - 1] for r in sel]
                cols = {
                    "gamma1_p1": [feats[r.graph_id][0] for r in sel],
                    "beta1_p1": [feats[r.graph_id][1] for r in sel],
                    "p": [r.p for r in sel],
                }
                for pred in PREDICTORS:
                    entries.append(CorrelationEntry(pred, resp, label, pearson(cols[pred], y), len(sel)))

    trends = []
    for p in depths:
        if p < 2:
            continue
        sel = [r for r in rows if r.p == p]
        dg = np.array([np.mean(np.diff(r.gamma_opt)) for r in sel])
        db = np.array([np.mean(np.diff(r.beta_opt)) for r in sel])
        trends.append(TrendSummary(
            p, len(sel), float(dg.mean()), float(db.mean()),
            float(np.mean(dg > 0)), float(np.mean(db < 0)), float(np.mean((dg > 0) & (db < 0))),
        ))
    return CorrelationReport(entries, trends)


# ---------------------------------------------------------------------------
# predictor bank


@dataclass
class BankEntry:
    model: object
    metrics: ModelMetrics
    n_train: int


@dataclass
class PredictorBank:
    """One regression model per (stage, gamma/beta).

    Base features are ``(gamma_1(p=1), beta_1(p=1), p_t)``. A hierarchical
    bank (``m > 1``) also takes the full depth-``m`` optimum between the
    depth-1 features and ``p_t``.
    """

    model_kind: str
    p_max: int
    entries: dict
    train_ids: list
    m: int = 1

    @property
    def n_features(self) -> int:
        return 3 if self.m == 1 else 3 + 2 * self.m

    def feature_names(self) -> list[str]:
        names = ["gamma1_p1", "beta1_p1"]
        if self.m > 1:
            names += [f"gamma{i}_p{self.m}" for i in range(1, self.m + 1)]
            names += [f"beta{i}_p{self.m}" for i in range(1, self.m + 1)]
        return names + ["p_t"]

    def predict(self, key: str, features) -> float:
        return float(self.entries[key].model.predict(np.asarray(features, dtype=np.float64).reshape(1, -1))[0])

    def to_json(self) -> dict:
        out = {}
        for key, e in self.entries.items():
            out[key] = {
                "model": e.model.to_json(),
                "metrics": e.metrics.to_json(),
                "n_train": e.n_train,
                "features": self.feature_names(),
                "model_kind": self.model_kind,
                "p_max": self.p_max,
                "m": self.m,
                "train_ids": self.train_ids,
            }
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "PredictorBank":
        if not obj:
            raise DomainError("empty bank file")
        entries = {}
        first = next(iter(obj.values()))
        for key, e in obj.items():
            met = {k: (math.nan if v is None else v) for k, v in e["metrics"].items()}
            entries[key] = BankEntry(model_from_json(e["model"]), ModelMetrics(**met), int(e["n_train"]))
        return cls(first["model_kind"], int(first["p_max"]), entries, list(first["train_ids"]), int(first["m"]))

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "PredictorBank":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def _by_graph(rows):
    out = {}
    for r in rows:
        if r.usable:
            out.setdefault(r.graph_id, {})[r.p] = r
    return out


def bank_features(p1: ParameterVector, p_t: int, pm: ParameterVector | None = None) -> list[float]:
    feats = [float(p1.gamma[0]), float(p1.beta[0])]
    if pm is not None:
        feats += [float(v) for v in pm.gamma] + [float(v) for v in pm.beta]
    return feats + [float(p_t)]


def training_pairs(rows, i: int, kind: str, m: int = 1, graph_ids=None):
    """(features, target) pairs for stage ``i`` of ``kind`` ("gamma"/"beta")."""
    X, y = [], []
    for gid, by_p in sorted(_by_graph(rows).items()):
        if graph_ids is not None and gid not in graph_ids:
            continue
        if 1 not in by_p or (m > 1 and m not in by_p):
            continue
        pm = by_p[m].params if m > 1 else None
        for p in sorted(by_p):
            if p < max(i, m + 1, 2):
                continue
            target = by_p[p].gamma_opt if kind == "gamma" else by_p[p].beta_opt
            X.append(bank_features(by_p[1].params, p, pm))
            y.append(target[i - 1])
    return np.asarray(X, dtype=np.float64).reshape(-1, 3 + (2 * m if m > 1 else 0)), np.asarray(y)


def train_predictor_bank(
    rows: Sequence[DatasetRow],
    train_ids: Sequence[str] | None = None,
    model_kind: str = "gpr",
    p_max: int = P_MAX,
    m: int = 1,
    gpr_cfg: GprConfig = GprConfig(),
    baseline_cfg: BaselineConfig = BaselineConfig(),
) -> PredictorBank:
    """Fit 2 * p_max models (fewer when depths are missing) on the training graphs."""
    if model_kind not in ("gpr", "linear", "tree"):
        raise DomainError(f"unknown model kind {model_kind!r}")
    by_graph = _by_graph(rows)
    ids = sorted(by_graph) if train_ids is None else sorted(set(train_ids))
    kept = []
    for gid in ids:
        if gid not in by_graph or 1 not in by_graph[gid]:
            log.warning("graph %s has no usable depth-1 row; excluded from training", gid)
            continue
        kept.append(gid)
    if not kept:
        raise DomainError("no training graphs with a depth-1 row")
    keep = set(kept)

    entries = {}
    for i in range(1, p_max + 1):
        for kind in ("gamma", "beta"):
            X, y = training_pairs(rows, i, kind, m, keep)
            if y.size < 2:
                continue
            with warnings.catch_warnings():
                # the last stage sees a single depth, so p_t is a constant column;
                # the linear model records this in rank_deficient
                warnings.simplefilter("ignore", RuntimeWarning)
                model = fit_model(model_kind, X, y, gpr_cfg, baseline_cfg)
            entries[f"{kind}_{i}"] = BankEntry(model, regression_metrics(model.predict(X), y, X.shape[1]), int(y.size))
    if not entries:
        raise DomainError("training rows contain no depth above the feature depth")
    return PredictorBank(model_kind, p_max, entries, kept, m)
