"""Regression models used to map low-depth optima to higher-depth ones.

``GprModel`` is a squared-exponential Gaussian process whose hyperparameters
are picked by log marginal likelihood. ``LinearModel`` (ordinary least
squares) and ``TreeModel`` (CART with squared-error splits) are the
baselines. All three share ``predict(X)`` and JSON round-tripping through
``to_json``/``model_from_json``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import DomainError, TrainingError

JITTER = 1e-10
MAX_JITTER = 1e-6


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class ModelMetrics:
    mse: float
    rmse: float
    mae: float
    r2: float
    r2_adj: float

    @property
    def r2_defined(self) -> bool:
        return not math.isnan(self.r2)

    def to_json(self) -> dict:
        return {k: (None if math.isnan(v) else v) for k, v in self.__dict__.items()}


def regression_metrics(predicted, actual, d: int) -> ModelMetrics:
    """MSE, RMSE, MAE, R^2 and adjusted R^2 for ``d`` features.

    R^2 is NaN when ``actual`` has zero variance; adjusted R^2 is NaN when
    there are too few samples (``m <= d + 1``).
    """
    pred = np.asarray(predicted, dtype=np.float64).ravel()
    act = np.asarray(actual, dtype=np.float64).ravel()
    if pred.shape != act.shape:
        raise DomainError(f"length mismatch: {pred.size} predictions, {act.size} targets")
    m = act.size
    if m < 2:
        raise DomainError("need at least two samples")
    resid = act - pred
    mse = float(np.mean(resid**2))
    mae = float(np.mean(np.abs(resid)))
    sst = float(np.sum((act - act.mean()) ** 2))
    r2 = math.nan if sst == 0.0 else 1.0 - float(np.sum(resid**2)) / sst
    if m > d + 1 and not math.isnan(r2):
        r2_adj = 1.0 - (1.0 - r2) * (m - 1) / (m - d - 1)
    else:
        r2_adj = math.nan
    return ModelMetrics(mse, math.sqrt(mse), mae, r2, r2_adj)


def pearson(x, y) -> float:
    """Sample Pearson correlation; NaN when either series is constant."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise DomainError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise DomainError("need at least two samples")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return math.nan
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


# ---------------------------------------------------------------------------
# Gaussian process


@dataclass(frozen=True)
class GprConfig:
    lengthscales: tuple = (0.1, 0.3, 1.0, 3.0, 10.0)
    signal_variances: tuple = (0.01, 0.1, 1.0, 10.0)
    noise_variances: tuple = (1e-6, 1e-4, 1e-2)
    refine: bool = True
    refine_starts: int = 3
    refine_rounds: int = 30


def _sqdist(a, b):
    d = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return np.maximum(d, 0.0)


def _factor(K, noise):
    m = K.shape[0]
    extra = 0.0
    while True:
        try:
            return np.linalg.cholesky(K + (noise + extra) * np.eye(m)), noise + extra
        except np.linalg.LinAlgError:
            extra = JITTER if extra == 0.0 else extra * 10.0
            if extra > MAX_JITTER:
                raise TrainingError("kernel matrix is not positive definite even with added jitter")


def _log_marginal(D2, y, ell, sf2, sn2):
    K = sf2 * np.exp(-0.5 * D2 / ell**2)
    try:
        L, _ = _factor(K, sn2)
    except TrainingError:
        return -math.inf
    alpha = cho_solve((L, True), y)
    return float(-0.5 * y @ alpha - np.log(np.diag(L)).sum() - 0.5 * y.size * math.log(2 * math.pi))


@dataclass
class GprModel:
    inputs: np.ndarray
    targets: np.ndarray
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    lengthscale: float
    signal_variance: float
    noise_variance: float
    alpha: np.ndarray = field(repr=False)
    factor: np.ndarray = field(repr=False)
    log_marginal: float = math.nan

    kind = "gpr"

    def _z(self, X):
        return (X - self.x_mean) / self.x_scale

    def _kstar(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.inputs.shape[1]:
            raise DomainError(f"expected {self.inputs.shape[1]} features, got {X.shape[1]}")
        D2 = _sqdist(self._z(X), self._z(self.inputs))
        return self.signal_variance * np.exp(-0.5 * D2 / self.lengthscale**2)

    def predict(self, X) -> np.ndarray:
        return self._kstar(X) @ self.alpha + self.y_mean

    def predict_var(self, X) -> np.ndarray:
        Ks = self._kstar(X)
        v = solve_triangular(self.factor, Ks.T, lower=True)
        var = self.signal_variance + self.noise_variance - (v * v).sum(0)
        return np.where(var < 0.0, 0.0, var)

    def to_json(self) -> dict:
        return {
            "kind": "gpr",
            "inputs": self.inputs.tolist(),
            "targets": self.targets.tolist(),
            "x_mean": self.x_mean.tolist(),
            "x_scale": self.x_scale.tolist(),
            "y_mean": self.y_mean,
            "lengthscale": self.lengthscale,
            "signal_variance": self.signal_variance,
            "noise_variance": self.noise_variance,
            "alpha": self.alpha.tolist(),
            "log_marginal": self.log_marginal,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GprModel":
        X = np.asarray(obj["inputs"], dtype=np.float64)
        x_mean = np.asarray(obj["x_mean"], dtype=np.float64)
        x_scale = np.asarray(obj["x_scale"], dtype=np.float64)
        Z = (X - x_mean) / x_scale
        K = obj["signal_variance"] * np.exp(-0.5 * _sqdist(Z, Z) / obj["lengthscale"] ** 2)
        L, _ = _factor(K, obj["noise_variance"])
        return cls(
            inputs=X,
            targets=np.asarray(obj["targets"], dtype=np.float64),
            x_mean=x_mean,
            x_scale=x_scale,
            y_mean=float(obj["y_mean"]),
            lengthscale=float(obj["lengthscale"]),
            signal_variance=float(obj["signal_variance"]),
            noise_variance=float(obj["noise_variance"]),
            alpha=np.asarray(obj["alpha"], dtype=np.float64),
            factor=L,
            log_marginal=float(obj.get("log_marginal", math.nan)),
        )


def fit_gpr(X, y, cfg: GprConfig = GprConfig()) -> GprModel:
    """Fit a GP with isotropic squared-exponential kernel.

    Inputs are standardised on the training data and targets are centred.
    Hyperparameters maximise the log marginal likelihood: a grid search,
    then multiplicative coordinate descent in log space from the best few
    grid points.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] != y.size:
        raise DomainError(f"{X.shape[0]} input rows but {y.size} targets")
    if y.size < 2:
        raise DomainError("GPR needs at least two training rows")

    x_mean = X.mean(axis=0)
    x_scale = X.std(axis=0)
    x_scale = np.where(x_scale > 0, x_scale, 1.0)
    Z = (X - x_mean) / x_scale
    y_mean = float(y.mean())
    yc = y - y_mean
    D2 = _sqdist(Z, Z)

    scored = []
    for ell in cfg.lengthscales:
        for sf2 in cfg.signal_variances:
            for sn2 in cfg.noise_variances:
                scored.append((_log_marginal(D2, yc, ell, sf2, max(sn2, JITTER)), ell, sf2, max(sn2, JITTER)))
    scored.sort(key=lambda t: -t[0])
    if not math.isfinite(scored[0][0]):
        raise TrainingError("no hyperparameter setting produced a factorisable kernel")

    best = scored[0]
    if cfg.refine:
        noise_floor = min(max(s, JITTER) for s in cfg.noise_variances)
        for start in scored[: cfg.refine_starts]:
            cur = list(start)
            step = 2.0
            for _ in range(cfg.refine_rounds):
                improved = False
                for idx in (1, 2, 3):
                    for f in (step, 1.0 / step):
                        cand = list(cur)
                        cand[idx] = cur[idx] * f
                        if idx == 3 and cand[3] < noise_floor:
                            continue
                        if idx == 1 and not (1e-3 <= cand[1] <= 1e3):
                            continue
                        if idx == 2 and not (1e-6 <= cand[2] <= 1e4):
                            continue
                        cand[0] = _log_marginal(D2, yc, cand[1], cand[2], cand[3])
                        if cand[0] > cur[0] + 1e-12:
                            cur = cand
                            improved = True
                if not improved:
                    step = math.sqrt(step)
                    if step < 1.01:
                        break
            if cur[0] > best[0]:
                best = tuple(cur)

    lml, ell, sf2, sn2 = best
    K = sf2 * np.exp(-0.5 * D2 / ell**2)
    L, sn2_used = _factor(K, sn2)
    alpha = cho_solve((L, True), yc)
    return GprModel(X, y, x_mean, x_scale, y_mean, float(ell), float(sf2), float(sn2_used), alpha, L, lml)


def gpr_predict(model: GprModel, x: Sequence[float]) -> tuple[float, float]:
    """Posterior mean and predictive variance at a single point."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    return float(model.predict(x)[0]), float(model.predict_var(x)[0])


# ---------------------------------------------------------------------------
# baselines


@dataclass(frozen=True)
class BaselineConfig:
    min_leaf: int = 5
    max_depth: int = 8


@dataclass
class LinearModel:
    coef: np.ndarray
    intercept: float
    rank_deficient: bool = False

    kind = "linear"

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.coef.size:
            raise DomainError(f"expected {self.coef.size} features, got {X.shape[1]}")
        return X @ self.coef + self.intercept

    def to_json(self) -> dict:
        return {
            "kind": "linear",
            "coef": self.coef.tolist(),
            "intercept": float(self.intercept),
            "rank_deficient": bool(self.rank_deficient),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LinearModel":
        return cls(np.asarray(obj["coef"], dtype=np.float64), float(obj["intercept"]), bool(obj["rank_deficient"]))


def _fit_linear(X, y):
    A = np.hstack([X, np.ones((X.shape[0], 1))])
    rank = np.linalg.matrix_rank(A)
    deficient = bool(rank < A.shape[1])
    if deficient:
        warnings.warn("linear system is rank deficient; using the pseudo-inverse", RuntimeWarning, stacklevel=3)
        w = np.linalg.pinv(A) @ y
    else:
        w, *_ = np.linalg.lstsq(A, y, rcond=None)
    return LinearModel(w[:-1].copy(), float(w[-1]), deficient)


@dataclass
class TreeModel:
    """Flat binary tree; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_features: int

    kind = "tree"

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise DomainError(f"expected {self.n_features} features, got {X.shape[1]}")
        out = np.empty(X.shape[0], dtype=np.int64)
        for i, row in enumerate(X):
            node = 0
            while self.feature[node] >= 0:
                node = self.left[node] if row[self.feature[node]] <= self.threshold[node] else self.right[node]
            out[i] = node
        return out

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_json(self) -> dict:
        return {
            "kind": "tree",
            "n_features": self.n_features,
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TreeModel":
        return cls(
            np.asarray(obj["feature"], dtype=np.int64),
            np.asarray(obj["threshold"], dtype=np.float64),
            np.asarray(obj["left"], dtype=np.int64),
            np.asarray(obj["right"], dtype=np.int64),
            np.asarray(obj["value"], dtype=np.float64),
            int(obj["n_features"]),
        )


def _best_split(X, y, min_leaf):
    """Lowest-SSE split over all features, or None."""
    m = y.size
    best = None
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs, ys = X[order, f], y[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        nl = np.arange(1, m)
        sse_l = csq[:-1] - csum[:-1] ** 2 / nl
        nr = m - nl
        sse_r = (csq[-1] - csq[:-1]) - (csum[-1] - csum[:-1]) ** 2 / nr
        total = sse_l + sse_r
        ok = (nl >= min_leaf) & (nr >= min_leaf) & (xs[1:] > xs[:-1])
        if not ok.any():
            continue
        total = np.where(ok, total, np.inf)
        k = int(np.argmin(total))
        if best is None or total[k] < best[0] - 1e-12:
            best = (float(total[k]), f, 0.5 * (xs[k] + xs[k + 1]))
    return best


def _fit_tree(X, y, cfg):
    feature, threshold, left, right, value = [], [], [], [], []

    def grow(idx, depth):
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        yy = y[idx]
        value.append(float(yy.mean()))
        sse = float(np.sum((yy - yy.mean()) ** 2))
        if depth >= cfg.max_depth or idx.size < 2 * cfg.min_leaf or sse <= 1e-14 * max(1.0, float(yy @ yy)):
            return node
        split = _best_split(X[idx], yy, cfg.min_leaf)
        if split is None or split[0] >= sse:
            return node
        _, f, thr = split
        mask = X[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left[node] = grow(idx[mask], depth + 1)
        right[node] = grow(idx[~mask], depth + 1)
        return node

    grow(np.arange(y.size), 0)
    return TreeModel(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(value, dtype=np.float64),
        X.shape[1],
    )


def fit_baseline(kind: str, X, y, cfg: BaselineConfig = BaselineConfig()):
    """Least-squares linear model (``"linear"``) or CART tree (``"tree"``)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] != y.size:
        raise DomainError(f"{X.shape[0]} input rows but {y.size} targets")
    if kind == "linear":
        if y.size < X.shape[1] + 1:
            raise DomainError(f"linear fit needs at least {X.shape[1] + 1} rows, got {y.size}")
        return _fit_linear(X, y)
    if kind == "tree":
        if y.size < 2:
            raise DomainError("tree fit needs at least two rows")
        if cfg.min_leaf < 1 or cfg.max_depth < 0:
            raise DomainError("min_leaf must be >= 1 and max_depth >= 0")
        return _fit_tree(X, y, cfg)
    raise DomainError(f"unknown baseline kind {kind!r}")


def fit_model(kind: str, X, y, gpr_cfg: GprConfig = GprConfig(), baseline_cfg: BaselineConfig = BaselineConfig()):
    if kind == "gpr":
        return fit_gpr(X, y, gpr_cfg)
    return fit_baseline(kind, X, y, baseline_cfg)


_LOADERS = {"gpr": GprModel, "linear": LinearModel, "tree": TreeModel}


def model_from_json(obj: dict):
    try:
        return _LOADERS[obj["kind"]].from_json(obj)
    except KeyError:
        raise DomainError(f"unknown model kind {obj.get('kind')!r}") from None
