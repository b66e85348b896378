"""Linear performance predictor over graph features and forward feature selection."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._io import atomic_write_text
from .metrics import FEATURE_NAMES

RIDGE = 1e-8
COND_LIMIT = 1e12


@dataclass
class Dataset:
    """Feature matrix plus targets with a fixed TRAIN/TEST split."""

    X: np.ndarray
    y: np.ndarray
    train: np.ndarray  # bool mask; TEST is its complement
    feature_names: tuple = FEATURE_NAMES
    graph_ids: list | None = None
    split_seed: int = 0

    @classmethod
    def split(cls, X, y, feature_names=FEATURE_NAMES, graph_ids=None, split_seed=0, train_ratio=0.9):
        """Seeded random shuffle into TRAIN/TEST at ``train_ratio`` (9:1 by default)."""
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[1] != len(feature_names):
            raise ValueError("X must be (rows, features) matching y and feature_names")
        n = len(y)
        n_train = int(round(train_ratio * n))
        if n >= 2:
            n_train = min(max(n_train, 1), n - 1)
        order = np.random.default_rng(split_seed).permutation(n)
        train = np.zeros(n, dtype=bool)
        train[order[:n_train]] = True
        return cls(X, y, train, tuple(feature_names), graph_ids, split_seed)

    @property
    def test(self) -> np.ndarray:
        return ~self.train

    def columns(self, names) -> np.ndarray:
        idx = [self.feature_names.index(n) for n in names]
        return self.X[:, idx]


@dataclass
class RegressionModel:
    """OLS on standardised features: ``y = intercept + sum coef * (x - mean) / std``."""

    feature_subset: tuple
    coefficients: np.ndarray
    intercept: float
    means: np.ndarray
    stds: np.ndarray
    split_seed: int = 0
    metrics: dict = field(default_factory=dict)

    def predict(self, X_subset) -> np.ndarray:
        """Predict from a matrix whose columns follow ``feature_subset``."""
        X_subset = np.atleast_2d(np.asarray(X_subset, dtype=np.float64))
        if not self.feature_subset:
            return np.full(X_subset.shape[0], self.intercept)
        return self.intercept + ((X_subset - self.means) / self.stds) @ self.coefficients

    def predict_features(self, features: dict) -> float:
        row = [features[n] for n in self.feature_subset]
        return float(self.predict(np.array([row]))[0])

    def raw_coefficients(self) -> tuple[np.ndarray, float]:
        """Slopes and intercept on the original (unstandardised) feature scale."""
        slopes = self.coefficients / self.stds
        return slopes, float(self.intercept - (slopes * self.means).sum())

    def to_json(self) -> str:
        doc = {
            "features": list(self.feature_subset),
            "coefficients": [float(c) for c in self.coefficients],
            "intercept": float(self.intercept),
            "means": [float(m) for m in self.means],
            "stds": [float(s) for s in self.stds],
            "split_seed": int(self.split_seed),
            "metrics": self.metrics,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RegressionModel":
        doc = json.loads(text)
        return cls(
            tuple(doc["features"]),
            np.array(doc["coefficients"], dtype=np.float64),
            float(doc["intercept"]),
            np.array(doc["means"], dtype=np.float64),
            np.array(doc["stds"], dtype=np.float64),
            int(doc.get("split_seed", 0)),
            dict(doc.get("metrics", {})),
        )

    def save(self, path) -> None:
        atomic_write_text(path, self.to_json())

    @classmethod
    def load(cls, path) -> "RegressionModel":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def __eq__(self, other):
        if not isinstance(other, RegressionModel):
            return NotImplemented
        return (
            self.feature_subset == other.feature_subset
            and np.array_equal(self.coefficients, other.coefficients)
            and self.intercept == other.intercept
            and np.array_equal(self.means, other.means)
            and np.array_equal(self.stds, other.stds)
            and self.split_seed == other.split_seed
            and self.metrics == other.metrics
        )


def constant_model(value: float, features=()) -> RegressionModel:
    """A predictor that ignores its inputs."""
    k = len(features)
    return RegressionModel(tuple(features), np.zeros(k), float(value), np.zeros(k), np.ones(k))


def _solve(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if gram.size == 0:
        return np.zeros(0)
    try:
        if np.linalg.cond(gram) < COND_LIMIT:
            return np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        pass
    return np.linalg.solve(gram + RIDGE * np.eye(len(gram)), rhs)


def _fit_rows(X, y, subset, names, split_seed, allow_constant) -> RegressionModel:
    if len(y) == 0:
        raise ValueError("TRAIN split is empty")
    Xs = X[:, [names.index(s) for s in subset]] if subset else np.zeros((len(y), 0))
    mu = Xs.mean(axis=0)
    sd = Xs.std(axis=0)
    flat = sd == 0
    if flat.any():
        if not allow_constant:
            bad = [s for s, f in zip(subset, flat) if f]
            raise ValueError(f"constant features on TRAIN: {bad}")
        sd = np.where(flat, 1.0, sd)
    Z = (Xs - mu) / sd
    y_mean = float(y.mean())
    coef = _solve(Z.T @ Z, Z.T @ (y - y_mean))
    coef[flat] = 0.0
    return RegressionModel(tuple(subset), coef, y_mean, mu, sd, split_seed)


def fit_ols(data: Dataset, subset, allow_constant: bool = False) -> RegressionModel:
    """Least squares on standardised TRAIN features via the normal equations.

    Near-singular systems (e.g. exactly collinear features) fall back to a
    ridge term of 1e-8. Constant TRAIN columns are rejected unless
    ``allow_constant``, in which case they get a zero coefficient.
    """
    subset = tuple(subset)
    unknown = [s for s in subset if s not in data.feature_names]
    if unknown:
        raise KeyError(f"unknown features: {unknown}")
    tr = data.train
    if tr.sum() == 0:
        raise ValueError("TRAIN split is empty")
    return _fit_rows(data.X[tr], data.y[tr], subset, data.feature_names, data.split_seed, allow_constant)


def pearson(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    da, db = a - a.mean(), b - b.mean()
    denom = np.sqrt((da * da).sum() * (db * db).sum())
    if denom == 0:
        return 0.0
    return float(np.clip((da * db).sum() / denom, -1.0, 1.0))


def evaluate(model: RegressionModel, data: Dataset, split: str = "test") -> tuple[float, float]:
    """(MSE, Pearson r) of predictions against targets on one split."""
    rows = data.test if split == "test" else data.train
    if rows.sum() == 0:
        raise ValueError(f"{split.upper()} split is empty")
    pred = model.predict(data.columns(model.feature_subset)[rows])
    y = data.y[rows]
    return float(np.mean((pred - y) ** 2)), pearson(pred, y)


# -- sequential forward selection -------------------------------------------


@dataclass
class SfsStep:
    feature: str
    test_mse: float
    test_pearson: float
    train_mse: float
    model: RegressionModel | None = field(default=None, compare=False, repr=False)


@dataclass
class SfsTrace:
    steps: list = field(default_factory=list)

    def __len__(self):
        return len(self.steps)

    @property
    def features(self) -> list:
        return [s.feature for s in self.steps]

    def to_csv(self) -> str:
        lines = ["step,feature,test_mse,test_pearson,train_mse"]
        for i, s in enumerate(self.steps, 1):
            lines.append(f"{i},{s.feature},{s.test_mse!r},{s.test_pearson!r},{s.train_mse!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "SfsTrace":
        rows = list(csv.DictReader(text.splitlines()))
        return cls(
            [SfsStep(r["feature"], float(r["test_mse"]), float(r["test_pearson"]), float(r["train_mse"])) for r in rows]
        )


def _cv_mse(data: Dataset, subset, folds: int = 5) -> float:
    idx = np.flatnonzero(data.train)
    order = np.random.default_rng(data.split_seed).permutation(idx)
    parts = np.array_split(order, folds)
    errs = []
    for i, hold in enumerate(parts):
        if len(hold) == 0:
            continue
        fit_idx = np.concatenate([p for j, p in enumerate(parts) if j != i])
        model = _fit_rows(data.X[fit_idx], data.y[fit_idx], subset, data.feature_names, data.split_seed, True)
        pred = model.predict(data.columns(subset)[hold])
        errs.append(np.mean((pred - data.y[hold]) ** 2))
    return float(np.mean(errs))


def _step(data: Dataset, subset) -> SfsStep:
    model = fit_ols(data, subset, allow_constant=True)
    test_mse, test_r = evaluate(model, data, "test")
    train_mse, _ = evaluate(model, data, "train")
    model.metrics = {"test_mse": test_mse, "test_pearson": test_r, "train_mse": train_mse}
    return SfsStep(subset[-1], test_mse, test_r, train_mse, model)


def sfs(data: Dataset, candidate_features=None, first: str | None = None, criterion: str = "test") -> SfsTrace:
    """Greedy forward selection until every candidate is in the model.

    Each step adds the candidate whose refit model has the lowest TEST MSE
    (``criterion="cv"`` uses 5-fold CV MSE on TRAIN instead). Ties go to the
    earlier feature in canonical order. ``first`` forces the opening feature.
    """
    if candidate_features is None:
        candidate_features = data.feature_names
    order = {n: i for i, n in enumerate(data.feature_names)}
    remaining = sorted(set(candidate_features), key=order.__getitem__)
    if not remaining:
        raise ValueError("need at least one candidate feature")
    selected: list[str] = []
    trace = SfsTrace()
    if first is not None:
        if first not in remaining:
            raise KeyError(f"unknown first feature {first!r}")
        remaining.remove(first)
        selected.append(first)
        trace.steps.append(_step(data, tuple(selected)))
    while remaining:
        best = None
        for cand in remaining:
            subset = tuple(selected + [cand])
            step = _step(data, subset)
            score = step.test_mse if criterion == "test" else _cv_mse(data, subset)
            if best is None or score < best[0]:
                best = (score, cand, step)
        _, cand, step = best
        selected.append(cand)
        remaining.remove(cand)
        trace.steps.append(step)
    return trace


def sfs_fixed_first(data: Dataset, first: str, candidate_features=None, criterion: str = "test") -> SfsTrace:
    return sfs(data, candidate_features, first=first, criterion=criterion)


def feature_set_similarity(traces: dict, k: int, universe=FEATURE_NAMES) -> tuple[list, np.ndarray]:
    """Pearson r between the membership vectors of each trace's features 2..k.

    ``traces`` maps the fixed first feature to its trace. Returns the row
    labels and the square correlation matrix.
    """
    labels = list(traces)
    vecs = []
    for name in labels:
        tr = traces[name]
        if len(tr) < k:
            raise ValueError(f"trace for {name} has {len(tr)} steps, need {k}")
        members = set(tr.features[1:k])
        vecs.append(np.array([1.0 if f in members else 0.0 for f in universe]))
    sim = np.array([[pearson(a, b) for b in vecs] for a in vecs])
    return labels, sim
