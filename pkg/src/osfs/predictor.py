"""Random-forest regression and NMAE evaluation of feature sets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from sklearn.ensemble import RandomForestRegressor
from sklearn.linear_model import LinearRegression

from .core import FeatureCatalog, SelectedFeatureSet, TraceWindow
from .errors import (
    ContractError,
    RangeError,
    ShapeError,
    UndefinedNormalizationError,
)

N_TREES = 100
TRAIN_FRACTION = 0.7


@dataclass
class ForestModel:
    """A fitted regressor bound to an ordered list of input features.

    ``estimator`` is any object with ``predict(X)``; the reference is a
    bootstrap random forest with unlimited depth that considers every
    feature at each split.
    """

    features: tuple
    estimator: object = field(repr=False)
    n_trees: int = N_TREES
    seed: Optional[int] = None

    @property
    def trees(self) -> list:
        return list(getattr(self.estimator, "estimators_", []))

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X2 = X.reshape(1, -1) if single else X
        if X2.ndim != 2 or X2.shape[1] != len(self.features):
            raise ShapeError(
                f"model expects {len(self.features)} inputs, got shape {X.shape}"
            )
        out = self.estimator.predict(X2)
        return float(out[0]) if single else out

    def predict_window(self, window: TraceWindow) -> np.ndarray:
        return self.predict(window.columns(self.features))


def _feature_list(window: TraceWindow, features) -> tuple:
    if isinstance(features, SelectedFeatureSet):
        names = features.ordered(window.catalog)
    else:
        names = list(features)
        for name in names:
            window.catalog.index(name)
    if not names:
        raise ContractError("at least one feature is required")
    return tuple(names)


def fit_forest(X, y, seed=None, n_trees: int = N_TREES, bootstrap: bool = True,
               n_jobs: Optional[int] = None) -> RandomForestRegressor:
    est = RandomForestRegressor(
        n_estimators=n_trees,
        bootstrap=bootstrap,
        max_features=1.0,
        min_samples_split=2,
        max_depth=None,
        random_state=seed,
        n_jobs=n_jobs,
    )
    return est.fit(np.asarray(X, dtype=float), np.asarray(y, dtype=float))


def train_forest(window: TraceWindow, features, seed=0, n_trees: int = N_TREES,
                 bootstrap: bool = True, n_jobs: Optional[int] = None) -> ForestModel:
    """Fit a forest on ``window`` restricted to ``features``.

    Trees are independent and seeded from ``seed``, so training in parallel
    (``n_jobs``) yields the same forest as training sequentially.
    """
    if not window.has_targets:
        raise ContractError("training needs a window with targets")
    names = _feature_list(window, features)
    est = fit_forest(window.columns(names), window.y, seed, n_trees, bootstrap, n_jobs)
    return ForestModel(names, est, n_trees, seed)


def train_linear(window: TraceWindow, features, seed=None) -> ForestModel:
    """Least-squares baseline with the same interface as :func:`train_forest`."""
    if not window.has_targets:
        raise ContractError("training needs a window with targets")
    names = _feature_list(window, features)
    est = LinearRegression().fit(window.columns(names), window.y)
    return ForestModel(names, est, n_trees=0, seed=seed)


def predict(model: ForestModel, x):
    return model.predict(x)


def nmae(y, yhat) -> float:
    """Mean absolute error divided by the mean target."""
    y = np.asarray(y, dtype=float).ravel()
    yhat = np.asarray(yhat, dtype=float).ravel()
    if y.shape != yhat.shape:
        raise ShapeError(f"length mismatch: {y.shape[0]} targets, {yhat.shape[0]} predictions")
    if y.shape[0] == 0:
        raise ContractError("nmae needs at least one sample")
    y_bar = y.mean()
    if y_bar == 0:
        raise UndefinedNormalizationError("mean target is zero")
    return float(np.mean(np.abs(y - yhat)) / y_bar)


@dataclass(frozen=True)
class EvaluationReport:
    nmae: float
    q: int
    y_bar: float
    split: str

    def to_dict(self) -> dict:
        return {"nmae": self.nmae, "q": self.q, "y_bar": self.y_bar, "split": self.split}


def split_indices(t: int, seed, train_fraction: float = TRAIN_FRACTION):
    """Random train/test partition of ``range(t)``; both parts nonempty."""
    if t < 2:
        raise RangeError("a split needs at least two samples")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(t)
    n_train = min(max(int(round(train_fraction * t)), 1), t - 1)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


Trainer = Callable[..., ForestModel]


def offline_eval(window: TraceWindow, features, seed=0, train_fraction: float = TRAIN_FRACTION,
                 trainer: Trainer = train_forest, **train_kw) -> EvaluationReport:
    """Random 70/30 split over the whole window; NMAE on the held-out part.

    The same ``seed`` drives the split and the model, so two feature sets
    evaluated with one seed see identical train/test partitions.
    """
    if not window.has_targets:
        raise ContractError("evaluation needs a window with targets")
    names = _feature_list(window, features)
    train_idx, test_idx = split_indices(window.t, seed, train_fraction)
    X = window.columns(names)
    y = window.y
    train = TraceWindow(FeatureCatalog(names), X[train_idx], y[train_idx])
    model = trainer(train, names, seed=seed, **train_kw)
    yhat = model.predict(X[test_idx])
    return EvaluationReport(
        nmae(y[test_idx], yhat), len(test_idx), float(y[test_idx].mean()),
        f"random {len(train_idx)}/{len(test_idx)} seed={seed}",
    )


def online_eval(window: TraceWindow, features, t_train: int, seed=0,
                trainer: Trainer = train_forest, **train_kw) -> EvaluationReport:
    """Train on the first ``t_train`` samples and test on every later one."""
    if not window.has_targets:
        raise ContractError("evaluation needs a window with targets")
    if not 1 <= t_train < window.t:
        raise RangeError(f"t_train={t_train} must lie in [1, {window.t})")
    names = _feature_list(window, features)
    model = trainer(window.prefix(t_train), names, seed=seed, **train_kw)
    test = window.slice(t_train)
    yhat = model.predict(test.columns(names))
    return EvaluationReport(
        nmae(test.y, yhat), test.t, float(test.y.mean()),
        f"prefix {t_train}/{test.t}",
    )

