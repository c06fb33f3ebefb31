"""Unsupervised feature rankers.

Two rankers are provided, both returning a total order over the catalog:

* ``arr`` scores each feature by relevance minus redundancy, where relevance
  is the column variance and redundancy the mean absolute Pearson
  correlation with every other feature. Higher is better.
* ``ls`` is the Laplacian Score: a feature is good when it varies smoothly
  over a kNN heat-kernel graph built on the samples. Lower is better.

Both are pure functions of the sample matrix. Ties are broken by ascending
catalog index, so identical inputs always give identical orders.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.spatial.distance import pdist, squareform

from .core import SelectedFeatureSet, TraceWindow
from .errors import ContractError, InsufficientDataError, RangeError
from .preprocess import minmax_columns

# Correlations are rounded before summation so that duplicated columns, whose
# BLAS dot products may differ in the last ulp, receive bit-identical scores.
_CORR_DECIMALS = 12
DEGENERATE_LS_SCORE = np.inf


@dataclass(frozen=True)
class RankerConfig:
    kind: str = "ls"
    ls_neighbors: int = 5
    ls_kernel_width: float = 1.0
    # Largest number of samples the LS graph is built over; longer windows
    # are thinned to this many evenly spaced rows.
    ls_max_samples: int = 1024
    tie_break: str = "index"
    # Min-max scale each window before ranking (the causal online path).
    rescale: bool = False

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in ("arr", "ls"):
            raise ContractError(f"unknown ranker {self.kind!r}; expected 'arr' or 'ls'")
        object.__setattr__(self, "kind", kind)
        if self.ls_neighbors < 1:
            raise ContractError("ls_neighbors must be >= 1")
        if not self.ls_kernel_width > 0:
            raise ContractError("ls_kernel_width must be positive")
        if self.ls_max_samples < self.ls_neighbors + 1:
            raise ContractError("ls_max_samples must exceed ls_neighbors")
        if self.tie_break != "index":
            raise ContractError(f"unsupported tie_break {self.tie_break!r}")

    def with_kind(self, kind: str) -> "RankerConfig":
        return replace(self, kind=kind)


@dataclass(frozen=True)
class RankedList:
    order: tuple
    scores: dict
    t: int
    kind: str = ""

    @property
    def n(self) -> int:
        return len(self.order)

    def position(self, name: str) -> int:
        return self.order.index(name)


def _order(scores: np.ndarray, higher_is_better: bool) -> np.ndarray:
    key = -scores if higher_is_better else scores
    # Stable sort keeps equal scores in catalog order.
    return np.argsort(key, kind="stable")


def _prepare(window: TraceWindow, cfg: RankerConfig) -> np.ndarray:
    X = np.asarray(window.X, dtype=float)
    if np.isnan(X).any():
        raise ContractError("rankers need complete data; run clean_missing first")
    return minmax_columns(X) if cfg.rescale else X


def arr_scores(X: np.ndarray) -> np.ndarray:
    """Relevance (population variance) minus redundancy (mean |Pearson r|)."""
    t, n = X.shape
    var = X.var(axis=0)
    centered = X - X.mean(axis=0)
    norms = np.sqrt((centered * centered).sum(axis=0))
    flat = ~(norms > 0)
    z = centered / np.where(flat, 1.0, norms)
    z[:, flat] = 0.0
    corr = np.abs(z.T @ z)
    np.clip(corr, 0.0, 1.0, out=corr)
    corr = np.round(corr, _CORR_DECIMALS)
    np.fill_diagonal(corr, 0.0)
    if n == 1:
        return var.copy()
    redundancy = np.sort(corr, axis=1).sum(axis=1) / (n - 1)
    return var - redundancy


def rank_arr(window: TraceWindow, cfg: Optional[RankerConfig] = None) -> RankedList:
    cfg = cfg or RankerConfig(kind="arr")
    if window.t < 2:
        raise InsufficientDataError("ARR needs at least 2 samples")
    scores = arr_scores(_prepare(window, cfg))
    names = window.catalog.names
    order = _order(scores, higher_is_better=True)
    return RankedList(
        tuple(names[j] for j in order),
        {names[j]: float(scores[j]) for j in range(len(names))},
        window.t,
        "arr",
    )


def knn_heat_affinity(X: np.ndarray, n_neighbors: int, width: float) -> sparse.csr_matrix:
    """Symmetric kNN graph with heat-kernel weights ``exp(-d^2 / width)``.

    Samples ``i`` and ``j`` are joined when either is among the other's
    ``n_neighbors`` nearest neighbours. Weights are shifted by the smallest
    edge distance before exponentiation; the Laplacian Score is invariant to
    a global rescaling of the affinities, and the shift keeps wide,
    high-dimensional windows from underflowing to an all-zero graph.
    """
    t = X.shape[0]
    d2 = squareform(pdist(X, metric="sqeuclidean"))
    np.fill_diagonal(d2, np.inf)
    nbrs = np.argsort(d2, axis=1, kind="stable")[:, :n_neighbors]
    rows = np.repeat(np.arange(t), n_neighbors)
    cols = nbrs.ravel()
    adj = np.zeros((t, t), dtype=bool)
    adj[rows, cols] = True
    adj |= adj.T
    i, j = np.nonzero(adj)
    d = d2[i, j]
    w = np.exp(-(d - d.min()) / width)
    return sparse.csr_matrix((w, (i, j)), shape=(t, t))


def laplacian_scores(X: np.ndarray, n_neighbors: int = 5, width: float = 1.0) -> np.ndarray:
    """Laplacian Score per column; ``inf`` marks a degenerate (constant) column."""
    S = knn_heat_affinity(X, n_neighbors, width)
    deg = np.asarray(S.sum(axis=1)).ravel()
    # Column-wise reductions (no BLAS) keep duplicated columns bit-identical.
    weighted_mean = (X * deg[:, None]).sum(axis=0) / deg.sum()
    F = X - weighted_mean
    # f'Lf = f'Df - f'Sf; the sparse product is evaluated column by column.
    fDf = (F * F * deg[:, None]).sum(axis=0)
    fSf = (F * (S @ F)).sum(axis=0)
    flat = np.ptp(X, axis=0) == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = (fDf - fSf) / fDf
    bad = flat | ~(fDf > 0) | ~np.isfinite(scores)
    scores[bad] = DEGENERATE_LS_SCORE
    return scores


def _thin(X: np.ndarray, max_rows: int) -> np.ndarray:
    if X.shape[0] <= max_rows:
        return X
    idx = np.unique(np.linspace(0, X.shape[0] - 1, max_rows).round().astype(int))
    return X[idx]


def rank_ls(window: TraceWindow, cfg: Optional[RankerConfig] = None) -> RankedList:
    cfg = cfg or RankerConfig(kind="ls")
    if window.t < cfg.ls_neighbors + 1:
        raise InsufficientDataError(
            f"LS with {cfg.ls_neighbors} neighbours needs at least {cfg.ls_neighbors + 1} samples"
        )
    X = _thin(_prepare(window, cfg), cfg.ls_max_samples)
    scores = laplacian_scores(X, cfg.ls_neighbors, cfg.ls_kernel_width)
    names = window.catalog.names
    order = _order(scores, higher_is_better=False)
    return RankedList(
        tuple(names[j] for j in order),
        {names[j]: float(scores[j]) for j in range(len(names))},
        window.t,
        "ls",
    )


def rank(window: TraceWindow, cfg: RankerConfig) -> RankedList:
    if cfg.kind == "arr":
        return rank_arr(window, cfg)
    return rank_ls(window, cfg)


def min_samples(cfg: RankerConfig) -> int:
    return 2 if cfg.kind == "arr" else cfg.ls_neighbors + 1


def top_k(ranked: RankedList, k: int) -> SelectedFeatureSet:
    if not 1 <= k <= ranked.n:
        raise RangeError(f"k={k} outside [1, {ranked.n}]")
    return SelectedFeatureSet(frozenset(ranked.order[:k]), ranked.t)
