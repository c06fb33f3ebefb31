"""Feature-set stability metrics and the two stopping conditions.

Similarity condition: the top-k set at ``t`` is stable when its overlap with
the set at the next (doubled) checkpoint exceeds ``eta`` and that overlap is
a strict local maximum of the similarity sequence.

Frequency condition: the last ``r`` selections of size ``k`` are stacked into
a binary matrix; the stability value is one minus the mean unbiased
per-feature selection variance, normalized by the variance of a random
size-k selection. The set is stable once ``w`` consecutive values exceed
``eta``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .core import FeatureCatalog, SelectedFeatureSet
from .errors import (
    CatalogError,
    ContractError,
    InsufficientDataError,
    UndefinedNormalizationError,
)

SIMILARITY_ETA = 0.5
FREQUENCY_ETA = 0.9
HISTORY_R = 10
STREAK_W = 10


def set_similarity(a: SelectedFeatureSet, b: SelectedFeatureSet) -> float:
    """Fraction of shared members, ``|a & b| / k``."""
    if a.k != b.k:
        raise ContractError(f"similarity needs equal set sizes, got {a.k} and {b.k}")
    if a.k == 0:
        raise ContractError("similarity of empty sets is undefined")
    return len(a.members & b.members) / a.k


def similarity_stable(sim_t: float, sim_2t: float, eta: float = SIMILARITY_ETA) -> bool:
    """True iff ``sim_t`` is above ``eta`` and strictly above the next similarity."""
    return sim_t > eta and sim_t > sim_2t


@dataclass
class SimilarityState:
    """Rolling state of the similarity condition along one doubling chain."""

    eta: float = SIMILARITY_ETA
    sim_prev: Optional[float] = None
    sets: tuple = ()

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise ContractError("eta must lie in (0, 1)")

    def push(self, fset: SelectedFeatureSet) -> Optional[float]:
        """Add the next set; returns its similarity to the previous one."""
        sim = set_similarity(self.sets[-1], fset) if self.sets else None
        self.sets = (self.sets + (fset,))[-2:]
        return sim


def representation_vector(fset: SelectedFeatureSet, catalog: FeatureCatalog) -> np.ndarray:
    """Indicator vector of length ``n`` with ones at the members' indices."""
    vec = np.zeros(catalog.n, dtype=np.int8)
    for name in fset.members:
        if name not in catalog:
            raise CatalogError(f"feature {name!r} is not in the catalog")
        vec[catalog.index(name)] = 1
    return vec


def members_of(vec: np.ndarray, catalog: FeatureCatalog) -> frozenset:
    return frozenset(catalog.names[j] for j in np.flatnonzero(vec))


class SelectionHistory:
    """Ring buffer of the ``r`` most recent representation vectors."""

    def __init__(self, n: int, r: int = HISTORY_R):
        if r < 2:
            raise ContractError("history length r must be at least 2")
        self.n = n
        self.r = r
        self.rows = deque(maxlen=r)

    def push(self, row) -> None:
        row = np.asarray(row, dtype=np.int8).ravel()
        if row.shape[0] != self.n:
            raise ContractError(f"row length {row.shape[0]} != n={self.n}")
        if self.rows and int(row.sum()) != int(self.rows[0].sum()):
            raise ContractError("every row in a history must select the same k")
        self.rows.append(row)

    @property
    def full(self) -> bool:
        return len(self.rows) == self.r

    def matrix(self) -> np.ndarray:
        return np.array(self.rows, dtype=float).reshape(len(self.rows), self.n)

    def __len__(self):
        return len(self.rows)


def stability_of_matrix(Z: np.ndarray) -> float:
    """Stability of an ``r x n`` binary selection matrix with constant row sums."""
    Z = np.asarray(Z, dtype=float)
    r, n = Z.shape
    if r < 2:
        raise InsufficientDataError("stability needs at least two selections")
    k = Z[0].sum()
    if not 0 < k < n:
        raise UndefinedNormalizationError(f"stability undefined for k={k:g}, n={n}")
    p = Z.mean(axis=0)
    s2 = r / (r - 1) * p * (1 - p)
    kn = k / n
    return float(1.0 - s2.mean() / (kn * (1 - kn)))


def frequency_stability(hist: SelectionHistory) -> float:
    if not hist.full:
        raise InsufficientDataError(f"history holds {len(hist)} of {hist.r} rows")
    return stability_of_matrix(hist.matrix())


@dataclass(frozen=True)
class StabilityState:
    eta: float = FREQUENCY_ETA
    w: int = STREAK_W
    streak: int = 0
    last_values: tuple = field(default=())

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise ContractError("eta must lie in (0, 1)")
        if self.w < 1:
            raise ContractError("w must be at least 1")


def frequency_stable(state: StabilityState, stab_t: float):
    """Advance the consecutive-success counter; returns ``(state, stable)``."""
    streak = min(state.streak + 1, state.w) if stab_t > state.eta else 0
    new = replace(state, streak=streak, last_values=(state.last_values + (stab_t,))[-state.w:])
    return new, streak >= state.w
