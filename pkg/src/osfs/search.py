"""Online search for a small, stable feature set.

The search walks a grid of ``(k, t)`` points. At each point the first ``t``
samples are ranked and the top ``k`` features form ``F[k, t]``; the walk
stops at the first point whose set satisfies the stability condition, or
when the grid is exhausted. Samples are pulled from the stream lazily and
cached, so the stream is read once and never beyond the largest checkpoint
actually visited.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

from .core import (
    DEFAULT_K_VALUES,
    DEFAULT_T_CHECKPOINTS,
    FREQUENCY_T_CHECKPOINTS,
    FeatureCatalog,
    GridPoint,
    SampleCache,
    SearchSpace,
    SelectedFeatureSet,
)
from .errors import ContractError, StreamExhaustedError
from .ranking import RankedList, RankerConfig, min_samples, rank, top_k
from .stability import (
    FREQUENCY_ETA,
    HISTORY_R,
    SIMILARITY_ETA,
    STREAK_W,
    SelectionHistory,
    StabilityState,
    frequency_stability,
    frequency_stable,
    representation_vector,
    set_similarity,
    similarity_stable,
)

log = logging.getLogger(__name__)

K_SMALL = "k_small"
T_SMALL = "t_small"
SIMILARITY = "similarity"
FREQUENCY = "frequency"

_POLICY_ALIASES = {"k_small": K_SMALL, "k-small": K_SMALL, "t_small": T_SMALL, "t-small": T_SMALL}
_CONDITION_ALIASES = {"similarity": SIMILARITY, "sim": SIMILARITY,
                      "frequency": FREQUENCY, "stability": FREQUENCY}


def normalize_policy(policy: str) -> str:
    try:
        return _POLICY_ALIASES[policy.lower()]
    except KeyError:
        raise ContractError(f"unknown search policy {policy!r}") from None


def normalize_condition(condition: str) -> str:
    try:
        return _CONDITION_ALIASES[condition.lower()]
    except KeyError:
        raise ContractError(f"unknown stability condition {condition!r}") from None


@dataclass(frozen=True)
class OsfsConfig:
    ranker: RankerConfig = field(default_factory=RankerConfig)
    condition: str = SIMILARITY
    policy: str = K_SMALL
    # None picks the condition's default grid.
    space: Optional[SearchSpace] = None
    # None picks the condition's default threshold (0.5 similarity, 0.9 frequency).
    eta: Optional[float] = None
    r: int = HISTORY_R
    w: int = STREAK_W
    # Similarity only: accept a set whose overlap exceeds eta at the last
    # checkpoint even without a local maximum.
    accept_at_horizon: bool = True

    def __post_init__(self):
        object.__setattr__(self, "condition", normalize_condition(self.condition))
        object.__setattr__(self, "policy", normalize_policy(self.policy))
        if self.space is None:
            ts = FREQUENCY_T_CHECKPOINTS if self.condition == FREQUENCY else DEFAULT_T_CHECKPOINTS
            object.__setattr__(self, "space", SearchSpace(DEFAULT_K_VALUES, ts))
        if self.eta is None:
            eta = FREQUENCY_ETA if self.condition == FREQUENCY else SIMILARITY_ETA
            object.__setattr__(self, "eta", eta)
        if not 0 < self.eta < 1:
            raise ContractError("eta must lie in (0, 1)")
        if self.space.t_checkpoints[0] < min_samples(self.ranker):
            raise ContractError(
                f"first checkpoint t={self.space.t_checkpoints[0]} is too small for the "
                f"{self.ranker.kind} ranker"
            )

    def to_dict(self) -> dict:
        return {
            "ranker": self.ranker.kind,
            "condition": self.condition,
            "policy": self.policy,
            "k_values": list(self.space.k_values),
            "t_checkpoints": list(self.space.t_checkpoints),
            "eta": self.eta,
            "r": self.r,
            "w": self.w,
        }


@dataclass(frozen=True)
class OsfsResult:
    feature_set: SelectedFeatureSet
    k: int
    # Length of the prefix the reported set was computed from.
    t_k: int
    exhausted: bool = False
    # Samples consumed when the decision was taken (>= t_k).
    samples_read: int = 0
    n_rankings: int = 0

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "t_k": self.t_k,
            "exhausted": self.exhausted,
            "samples_read": self.samples_read,
            "features": sorted(self.feature_set.members),
        }


def next_grid_point(policy: str, current: GridPoint, space: SearchSpace) -> Optional[GridPoint]:
    """The point after ``current`` under ``policy``; ``None`` once the grid is exhausted.

    ``k_small`` sweeps every t for the smallest k before moving to the next k;
    ``t_small`` sweeps every k for the smallest t before moving to the next t.
    """
    policy = normalize_policy(policy)
    if current not in space:
        raise ContractError(f"{current} is not in the search space")
    ks, ts = space.k_values, space.t_checkpoints
    ik, it = ks.index(current.k), ts.index(current.t)
    if policy == K_SMALL:
        if it + 1 < len(ts):
            return GridPoint(current.k, ts[it + 1])
        if ik + 1 < len(ks):
            return GridPoint(ks[ik + 1], ts[0])
        return None
    if ik + 1 < len(ks):
        return GridPoint(ks[ik + 1], current.t)
    if it + 1 < len(ts):
        return GridPoint(ks[0], ts[it + 1])
    return None


def first_grid_point(space: SearchSpace) -> GridPoint:
    return GridPoint(space.k_values[0], space.t_checkpoints[0])


def grid_walk(policy: str, space: SearchSpace):
    point = first_grid_point(space)
    while point is not None:
        yield point
        point = next_grid_point(policy, point, space)


class _RankingCache:
    """Rankings per prefix length; a ranking serves every k at that t."""

    def __init__(self, cache: SampleCache, ranker: Callable):
        self.cache = cache
        self.ranker = ranker
        self.rankings: Dict[int, RankedList] = {}
        self.last: Optional[OsfsResult] = None

    def feature_set(self, k: int, t: int) -> SelectedFeatureSet:
        if t not in self.rankings:
            if not self.cache.ensure(t):
                raise StreamExhaustedError(
                    f"stream ended after {self.cache.t} samples; {t} needed",
                    partial=self.last,
                    samples_read=self.cache.t,
                )
            self.rankings[t] = self.ranker(self.cache.prefix(t))
        fset = top_k(self.rankings[t], k)
        if self.last is None or (k, t) >= (self.last.k, self.last.t_k):
            self.last = OsfsResult(fset, k, t, True, self.cache.t, len(self.rankings))
        return fset

    def result(self, fset: SelectedFeatureSet, k: int, t_k: int, exhausted=False) -> OsfsResult:
        return OsfsResult(fset, k, t_k, exhausted, self.cache.t, len(self.rankings))


def _ranker_fn(cfg: RankerConfig):
    return lambda window: rank(window, cfg)


def osfs_run(stream, cfg: Optional[OsfsConfig] = None, catalog: Optional[FeatureCatalog] = None,
             ranker: Optional[Callable] = None) -> OsfsResult:
    """Run the generic online search.

    ``stream`` is a :class:`TraceWindow` or an iterable of samples (then
    ``catalog`` is required). ``ranker`` overrides the ranking function
    built from ``cfg.ranker``; it receives a window and returns a
    :class:`RankedList`.
    """
    cfg = cfg or OsfsConfig()
    cache = SampleCache.over(stream, catalog)
    space = cfg.space.clipped(cache.catalog.n)
    sets = _RankingCache(cache, ranker or _ranker_fn(cfg.ranker))
    if cfg.condition == SIMILARITY:
        return _run_similarity(sets, cfg, space)
    return _run_frequency(sets, cfg, space, cache.catalog)


def _run_similarity(sets: _RankingCache, cfg: OsfsConfig, space: SearchSpace) -> OsfsResult:
    ts = space.t_checkpoints
    fset = None
    for point in grid_walk(cfg.policy, space):
        k, t = point.k, point.t
        fset = sets.feature_set(k, t)
        i = ts.index(t)
        if i < 2:
            continue
        older = sets.feature_set(k, ts[i - 2])
        middle = sets.feature_set(k, ts[i - 1])
        sim_12 = set_similarity(older, middle)
        sim_t = set_similarity(middle, fset)
        if similarity_stable(sim_12, sim_t, cfg.eta):
            log.debug("stable set at k=%d t=%d (sims %.3f > %.3f)", k, ts[i - 2], sim_12, sim_t)
            return sets.result(older, k, ts[i - 2])
        if cfg.accept_at_horizon and t == ts[-1] and sim_t > cfg.eta:
            return sets.result(middle, k, ts[i - 1])
    return sets.result(fset, fset.k, ts[-1], exhausted=True)


def _run_frequency(sets: _RankingCache, cfg: OsfsConfig, space: SearchSpace,
                   catalog: FeatureCatalog) -> OsfsResult:
    n = catalog.n
    histories = {k: SelectionHistory(n, cfg.r) for k in space.k_values}
    states = {k: StabilityState(cfg.eta, cfg.w) for k in space.k_values}
    fset = None
    for point in grid_walk(cfg.policy, space):
        k, t = point.k, point.t
        fset = sets.feature_set(k, t)
        hist = histories[k]
        hist.push(representation_vector(fset, catalog))
        if not hist.full:
            continue
        # Selecting the whole catalog never changes; the metric itself is undefined there.
        stab = 1.0 if k == n else frequency_stability(hist)
        states[k], stable = frequency_stable(states[k], stab)
        if stable:
            return sets.result(fset, k, t)
    return sets.result(fset, fset.k, space.t_max, exhausted=True)


ALG2_K_VALUES = (4, 16, 64, 256)
ALG2_CHECKPOINTS = (32, 64, 128, 256, 512, 1024)


def osfs_arr_sim_ksmall(stream, catalog: Optional[FeatureCatalog] = None,
                        ranker_cfg: Optional[RankerConfig] = None, eta: float = SIMILARITY_ETA,
                        ranker: Optional[Callable] = None) -> OsfsResult:
    """The fixed instantiation: ARR ranking, similarity condition, k-small policy.

    Follows the reference loop step by step: seed with the sets at t=8 and
    t=16, then at each doubling checkpoint up to 1024 either stop at a
    local similarity maximum above ``eta`` (reporting the set two
    checkpoints back, t/4), accept a set whose similarity is still above
    ``eta`` at t=1024 (reporting t/2), or shift the pair forward.
    """
    cache = SampleCache.over(stream, catalog)
    n = cache.catalog.n
    ranker_cfg = ranker_cfg or RankerConfig(kind="arr")
    sets = _RankingCache(cache, ranker or _ranker_fn(ranker_cfg))
    ks = sorted({min(k, n) for k in ALG2_K_VALUES})
    f_k2 = None
    for k in ks:
        f_k1 = sets.feature_set(k, 8)
        f_k2 = sets.feature_set(k, 16)
        sim_k12 = set_similarity(f_k1, f_k2)
        for t in ALG2_CHECKPOINTS:
            f_kt = sets.feature_set(k, t)
            sim_kt = set_similarity(f_k2, f_kt)
            if sim_kt < sim_k12 and sim_k12 > eta:
                return sets.result(f_k1, k, t // 4)
            elif sim_kt > eta and t == 1024:
                return sets.result(f_k2, k, t // 2)
            else:
                f_k1, f_k2, sim_k12 = f_k2, f_kt, sim_kt
    return sets.result(f_k2, ks[-1], 1024, exhausted=True)


def ranking_trace(stream, cfg: OsfsConfig, catalog: Optional[FeatureCatalog] = None):
    """Similarity of consecutive top-k sets over the checkpoint grid.

    Returns ``{k: [(t, sim(F[k, t_prev], F[k, t])), ...]}``; handy for
    plotting how the sets settle as samples accumulate.
    """
    cache = SampleCache.over(stream, catalog)
    space = cfg.space.clipped(cache.catalog.n)
    sets = _RankingCache(cache, _ranker_fn(cfg.ranker))
    out = {}
    for k in space.k_values:
        prev = None
        rows = []
        for t in space.t_checkpoints:
            if not cache.ensure(t):
                break
            cur = sets.feature_set(k, t)
            if prev is not None:
                rows.append((t, set_similarity(prev, cur)))
            prev = cur
        out[k] = rows
    return out

