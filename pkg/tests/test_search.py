import numpy as np
import pytest

from osfs import (
    GridPoint,
    OsfsConfig,
    RankerConfig,
    SearchSpace,
    TraceWindow,
    grid_walk,
    next_grid_point,
    osfs_arr_sim_ksmall,
    osfs_run,
)
from osfs.core import FeatureCatalog
from osfs.errors import ContractError, StreamExhaustedError
from osfs.ranking import RankedList
from osfs.search import ranking_trace
from streams import (
    constant_ranking_stream,
    disjoint_ranking_stream,
    local_max_stream,
)

ARR = RankerConfig(kind="arr")
SPACE = SearchSpace()


def scripted(orders_by_t):
    """Ranker that ignores the data and returns a fixed order per prefix length."""
    ts = sorted(orders_by_t)

    def ranker(window):
        t = max(x for x in ts if x <= window.t)
        order = tuple(orders_by_t[t])
        return RankedList(order, {name: -i for i, name in enumerate(order)}, window.t, "scripted")

    return ranker


def names(ids):
    return [f"a{i:02d}" for i in ids]


def order_from(top4, top16, n=24):
    rest16 = sorted(set(top16) - set(top4))
    tail = sorted(set(range(n)) - set(top16))
    return names(sorted(top4) + rest16 + tail)


# top-4 sets settle late; top-16 sets peak early.
POLICY_SPLIT = {
    8: order_from(range(0, 4), range(0, 16)),
    16: order_from(range(4, 8), list(range(0, 12)) + [16, 17, 18, 19]),
    32: order_from(range(8, 12), list(range(4, 16)) + [20, 21, 22, 23]),
    64: order_from(range(8, 12), list(range(4, 16)) + [20, 21, 22, 23]),
    128: order_from([8, 9, 10, 12], list(range(4, 16)) + [20, 21, 22, 23]),
}


def top_k_of(order, k):
    from osfs import SelectedFeatureSet

    return SelectedFeatureSet(frozenset(order[:k]), 1024)


def blank_stream(t=1024, n=24):
    return TraceWindow(FeatureCatalog(tuple(names(range(n)))), np.zeros((t, n)))


# ---------------------------------------------------------------- grid policies


def test_policy_examples():
    assert next_grid_point("k_small", GridPoint(4, 1024), SPACE) == GridPoint(16, 8)
    assert next_grid_point("t_small", GridPoint(256, 8), SPACE) == GridPoint(4, 16)
    assert next_grid_point("k_small", GridPoint(256, 1024), SPACE) is None
    assert next_grid_point("t_small", GridPoint(256, 1024), SPACE) is None


@pytest.mark.parametrize("policy", ["k_small", "t_small"])
def test_walk_visits_every_cell_once(policy):
    cells = list(grid_walk(policy, SPACE))
    assert len(cells) == len(set(cells)) == 32
    assert cells[0] == GridPoint(4, 8) and cells[-1] == GridPoint(256, 1024)


def test_k_small_is_row_major_and_t_small_column_major():
    ks = [p.k for p in grid_walk("k_small", SPACE)]
    ts = [p.t for p in grid_walk("t_small", SPACE)]
    assert ks == sorted(ks) and ts == sorted(ts)


def test_config_aliases_and_validation():
    cfg = OsfsConfig(ARR, "stability", "t-small")
    assert (cfg.condition, cfg.policy, cfg.eta) == ("frequency", "t_small", 0.9)
    assert cfg.space.t_checkpoints[0] == 100
    with pytest.raises(ContractError):
        OsfsConfig(policy="diagonal")
    with pytest.raises(ContractError):
        OsfsConfig(RankerConfig(kind="ls", ls_neighbors=9), space=SearchSpace((4,), (8, 16)))


# ---------------------------------------------------------------- fixed instantiation


def test_constant_rankings_accept_at_horizon():
    res = osfs_arr_sim_ksmall(constant_ranking_stream())
    assert (res.k, res.t_k, res.exhausted) == (4, 512, False)
    assert res.feature_set.members == {"f0", "f1", "f2", "f3"}


def test_disjoint_rankings_fall_back():
    stream = disjoint_ranking_stream()
    sims = ranking_trace(stream, OsfsConfig(ARR))
    assert all(s == 0.0 for rows in sims.values() for _, s in rows)
    res = osfs_arr_sim_ksmall(stream)
    assert (res.k, res.t_k, res.exhausted) == (256, 1024, True)
    assert res.feature_set.members == {f"f{j}" for j in range(256, 512)}


def test_engineered_local_max():
    stream = local_max_stream()
    sims = dict(ranking_trace(stream, OsfsConfig(ARR))[4])
    assert (sims[16], sims[32]) == (0.75, 0.5)
    res = osfs_arr_sim_ksmall(stream)
    assert (res.k, res.t_k) == (4, 8)
    assert res.feature_set.members == {"a", "b", "c", "d"}
    # Only 32 samples are needed to decide.
    assert res.samples_read == 32


def test_fixed_instantiation_reads_32_samples_minimum():
    with pytest.raises(StreamExhaustedError) as info:
        osfs_arr_sim_ksmall(constant_ranking_stream(t=20))
    assert info.value.samples_read == 20
    assert info.value.partial.t_k == 16


# ---------------------------------------------------------------- generic search


@pytest.mark.parametrize("make", [constant_ranking_stream, disjoint_ranking_stream,
                                  local_max_stream])
def test_generic_search_agrees_with_fixed_instantiation(make):
    stream = make()
    a = osfs_arr_sim_ksmall(stream)
    b = osfs_run(stream, OsfsConfig(ARR))
    assert (a.feature_set, a.k, a.t_k, a.exhausted) == (b.feature_set, b.k, b.t_k, b.exhausted)


def test_generic_search_agrees_on_random_streams(rng):
    for _ in range(6):
        n = int(rng.integers(6, 40))
        # Slowly varying loads with a few dominant features.
        X = np.cumsum(rng.normal(size=(1024, n)), axis=0) * rng.uniform(0.1, 2, size=n)
        w = TraceWindow.from_array(X)
        a = osfs_arr_sim_ksmall(w)
        b = osfs_run(w, OsfsConfig(ARR))
        assert (a.feature_set, a.k, a.t_k, a.exhausted) == (b.feature_set, b.k, b.t_k, b.exhausted)


def test_policies_disagree_when_they_should():
    stream = blank_stream()
    ranker = scripted(POLICY_SPLIT)
    ks = osfs_run(stream, OsfsConfig(policy="k_small"), ranker=ranker)
    ts = osfs_run(stream, OsfsConfig(policy="t_small"), ranker=ranker)
    assert (ks.k, ks.t_k) == (4, 32)
    assert (ts.k, ts.t_k) == (16, 8)
    assert ts.samples_read == 32 and ks.samples_read == 128


def test_never_stable_returns_last_cell():
    orders = {t: names(np.roll(np.arange(24), 6 * i)) for i, t in enumerate(SPACE.t_checkpoints)}
    cfg = OsfsConfig(space=SearchSpace((4, 16)), accept_at_horizon=False)
    res = osfs_run(blank_stream(), cfg, ranker=scripted(orders))
    assert res.exhausted and (res.k, res.t_k) == (16, 1024)
    assert res.feature_set == top_k_of(orders[1024], 16)


def test_stream_too_short_carries_partial():
    with pytest.raises(StreamExhaustedError) as info:
        osfs_run(blank_stream(t=100), OsfsConfig(), ranker=scripted(POLICY_SPLIT))
    partial = info.value.partial
    assert partial is not None and (partial.k, partial.t_k) == (4, 64)


def test_raw_iterator_equals_window():
    stream = local_max_stream()
    rows = (row for row in stream.X)
    res = osfs_run(rows, OsfsConfig(ARR), catalog=stream.catalog)
    assert res == osfs_run(stream, OsfsConfig(ARR))


def test_rankings_bounded_by_grid():
    w = constant_ranking_stream(n=300)
    res = osfs_run(w, OsfsConfig(ARR, policy="t_small"))
    assert res.n_rankings <= len(SPACE.t_checkpoints)


def test_search_is_deterministic(rng):
    X = rng.normal(size=(1024, 30))
    w = TraceWindow.from_array(X)
    cfg = OsfsConfig(RankerConfig(kind="ls"))
    assert osfs_run(w, cfg) == osfs_run(w, cfg)


def test_batch_replay_of_reported_prefix():
    # The reported set is the top-k of a fresh ranking of the first t_k samples.
    from osfs import rank, top_k

    w = local_max_stream()
    res = osfs_run(w, OsfsConfig(ARR))
    assert top_k(rank(w.prefix(res.t_k), ARR), res.k) == res.feature_set


# ---------------------------------------------------------------- frequency condition


def test_frequency_condition_hand_trace():
    # Constant rankings: every stability value is 1. The k=4 history fills at
    # t=190 (ten sets from t=100), and ten consecutive values end at t=280.
    res = osfs_run(constant_ranking_stream(n=16), OsfsConfig(ARR, condition="stability"))
    assert (res.k, res.t_k, res.exhausted) == (4, 280, False)


def test_frequency_condition_t_small_walks_all_k_first():
    res = osfs_run(constant_ranking_stream(n=16),
                   OsfsConfig(ARR, condition="stability", policy="t_small"))
    # Column-major: k=4 and k=16 both gain one set per checkpoint; k=4 wins ties.
    assert (res.k, res.t_k) == (4, 280)


CHURN = {t: names(np.roll(np.arange(24), t // 10 * 4)) for t in range(100, 1001, 10)}


def test_frequency_condition_exhausts_on_churn():
    cfg = OsfsConfig(condition="frequency", space=SearchSpace((4,), range(100, 1001, 10)))
    res = osfs_run(blank_stream(), cfg, ranker=scripted(CHURN))
    assert res.exhausted and (res.k, res.t_k) == (4, 1000)


def test_frequency_condition_full_catalog_is_trivially_stable():
    # With the default grid clipped to n=24 the last k selects everything.
    res = osfs_run(blank_stream(), OsfsConfig(condition="frequency"), ranker=scripted(CHURN))
    assert (res.k, res.t_k, res.exhausted) == (24, 280, False)
