import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fransim.cache import CacheState, select_within_cap, sh_eligible
from fransim.config import SimConfig


def cfg_small():
    return SimConfig(num_errh=2, num_sh=2, num_users=5, num_rrb=3,
                     num_segments=6, cache_cap_errh=3, cache_cap_sh=2)


def test_empty_cache_misses():
    cache = CacheState.empty(cfg_small())
    assert not cache.is_hit("errh", 0, 0)
    assert not cache.is_hit("sh", 1, 5)


def test_hit_after_set():
    cache = CacheState.empty(cfg_small())
    cache.errh[0, 3] = True
    assert cache.is_hit("errh", 0, 3)
    assert not cache.is_hit("errh", 1, 3)


def test_full_cache_boundary():
    cache = CacheState.empty(cfg_small())
    cache.errh[0, :3] = True
    assert cache.is_hit("errh", 0, 2)
    assert not cache.is_hit("errh", 0, 3)


def test_out_of_range_raises():
    cache = CacheState.empty(cfg_small())
    with pytest.raises(IndexError):
        cache.is_hit("errh", 0, 99)
    with pytest.raises(IndexError):
        cache.is_hit("sh", 7, 0)


def test_apply_all_zero():
    cache = CacheState.empty(cfg_small())
    cache.errh[0, :] = True
    cache.apply_decision("errh", 0, np.zeros(6, dtype=bool), 3, np.zeros(6))
    assert cache.errh[0].sum() == 0


def test_apply_within_cap_unchanged():
    decisions = np.array([1, 1, 0], dtype=bool)
    row = select_within_cap(decisions, 2, np.array([0.2, 0.3, 0.9]))
    assert row.tolist() == [True, True, False]


def test_apply_overflow_keeps_top_by_tiebreak():
    decisions = np.array([1, 1, 1], dtype=bool)
    row = select_within_cap(decisions, 2, np.array([0.9, 0.1, 0.5]))
    assert row.tolist() == [True, False, True]


def test_overflow_tie_prefers_lower_index():
    decisions = np.ones(4, dtype=bool)
    row = select_within_cap(decisions, 2, np.array([0.5, 0.5, 0.5, 0.5]))
    assert row.tolist() == [True, True, False, False]


@settings(max_examples=200)
@given(st.integers(1, 12), st.data())
def test_capacity_invariant_after_any_sequence(F, data):
    cap = data.draw(st.integers(1, F))
    cache = CacheState(errh=np.zeros((1, F), dtype=bool),
                       sh=np.zeros((0, F), dtype=bool))
    for _ in range(data.draw(st.integers(1, 5))):
        decisions = np.array(data.draw(
            st.lists(st.booleans(), min_size=F, max_size=F)))
        tie = np.array(data.draw(st.lists(
            st.floats(0, 1, allow_nan=False), min_size=F, max_size=F)))
        cache.apply_decision("errh", 0, decisions, cap, tie)
        assert cache.errh[0].sum() <= cap
        # kept entries are a subset of the decision vector
        assert not np.any(cache.errh[0] & ~decisions)


def test_sh_eligible_rules():
    cfg = cfg_small()
    cache = CacheState.empty(cfg)
    overheard = np.zeros((2, 6), dtype=bool)
    cache.sh[0, 1] = True
    overheard[0, 2] = True
    assert sh_eligible(1, 0, overheard, cache)       # cached, not overheard
    assert sh_eligible(2, 0, overheard, cache)       # overheard last slot
    assert not sh_eligible(3, 0, overheard, cache)   # neither
    assert not sh_eligible(2, 1, overheard, cache)   # other helper heard it


def test_overhearing_union_semantics():
    from fransim.cache import overheard_from_deliveries
    from fransim.topology import generate_topology

    cfg = cfg_small().replace(num_users=30, overhear_radius=400.0)
    topo = generate_topology(cfg, np.random.default_rng(2))
    u = 3
    heard = overheard_from_deliveries([(u, 1, 0)], topo, cfg)
    near = (topo.dist_user_sh[u] <= 400.0) | (topo.dist_sh_errh[:, 0] <= 400.0)
    assert np.array_equal(heard[:, 1], near)
    assert heard[:, [0, 2, 3, 4, 5]].sum() == 0
