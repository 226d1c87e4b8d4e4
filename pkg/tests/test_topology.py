import numpy as np
import pytest
from scipy import stats

from fransim.config import ConfigError, SimConfig
from fransim.topology import generate_topology


def small_cfg(**kw):
    base = dict(num_errh=2, num_sh=2, num_users=20, num_rrb=5, num_segments=20,
                cache_cap_errh=5, cache_cap_sh=3, learn_iters=10,
                tx_slots_per_frame=5)
    base.update(kw)
    return SimConfig(**base)


def test_single_node_fallback_assignment():
    cfg = small_cfg(num_errh=1, num_sh=0, num_users=1)
    topo = generate_topology(cfg, np.random.default_rng(3))
    # the lone user must be attached to the lone eRRH even if out of radius
    assert topo.member_errh[0, 0]


def test_min_errh_spacing_respected_across_seeds():
    cfg = small_cfg(num_errh=2, num_users=2, min_errh_spacing=300.0)
    for seed in range(100):
        topo = generate_topology(cfg, np.random.default_rng(seed))
        d = np.linalg.norm(topo.errh_pos[0] - topo.errh_pos[1])
        assert d >= 300.0


def test_sh_membership_is_distance_threshold():
    cfg = small_cfg(sh_service_radius=300.0)
    topo = generate_topology(cfg, np.random.default_rng(5))
    inside = topo.dist_user_sh <= 300.0
    assert np.array_equal(topo.member_sh, inside)
    # spot values on both sides of the threshold
    if inside.any():
        u, h = np.argwhere(inside)[0]
        assert topo.member_sh[u, h]
    if (~inside).any():
        u, h = np.argwhere(~inside)[0]
        assert not topo.member_sh[u, h]


def test_all_nodes_inside_cell():
    cfg = small_cfg(num_users=200)
    topo = generate_topology(cfg, np.random.default_rng(11))
    for pts in (topo.errh_pos, topo.sh_pos, topo.user_pos):
        assert np.all(np.linalg.norm(pts - topo.mbs_pos, axis=1) <= cfg.cell_radius)


def test_every_user_has_an_errh():
    for seed in range(20):
        topo = generate_topology(small_cfg(), np.random.default_rng(seed))
        assert topo.member_errh.any(axis=1).all()


def test_same_seed_bit_identical():
    cfg = small_cfg()
    a = generate_topology(cfg, np.random.default_rng(42))
    b = generate_topology(cfg, np.random.default_rng(42))
    assert np.array_equal(a.errh_pos, b.errh_pos)
    assert np.array_equal(a.sh_pos, b.sh_pos)
    assert np.array_equal(a.user_pos, b.user_pos)
    assert np.array_equal(a.member_errh, b.member_errh)


def test_infeasible_spacing_raises():
    cfg = small_cfg(num_errh=50, min_errh_spacing=1400.0, cell_radius=1500.0)
    with pytest.raises(ConfigError):
        generate_topology(cfg, np.random.default_rng(0))


def test_user_positions_uniform_over_disc():
    # pool users from many seeds; equal-probability radial annuli
    cfg = small_cfg(num_errh=1, num_sh=0, num_users=1000)
    radii = []
    for seed in range(1000):
        topo = generate_topology(cfg, np.random.default_rng(seed))
        radii.append(np.linalg.norm(topo.user_pos, axis=1))
    r = np.concatenate(radii) / cfg.cell_radius
    edges = np.sqrt(np.linspace(0.0, 1.0, 11))
    counts, _ = np.histogram(r, bins=edges)
    _, p = stats.chisquare(counts)
    assert p > 0.01
