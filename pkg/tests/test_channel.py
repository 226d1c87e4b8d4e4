import numpy as np
import pytest
from hypothesis import given, strategies as st

from fransim.channel import path_loss_db, rate_bps, sample_gain
from fransim.config import SimConfig

CFG = SimConfig()


def test_path_loss_reference_points():
    assert path_loss_db(1000.0) == pytest.approx(128.1, abs=1e-12)
    assert path_loss_db(100.0) == pytest.approx(90.5, abs=1e-12)
    assert path_loss_db(2000.0) == pytest.approx(128.1 + 37.6 * np.log10(2.0), abs=1e-12)


def test_path_loss_rejects_nonpositive():
    with pytest.raises(ValueError):
        path_loss_db(0.0)
    with pytest.raises(ValueError):
        path_loss_db(-5.0)


def test_gain_deterministic_subcase():
    # shadowing and fading forced to their central values
    class FixedRng:
        def normal(self, loc, scale, size=None):
            return np.zeros(size) if size else 0.0

        def exponential(self, scale, size=None):
            return np.ones(size) if size else 1.0

    g = sample_gain(1000.0, FixedRng())
    assert g == pytest.approx(10 ** (-12.81), rel=1e-12)


def test_fading_mean_is_one():
    rng = np.random.default_rng(0)
    e = rng.exponential(1.0, 10**6)
    assert abs(e.mean() - 1.0) < 0.005


def test_shadowing_std_is_4db():
    rng = np.random.default_rng(1)
    x = rng.normal(0.0, 4.0, 10**6)
    assert abs(x.std() - 4.0) < 0.02


def test_log_gain_mean_matches_analytic_constant():
    # E[10 log10 E] for unit exponential is -10*euler_gamma/ln(10) = -2.5068 dB
    rng = np.random.default_rng(2)
    d = 700.0
    g = sample_gain(d, rng, (10**5,))
    mean_db = np.mean(10.0 * np.log10(g))
    expected = -path_loss_db(d) - 10.0 * np.euler_gamma / np.log(10.0)
    assert abs(mean_db - expected) < 0.1


def test_rate_reference_points():
    noise = CFG.noise_power_watts()
    assert rate_bps(noise, 1.0, CFG) == pytest.approx(1.8e5)
    assert rate_bps(3.0 * noise, 1.0, CFG) == pytest.approx(3.6e5)
    assert rate_bps(1e-9, 0.0, CFG) == 0.0


@given(st.floats(1e-16, 1e-6), st.floats(0.0, 10.0), st.floats(0.0, 10.0))
def test_rate_monotone_in_power(gain, p_low, p_high):
    lo, hi = sorted((p_low, p_high))
    assert rate_bps(gain, lo, CFG) <= rate_bps(gain, hi, CFG)


@given(st.floats(1e-16, 1e-6), st.floats(1e-16, 1e-6), st.floats(1e-4, 1.0))
def test_rate_monotone_in_gain(g_a, g_b, power):
    lo, hi = sorted((g_a, g_b))
    assert rate_bps(lo, power, CFG) <= rate_bps(hi, power, CFG)


def test_channel_tensor_shapes_and_positivity():
    from fransim.channel import sample_channel
    from fransim.topology import generate_topology

    cfg = SimConfig(num_users=7, num_rrb=4, num_errh=2, num_sh=3,
                    num_segments=20, cache_cap_errh=5, cache_cap_sh=3)
    topo = generate_topology(cfg, np.random.default_rng(0))
    ch = sample_channel(topo, cfg, np.random.default_rng(1), with_errh_sh=True)
    assert ch.gain_errh.shape == (7, 4, 2)
    assert ch.gain_sh.shape == (7, 4, 3)
    assert ch.gain_errh_sh.shape == (3, 4, 2)
    for t in (ch.gain_errh, ch.gain_sh, ch.gain_errh_sh):
        assert np.all(t > 0) and np.all(np.isfinite(t))
