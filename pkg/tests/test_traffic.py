import numpy as np
import pytest

from fransim.traffic import UNPOPULAR, build_catalog, draw_requests


def test_uniform_at_gamma_zero():
    cat = build_catalog(3, 0.0)
    np.testing.assert_allclose(cat.z, [1 / 3] * 3, atol=1e-15)


def test_f4_gamma1_exact_values():
    cat = build_catalog(4, 1.0)
    np.testing.assert_allclose(cat.z, [0.48, 0.24, 0.16, 0.12], atol=1e-12)


def test_f2_gamma2():
    cat = build_catalog(2, 2.0)
    np.testing.assert_allclose(cat.z, [0.8, 0.2], atol=1e-12)


@pytest.mark.parametrize("F", [1, 10, 10_000])
@pytest.mark.parametrize("gamma", [0.0, 0.5, 1.0, 2.0])
def test_catalog_sums_to_one(F, gamma):
    cat = build_catalog(F, gamma)
    assert abs(cat.z.sum() - 1.0) < 1e-12
    assert np.all(cat.z > 0)
    assert np.all(np.diff(cat.z) <= 0)


def test_all_unpopular_when_prob_zero():
    cat = build_catalog(5, 1.0)
    batch = draw_requests(cat, 50, 0.0, np.random.default_rng(0))
    assert not batch.is_popular.any()
    assert np.all(batch.segment == UNPOPULAR)


def test_single_segment_always_chosen():
    cat = build_catalog(1, 1.0)
    batch = draw_requests(cat, 50, 1.0, np.random.default_rng(0))
    assert batch.is_popular.all()
    assert np.all(batch.segment == 0)


def test_popular_fraction_matches_probability():
    cat = build_catalog(10, 1.0)
    rng = np.random.default_rng(7)
    n = 10**6
    batch = draw_requests(cat, n, 0.3, rng)
    assert abs(batch.is_popular.mean() - 0.3) < 0.002


def test_segment_frequencies_match_catalog():
    for F in (10, 100):
        cat = build_catalog(F, 0.8)
        rng = np.random.default_rng(F)
        batch = draw_requests(cat, 10**6, 1.0, rng)
        freq = np.bincount(batch.segment, minlength=F) / batch.segment.size
        assert np.max(np.abs(freq - cat.z)) < 0.005


def test_segment_defined_iff_popular():
    cat = build_catalog(20, 1.0)
    batch = draw_requests(cat, 500, 0.5, np.random.default_rng(3))
    assert np.all((batch.segment >= 0) == batch.is_popular)
    assert np.all(batch.segment[batch.is_popular] < 20)


def test_catalog_rejects_bad_args():
    with pytest.raises(ValueError):
        build_catalog(0, 1.0)
    with pytest.raises(ValueError):
        build_catalog(5, -0.1)
