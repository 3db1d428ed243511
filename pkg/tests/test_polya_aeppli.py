import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from fishnet.polya_aeppli import FitError, PolyaAeppli, fit_moments, fit_sample, sample_nc


def _pmf_mp(lam, theta, k):
    """Defining finite sum over the number of clusters, in high precision."""
    mp.mp.dps = 40
    lam, theta = mp.mpf(lam), mp.mpf(theta)
    if k == 0:
        return mp.exp(-lam)
    return sum(mp.exp(-lam) * lam ** s / mp.factorial(s) * mp.binomial(k - 1, s - 1)
               * theta ** s * (1 - theta) ** (k - s) for s in range(1, k + 1))


def test_pmf_zero():
    assert PolyaAeppli(1.0, 0.3).pmf(0) == pytest.approx(math.exp(-1))
    assert PolyaAeppli(1.0, 0.3).pmf(0) == pytest.approx(0.3679, abs=1e-4)


def test_poisson_limit():
    d = PolyaAeppli(3.5, 1.0)
    k = np.arange(40)
    np.testing.assert_allclose(d.pmf(k), stats.poisson.pmf(k, 3.5), rtol=1e-12, atol=1e-300)


def test_single_cluster_term():
    assert PolyaAeppli(2.0, 0.5).pmf(1) == pytest.approx(math.exp(-2) * 2 * 0.5, rel=1e-15)
    assert PolyaAeppli(2.0, 0.5).pmf(1) == pytest.approx(0.1353, abs=1e-4)


@pytest.mark.parametrize("lam,theta", [(2.0, 0.5), (10.0, 0.8), (0.3, 0.05), (40.0, 0.2)])
def test_recurrence_matches_high_precision_sum(lam, theta):
    d = PolyaAeppli(lam, theta)
    table = d.pmf_table(150)
    for k in (0, 1, 2, 5, 17, 60, 150):
        ref = _pmf_mp(lam, theta, k)
        if ref > 1e-250:
            assert table[k] == pytest.approx(float(ref), rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 50), st.floats(0.02, 1.0), st.integers(0, 200))
def test_recurrence_matches_direct_log_sum(lam, theta, k):
    d = PolyaAeppli(lam, theta)
    ref = d.pmf_direct(k)
    if ref > 1e-280:
        assert d.pmf(k) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("lam,theta", [(2.0, 0.5), (9.7, 0.83), (4.8, 1.0), (1.0, 0.1)])
def test_pmf_sums_to_one_and_moments(lam, theta):
    d = PolyaAeppli(lam, theta)
    K = d.support_limit(1 - 1e-16) + 50
    p = d.pmf_table(K)
    assert abs(p.sum() - 1) <= 1e-12
    k = np.arange(K + 1)
    mean, var = d.moments()
    m1 = float(np.sum(k * p))
    assert m1 == pytest.approx(lam / theta, rel=1e-9)
    assert float(np.sum((k - m1) ** 2 * p)) == pytest.approx(var, rel=1e-9)


def test_moments_example():
    assert PolyaAeppli(2.0, 0.5).moments() == (4.0, 12.0)
    m, v = PolyaAeppli(3.0, 1.0).moments()
    assert m == v == 3.0


def test_fit_round_trip_exact():
    d = fit_moments(4.0, 12.0)
    assert (d.lam, d.theta) == (2.0, 0.5)
    assert not d.clamped


@pytest.mark.parametrize("lam0", [0.5, 3.0, 17.25])
def test_fit_poisson_boundary(lam0):
    d = fit_moments(lam0, lam0)
    assert d.lam == pytest.approx(lam0) and d.theta == pytest.approx(1.0)


def test_fit_underdispersed_clamps_with_warning():
    with pytest.warns(RuntimeWarning):
        d = fit_moments(5.0, 3.0)
    assert d.clamped and d.theta == 1.0 and d.lam == 5.0


@pytest.mark.parametrize("mean,var", [(0.0, 1.0), (-1.0, 2.0)])
def test_fit_rejects_nonpositive_mean(mean, var):
    with pytest.raises(FitError):
        fit_moments(mean, var)


def test_fit_sample_needs_two():
    with pytest.raises(FitError):
        fit_sample([3])


@pytest.mark.parametrize("lam,theta", [(2.0, 0.5), (10.0, 0.8), (6.0, 0.3)])
def test_fit_recovers_parameters_from_draws(lam, theta):
    draws = sample_nc(PolyaAeppli(lam, theta), 10_000, seed=int(lam * 100 + theta * 10))
    d = fit_sample(draws)
    assert d.lam == pytest.approx(lam, rel=0.05)
    assert d.theta == pytest.approx(theta, rel=0.05)


def test_sampler_poisson_limit_matches_poisson_draws():
    d = PolyaAeppli(4.0, 1.0)
    draws = sample_nc(d, 200_000, seed=3)
    # with unit clusters the count is the cluster count itself
    k = np.arange(25)
    emp = np.bincount(draws, minlength=25)[:25] / len(draws)
    assert 0.5 * np.abs(emp - stats.poisson.pmf(k, 4.0)).sum() < 0.005


@pytest.mark.parametrize("lam,theta", [(2.0, 0.5), (9.7, 0.83)])
def test_sampler_total_variation(lam, theta):
    d = PolyaAeppli(lam, theta)
    draws = sample_nc(d, 1_000_000, seed=11)
    kmax = max(int(draws.max()), d.support_limit(1 - 1e-14))
    emp = np.bincount(draws, minlength=kmax + 1) / len(draws)
    tv = 0.5 * np.abs(emp - d.pmf_table(kmax)).sum()
    assert tv <= 0.005


def test_sampler_mean_within_three_standard_errors():
    d = PolyaAeppli(3.0, 0.4)
    draws = sample_nc(d, 100_000, seed=5)
    mean, var = d.moments()
    assert abs(draws.mean() - mean) <= 3 * math.sqrt(var / len(draws))


def test_sampler_deterministic():
    d = PolyaAeppli(3.0, 0.4)
    np.testing.assert_array_equal(sample_nc(d, 50, 9), d.sample(50, 9))


@pytest.mark.parametrize("lam,theta", [(0.0, 0.5), (1.0, 0.0), (1.0, 1.5)])
def test_invalid_parameters(lam, theta):
    with pytest.raises(ValueError):
        PolyaAeppli(lam, theta)


def test_support_limit_reaches_mass():
    d = PolyaAeppli(9.7, 0.83)
    K = d.support_limit(1 - 1e-10)
    cum = np.cumsum(d.pmf_table(K))
    assert cum[K] >= 1 - 1e-10 and cum[K - 1] < 1 - 1e-10
