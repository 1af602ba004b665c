import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from combinedp import statdist as sd
from combinedp.statdist import DomainError

mp.mp.dps = 40


def mp_norm_quantile(p, start):
    return float(mp.findroot(lambda z: mp.ncdf(z) - mp.mpf(p), mp.mpf(start)))


def mp_chisq_sf(x, df):
    return float(mp.gammainc(mp.mpf(df) / 2, mp.mpf(x) / 2, mp.inf, regularized=True))


def mp_irwin_hall(s, k):
    s = mp.mpf(s)
    total = mp.mpf(0)
    for j in range(int(mp.floor(s)) + 1):
        total += (-1) ** j * mp.binomial(k, j) * (s - j) ** k
    return float(total / mp.factorial(k))


# --------------------------------------------------------------------- normal

@pytest.mark.parametrize("z, expected", [(0.0, 0.5), (1.959964, 0.975), (0.5449, 0.7071)])
def test_norm_cdf_examples(z, expected):
    assert sd.norm_cdf(z) == pytest.approx(expected, abs=1e-4)


def test_norm_cdf_matches_reference():
    z = np.linspace(-38, 8, 20001)
    ref = stats.norm.cdf(z)
    assert np.max(np.abs(sd.norm_cdf(z) - ref)) <= 1e-15


def test_norm_cdf_rejects_non_finite():
    for bad in (math.nan, math.inf, -math.inf):
        with pytest.raises(DomainError):
            sd.norm_cdf(bad)


@pytest.mark.parametrize("p, expected", [
    (0.5, 0.0),
    (math.sqrt(0.975), 2.23896),
    (math.sqrt(0.025), -1.00224),
])
def test_norm_quantile_examples(p, expected):
    assert sd.norm_quantile(p) == pytest.approx(expected, abs=1e-4)


def test_norm_quantile_relative_accuracy():
    p = np.concatenate([np.logspace(-300, -1, 400), np.linspace(0.01, 0.99, 400),
                        1 - np.logspace(-16, -1, 100)])
    ours = sd.norm_quantile(p)
    ref = np.array([mp_norm_quantile(x, z) for x, z in zip(p, ours)])
    rel = np.abs(ours - ref) / np.maximum(np.abs(ref), 1e-300)
    assert np.max(rel[np.abs(ref) > 1e-3]) < 1e-15
    assert np.max(rel) < 1e-15


def test_norm_quantile_round_trip():
    # Phi(z) for z > 0 rounds away the tail, so go through the small side.
    z = np.linspace(-8, 8, 10001)
    back = np.where(z <= 0, sd.norm_quantile(sd.norm_cdf(-np.abs(z))),
                    -sd.norm_quantile(sd.norm_cdf(-np.abs(z))))
    assert np.max(np.abs(back - z)) < 1e-12


def test_paper_rounding_of_quantiles():
    assert round(sd.norm_quantile(math.sqrt(0.975)), 2) == 2.24
    assert round(sd.norm_quantile(math.sqrt(0.025)), 0) == -1.0
    assert sd.norm_quantile(math.sqrt(0.5)) == pytest.approx(0.5449, abs=5e-4)


def test_norm_quantile_strictly_increasing():
    p = np.linspace(1e-6, 1 - 1e-6, 10000)
    assert np.all(np.diff(sd.norm_quantile(p)) > 0)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, math.nan])
def test_norm_quantile_domain(p):
    with pytest.raises(DomainError):
        sd.norm_quantile(p)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=1e-300, max_value=1 - 1e-16))
def test_norm_quantile_inverts_cdf(p):
    z = sd.norm_quantile(p)
    back = sd.norm_cdf(z)
    assert back == pytest.approx(p, rel=1e-12, abs=1e-300)


# ---------------------------------------------------------------- chi-squared

@pytest.mark.parametrize("x, df, expected", [(0, 4, 0.0), (3.3567, 4, 0.5), (9.4877, 4, 0.95)])
def test_chisq_cdf_examples(x, df, expected):
    assert sd.chisq_cdf(x, df) == pytest.approx(expected, abs=1e-4)


@pytest.mark.parametrize("df", [1, 2, 3, 4, 6, 8, 11, 20, 50])
def test_chisq_against_mpmath(df):
    x = np.concatenate([np.linspace(0, 3 * df + 60, 600), [1e-8, 0.5, 1e3]])
    ref = np.array([mp_chisq_sf(v, df) for v in x])
    sf = sd.chisq_sf(x, df)
    cdf = sd.chisq_cdf(x, df)
    assert np.max(np.abs(cdf - (1 - ref))) <= 1e-13
    tail = ref > 1e-300
    assert np.max(np.abs(sf[tail] - ref[tail]) / ref[tail]) < 1e-13
    # scalar path agrees with the array path
    for v in x[::37]:
        assert sd.chisq_sf(float(v), df) == pytest.approx(mp_chisq_sf(v, df), rel=1e-13, abs=1e-300)


def test_chisq_two_df_is_exponential():
    x = np.linspace(0, 80, 4001)
    assert np.max(np.abs(sd.chisq_cdf(x, 2) + np.expm1(-x / 2))) <= 1e-13


def test_chisq_cdf_monotone():
    x = np.linspace(0, 60, 10000)
    for df in (2, 4, 8):
        assert np.all(np.diff(sd.chisq_cdf(x, df)) >= 0)


@pytest.mark.parametrize("p, df, expected", [(0.0, 4, 0.0), (0.5, 4, 3.3567), (0.95, 4, 9.4877)])
def test_chisq_quantile_examples(p, df, expected):
    assert sd.chisq_quantile(p, df) == pytest.approx(expected, abs=1e-4)


@pytest.mark.parametrize("df", [1, 2, 4, 6, 8, 20])
def test_chisq_quantile_inverts(df):
    for p in (1e-12, 1e-6, 0.001, 0.025, 0.3, 0.5, 0.9, 0.975, 0.999, 1 - 1e-9):
        x = sd.chisq_quantile(p, df)
        assert sd.chisq_cdf(x, df) == pytest.approx(p, abs=1e-10)
        assert x == pytest.approx(stats.chi2.ppf(p, df), rel=1e-9)


def test_fisher_shift_constant():
    shift = sd.norm_quantile(math.exp(-sd.chisq_quantile(0.5, 4) / 4))
    assert shift == pytest.approx(-0.171, abs=1e-3)


def test_chisq_domain():
    with pytest.raises(DomainError):
        sd.chisq_cdf(-1.0, 4)
    with pytest.raises(DomainError):
        sd.chisq_cdf(1.0, 0)
    with pytest.raises(DomainError):
        sd.chisq_cdf(1.0, 2.5)
    with pytest.raises(DomainError):
        sd.chisq_quantile(1.0, 4)


# ----------------------------------------------------------------- Irwin-Hall

@pytest.mark.parametrize("s, k, expected", [(1.0, 2, 0.5), (0.6, 2, 0.18), (1.5, 3, 0.5)])
def test_irwin_hall_examples(s, k, expected):
    assert sd.irwin_hall_cdf(s, k) == pytest.approx(expected, abs=1e-14)


def test_irwin_hall_k2_is_piecewise_quadratic():
    for e in np.linspace(0, 2, 2001):
        expected = e * e / 2 if e <= 1 else 1 - (2 - e) ** 2 / 2
        assert sd.irwin_hall_cdf(e, 2) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5, 7, 10, 15, 25])
def test_irwin_hall_against_mpmath(k):
    for s in np.linspace(0, k, 53):
        assert sd.irwin_hall_cdf(s, k) == pytest.approx(mp_irwin_hall(s, k), abs=1e-12)


def test_irwin_hall_symmetry_and_clamp():
    for k in range(1, 11):
        for s in np.linspace(-0.5, k + 0.5, 101):
            assert sd.irwin_hall_cdf(s, k) + sd.irwin_hall_cdf(k - s, k) == pytest.approx(1, abs=1e-13)
        assert sd.irwin_hall_cdf(-1.0, k) == 0.0
        assert sd.irwin_hall_cdf(k + 1.0, k) == 1.0


def test_irwin_hall_monotone():
    for k in (2, 4, 10):
        s = np.linspace(0, k, 10000)
        v = np.array([sd.irwin_hall_cdf(x, k) for x in s])
        assert np.all(np.diff(v) >= 0)


def test_irwin_hall_limits():
    with pytest.raises(DomainError):
        sd.irwin_hall_cdf(1.0, sd.IRWIN_HALL_MAX_K + 1)
    with pytest.raises(DomainError):
        sd.irwin_hall_cdf(math.nan, 2)
    with pytest.raises(DomainError):
        sd.irwin_hall_cdf(1.0, 0)


def test_check_probability():
    assert sd.check_probability(0.0) == 0.0
    assert sd.check_probability(1) == 1.0
    for bad in (-1e-9, 1.0000001, math.nan):
        with pytest.raises(DomainError):
            sd.check_probability(bad)
