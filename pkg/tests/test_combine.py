import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from combinedp import (
    Alternative,
    CombinedMethod,
    PValueFunction,
    TrialResult,
    centrality,
    combine_pvalues,
    combined_p,
    p_2tr,
    p_edgington,
    p_fisher,
    p_ma,
    p_one_sided,
    p_pearson,
    p_tippett,
)
from combinedp.combine import combined_p_arrays
from combinedp.statdist import DomainError, irwin_hall_cdf

from conftest import ORBIT_PRIMARY, ORBIT_SECONDARY, RESPIRE_14, RESPIRE_ALL

LESS, GREATER = Alternative.LESS, Alternative.GREATER
METHODS = list(CombinedMethod)


def test_individual_p_values():
    assert p_one_sided(RESPIRE_14[0], 0, LESS) == pytest.approx(0.00351, abs=5e-6)
    assert p_one_sided(RESPIRE_14[1], 0, LESS) == pytest.approx(0.14400, abs=5e-5)
    assert p_one_sided(TrialResult(0.3, 2.0), 0.3, GREATER) == 0.5


def test_one_sided_definition():
    t = TrialResult(0.4, 0.2)
    for mu in np.linspace(-1, 2, 31):
        assert p_one_sided(t, mu, GREATER) == pytest.approx(stats.norm.sf((0.4 - mu) / 0.2), rel=1e-14)
        assert p_one_sided(t, mu, LESS) == pytest.approx(stats.norm.cdf((0.4 - mu) / 0.2), rel=1e-14)


@pytest.mark.parametrize("fn, expected", [
    (p_2tr, 0.02073), (p_ma, 0.00432), (p_tippett, 0.00701),
    (p_fisher, 0.00434), (p_pearson, 0.01138), (p_edgington, 0.01088),
])
def test_respire_14_day(fn, expected):
    # the published table was computed from slightly less rounded inputs
    assert fn(RESPIRE_14, 0, LESS) == pytest.approx(expected, abs=5e-5)


def test_orbit_examples():
    assert p_ma(ORBIT_PRIMARY, 0, LESS) == pytest.approx(0.05305, rel=0.1)
    assert p_fisher(ORBIT_SECONDARY, 0, LESS) == pytest.approx(0.00048, rel=0.2)


def test_trivial_p_value_combinations():
    assert combine_pvalues("two_trials_rule", [0.5, 0.5]) == 0.25
    assert combine_pvalues("tippett", [0.5, 0.5]) == 0.75
    assert combine_pvalues("edgington", [0.5, 0.5]) == 0.5
    assert combine_pvalues("fisher", [1, 1]) == pytest.approx(1.0, abs=1e-15)
    assert combine_pvalues("pearson", [0, 0]) == 0.0
    assert combine_pvalues("fisher", [0, 0.3]) == 0.0
    assert combine_pvalues("pearson", [1, 0.3]) == 1.0


@pytest.mark.parametrize("scipy_name, method", [
    ("fisher", "fisher"), ("pearson", "pearson"), ("tippett", "tippett"), ("stouffer", "meta_analysis"),
])
def test_combine_pvalues_against_scipy(scipy_name, method):
    rng = np.random.default_rng(7)
    for _ in range(50):
        p = rng.uniform(0.001, 0.999, size=rng.integers(2, 6))
        ref = stats.combine_pvalues(p, method=scipy_name).pvalue
        assert combine_pvalues(method, p) == pytest.approx(ref, rel=1e-10)


def test_edgington_against_monte_carlo():
    rng = np.random.default_rng(11)
    sums = rng.uniform(size=(400_000, 3)).sum(axis=1)
    for s in (0.4, 1.1, 1.5, 2.2):
        assert combine_pvalues("edgington", [s / 3] * 3) == pytest.approx(np.mean(sums <= s), abs=3e-3)


def test_two_trial_forms():
    # k = 2 through the general code equals the two-trial textbook forms
    rng = np.random.default_rng(3)
    for _ in range(300):
        est = rng.uniform(-2, 2, 2)
        se = rng.uniform(0.2, 1, 2)  # keeps every p_i above underflow
        trials = [TrialResult(e, s) for e, s in zip(est, se)]
        mu = rng.uniform(-2, 2)
        alt = GREATER if rng.uniform() < 0.5 else LESS
        p = np.array([p_one_sided(t, mu, alt) for t in trials])
        assert p_2tr(trials, mu, alt) == pytest.approx(p.max() ** 2, rel=1e-14, abs=1e-300)
        assert p_tippett(trials, mu, alt) == pytest.approx(1 - (1 - p.min()) ** 2, rel=1e-12, abs=1e-15)
        e = p.sum()
        quad = e * e / 2 if e <= 1 else 1 - (2 - e) ** 2 / 2
        assert p_edgington(trials, mu, alt) == pytest.approx(quad, abs=1e-14)
        assert p_edgington(trials, mu, alt) == pytest.approx(irwin_hall_cdf(e, 2), abs=1e-14)
        f = -2 * np.log(p).sum()
        assert p_fisher(trials, mu, alt) == pytest.approx(math.exp(-f / 2) * (1 + f / 2), rel=1e-12)
        with np.errstate(divide="ignore"):
            kk = -2 * np.log1p(-p).sum()
        assert p_pearson(trials, mu, alt) == pytest.approx(stats.chi2.cdf(kk, 4), abs=1e-14)


def test_meta_analysis_is_pooled_wald():
    w = np.array([1 / t.std_err ** 2 for t in RESPIRE_ALL])
    est = np.array([t.estimate for t in RESPIRE_ALL])
    theta = (w * est).sum() / w.sum()
    se = 1 / math.sqrt(w.sum())
    for mu in (-0.5, -0.3, 0.0):
        assert p_ma(RESPIRE_ALL, mu, LESS) == pytest.approx(stats.norm.cdf((theta - mu) / se), rel=1e-12)


def test_equal_trials_meta_analysis():
    t = TrialResult(0.2, 0.3)
    assert p_ma([t, t], 0, GREATER) == pytest.approx(p_one_sided(TrialResult(0.2, 0.3 / math.sqrt(2)), 0, GREATER),
                                                     rel=1e-13)


def test_two_trials_rule_four_trials():
    p = np.array([p_one_sided(t, 0, LESS) for t in RESPIRE_ALL])
    assert p_2tr(RESPIRE_ALL, 0, LESS) == pytest.approx(p.max() ** 4, rel=1e-14)


@settings(max_examples=300, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.05, 1), st.floats(0.05, 1), st.floats(-4, 4))
def test_duality(e1, e2, s1, s2, mu):
    trials = [TrialResult(e1, s1), TrialResult(e2, s2)]
    assert p_tippett(trials, mu, GREATER) == pytest.approx(1 - p_2tr(trials, mu, LESS), abs=1e-12)
    assert p_pearson(trials, mu, GREATER) == pytest.approx(1 - p_fisher(trials, mu, LESS), abs=1e-12)


@pytest.mark.parametrize("method", METHODS)
@pytest.mark.parametrize("trials", [RESPIRE_14, RESPIRE_ALL, ORBIT_SECONDARY])
def test_monotone_in_mu(method, trials):
    mu = np.linspace(-3, 3, 20001)
    for alt in (GREATER, LESS):
        p = np.asarray(PValueFunction(method, trials, alt)(mu))
        assert np.all((p >= 0) & (p <= 1))
        d = np.diff(p)
        assert np.all(d >= 0) if alt is GREATER else np.all(d <= 0)


def test_fisher_far_tail_does_not_underflow_to_garbage():
    trials = [TrialResult(0.0, 0.01), TrialResult(0.0, 0.01)]
    p = p_fisher(trials, -0.5, GREATER)  # z = 50 per trial
    assert 0 <= p < 1e-300 or p == 0.0
    assert p_fisher(trials, 0.5, GREATER) == 1.0
    assert p_pearson(trials, -0.5, GREATER) == 0.0


def test_non_finite_mu_rejected():
    for bad in (math.nan, math.inf):
        with pytest.raises(DomainError):
            combined_p("fisher", RESPIRE_14, bad, LESS)


def test_centrality():
    assert centrality(0.5) == 1.0
    assert centrality(0.025) == pytest.approx(0.05)
    assert centrality(0.975) == pytest.approx(0.05)


def test_vectorized_matches_scalar():
    est = np.array([[t.estimate] for t in RESPIRE_ALL])
    se = np.array([t.std_err for t in RESPIRE_ALL])
    mu = np.linspace(-1, 0.5, 17)
    for method in METHODS:
        arr = combined_p_arrays(method, est, se, mu[None, :], LESS)
        for j, m in enumerate(mu):
            assert arr[j] == pytest.approx(combined_p(method, RESPIRE_ALL, m, LESS), rel=1e-14, abs=1e-300)
