"""Combined one-sided p-value functions.

Each trial contributes a one-sided p-value function

    greater:  p_i(mu) = 1 - Phi((est_i - mu) / se_i)
    less:     p_i(mu) = Phi((est_i - mu) / se_i)

and a combination rule maps the ``k`` individual p-values to one.  All six
rules are monotone in every p_i, so each combined function is monotone in
``mu`` (nondecreasing for "greater", nonincreasing for "less").

Internally everything is expressed through the signed z-value ``w_i`` with
``p_i = Phi(w_i)`` and ``1 - p_i = Phi(-w_i)``.  Logs of p-values are taken
with ``log Phi`` directly, which keeps Fisher's and Pearson's methods finite
far into the tails where the p-values themselves underflow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

from . import statdist
from .model import Alternative, CombinedMethod, TrialResult, as_alternative, as_method

__all__ = [
    "p_one_sided",
    "p_2tr",
    "p_ma",
    "p_tippett",
    "p_fisher",
    "p_pearson",
    "p_edgington",
    "combined_p",
    "combined_p_arrays",
    "combined_p_residual",
    "combine_pvalues",
    "centrality",
    "PValueFunction",
]


def _check_mu(mu):
    mu_arr = np.asarray(mu, dtype=float)
    if not np.all(np.isfinite(mu_arr)):
        raise statdist.DomainError(f"mu must be finite, got {mu!r}")
    return mu_arr


def signed_z(estimates, std_errs, mu, alternative):
    est = np.asarray(estimates, dtype=float)
    se = np.asarray(std_errs, dtype=float)
    if se.ndim < est.ndim:
        se = se.reshape(se.shape + (1,) * (est.ndim - se.ndim))
    z = (est - _check_mu(mu)) / se
    return -z if alternative is Alternative.GREATER else z


def _arrays(trials: Sequence[TrialResult]):
    if len(trials) < 2:
        raise ValueError("at least two trials are required")
    est = np.array([t.estimate for t in trials], dtype=float)
    se = np.array([t.std_err for t in trials], dtype=float)
    return est, se


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def _two_trials_rule(w, est, se, k):
    return special.ndtr(np.max(w, axis=0)) ** k


def _tippett(w, est, se, k):
    # 1 - (1 - min p)^k with 1 - min p = max Phi(-w).
    return -np.expm1(k * special.log_ndtr(np.max(-w, axis=0)))


def _meta_analysis(w, est, se, k):
    se = se.reshape(se.shape + (1,) * (w.ndim - se.ndim))
    w_ma = np.sum(w / se, axis=0) / np.sqrt(np.sum(1.0 / se ** 2, axis=0))
    return special.ndtr(w_ma)


def _fisher(w, est, se, k):
    stat = -2.0 * np.sum(special.log_ndtr(w), axis=0)
    return statdist.chisq_sf(stat, 2 * k)


def _pearson(w, est, se, k):
    stat = -2.0 * np.sum(special.log_ndtr(-w), axis=0)
    return statdist.chisq_cdf(stat, 2 * k)


def _edgington(w, est, se, k):
    return statdist.irwin_hall_cdf(np.sum(special.ndtr(w), axis=0), k)


_RULES = {
    CombinedMethod.TWO_TRIALS_RULE: _two_trials_rule,
    CombinedMethod.META_ANALYSIS: _meta_analysis,
    CombinedMethod.TIPPETT: _tippett,
    CombinedMethod.FISHER: _fisher,
    CombinedMethod.PEARSON: _pearson,
    CombinedMethod.EDGINGTON: _edgington,
}


def combined_p_arrays(method, estimates, std_errs, mu, alternative):
    """Combined p-value on arrays.

    ``estimates`` has the trials along axis 0 and may carry extra axes (one
    column per simulated replicate, say); ``std_errs`` has shape ``(k,)`` or
    the shape of ``estimates``; ``mu`` broadcasts against the trailing axes.
    """
    method = as_method(method)
    alternative = as_alternative(alternative)
    est = np.asarray(estimates, dtype=float)
    se = np.asarray(std_errs, dtype=float)
    w = signed_z(est, se, mu, alternative)
    return _out(_RULES[method](w, est, se, est.shape[0]))


def _edgington_centered(w, k):
    # p - 1/2 for Edgington's rule.  sum(p_i) - k/2 is assembled from each
    # p_i's smaller tail plus an integer offset, so well-separated trials
    # (p_1 ~ 0, p_2 ~ 1) keep their tiny, mu-dependent difference.
    high = w > 0
    tails = np.where(high, -special.ndtr(-w), special.ndtr(w))
    d = np.sum(tails, axis=0) + (np.sum(high, axis=0) - 0.5 * k)
    if k == 2:
        return d - d * np.abs(d) / 2.0
    return statdist.irwin_hall_cdf(0.5 * k + d, k) - 0.5


def combined_p_residual(method, estimates, std_errs, mu, alternative, a):
    """``p(mu) - a`` for root finding, arranged to avoid cancellation.

    Identical to ``combined_p_arrays(...) - a`` except for Edgington's rule,
    whose p-value function is nearly flat at 1/2 between well-separated
    trials; there the difference to 1/2 is formed directly.
    """
    method = as_method(method)
    alternative = as_alternative(alternative)
    est = np.asarray(estimates, dtype=float)
    se = np.asarray(std_errs, dtype=float)
    if method is CombinedMethod.EDGINGTON:
        w = signed_z(est, se, mu, alternative)
        return _out(_edgington_centered(w, est.shape[0]) + (0.5 - a))
    return _out(_RULES[method](signed_z(est, se, mu, alternative), est, se, est.shape[0]) - a)


def combined_p(method, trials: Sequence[TrialResult], mu, alternative) -> float:
    """Combined one-sided p-value of ``trials`` at null value ``mu``."""
    est, se = _arrays(trials)
    return combined_p_arrays(method, est, se, mu, alternative)


def p_one_sided(trial: TrialResult, mu, alternative) -> float:
    """One-sided p-value of a single trial for the null value ``mu``."""
    alternative = as_alternative(alternative)
    w = signed_z(trial.estimate, trial.std_err, mu, alternative)
    return _out(special.ndtr(w))


def p_2tr(trials, mu, alternative):
    """Two-trials rule: ``max(p_i) ** k`` (Wilkinson with r = k)."""
    return combined_p(CombinedMethod.TWO_TRIALS_RULE, trials, mu, alternative)


def p_ma(trials, mu, alternative):
    """Fixed-effect meta-analysis, i.e. Stouffer with weights ``1/se_i``."""
    return combined_p(CombinedMethod.META_ANALYSIS, trials, mu, alternative)


def p_tippett(trials, mu, alternative):
    """Tippett: ``1 - (1 - min p_i) ** k``."""
    return combined_p(CombinedMethod.TIPPETT, trials, mu, alternative)


def p_fisher(trials, mu, alternative):
    """Fisher: upper tail of chi2_2k at ``-2 sum log p_i``."""
    return combined_p(CombinedMethod.FISHER, trials, mu, alternative)


def p_pearson(trials, mu, alternative):
    """Pearson: lower tail of chi2_2k at ``-2 sum log(1 - p_i)``."""
    return combined_p(CombinedMethod.PEARSON, trials, mu, alternative)


def p_edgington(trials, mu, alternative):
    """Edgington: Irwin-Hall CDF of ``sum p_i``."""
    return combined_p(CombinedMethod.EDGINGTON, trials, mu, alternative)


def combine_pvalues(method, pvalues, weights=None) -> float:
    """Apply a combination rule to given one-sided p-values.

    This works on the p-values themselves, so it loses the tail accuracy of
    the z-value route used by :func:`combined_p`.  ``weights`` only matter
    for the meta-analysis (weighted Stouffer) rule and default to equal.
    """
    method = as_method(method)
    p = np.array([statdist.check_probability(x) for x in pvalues], dtype=float)
    k = p.size
    if k < 1:
        raise ValueError("need at least one p-value")
    if method is CombinedMethod.TWO_TRIALS_RULE:
        return float(p.max() ** k)
    if method is CombinedMethod.TIPPETT:
        return float(-math.expm1(k * math.log1p(-p.min())) if p.min() < 1 else 1.0)
    if method is CombinedMethod.EDGINGTON:
        return statdist.irwin_hall_cdf(p.sum(), k)
    if method is CombinedMethod.FISHER:
        if np.any(p == 0):
            return 0.0
        return statdist.chisq_sf(-2.0 * np.log(p).sum(), 2 * k)
    if method is CombinedMethod.PEARSON:
        if np.any(p == 1):
            return 1.0
        return statdist.chisq_cdf(-2.0 * np.log1p(-p).sum(), 2 * k)
    wts = np.ones(k) if weights is None else np.asarray(weights, dtype=float)
    z = statdist.norm_quantile(1.0 - p)
    z_comb = float(np.sum(wts * z) / math.sqrt(np.sum(wts ** 2)))
    return statdist.norm_sf(z_comb)


def centrality(p):
    """Two-sided transform ``2 min(p, 1 - p)`` of a one-sided p-value."""
    p = np.asarray(p, dtype=float)
    return _out(2.0 * np.minimum(p, 1.0 - p))


@dataclass(frozen=True)
class PValueFunction:
    """A combined p-value function bound to its trials and alternative.

    Calling it with a null value returns the combined one-sided p-value.
    """

    method: CombinedMethod
    trials: tuple[TrialResult, ...]
    alternative: Alternative

    def __post_init__(self):
        object.__setattr__(self, "method", as_method(self.method))
        object.__setattr__(self, "alternative", as_alternative(self.alternative))
        object.__setattr__(self, "trials", tuple(self.trials))
        est, se = _arrays(self.trials)
        object.__setattr__(self, "_est", est)
        object.__setattr__(self, "_se", se)

    def __call__(self, mu):
        mu = np.asarray(mu, dtype=float)
        est = self._est.reshape(self._est.shape + (1,) * mu.ndim)
        return combined_p_arrays(self.method, est, self._se, mu, self.alternative)

    def residual(self, mu, a):
        """``self(mu) - a``, computed without cancellation near 1/2."""
        mu = np.asarray(mu, dtype=float)
        est = self._est.reshape(self._est.shape + (1,) * mu.ndim)
        return combined_p_residual(self.method, est, self._se, mu, self.alternative, a)

    @property
    def increasing(self) -> bool:
        return self.alternative is Alternative.GREATER
