"""Closed-form operating characteristics of the two-trial estimators.

Most of the estimation functions for two trials are shifted extremes of the
trial estimates:

    X = min(est_1 + se_1 q, est_2 + se_2 q)
    Y = max(est_1 - se_1 q, est_2 - se_2 q)

exactly (two-trials rule, Tippett) or as well-separated approximations
(Fisher, Pearson, Edgington away from a = 1/2).  The constant ``q`` depends
on the method, the level ``a`` and the alternative; :func:`extreme_form`
returns it.  Under independent normal estimates the means of X and Y follow
from the moments of the minimum and maximum of two Gaussians.
"""
from __future__ import annotations

import math
from typing import Sequence

from . import statdist
from .combine import _arrays
from .estimate import edgington_median
from .model import Alternative, CombinedMethod, TrialResult, as_alternative, as_method

__all__ = [
    "extreme_form",
    "expected_min_max",
    "expected_estimate",
    "expected_estimate_normal",
    "limiting_mu",
    "approx_mu",
]

M = CombinedMethod


def _check_a(a):
    a = float(a)
    if not 0.0 < a < 1.0:
        raise statdist.DomainError(f"a must lie strictly between 0 and 1, got {a!r}")
    return a


def _fisher_level(b):
    # exp(-chi2_4(b) / 2): the single-trial p-value that carries the
    # combined p-value once the other trial's contribution saturates.
    return math.exp(-statdist.chisq_quantile(b, 4) / 2.0)


def extreme_form(method, a, alternative) -> tuple[str, float]:
    """Return ``("X", q)`` or ``("Y", q)`` for a shifted-extreme estimator.

    Raises ``ValueError`` for meta-analysis and for Edgington at
    ``a = 1/2``, whose estimators are linear rather than extremes.
    """
    method = as_method(method)
    a = _check_a(a)
    greater = as_alternative(alternative) is Alternative.GREATER
    if method is M.TWO_TRIALS_RULE:
        return ("X" if greater else "Y"), statdist.norm_quantile(math.sqrt(a))
    if method is M.TIPPETT:
        return ("Y" if greater else "X"), statdist.norm_quantile(math.sqrt(1.0 - a))
    if method is M.FISHER:
        return ("Y" if greater else "X"), -statdist.norm_quantile(_fisher_level(1.0 - a))
    if method is M.PEARSON:
        return ("X" if greater else "Y"), -statdist.norm_quantile(_fisher_level(a))
    if method is M.EDGINGTON:
        if a < 0.5:
            return ("X" if greater else "Y"), statdist.norm_quantile(math.sqrt(2.0 * a))
        if a > 0.5:
            return ("Y" if greater else "X"), statdist.norm_quantile(math.sqrt(2.0 * (1.0 - a)))
        raise ValueError("Edgington's median is a weighted average, not an extreme")
    raise ValueError(f"{method.value} has no min/max representation")


def expected_min_max(kind, q, theta1, theta2, sigma1, sigma2) -> float:
    """Mean of X (``kind="X"``) or Y (``kind="Y"``) for normal estimates.

    Uses E max(A, B) = m_A Phi(d) + m_B Phi(-d) + tau phi(d) and the
    mirrored expression for the minimum, where ``d = (m_A - m_B) / tau``
    and ``tau**2 = sigma1**2 + sigma2**2``.
    """
    tau = math.hypot(sigma1, sigma2)
    if kind == "Y":
        m_a, m_b = theta1 - sigma1 * q, theta2 - sigma2 * q
        d = (m_a - m_b) / tau
        return (m_a * statdist.norm_cdf(d) + m_b * statdist.norm_cdf(-d)
                + tau * statdist.norm_pdf(d))
    if kind == "X":
        m_a, m_b = theta1 + sigma1 * q, theta2 + sigma2 * q
        d = (m_b - m_a) / tau
        return (m_a * statdist.norm_cdf(d) + m_b * statdist.norm_cdf(-d)
                - tau * statdist.norm_pdf(d))
    raise ValueError(f"kind must be 'X' or 'Y', got {kind!r}")


def expected_estimate_normal(method, a, theta1, theta2, sigma1, sigma2, alternative) -> float:
    """Mean of the linear estimators: meta-analysis at any ``a``, Edgington's median.

    Meta-analysis: ``theta1/(1+c) + theta2/(1+1/c) + z_a se_MA`` for
    "greater" (minus for "less"), ``c = sigma1**2 / sigma2**2``.
    Edgington's median: ``theta1/(1+sqrt c) + theta2/(1+1/sqrt c)``.
    """
    method = as_method(method)
    a = _check_a(a)
    c = sigma1 ** 2 / sigma2 ** 2
    if method is M.META_ANALYSIS:
        centre = theta1 / (1.0 + c) + theta2 / (1.0 + 1.0 / c)
        if a == 0.5:
            return centre
        shift = statdist.norm_quantile(a) / math.sqrt(1.0 / sigma1 ** 2 + 1.0 / sigma2 ** 2)
        greater = as_alternative(alternative) is Alternative.GREATER
        return centre + shift if greater else centre - shift
    if method is M.EDGINGTON:
        if a != 0.5:
            raise ValueError("Edgington's estimator is only normal at a = 1/2")
        rc = math.sqrt(c)
        return theta1 / (1.0 + rc) + theta2 / (1.0 + 1.0 / rc)
    raise ValueError(f"{method.value} estimator is not normally distributed")


def expected_estimate(method, a, alternative, theta1, theta2, sigma1, sigma2) -> float:
    """Expectation of mu_hat(a) for two trials with true effects theta1, theta2.

    Exact for the two-trials rule, Tippett, meta-analysis and Edgington's
    median; for Fisher, Pearson and Edgington at ``a != 1/2`` it is the
    expectation of the well-separated approximation (:func:`approx_mu`).
    """
    method = as_method(method)
    a = _check_a(a)
    if sigma1 <= 0 or sigma2 <= 0:
        raise statdist.DomainError("standard errors must be positive")
    if method is M.META_ANALYSIS or (method is M.EDGINGTON and a == 0.5):
        return expected_estimate_normal(method, a, theta1, theta2, sigma1, sigma2, alternative)
    kind, q = extreme_form(method, a, alternative)
    return expected_min_max(kind, q, theta1, theta2, sigma1, sigma2)


def limiting_mu(method, a, theta1, theta2, c=1.0, alternative=Alternative.GREATER) -> float:
    """Probability limit of mu_hat(a) as both standard errors shrink.

    ``c = sigma1**2 / sigma2**2`` is held fixed; it only matters for the
    meta-analysis and Edgington (at ``a = 1/2``) weighted averages.
    """
    method = as_method(method)
    a = _check_a(a)
    if c <= 0:
        raise statdist.DomainError("variance ratio c must be positive")
    greater = as_alternative(alternative) is Alternative.GREATER
    lo, hi = min(theta1, theta2), max(theta1, theta2)
    if method in (M.TWO_TRIALS_RULE, M.PEARSON):
        return lo if greater else hi
    if method in (M.TIPPETT, M.FISHER):
        return hi if greater else lo
    if method is M.META_ANALYSIS:
        return theta1 / (1.0 + c) + theta2 / (1.0 + 1.0 / c)
    # Edgington
    if a == 0.5:
        rc = math.sqrt(c)
        return theta1 / (1.0 + rc) + theta2 / (1.0 + 1.0 / rc)
    if (a < 0.5) == greater:
        return lo
    return hi


def approx_mu(method, trials: Sequence[TrialResult], a, alternative) -> float:
    """Closed-form approximation of mu_hat(a) for well-separated trials.

    Valid for Fisher, Pearson and Edgington with two trials.  The error is
    small only when one trial's p-value function is close to 0 or 1 wherever
    the other one changes; the exact estimate is :func:`estimate.estimate`.
    Edgington's median is returned exactly.
    """
    method = as_method(method)
    if method not in (M.FISHER, M.PEARSON, M.EDGINGTON):
        raise ValueError("approx_mu covers fisher, pearson and edgington")
    est, se = _arrays(trials)
    if len(est) != 2:
        raise ValueError("approx_mu needs exactly two trials")
    a = _check_a(a)
    if method is M.EDGINGTON and a == 0.5:
        return edgington_median(trials)
    kind, q = extreme_form(method, a, alternative)
    if kind == "X":
        return float(min(est[0] + se[0] * q, est[1] + se[1] * q))
    return float(max(est[0] - se[0] * q, est[1] - se[1] * q))
