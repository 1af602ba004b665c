"""Combined estimation functions mu_hat(a) = {mu : p(mu) = a}.

Setting ``a = 1/2`` gives the median estimate; ``a = (1 - level)/2`` and
``a = (1 + level)/2`` give the limits of a two-sided confidence interval.
The two-trials rule, Tippett's method and meta-analysis have closed forms
for any number of trials; Edgington's median has one for two trials.
Everything else goes through :func:`invert_pfun`.
"""
from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from . import statdist
from .combine import PValueFunction, _arrays, centrality, combined_p_residual, p_one_sided
from .model import (
    AnalysisRequest,
    AnalysisResult,
    Alternative,
    CombinedMethod,
    MethodResult,
    TrialResult,
    TrialSummary,
    as_alternative,
    as_method,
    validate,
)

__all__ = [
    "InversionError",
    "mu_2tr",
    "mu_ma",
    "mu_tippett",
    "mu_fisher",
    "mu_pearson",
    "mu_edgington",
    "estimate",
    "invert_pfun",
    "estimate_arrays",
    "pooled",
    "fisher_identical",
    "pearson_identical",
    "edgington_identical",
    "edgington_median",
    "interval_targets",
    "analyze",
]

MAX_EXPANSIONS = 60
BRACKET_SES = 10.0


class InversionError(ArithmeticError):
    """The p-value function could not be inverted at the requested level."""


def _check_a(a) -> float:
    a = float(a)
    if not 0.0 < a < 1.0:
        raise statdist.DomainError(f"a must lie strictly between 0 and 1, got {a!r}")
    return a


def _z_of_root(a, k):
    """z_{a^(1/k)} without losing the complement when a^(1/k) is near 1."""
    upper_tail = -math.expm1(math.log(a) / k)
    if upper_tail < 0.5:
        return -statdist.norm_quantile(upper_tail)
    return statdist.norm_quantile(a ** (1.0 / k))


def pooled(trials: Sequence[TrialResult]) -> tuple[float, float]:
    """Inverse-variance pooled estimate and its standard error."""
    est, se = _arrays(trials)
    w = 1.0 / se ** 2
    return float(math.fsum(w * est) / math.fsum(w)), float(1.0 / math.sqrt(math.fsum(w)))


def mu_2tr(trials, a, alternative) -> float:
    """Two-trials rule estimation function.

    ``min(est_i + se_i z_{a^(1/k)})`` for "greater" and
    ``max(est_i - se_i z_{a^(1/k)})`` for "less".
    """
    alternative = as_alternative(alternative)
    est, se = _arrays(trials)
    q = _z_of_root(_check_a(a), len(est))
    if alternative is Alternative.GREATER:
        return float(np.min(est + se * q))
    return float(np.max(est - se * q))


def mu_ma(trials, a, alternative) -> float:
    """Meta-analytic estimation function ``theta_MA +/- se_MA z_a``."""
    alternative = as_alternative(alternative)
    a = _check_a(a)
    theta, sigma = pooled(trials)
    if a == 0.5:
        return theta
    z = statdist.norm_quantile(a)
    return theta + sigma * z if alternative is Alternative.GREATER else theta - sigma * z


def mu_tippett(trials, a, alternative) -> float:
    """Tippett estimation function with ``q = z_{(1-a)^(1/k)}``."""
    alternative = as_alternative(alternative)
    est, se = _arrays(trials)
    q = _z_of_root(1.0 - _check_a(a), len(est))
    if alternative is Alternative.GREATER:
        return float(np.max(est - se * q))
    return float(np.min(est + se * q))


def mu_fisher(trials, a, alternative) -> float:
    """Fisher estimation function (numerical inversion)."""
    return invert_pfun(PValueFunction(CombinedMethod.FISHER, trials, alternative), a)


def mu_pearson(trials, a, alternative) -> float:
    """Pearson estimation function (numerical inversion)."""
    return invert_pfun(PValueFunction(CombinedMethod.PEARSON, trials, alternative), a)


def edgington_median(trials) -> float:
    """Edgington median for two trials: average weighted by ``1/se_i``."""
    est, se = _arrays(trials)
    if len(est) != 2:
        raise ValueError("the closed-form Edgington median needs exactly two trials")
    w = 1.0 / se
    return float((w[0] * est[0] + w[1] * est[1]) / (w[0] + w[1]))


def mu_edgington(trials, a, alternative) -> float:
    """Edgington estimation function.

    Two trials at ``a = 1/2`` use the closed-form median; all other cases
    are inverted numerically.
    """
    a = _check_a(a)
    if len(trials) == 2 and a == 0.5:
        return edgington_median(trials)
    return invert_pfun(PValueFunction(CombinedMethod.EDGINGTON, trials, alternative), a)


_ESTIMATORS: dict[CombinedMethod, Callable] = {
    CombinedMethod.TWO_TRIALS_RULE: mu_2tr,
    CombinedMethod.META_ANALYSIS: mu_ma,
    CombinedMethod.TIPPETT: mu_tippett,
    CombinedMethod.FISHER: mu_fisher,
    CombinedMethod.PEARSON: mu_pearson,
    CombinedMethod.EDGINGTON: mu_edgington,
}


def estimate(method, trials, a, alternative) -> float:
    """mu_hat(a) for any of the six methods."""
    return _ESTIMATORS[as_method(method)](trials, a, alternative)


# --------------------------------------------------------------------------
# Identical-trials closed forms (k trials sharing estimate and std_err)
# --------------------------------------------------------------------------

def _sign(alternative):
    return 1.0 if as_alternative(alternative) is Alternative.GREATER else -1.0


def fisher_identical(estimate, std_err, a, alternative, k=2) -> float:
    """Fisher's mu_hat(a) when all ``k`` trials report the same result.

    ``est + se z_e`` ("greater") or ``est - se z_e`` ("less") with
    ``e = exp(-chi2_2k(1 - a) / (2k))``.
    """
    a = _check_a(a)
    e = math.exp(-statdist.chisq_quantile(1.0 - a, 2 * k) / (2 * k))
    return estimate + _sign(alternative) * std_err * statdist.norm_quantile(e)


def pearson_identical(estimate, std_err, a, alternative, k=2) -> float:
    """Pearson's mu_hat(a) when all ``k`` trials report the same result.

    ``est - se z_e`` ("greater") or ``est + se z_e`` ("less") with
    ``e = exp(-chi2_2k(a) / (2k))``; this is Fisher's form reflected
    through ``a -> 1 - a`` and the opposite alternative.
    """
    a = _check_a(a)
    e = math.exp(-statdist.chisq_quantile(a, 2 * k) / (2 * k))
    return estimate - _sign(alternative) * std_err * statdist.norm_quantile(e)


def edgington_identical(estimate, std_err, a, alternative) -> float:
    """Edgington's mu_hat(a) for two identical trials."""
    a = _check_a(a)
    sign = _sign(alternative)
    if a <= 0.5:
        return estimate + sign * std_err * statdist.norm_quantile(math.sqrt(a / 2.0))
    return estimate - sign * std_err * statdist.norm_quantile(math.sqrt((1.0 - a) / 2.0))


# --------------------------------------------------------------------------
# Generic inversion
# --------------------------------------------------------------------------

def invert_pfun(pfun: PValueFunction, a) -> float:
    """Solve ``pfun(mu) = a`` for ``mu``.

    The search starts on ``[min est - 10 max se, max est + 10 max se]``;
    when that bracket does not straddle the root its half-width is doubled,
    at most 60 times, before giving up with :class:`InversionError`.  Brent's
    method then runs to full double precision in ``mu``.
    """
    a = _check_a(a)
    est, se = pfun._est, pfun._se

    def f(mu):
        return pfun.residual(mu, a)

    center = 0.5 * (est.min() + est.max())
    half = 0.5 * (est.max() - est.min()) + BRACKET_SES * se.max()
    for _ in range(MAX_EXPANSIONS + 1):
        lo, hi = center - half, center + half
        f_lo, f_hi = f(lo), f(hi)
        if f_lo == 0.0:
            return lo
        if f_hi == 0.0:
            return hi
        if (f_lo < 0.0) != (f_hi < 0.0):
            break
        half *= 2.0
    else:
        raise InversionError(
            f"{pfun.method.value}: no sign change of p(mu) - {a} on "
            f"[{lo:.6g}, {hi:.6g}] after {MAX_EXPANSIONS} expansions")
    root, info = optimize.brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                                 maxiter=500, full_output=True, disp=False)
    if not info.converged:
        raise InversionError(f"{pfun.method.value}: root finder did not converge ({info.flag})")
    return float(root)


def _invert_arrays(method, est, se, a, alternative, max_iter=200):
    # Vectorized Illinois (modified regula falsi) on per-column brackets.
    n = est.shape[1]
    lo = est.min(axis=0) - BRACKET_SES * se.max()
    hi = est.max(axis=0) + BRACKET_SES * se.max()

    def f(mu, cols):
        return combined_p_residual(method, est[:, cols], se, mu, alternative, a)

    all_cols = np.arange(n)
    f_lo, f_hi = f(lo, all_cols), f(hi, all_cols)
    for _ in range(MAX_EXPANSIONS):
        bad = (f_lo < 0) == (f_hi < 0)
        bad &= (f_lo != 0) & (f_hi != 0)
        if not bad.any():
            break
        width = hi[bad] - lo[bad]
        lo[bad] -= width / 2
        hi[bad] += width / 2
        f_lo[bad] = f(lo[bad], all_cols[bad])
        f_hi[bad] = f(hi[bad], all_cols[bad])
    else:
        if ((f_lo < 0) == (f_hi < 0)).any():
            raise InversionError(f"{method.value}: bracket expansion failed")

    root = np.where(f_lo == 0, lo, hi)
    active = (f_lo != 0) & (f_hi != 0)
    side = np.zeros(n)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        l, h, fl, fh = lo[idx], hi[idx], f_lo[idx], f_hi[idx]
        x = (l * fh - h * fl) / (fh - fl)
        bisect = ~((x > l) & (x < h))
        x = np.where(bisect, 0.5 * (l + h), x)
        fx = f(x, idx)
        left = (fx < 0) == (fl < 0)
        # Replace the endpoint with the same sign; halve the stale one's value.
        lo[idx] = np.where(left, x, l)
        f_lo[idx] = np.where(left, fx, np.where(side[idx] == -1, fl / 2, fl))
        hi[idx] = np.where(left, h, x)
        f_hi[idx] = np.where(left, np.where(side[idx] == 1, fh / 2, fh), fx)
        side[idx] = np.where(left, 1, -1)
        root[idx] = x
        done = (fx == 0) | (hi[idx] - lo[idx] <= 1e-13 * (1.0 + np.abs(x)))
        active[idx[done]] = False
    return root


def estimate_arrays(method, estimates, std_errs, a, alternative) -> np.ndarray:
    """mu_hat(a) for many replicates at once.

    ``estimates`` has shape ``(k, n)`` (one column per replicate) and
    ``std_errs`` shape ``(k,)``.  Closed forms are used where they exist;
    otherwise a vectorized bracketing solver inverts all columns together.
    """
    method = as_method(method)
    alternative = as_alternative(alternative)
    a = _check_a(a)
    est = np.asarray(estimates, dtype=float)
    se = np.asarray(std_errs, dtype=float)
    k = est.shape[0]
    col_se = se[:, None]
    greater = alternative is Alternative.GREATER
    if method is CombinedMethod.TWO_TRIALS_RULE:
        q = _z_of_root(a, k)
        return (est + col_se * q).min(axis=0) if greater else (est - col_se * q).max(axis=0)
    if method is CombinedMethod.TIPPETT:
        q = _z_of_root(1.0 - a, k)
        return (est - col_se * q).max(axis=0) if greater else (est + col_se * q).min(axis=0)
    if method is CombinedMethod.META_ANALYSIS:
        w = 1.0 / se ** 2
        theta = (w[:, None] * est).sum(axis=0) / w.sum()
        shift = statdist.norm_quantile(a) / math.sqrt(w.sum()) if a != 0.5 else 0.0
        return theta + shift if greater else theta - shift
    if method is CombinedMethod.EDGINGTON and k == 2 and a == 0.5:
        w = 1.0 / se
        return (w[:, None] * est).sum(axis=0) / w.sum()
    return _invert_arrays(method, est, se, a, alternative)


# --------------------------------------------------------------------------
# Full analysis
# --------------------------------------------------------------------------

def interval_targets(level: float) -> tuple[float, float]:
    """The two values of ``a`` whose solutions bound a ``level`` interval."""
    return (1.0 - level) / 2.0, (1.0 + level) / 2.0


def _interval(fn, level):
    lo_a, hi_a = interval_targets(level)
    x, y = fn(lo_a), fn(hi_a)
    return (x, y) if x <= y else (y, x)


def analyze(request: AnalysisRequest, methods=None) -> AnalysisResult:
    """Median estimates, intervals and p-values for every method.

    ``methods`` restricts the combined rows (default: all six, in the order
    of :class:`CombinedMethod`).
    """
    request = validate(request)
    alt = request.alternative
    methods = list(CombinedMethod) if methods is None else [as_method(m) for m in methods]

    rows = []
    for i, t in enumerate(request.trials, 1):
        intervals = {}
        for level in request.levels:
            z = statdist.norm_quantile((1.0 + level) / 2.0)
            intervals[level] = (t.estimate - z * t.std_err, t.estimate + z * t.std_err)
        rows.append(TrialSummary(label=t.label or f"Trial {i}", estimate=t.estimate,
                                 std_err=t.std_err, intervals=intervals,
                                 p_at_null=p_one_sided(t, request.null_value, alt)))

    results = []
    for method in methods:
        pfun = PValueFunction(method, request.trials, alt)

        def fn(a, method=method):
            return estimate(method, request.trials, a, alt)

        results.append(MethodResult(
            method=method,
            median_estimate=fn(0.5),
            intervals={level: _interval(fn, level) for level in request.levels},
            p_at_null=pfun(request.null_value),
        ))
    return AnalysisResult(request=request, trials=tuple(rows), methods=tuple(results))


def two_sided_p(result: MethodResult) -> float:
    return centrality(result.p_at_null)
