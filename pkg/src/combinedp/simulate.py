"""Monte Carlo operating characteristics of the combined estimators.

Replicate ``r`` of a scenario draws its trial estimates from its own
counter-based substream: a Philox generator keyed by the seed and started
at counter ``r * blocks``, one Philox block holding four 64-bit words.  The
draws of a replicate therefore do not depend on how replicates are split
into chunks or spread over workers, and chunks are aggregated with exactly
rounded sums, so a summary is a pure function of the scenario.

Scenarios sharing a seed share their standard normal draws, which makes
runs that differ only in effects or standard errors directly comparable.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from . import statdist
from .combine import combined_p_arrays
from .estimate import estimate_arrays, interval_targets
from .model import (
    Alternative,
    CombinedMethod,
    ValidationError,
    as_alternative,
    as_method,
)
from .theory import limiting_mu

__all__ = [
    "SimScenario",
    "MethodSummary",
    "LevelSummary",
    "SimSummary",
    "TARGETS",
    "draw_estimates",
    "run_simulation",
    "null_uniformity",
    "scenario_from_dict",
    "scenario_to_dict",
]

TARGETS = ("common", "min", "max", "inverse_variance", "inverse_se", "method_limit")
CHUNK = 20_000
_U64 = 2 ** 64


@dataclass(frozen=True)
class SimScenario:
    """True effects, standard errors and what to evaluate.

    ``target`` is the estimand that bias, the exceedance probability and
    coverage refer to: one of :data:`TARGETS` or a number.
    """

    effects: tuple[float, ...]
    std_errs: tuple[float, ...]
    alternative: Alternative = Alternative.GREATER
    methods: tuple[CombinedMethod, ...] = tuple(CombinedMethod)
    levels: tuple[float, ...] = (0.95,)
    replicates: int = 10_000
    seed: int = 0
    target: str | float = "inverse_variance"

    def __post_init__(self):
        effects = tuple(_real(x, "effects") for x in self.effects)
        std_errs = tuple(_real(x, "std_errs") for x in self.std_errs)
        if len(effects) < 2 or len(effects) != len(std_errs):
            raise ValidationError("effects and std_errs need the same length, at least 2")
        if any(s <= 0 for s in std_errs):
            raise ValidationError("std_errs must be positive")
        levels = tuple(sorted({_real(x, "levels") for x in self.levels}))
        if not levels or any(not 0 < lv < 1 for lv in levels):
            raise ValidationError("levels must lie strictly between 0 and 1")
        methods = tuple(dict.fromkeys(as_method(m) for m in self.methods))
        if not methods:
            raise ValidationError("methods must not be empty")
        if isinstance(self.replicates, bool) or int(self.replicates) != self.replicates \
                or self.replicates < 1:
            raise ValidationError("replicates must be a positive integer")
        if isinstance(self.seed, bool) or int(self.seed) != self.seed \
                or not 0 <= self.seed < _U64:
            raise ValidationError("seed must be an unsigned 64-bit integer")
        target = self.target
        if isinstance(target, str):
            if target not in TARGETS:
                raise ValidationError(f"target must be a number or one of {', '.join(TARGETS)}")
            if target == "common" and len(set(effects)) != 1:
                raise ValidationError("target 'common' needs identical effects")
        else:
            target = _real(target, "target")
        for name, value in (("effects", effects), ("std_errs", std_errs), ("levels", levels),
                            ("methods", methods), ("replicates", int(self.replicates)),
                            ("seed", int(self.seed)), ("target", target),
                            ("alternative", as_alternative(self.alternative))):
            object.__setattr__(self, name, value)

    @property
    def k(self) -> int:
        return len(self.effects)

    def target_value(self, method) -> float:
        theta = np.array(self.effects)
        se = np.array(self.std_errs)
        t = self.target
        if not isinstance(t, str):
            return t
        if t in ("common", "min"):
            return float(theta.min())
        if t == "max":
            return float(theta.max())
        if t == "inverse_variance":
            w = 1.0 / se ** 2
            return math.fsum(w * theta) / math.fsum(w)
        if t == "inverse_se":
            w = 1.0 / se
            return math.fsum(w * theta) / math.fsum(w)
        # method_limit
        if self.k != 2:
            raise ValidationError("target 'method_limit' is defined for two trials")
        c = (se[0] / se[1]) ** 2
        return limiting_mu(method, 0.5, theta[0], theta[1], c, self.alternative)


def _real(value, name):
    if isinstance(value, bool):
        raise ValidationError(f"{name}: expected a number, got {value!r}")
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name}: expected a number, got {value!r}") from None
    if not math.isfinite(out):
        raise ValidationError(f"{name}: must be finite")
    return out


# --------------------------------------------------------------------------
# Random draws
# --------------------------------------------------------------------------

def standard_normals(seed: int, k: int, start: int, stop: int) -> np.ndarray:
    """Standard normal draws, shape ``(k, stop - start)``, for replicates
    ``start <= r < stop``."""
    blocks = -(-k // 4)
    n = stop - start
    gen = np.random.Philox(key=seed, counter=start * blocks)
    raw = gen.random_raw(n * blocks * 4).reshape(n, blocks * 4)[:, :k]
    u = ((raw >> np.uint64(11)).astype(float) + 0.5) * 2.0 ** -53
    return statdist.norm_quantile(u.T)


def draw_estimates(scenario: SimScenario, start: int = 0, stop: int | None = None):
    stop = scenario.replicates if stop is None else stop
    eps = standard_normals(scenario.seed, scenario.k, start, stop)
    theta = np.array(scenario.effects)[:, None]
    se = np.array(scenario.std_errs)[:, None]
    return theta + se * eps


# --------------------------------------------------------------------------
# Simulation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LevelSummary:
    level: float
    coverage: float
    coverage_se: float
    mean_width: float
    mean_width_se: float
    covers_all_effects: float
    covers_all_effects_se: float


@dataclass(frozen=True)
class MethodSummary:
    method: CombinedMethod
    target: float
    mean_estimate: float
    mean_estimate_se: float
    mean_bias: float
    median_estimate: float
    prob_above_target: float
    prob_above_target_se: float
    levels: tuple[LevelSummary, ...]

    def level(self, level: float) -> LevelSummary:
        for lv in self.levels:
            if lv.level == level:
                return lv
        raise KeyError(level)


@dataclass(frozen=True)
class SimSummary:
    scenario: SimScenario
    methods: tuple[MethodSummary, ...] = field(default_factory=tuple)

    def method(self, method) -> MethodSummary:
        method = as_method(method)
        for m in self.methods:
            if m.method is method:
                return m
        raise KeyError(method.value)

    def to_dict(self) -> dict:
        return {
            "scenario": scenario_to_dict(self.scenario),
            "methods": [
                {
                    "method": m.method.value,
                    "target": m.target,
                    "mean_estimate": m.mean_estimate,
                    "mean_estimate_se": m.mean_estimate_se,
                    "mean_bias": m.mean_bias,
                    "mean_bias_se": m.mean_estimate_se,
                    "median_estimate": m.median_estimate,
                    "prob_above_target": m.prob_above_target,
                    "prob_above_target_se": m.prob_above_target_se,
                    "levels": [lv.__dict__.copy() for lv in m.levels],
                }
                for m in self.methods
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["method", "target", "mean_estimate", "mean_estimate_se", "mean_bias",
                         "median_estimate", "prob_above_target", "prob_above_target_se",
                         "level", "coverage", "coverage_se", "mean_width", "mean_width_se",
                         "covers_all_effects", "covers_all_effects_se"])
        for m in self.methods:
            for lv in m.levels:
                writer.writerow([m.method.value] + [repr(x) for x in (
                    m.target, m.mean_estimate, m.mean_estimate_se, m.mean_bias,
                    m.median_estimate, m.prob_above_target, m.prob_above_target_se,
                    lv.level, lv.coverage, lv.coverage_se, lv.mean_width, lv.mean_width_se,
                    lv.covers_all_effects, lv.covers_all_effects_se)])
        return buf.getvalue()


def _chunk_estimates(scenario: SimScenario, start: int, stop: int) -> dict:
    est = draw_estimates(scenario, start, stop)
    se = np.array(scenario.std_errs)
    alt = scenario.alternative
    out = {}
    for method in scenario.methods:
        median = estimate_arrays(method, est, se, 0.5, alt)
        bounds = {}
        for level in scenario.levels:
            a_lo, a_hi = interval_targets(level)
            x = estimate_arrays(method, est, se, a_lo, alt)
            y = estimate_arrays(method, est, se, a_hi, alt)
            bounds[level] = (np.minimum(x, y), np.maximum(x, y))
        out[method] = (median, bounds)
    return out


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    n = x.size
    mean = math.fsum(x) / n
    if n < 2:
        return mean, math.nan
    var = math.fsum((x - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def _proportion(flags: np.ndarray) -> tuple[float, float]:
    n = flags.size
    p = int(np.count_nonzero(flags)) / n
    return p, math.sqrt(p * (1.0 - p) / n)


def _chunks(n: int, size: int):
    return [(s, min(s + size, n)) for s in range(0, n, size)]


def _collect(scenario, fn, workers):
    spans = _chunks(scenario.replicates, CHUNK)
    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda span: fn(scenario, *span), spans))
    return [fn(scenario, *span) for span in spans]


def run_simulation(scenario: SimScenario, workers: int = 1) -> SimSummary:
    """Simulate ``scenario.replicates`` trial pairs and summarize each method.

    ``workers`` only changes how many chunks run at once; the summary is
    bit-identical for any value.
    """
    parts = _collect(scenario, _chunk_estimates, workers)
    lo_eff, hi_eff = min(scenario.effects), max(scenario.effects)
    summaries = []
    for method in scenario.methods:
        median = np.concatenate([p[method][0] for p in parts])
        target = scenario.target_value(method)
        mean, mean_se = _mean_se(median)
        above, above_se = _proportion(median > target)
        levels = []
        for level in scenario.levels:
            lower = np.concatenate([p[method][1][level][0] for p in parts])
            upper = np.concatenate([p[method][1][level][1] for p in parts])
            cov, cov_se = _proportion((lower <= target) & (target <= upper))
            width, width_se = _mean_se(upper - lower)
            both, both_se = _proportion((lower <= lo_eff) & (hi_eff <= upper))
            levels.append(LevelSummary(level, cov, cov_se, width, width_se, both, both_se))
        summaries.append(MethodSummary(
            method=method, target=target, mean_estimate=mean, mean_estimate_se=mean_se,
            mean_bias=mean - target, median_estimate=float(np.median(median)),
            prob_above_target=above, prob_above_target_se=above_se, levels=tuple(levels)))
    return SimSummary(scenario=scenario, methods=tuple(summaries))


def _chunk_pvalues(scenario, start, stop):
    est = draw_estimates(scenario, start, stop)
    se = np.array(scenario.std_errs)
    mu0 = scenario.effects[0]
    return {m: np.asarray(combined_p_arrays(m, est, se, mu0, scenario.alternative))
            for m in scenario.methods}


def null_pvalues(scenario: SimScenario, workers: int = 1) -> dict:
    """Combined p-values at the common true effect, one array per method."""
    if len(set(scenario.effects)) != 1:
        raise ValidationError("null uniformity needs identical true effects")
    parts = _collect(scenario, _chunk_pvalues, workers)
    return {m: np.concatenate([p[m] for p in parts]) for m in scenario.methods}


def null_uniformity(scenario: SimScenario, workers: int = 1) -> dict:
    """Kolmogorov-Smirnov test of the combined p-values against Uniform(0, 1).

    Returns ``{method: (statistic, p_value)}``.  Needs identical true
    effects (the null value is the common effect) and at least two
    replicates.
    """
    if scenario.replicates < 2:
        raise ValidationError("the KS test needs at least two replicates")
    out = {}
    for method, p in null_pvalues(scenario, workers).items():
        res = stats.kstest(p, "uniform")
        out[method] = (float(res.statistic), float(res.pvalue))
    return out


# --------------------------------------------------------------------------
# JSON
# --------------------------------------------------------------------------

def scenario_from_dict(d: Mapping) -> SimScenario:
    """Build a scenario from JSON.

    Effects and standard errors are given either as ``effects``/``std_errs``
    lists or, for two trials, as ``theta1``, ``theta2``, ``sigma1``,
    ``sigma2``.
    """
    if not isinstance(d, Mapping):
        raise ValidationError("scenario must be a JSON object")
    if "effects" in d or "std_errs" in d:
        effects, std_errs = d.get("effects"), d.get("std_errs")
        if not isinstance(effects, list) or not isinstance(std_errs, list):
            raise ValidationError("effects and std_errs must both be lists")
    else:
        missing = [k for k in ("theta1", "theta2", "sigma1", "sigma2") if k not in d]
        if missing:
            raise ValidationError(f"scenario is missing {', '.join(missing)}")
        effects = [d["theta1"], d["theta2"]]
        std_errs = [d["sigma1"], d["sigma2"]]
    kwargs = {}
    for key in ("alternative", "replicates", "seed", "target"):
        if key in d:
            kwargs[key] = d[key]
    for key in ("methods", "levels"):
        if key in d:
            if not isinstance(d[key], list):
                raise ValidationError(f"{key} must be a list")
            kwargs[key] = tuple(d[key])
    try:
        return SimScenario(effects=tuple(effects), std_errs=tuple(std_errs), **kwargs)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None


def scenario_to_dict(s: SimScenario) -> dict:
    return {
        "effects": list(s.effects),
        "std_errs": list(s.std_errs),
        "alternative": s.alternative.value,
        "methods": [m.value for m in s.methods],
        "levels": list(s.levels),
        "replicates": s.replicates,
        "seed": s.seed,
        "target": s.target,
    }
