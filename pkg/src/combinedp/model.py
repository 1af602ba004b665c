"""Trial summaries, analysis requests and results.

Plain frozen dataclasses plus the JSON and CSV encodings used by the
command line.  Estimates are taken on the analysis scale (for example a log
rate ratio); nothing here transforms them.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

__all__ = [
    "ValidationError",
    "Alternative",
    "CombinedMethod",
    "TrialResult",
    "AnalysisRequest",
    "TrialSummary",
    "MethodResult",
    "AnalysisResult",
    "CurveGrid",
    "DEFAULT_LEVELS",
    "validate",
    "request_from_dict",
    "request_to_dict",
    "result_to_dict",
    "result_from_dict",
    "read_trials_csv",
    "parse_trials_csv",
]

# 95% and the telescope level 1 - 2 * 0.025**2.
DEFAULT_LEVELS = (0.95, 0.99875)


class ValidationError(ValueError):
    """Raised when a request or input file is malformed."""


class Alternative(str, Enum):
    GREATER = "greater"
    LESS = "less"


class CombinedMethod(str, Enum):
    TWO_TRIALS_RULE = "two_trials_rule"
    META_ANALYSIS = "meta_analysis"
    TIPPETT = "tippett"
    FISHER = "fisher"
    PEARSON = "pearson"
    EDGINGTON = "edgington"

    @property
    def label(self) -> str:
        return _LABELS[self]


_LABELS = {
    CombinedMethod.TWO_TRIALS_RULE: "Two-trials rule",
    CombinedMethod.META_ANALYSIS: "Meta-analysis",
    CombinedMethod.TIPPETT: "Tippett",
    CombinedMethod.FISHER: "Fisher",
    CombinedMethod.PEARSON: "Pearson",
    CombinedMethod.EDGINGTON: "Edgington",
}


def _as_enum(enum_cls, value, what):
    if isinstance(value, enum_cls):
        return value
    try:
        return enum_cls(str(value).strip().lower())
    except ValueError:
        choices = ", ".join(m.value for m in enum_cls)
        raise ValidationError(f"{what} must be one of {choices}; got {value!r}") from None


def as_alternative(value) -> Alternative:
    return _as_enum(Alternative, value, "alternative")


def as_method(value) -> CombinedMethod:
    return _as_enum(CombinedMethod, value, "method")


@dataclass(frozen=True)
class TrialResult:
    """Effect estimate and standard error of one trial."""

    estimate: float
    std_err: float
    label: str | None = None

    def __post_init__(self):
        est = _real(self.estimate, "estimate")
        se = _real(self.std_err, "std_err")
        if se <= 0:
            raise ValidationError("std_err must be positive")
        object.__setattr__(self, "estimate", est)
        object.__setattr__(self, "std_err", se)


def _real(value, name) -> float:
    if isinstance(value, bool):
        raise ValidationError(f"{name} must be a real number, got {value!r}")
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be a real number, got {value!r}") from None
    if not math.isfinite(out):
        raise ValidationError(f"{name} must be finite, got {value!r}")
    return out


@dataclass(frozen=True)
class AnalysisRequest:
    trials: tuple[TrialResult, ...]
    null_value: float = 0.0
    alternative: Alternative = Alternative.GREATER
    levels: tuple[float, ...] = DEFAULT_LEVELS


def validate(request: AnalysisRequest) -> AnalysisRequest:
    """Check a request and return its normalized form.

    Levels are deduplicated and sorted ascending; the alternative is coerced
    to :class:`Alternative`.  Problems raise :class:`ValidationError` whose
    message names the offending field.
    """
    trials = tuple(request.trials)
    if len(trials) < 2:
        raise ValidationError(f"trials: at least 2 trials are required, got {len(trials)}")
    for i, t in enumerate(trials, 1):
        if not isinstance(t, TrialResult):
            raise ValidationError(f"trials[{i}] is not a TrialResult")
    null_value = _real(request.null_value, "null_value")
    alternative = as_alternative(request.alternative)
    levels = []
    for lv in request.levels:
        lv = _real(lv, "levels")
        if not 0.0 < lv < 1.0:
            raise ValidationError(f"levels must lie strictly between 0 and 1, got {lv!r}")
        levels.append(lv)
    if not levels:
        raise ValidationError("levels: at least one confidence level is required")
    return AnalysisRequest(trials=trials, null_value=null_value,
                           alternative=alternative, levels=tuple(sorted(set(levels))))


@dataclass(frozen=True)
class TrialSummary:
    """Per-trial row: one-sided p at the null and Wald intervals."""

    label: str
    estimate: float
    std_err: float
    intervals: Mapping[float, tuple[float, float]]
    p_at_null: float


@dataclass(frozen=True)
class MethodResult:
    method: CombinedMethod
    median_estimate: float
    intervals: Mapping[float, tuple[float, float]]
    p_at_null: float

    @property
    def p_two_sided(self) -> float:
        return 2.0 * min(self.p_at_null, 1.0 - self.p_at_null)


@dataclass(frozen=True)
class AnalysisResult:
    request: AnalysisRequest
    trials: tuple[TrialSummary, ...]
    methods: tuple[MethodResult, ...]

    def method(self, method) -> MethodResult:
        method = as_method(method)
        for m in self.methods:
            if m.method is method:
                return m
        raise KeyError(method.value)


@dataclass(frozen=True)
class CurveGrid:
    """Tabulated one-sided p-values and centrality values over a grid of nulls."""

    mu_grid: tuple[float, ...]
    one_sided: dict[str, tuple[float, ...]] = field(default_factory=dict)
    centrality: dict[str, tuple[float, ...]] = field(default_factory=dict)

    def to_csv(self) -> str:
        names = list(self.one_sided)
        header = ["mu"]
        for name in names:
            header += [f"{name}_p", f"{name}_centrality"]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for i, mu in enumerate(self.mu_grid):
            row = [repr(mu)]
            for name in names:
                row += [repr(self.one_sided[name][i]), repr(self.centrality[name][i])]
            writer.writerow(row)
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"mu_grid": list(self.mu_grid),
                "one_sided": {k: list(v) for k, v in self.one_sided.items()},
                "centrality": {k: list(v) for k, v in self.centrality.items()}}


# --------------------------------------------------------------------------
# JSON encodings
# --------------------------------------------------------------------------

def _trial_to_dict(t: TrialResult) -> dict:
    out = {"estimate": t.estimate, "std_err": t.std_err}
    if t.label is not None:
        out["trial"] = t.label
    return out


def _trial_from_dict(d, i) -> TrialResult:
    if not isinstance(d, Mapping):
        raise ValidationError(f"trials[{i}] must be an object with estimate and std_err")
    for key in ("estimate", "std_err"):
        if key not in d:
            raise ValidationError(f"trials[{i}]: missing field {key!r}")
    label = d.get("trial")
    return TrialResult(d["estimate"], d["std_err"], None if label is None else str(label))


def request_to_dict(request: AnalysisRequest) -> dict:
    return {
        "trials": [_trial_to_dict(t) for t in request.trials],
        "null_value": request.null_value,
        "alternative": as_alternative(request.alternative).value,
        "levels": list(request.levels),
    }


def request_from_dict(d: Mapping) -> AnalysisRequest:
    """Build a validated request from its JSON object form."""
    if not isinstance(d, Mapping):
        raise ValidationError("request must be a JSON object")
    if "trials" not in d or not isinstance(d["trials"], list):
        raise ValidationError("trials: expected a list of {estimate, std_err} objects")
    trials = tuple(_trial_from_dict(t, i) for i, t in enumerate(d["trials"], 1))
    levels = d.get("levels", DEFAULT_LEVELS)
    if not isinstance(levels, (list, tuple)):
        raise ValidationError("levels must be a list of numbers")
    return validate(AnalysisRequest(
        trials=trials,
        null_value=d.get("null_value", 0.0),
        alternative=d.get("alternative", Alternative.GREATER.value),
        levels=tuple(levels),
    ))


def _intervals_to_dict(intervals) -> dict:
    return {repr(float(lv)): [lo, hi] for lv, (lo, hi) in intervals.items()}


def _intervals_from_dict(d) -> dict:
    return {float(k): (float(v[0]), float(v[1])) for k, v in d.items()}


def result_to_dict(result: AnalysisResult) -> dict:
    """JSON-ready form of an analysis; floats keep full precision."""
    return {
        "request": request_to_dict(result.request),
        "trials": [
            {"trial": t.label, "estimate": t.estimate, "std_err": t.std_err,
             "intervals": _intervals_to_dict(t.intervals), "p_at_null": t.p_at_null}
            for t in result.trials
        ],
        "methods": [
            {"method": m.method.value, "median_estimate": m.median_estimate,
             "intervals": _intervals_to_dict(m.intervals), "p_at_null": m.p_at_null}
            for m in result.methods
        ],
    }


def result_from_dict(d: Mapping) -> AnalysisResult:
    request = request_from_dict(d["request"])
    trials = tuple(
        TrialSummary(label=t["trial"], estimate=float(t["estimate"]),
                     std_err=float(t["std_err"]),
                     intervals=_intervals_from_dict(t["intervals"]),
                     p_at_null=float(t["p_at_null"]))
        for t in d["trials"])
    methods = tuple(
        MethodResult(method=as_method(m["method"]),
                     median_estimate=float(m["median_estimate"]),
                     intervals=_intervals_from_dict(m["intervals"]),
                     p_at_null=float(m["p_at_null"]))
        for m in d["methods"])
    return AnalysisResult(request=request, trials=trials, methods=methods)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


# --------------------------------------------------------------------------
# CSV trial input
# --------------------------------------------------------------------------

CSV_HEADER = ("trial", "estimate", "std_err")


def parse_trials_csv(text: str) -> list[TrialResult]:
    """Parse ``trial,estimate,std_err`` rows (header required)."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise ValidationError("CSV input is empty")
    fields = [f.strip() for f in reader.fieldnames]
    if fields != list(CSV_HEADER):
        raise ValidationError(
            f"CSV header must be {','.join(CSV_HEADER)}; got {','.join(fields)}")
    trials = []
    for lineno, row in enumerate(reader, 2):
        row = {(k or "").strip(): (v or "").strip() for k, v in row.items()}
        try:
            trials.append(TrialResult(row["estimate"], row["std_err"], row["trial"] or None))
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
    return trials


def read_trials_csv(path) -> list[TrialResult]:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_trials_csv(fh.read())


def trials_from_estimates(estimates: Iterable[float], std_errs: Sequence[float]):
    return tuple(TrialResult(e, s) for e, s in zip(estimates, std_errs))
