"""Command-line entry point.

::

    combinedp analyze --t1 -0.4942 --se1 0.1833 --t2 -0.1847 --se2 0.1738 \\
        --alternative less --level 0.95
    combinedp curves --input trials.csv --output curves.csv
    combinedp simulate --scenario scenario.json --seed 42

Exit status is 0 on success, 2 for invalid input and 3 when an estimate
could not be bracketed.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .combine import centrality, combined_p_arrays, signed_z
from .estimate import InversionError, analyze, pooled
from .model import (
    DEFAULT_LEVELS,
    AnalysisRequest,
    AnalysisResult,
    CombinedMethod,
    CurveGrid,
    ValidationError,
    as_method,
    dumps,
    parse_trials_csv,
    request_from_dict,
    result_to_dict,
    validate,
)
from .simulate import SimSummary, null_uniformity, run_simulation, scenario_from_dict
from .statdist import DomainError, norm_cdf

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
DEFAULT_POINTS = 401
GRID_HALF_WIDTH = 4.0


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# Input
# --------------------------------------------------------------------------

def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None
    except UnicodeDecodeError:
        raise UsageError(f"{path} is not UTF-8 text") from None


def _load_json(text, path):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: malformed JSON ({exc.msg}, line {exc.lineno})") from None


def _read_input(path) -> dict:
    """Trials (and optionally request settings) from a CSV or JSON file."""
    text = _read_text(path)
    if str(path).lower().endswith(".json") or text.lstrip()[:1] in ("{", "["):
        data = _load_json(text, path)
        if isinstance(data, list):
            data = {"trials": data}
        if not isinstance(data, dict):
            raise UsageError(f"{path}: expected a JSON object or list of trials")
        return data
    trials = parse_trials_csv(text)
    return {"trials": [{"estimate": t.estimate, "std_err": t.std_err,
                        **({"trial": t.label} if t.label else {})} for t in trials]}


def _request(args) -> AnalysisRequest:
    pair = {"--t1": args.t1, "--se1": args.se1, "--t2": args.t2, "--se2": args.se2}
    given = [flag for flag, v in pair.items() if v is not None]
    if args.input is not None:
        if given:
            raise UsageError(f"{given[0]} cannot be combined with --input")
        data = _read_input(args.input)
    else:
        if not given:
            raise UsageError("no trials given; use --t1 --se1 --t2 --se2 or --input")
        missing = [flag for flag, v in pair.items() if v is None]
        if missing:
            raise UsageError(f"missing {', '.join(missing)}")
        data = {"trials": [{"estimate": args.t1, "std_err": args.se1},
                           {"estimate": args.t2, "std_err": args.se2}]}
    if args.null is not None:
        data["null_value"] = args.null
    if args.alternative is not None:
        data["alternative"] = args.alternative
    if args.level:
        data["levels"] = args.level
    return request_from_dict(data)


def _methods(spec):
    if spec is None:
        return list(CombinedMethod)
    names = [s.strip() for s in spec.split(",") if s.strip()]
    if not names:
        raise UsageError("--methods is empty")
    return list(dict.fromkeys(as_method(n) for n in names))


def _emit(text: str, output):
    if output is None:
        sys.stdout.write(text)
    else:
        try:
            Path(output).write_text(text, encoding="utf-8", newline="")
        except OSError as exc:
            raise UsageError(f"cannot write {output}: {exc.strerror or exc}") from None


# --------------------------------------------------------------------------
# Rendering
# --------------------------------------------------------------------------

def _level_name(level: float) -> str:
    return f"{100 * level:.10g}%"


def _table(header, rows) -> list[str]:
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    return ["  ".join(str(c).rjust(w) for c, w in zip(r, widths)) for r in [header] + rows]


def render_text(result: AnalysisResult, digits: int = 2, two_sided: bool = False) -> str:
    """Individual and combined results, outer intervals outermost."""
    levels = sorted(result.request.levels, reverse=True)
    est_fmt = f"{{:.{digits}f}}"
    p_fmt = f"{{:.{digits + 3}f}}"
    p_name = "P-value (two-sided)" if two_sided else "P-value"

    def cols(first):
        head = [first]
        head += [f"Lower {_level_name(lv)}" for lv in levels]
        head += ["Estimate"]
        head += [f"Upper {_level_name(lv)}" for lv in reversed(levels)]
        return head + [p_name]

    def row(name, est, intervals, p):
        cells = [name]
        cells += [est_fmt.format(intervals[lv][0]) for lv in levels]
        cells += [est_fmt.format(est)]
        cells += [est_fmt.format(intervals[lv][1]) for lv in reversed(levels)]
        return cells + [p_fmt.format(centrality(p) if two_sided else p)]

    lines = ["INDIVIDUAL RESULTS"]
    lines += _table(cols("Trial"), [row(t.label, t.estimate, t.intervals, t.p_at_null)
                                    for t in result.trials])
    lines += ["", "COMBINED RESULTS"]
    lines += _table(cols("Method"), [row(m.method.label, m.median_estimate, m.intervals,
                                         m.p_at_null) for m in result.methods])
    req = result.request
    lines += ["", "NOTES",
              "Confidence level: " + ", ".join(_level_name(lv) for lv in req.levels),
              f"Null value: {req.null_value:g}",
              f"Alternative: {req.alternative.value}"]
    if two_sided:
        lines.append("P-values are two-sided (centrality at the null value)")
    return "\n".join(lines) + "\n"


def render_csv(result: AnalysisResult) -> str:
    import csv
    import io

    levels = list(result.request.levels)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["kind", "name", "estimate"]
    for lv in levels:
        header += [f"lower_{lv!r}", f"upper_{lv!r}"]
    writer.writerow(header + ["p_one_sided", "p_two_sided"])
    for kind, name, est, intervals, p in (
            [("trial", t.label, t.estimate, t.intervals, t.p_at_null) for t in result.trials]
            + [("method", m.method.value, m.median_estimate, m.intervals, m.p_at_null)
               for m in result.methods]):
        cells = [kind, name, repr(est)]
        for lv in levels:
            cells += [repr(intervals[lv][0]), repr(intervals[lv][1])]
        writer.writerow(cells + [repr(p), repr(centrality(p))])
    return buf.getvalue()


def render_simulation_text(summary: SimSummary, digits: int = 3) -> str:
    s = summary.scenario
    f = f"{{:.{digits}f}}"
    header = ["Method", "Target", "Mean est.", "(SE)", "Bias", "P(est > target)"]
    for lv in s.levels:
        header += [f"Cover {_level_name(lv)}", f"Width {_level_name(lv)}",
                   f"Both {_level_name(lv)}"]
    rows = []
    for m in summary.methods:
        cells = [m.method.label, f.format(m.target), f.format(m.mean_estimate),
                 f.format(m.mean_estimate_se), f.format(m.mean_bias),
                 f.format(m.prob_above_target)]
        for lv in m.levels:
            cells += [f.format(lv.coverage), f.format(lv.mean_width),
                      f.format(lv.covers_all_effects)]
        rows.append(cells)
    lines = ["SIMULATION RESULTS"] + _table(header, rows)
    lines += ["", "NOTES",
              "Effects: " + ", ".join(f"{x:g}" for x in s.effects),
              "Standard errors: " + ", ".join(f"{x:g}" for x in s.std_errs),
              f"Alternative: {s.alternative.value}",
              f"Target: {s.target}",
              f"Replicates: {s.replicates}",
              f"Seed: {s.seed}"]
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_analyze(args) -> int:
    request = _request(args)
    result = analyze(request, _methods(args.methods))
    if args.format == "json":
        text = dumps(result_to_dict(result))
    elif args.format == "csv":
        text = render_csv(result)
    else:
        text = render_text(result, args.digits, args.two_sided)
    _emit(text, args.output)
    return EXIT_OK


def curve_grid(request: AnalysisRequest, mu, methods=None) -> CurveGrid:
    """One-sided p and centrality of every trial and method over ``mu``."""
    request = validate(request)
    mu = np.asarray(mu, dtype=float)
    alt = request.alternative
    one_sided, central = {}, {}
    est = np.array([t.estimate for t in request.trials])
    se = np.array([t.std_err for t in request.trials])
    w = signed_z(est[:, None], se[:, None], mu[None, :], alt)
    for i, row in enumerate(np.atleast_2d(norm_cdf(w))):
        one_sided[f"trial{i + 1}"] = row
    for method in (list(CombinedMethod) if methods is None else methods):
        p = combined_p_arrays(method, est[:, None], se, mu[None, :], alt)
        one_sided[method.value] = np.asarray(p, dtype=float).reshape(-1)
    for name, p in one_sided.items():
        central[name] = tuple(float(c) for c in 2.0 * np.minimum(p, 1.0 - p))
        one_sided[name] = tuple(float(x) for x in p)
    return CurveGrid(mu_grid=tuple(float(x) for x in mu), one_sided=one_sided,
                     centrality=central)


def cmd_curves(args) -> int:
    request = _request(args)
    if args.points < 2:
        raise UsageError("--points must be at least 2")
    centre, spread = pooled(request.trials)
    lo = centre - GRID_HALF_WIDTH * spread if args.from_ is None else args.from_
    hi = centre + GRID_HALF_WIDTH * spread if args.to is None else args.to
    if not lo < hi:
        raise UsageError(f"empty or inverted grid: --from {lo:g} --to {hi:g}")
    grid = curve_grid(request, np.linspace(lo, hi, args.points), _methods(args.methods))
    text = dumps(grid.to_dict()) if args.format == "json" else grid.to_csv()
    _emit(text, args.output)
    return EXIT_OK


def cmd_simulate(args) -> int:
    data = _load_json(_read_text(args.scenario), args.scenario)
    if not isinstance(data, dict):
        raise UsageError(f"{args.scenario}: scenario must be a JSON object")
    for key in ("seed", "replicates"):
        value = getattr(args, key)
        if value is not None:
            data[key] = value
    if args.methods is not None:
        data["methods"] = [m.value for m in _methods(args.methods)]
    if args.level:
        data["levels"] = args.level
    scenario = scenario_from_dict(data)
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    summary = run_simulation(scenario, workers=args.workers)
    if args.format == "csv":
        text = summary.to_csv()
    elif args.format == "text":
        text = render_simulation_text(summary)
    else:
        out = summary.to_dict()
        if args.uniformity:
            ks = null_uniformity(scenario, workers=args.workers)
            out["null_uniformity"] = {m.value: {"ks_statistic": d, "p_value": p}
                                      for m, (d, p) in ks.items()}
        text = dumps(out)
    _emit(text, args.output)
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def _u64(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="combinedp",
        description="Combine the results of two or more trials via p-value functions.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    trials = argparse.ArgumentParser(add_help=False)
    g = trials.add_argument_group("trials")
    g.add_argument("--t1", type=float, help="estimate of trial 1")
    g.add_argument("--se1", type=float, help="standard error of trial 1")
    g.add_argument("--t2", type=float, help="estimate of trial 2")
    g.add_argument("--se2", type=float, help="standard error of trial 2")
    g.add_argument("--input", metavar="PATH",
                   help="CSV (trial,estimate,std_err) or JSON file with the trials")
    g.add_argument("--null", type=float, help="null value (default 0)")
    g.add_argument("--alternative", choices=("greater", "less"),
                   help="direction of the alternative (default greater)")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--level", type=float, action="append",
                        help="confidence level, repeatable (default "
                             + " and ".join(map(str, DEFAULT_LEVELS)) + ")")
    common.add_argument("--methods", metavar="LIST",
                        help="comma-separated methods (default: all six)")
    common.add_argument("--output", metavar="PATH", help="write to PATH instead of stdout")

    p = sub.add_parser("analyze", parents=[trials, common],
                       help="median estimates, intervals and p-values")
    p.add_argument("--digits", type=int, default=2,
                   help="decimals for estimates in text output; p-values get 3 more")
    p.add_argument("--format", choices=("text", "csv", "json"), default="text")
    p.add_argument("--two-sided", action="store_true",
                   help="print two-sided p-values instead of one-sided")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("curves", parents=[trials, common],
                       help="p-value and centrality functions on a grid")
    p.add_argument("--from", dest="from_", type=float, help="grid start")
    p.add_argument("--to", type=float, help="grid end")
    p.add_argument("--points", type=int, default=DEFAULT_POINTS, help="grid size")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo operating characteristics")
    p.add_argument("--scenario", required=True, metavar="PATH", help="scenario JSON file")
    p.add_argument("--seed", type=_u64, help="override the scenario seed")
    p.add_argument("--replicates", type=int, help="override the number of replicates")
    p.add_argument("--workers", type=int, default=1, help="threads (results do not change)")
    p.add_argument("--format", choices=("json", "csv", "text"), default="json")
    p.add_argument("--uniformity", action="store_true",
                   help="add KS tests of the null p-values (identical effects only)")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "digits", 0) < 0:
        parser.error("--digits must be non-negative")
    try:
        return args.func(args)
    except (UsageError, ValidationError, DomainError) as exc:
        print(f"combinedp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InversionError as exc:
        print(f"combinedp {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
