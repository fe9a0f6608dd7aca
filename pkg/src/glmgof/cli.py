"""Command-line interface.

Commands: ``fit`` and ``gof`` run on a user CSV; ``simulate`` and
``large-model-study`` drive the Monte Carlo harness. Reports are JSON
(stable key order), with an optional flat CSV of rejection rates for the
simulation commands.

Exit codes: 0 success, 1 file/parse error, 2 fit failure, 3 test failure,
64 precondition violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .errors import GlmGofError
from .families import Family, validate_pair
from .fitting import Dataset, fit_irls
from .gof import ghl_test, hl_classic, naive_ghl, sw_test
from .grouping import equal_count_endpoints, fixed_endpoints, variance_weighted_endpoints
from .simulate import (
    LARGE_MODEL_D_GRID,
    make_setting,
    run_replications,
)

EXIT_OK = 0
EXIT_FILE = 1
EXIT_FIT = 2
EXIT_TEST = 3
EXIT_USAGE = 64

GOF_METHODS = ("ghl", "naive", "hl", "sw")


class UsageError(Exception):
    pass


def _read_csv(path):
    """Strict CSV with a header row; returns (header, list of row lists)."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
    except OSError as exc:
        raise FileNotFoundError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ValueError(f"{path} is empty")
    header = rows[0]
    body = rows[1:]
    width = len(header)
    for i, row in enumerate(body, start=2):
        if len(row) != width:
            raise ValueError(f"{path}:{i}: expected {width} fields, got {len(row)}")
    return header, body


def _numeric_column(name, values):
    out = np.empty(len(values))
    for i, v in enumerate(values):
        try:
            out[i] = float(v)
        except ValueError as exc:
            raise ValueError(f"column {name!r} row {i + 2}: not numeric: {v!r}") from exc
    return out


def _build_design(args, header, body):
    """Assemble (design, response, column names, warnings)."""
    columns = {name: [row[j] for row in body] for j, name in enumerate(header)}
    if args.response not in columns:
        raise UsageError(f"response column {args.response!r} not in header")
    one_hot = set(args.one_hot.split(",")) if args.one_hot else set()
    for c in one_hot:
        if c not in columns:
            raise UsageError(f"one-hot column {c!r} not in header")
    if args.covariates:
        covs = args.covariates.split(",")
        for c in covs:
            if c not in columns:
                raise UsageError(f"covariate column {c!r} not in header")
    else:
        covs = [c for c in header if c != args.response]

    y = _numeric_column(args.response, columns[args.response])
    blocks = []
    names = []
    if args.intercept:
        blocks.append(np.ones(len(y)))
        names.append("(intercept)")
    for c in covs:
        if c in one_hot:
            levels = sorted(set(columns[c]))
            drop = levels[1:] if args.intercept else levels
            for lev in drop:
                blocks.append(np.array([1.0 if v == lev else 0.0
                                        for v in columns[c]]))
                names.append(f"{c}={lev}")
        else:
            blocks.append(_numeric_column(c, columns[c]))
            names.append(c)
    design = np.column_stack(blocks)
    return design, y, names


def _grouping_spec(model, args):
    method = args.grouping
    if method.startswith("fixed:"):
        interior = [float(v) for v in method[len("fixed:"):].split(",")]
        return fixed_endpoints(model, interior)
    if method == "equal-count":
        return equal_count_endpoints(model, args.groups)
    if method == "variance-weighted":
        return variance_weighted_endpoints(model, args.groups)
    raise UsageError(f"unknown grouping method {args.grouping!r}")


def _model_summary(model, names):
    return {
        "beta": {name: float(b) for name, b in zip(names, model.beta)},
        "converged": bool(model.converged),
        "iterations": int(model.iterations),
        "score_norm": float(model.score_norm),
        "log_likelihood": float(model.log_lik),
    }


def _emit(report, output):
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fit_from_args(args):
    header, body = _read_csv(args.input)
    design, y, names = _build_design(args, header, body)
    family = Family(args.family, dispersion=args.dispersion)
    if not args.allow_invalid_pair and not validate_pair(family, args.link):
        raise UsageError(
            f"{args.family}/{args.link} is not a supported pair "
            "(use --allow-invalid-pair to override)"
        )
    data = Dataset(design, y)
    model = fit_irls(data, family, args.link,
                     allow_invalid_pair=args.allow_invalid_pair)
    return model, data, names


def cmd_fit(args) -> int:
    model, data, names = _fit_from_args(args)
    report = {
        "command": "fit",
        "input": args.input,
        "response": args.response,
        "family": args.family,
        "link": args.link,
        "n": data.n,
        "d": data.d,
        "model": _model_summary(model, names),
    }
    _emit(report, args.output)
    return EXIT_OK if model.converged else EXIT_FIT


def cmd_gof(args) -> int:
    methods = args.tests.split(",")
    for m in methods:
        if m not in GOF_METHODS:
            raise UsageError(f"unknown test {m!r}; choose from {GOF_METHODS}")
    if ("naive" in methods or "hl" in methods) and args.groups < 3:
        raise UsageError("naive/classic HL tests need --groups >= 3")
    if args.groups < 2:
        raise UsageError("need --groups >= 2")
    if "sw" in methods and args.reps < 100:
        raise UsageError("the sw test needs --reps >= 100 bootstrap replicates")

    model, data, names = _fit_from_args(args)
    report = {
        "command": "gof",
        "input": args.input,
        "response": args.response,
        "family": args.family,
        "link": args.link,
        "n": data.n,
        "d": data.d,
        "groups_requested": args.groups,
        "grouping": args.grouping,
        "model": _model_summary(model, names),
        "results": [],
        "warnings": [],
    }
    if not model.converged:
        report["warnings"].append("fit did not converge")
        _emit(report, args.output)
        return EXIT_FIT
    if args.groups <= data.d:
        report["warnings"].append(
            f"G = {args.groups} <= d = {data.d}; grouped tests need G > d"
        )

    spec = _grouping_spec(model, args)
    if ("naive" in methods or "hl" in methods) and spec.n_groups < 3:
        raise UsageError("naive/classic HL tests need at least 3 groups")
    report["endpoints"] = [float(e) for e in spec.endpoints[1:-1]]
    report["group_counts"] = [int(c) for c in spec.counts]

    test_failed = False
    for m in methods:
        try:
            if m == "ghl":
                res = ghl_test(model, data, spec)
            elif m == "naive":
                res = naive_ghl(model, spec)
            elif m == "hl":
                res = hl_classic(model, spec)
            else:
                res = sw_test(model, data, n_boot=args.reps, seed=args.seed)
            report["results"].append(res.to_dict())
        except GlmGofError as exc:
            test_failed = True
            report["results"].append({"method": m, "error": str(exc)})
    _emit(report, args.output)
    return EXIT_TEST if test_failed else EXIT_OK


def _parse_config(path):
    """Plain key = value lines; '#' starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key] = value
    return out


_CONFIG_KEYS = {
    "setting": str, "n": int, "reps": int, "groups": int,
    "alpha": float, "seed": int, "tests": str, "threads": int,
    "J": float, "d": int, "output": str, "csv": str,
}

_SIM_DEFAULTS = {
    "setting": None, "n": 100, "reps": 1000, "groups": 10, "alpha": 0.05,
    "seed": 0, "tests": "ghl,naive", "threads": 1, "J": None, "d": None,
    "output": None, "csv": None,
}


def _apply_config(args):
    if not args.config:
        return
    cfg = _parse_config(args.config)
    for key, value in cfg.items():
        if key not in _CONFIG_KEYS:
            raise UsageError(f"unknown config key {key!r}")
        if not hasattr(args, key):
            continue
        # flags the user changed from their default win over the config file
        if getattr(args, key) == _SIM_DEFAULTS.get(key):
            setattr(args, key, _CONFIG_KEYS[key](value))


def _rates_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["setting", "test", "n", "J", "d", "G", "alpha",
                         "evaluated", "rejections", "rate",
                         "wilson_low", "wilson_high", "stat_mean"])
        writer.writerows(rows)


def _result_rows(result):
    s = result.setting
    rows = []
    for name in sorted(result.tests):
        t = result.tests[name]
        rows.append([s.id, name, s.n, "" if s.J is None else s.J,
                     "" if s.d is None else s.d, result.G, result.alpha,
                     t.evaluated, t.rejections, t.rate,
                     t.wilson_low, t.wilson_high, t.stat_mean])
    return rows


def cmd_simulate(args) -> int:
    _apply_config(args)
    if args.setting is None:
        raise UsageError("simulate needs --setting (or a config file)")
    try:
        setting = make_setting(args.setting, n=args.n, J=args.J, d=args.d,
                               seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    tests = tuple(args.tests.split(","))
    result = run_replications(setting, tests, args.reps, args.alpha,
                              args.groups, seed=args.seed,
                              threads=args.threads, sw_boot=args.sw_boot,
                              sw_max_reps=args.sw_max_reps)
    report = {"command": "simulate", **result.to_dict()}
    _emit(report, args.output)
    if args.csv:
        _rates_csv(args.csv, _result_rows(result))
    return EXIT_OK


def cmd_large_model_study(args) -> int:
    _apply_config(args)
    d_list = [int(v) for v in args.d_list.split(",")]
    for d in d_list:
        if d < 2:
            raise UsageError("each d must be >= 2")
        if d not in LARGE_MODEL_D_GRID:
            print(f"note: d = {d} outside the studied grid "
                  f"{LARGE_MODEL_D_GRID}", file=sys.stderr)
    per_d = []
    rows = []
    for d in d_list:
        setting = make_setting("large_model", n=args.n, d=d, seed=args.seed)
        result = run_replications(setting, ("naive", "ghl"), args.reps,
                                  args.alpha, args.groups, seed=args.seed,
                                  threads=args.threads)
        per_d.append({"d": d, **result.to_dict()})
        rows.extend(_result_rows(result))
    report = {"command": "large-model-study", "n": args.n, "G": args.groups,
              "alpha": args.alpha, "seed": args.seed, "reps": args.reps,
              "results": per_d}
    _emit(report, args.output)
    if args.csv:
        _rates_csv(args.csv, rows)
    return EXIT_OK


def _add_data_flags(p):
    p.add_argument("--input", required=True, help="input CSV path")
    p.add_argument("--response", required=True, help="response column name")
    p.add_argument("--covariates", default=None,
                   help="comma-separated covariate columns (default: all others)")
    p.add_argument("--family", default="poisson",
                   help="normal|bernoulli|poisson|gamma|inverse_gaussian|negative_binomial")
    p.add_argument("--link", default="log",
                   help="identity|log|logit|probit|cauchit|cloglog|sqrt")
    p.add_argument("--dispersion", type=float, default=1.0,
                   help="known dispersion (sigma^2, shape, or size)")
    p.add_argument("--intercept", dest="intercept", action="store_true",
                   default=True, help="prepend a constant column (default)")
    p.add_argument("--no-intercept", dest="intercept", action="store_false")
    p.add_argument("--one-hot", default=None,
                   help="comma-separated categorical columns to expand")
    p.add_argument("--allow-invalid-pair", action="store_true",
                   help="fit family/link pairs outside the supported table")
    p.add_argument("--output", default=None, help="write JSON report here")


def _add_sim_flags(p):
    p.add_argument("--n", type=int, default=100, help="sample size")
    p.add_argument("--reps", type=int, default=1000, help="replications")
    p.add_argument("--groups", type=int, default=10, help="number of groups G")
    p.add_argument("--alpha", type=float, default=0.05, help="test level")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads (does not change results)")
    p.add_argument("--output", default=None, help="write JSON report here")
    p.add_argument("--csv", default=None, help="write flat rate table here")
    p.add_argument("--config", default=None,
                   help="key = value config file; explicit flags win")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glmgof",
        description="Global goodness-of-fit tests for GLMs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a GLM to CSV data")
    _add_data_flags(p_fit)

    p_gof = sub.add_parser("gof", help="fit and run goodness-of-fit tests")
    _add_data_flags(p_gof)
    p_gof.add_argument("--tests", default="ghl,naive",
                       help="comma list from ghl,naive,hl,sw")
    p_gof.add_argument("--groups", type=int, default=10)
    p_gof.add_argument("--grouping", default="variance-weighted",
                       help="variance-weighted | equal-count | fixed:<k1,k2,...>")
    p_gof.add_argument("--alpha", type=float, default=0.05)
    p_gof.add_argument("--seed", type=int, default=0,
                       help="seed for bootstrap-based tests")
    p_gof.add_argument("--reps", type=int, default=200,
                       help="bootstrap replicates for the sw test")

    p_sim = sub.add_parser("simulate", help="run a simulation setting")
    p_sim.add_argument("--setting", default=None,
                       help="null_1..null_6, null_1b..null_3b, power_1..power_3, "
                            "power_4_sqrt, power_4_identity, large_model")
    p_sim.add_argument("--J", type=float, default=None, help="deviation index")
    p_sim.add_argument("--d", type=int, default=None,
                       help="parameter count for large_model")
    p_sim.add_argument("--tests", default="ghl,naive",
                       help="comma list from ghl,naive,sw")
    p_sim.add_argument("--sw-boot", type=int, default=200, dest="sw_boot")
    p_sim.add_argument("--sw-max-reps", type=int, default=None,
                       dest="sw_max_reps",
                       help="evaluate sw only on the first K replications")
    _add_sim_flags(p_sim)

    p_lm = sub.add_parser("large-model-study",
                          help="naive vs generalized statistic means across d")
    p_lm.add_argument("--d-list", default="2,10,20,30,40,50", dest="d_list")
    _add_sim_flags(p_lm)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "fit":
            return cmd_fit(args)
        if args.command == "gof":
            return cmd_gof(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        return cmd_large_model_study(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FILE
    except GlmGofError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FIT


if __name__ == "__main__":
    sys.exit(main())
