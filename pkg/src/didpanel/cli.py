"""Command-line interface: one subcommand per estimator family.

Reports go to stdout as JSON (default) or CSV; every report carries a
reproducibility block (seed, config echo, toolkit version).  Exit codes:
0 success, 2 the inputs cannot support the request, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import os
import sys

import numpy as np

from . import __version__, diagnostics, dynamic, lsq, simulate, static
from .errors import (
    DegenerateCovariance,
    DidPanelError,
    MissingProxy,
    NumericalError,
    UserDataError,
)
from .inference import BootstrapSpec, cluster_bootstrap, joint_placebo_test
from .panel import load_csv

SCHEMA_VERSION = 1


def _io_parent():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--input", "-i", required=True, help="input panel CSV")
    p.add_argument("--group-col", default="group", help="group id column name")
    p.add_argument("--time-col", default="time", help="integer time column name")
    p.add_argument("--treatment-col", default="treatment", help="treatment column name")
    p.add_argument("--outcome-col", default="outcome", help="outcome column name")
    p.add_argument("--weight-col", default="weight", help="optional weight column name")
    p.add_argument("--proxy-col", default="proxy", help="optional proxy column name")
    return p


def _out_parent():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--format", choices=("json", "csv"), default="json", help="report format")
    p.add_argument("--output", "-o", default=None, help="output path (default stdout)")
    return p


def _boot_parent():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--bootstrap", type=int, default=0, metavar="B",
                   help="cluster-bootstrap replications (0 disables)")
    p.add_argument("--seed", type=int, default=0, help="bootstrap / simulation seed")
    p.add_argument("--ci-level", type=float, default=0.95, help="confidence level")
    p.add_argument("--threads", type=int, default=None,
                   help="bootstrap worker threads (default $DIDPANEL_THREADS or 1)")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="didpanel",
        description="Panel DID toolkit: TWFE weight diagnostics and "
                    "heterogeneity-robust estimators.",
    )
    parser.add_argument("--version", action="version", version=f"didpanel {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    io, out, boot = _io_parent(), _out_parent(), _boot_parent()

    p = sub.add_parser("weights", parents=[io, out],
                       help="decomposition weights of the static TWFE coefficient")
    p.add_argument("--estimand", choices=("fe", "fd"), default="fe")

    sub.add_parser("bacon", parents=[io, out],
                   help="2x2 DID comparisons behind the TWFE coefficient")

    p = sub.add_parser("eventstudy", parents=[io, out],
                       help="relative-time regression with contamination weights")
    p.add_argument("--leads", type=int, default=None, help="leads K (default: widest observed)")
    p.add_argument("--lags", type=int, default=None, help="lags L (default: widest observed)")
    p.add_argument("--binning", choices=("none", "endpoint"), default="none")
    p.add_argument("--omitted", type=int, default=-1, help="omitted relative time")
    p.add_argument("--weight-detail", action="store_true",
                   help="include per-group contamination weights")

    p = sub.add_parser("didm", parents=[io, out, boot],
                       help="per-unit switcher effect ruling out dynamic effects")
    p.add_argument("--placebos", type=int, default=0)

    p = sub.add_parser("cs", parents=[io, out, boot],
                       help="cohort-horizon DIDs with selectable controls")
    p.add_argument("--control-group", choices=dynamic.CONTROL_RULES, default="never_treated")
    p.add_argument("--max-horizon", type=int, default=None)
    p.add_argument("--placebos", type=int, default=0)

    p = sub.add_parser("impute", parents=[io, out, boot],
                       help="counterfactual-imputation estimator")
    p.add_argument("--trends", choices=("none", "group_linear"), default="none")
    p.add_argument("--leads", type=int, default=0, help="lead placebo count")

    p = sub.add_parser("dynamic", parents=[io, out, boot],
                       help="first-switch event study for general designs")
    p.add_argument("--max-horizon", type=int, default=0)
    p.add_argument("--placebos", type=int, default=0)
    p.add_argument("--horizon-weights", choices=("switcher_cells", "equal"),
                   default="switcher_cells",
                   help="weighting across horizons in the normalized total effect")

    p = sub.add_parser("simulate", parents=[out],
                       help="generate a synthetic panel with known effects")
    p.add_argument("--kind", required=True,
                   choices=("fig1_early_late", "fig2_more_less", "staggered", "parallel_custom"))
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                   help="DGP parameter (repeatable); values parse as JSON when possible")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--panel-out", required=True, help="where to write the generated panel CSV")

    return parser


def _schema(args):
    return {
        "group": args.group_col,
        "time": args.time_col,
        "treatment": args.treatment_col,
        "outcome": args.outcome_col,
        "weight": args.weight_col,
        "proxy": args.proxy_col,
    }


def _load(args):
    return load_csv(args.input, schema=_schema(args))


def _config_echo(args):
    skip = {"subcommand", "func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _report(args, results):
    return {
        "didpanel_version": __version__,
        "schema_version": SCHEMA_VERSION,
        "subcommand": args.subcommand,
        "generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "config": _config_echo(args),
        "seed": getattr(args, "seed", None),
        "results": results,
    }


def _threads(args):
    if getattr(args, "threads", None) is not None:
        return max(1, args.threads)
    return max(1, int(os.environ.get("DIDPANEL_THREADS", "1")))


def _boot_spec(args):
    if getattr(args, "bootstrap", 0):
        return BootstrapSpec(replications=args.bootstrap, seed=args.seed, ci_level=args.ci_level)
    return None


def _jsonify(value):
    if isinstance(value, dict):
        return {str(k): _jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonify(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return None if math.isnan(v) else v
    if isinstance(value, (np.integer,)):
        return int(value)
    if value is None or isinstance(value, (bool, int, str)):
        return value
    return str(value)


def _emit(args, report, csv_rows):
    """Write the report: JSON as one document, CSV as a commented table."""
    if args.format == "json":
        text = json.dumps(_jsonify(report), indent=2) + "\n"
    else:
        header, rows = csv_rows
        lines = [
            f"# didpanel_version={__version__}",
            f"# schema_version={SCHEMA_VERSION}",
            f"# subcommand={report['subcommand']}",
            f"# seed={report['seed']}",
            ",".join(header),
        ]
        for row in rows:
            fields = []
            for v in row:
                if v is None:
                    fields.append("")
                elif isinstance(v, (float, np.floating)):
                    fields.append(repr(float(v)))
                else:
                    fields.append(str(v))
            lines.append(",".join(fields))
        text = "\n".join(lines) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _horizon_rows(result):
    rows = []
    for e in result.placebos:
        rows.append((e.horizon, "placebo", e.estimate, e.se, e.n_treated))
    for e in result.effects:
        rows.append((e.horizon, "effect", e.estimate, e.se, e.n_treated))
    rows.sort(key=lambda r: r[0])
    return rows


def _event_study_results(result):
    out = {
        "effects": [
            {"horizon": e.horizon, "estimate": e.estimate, "se": e.se, "n_treated": e.n_treated}
            for e in result.effects
        ],
        "placebos": [
            {"horizon": e.horizon, "estimate": e.estimate, "se": e.se, "n_treated": e.n_treated}
            for e in result.placebos
        ],
        "gaps": list(result.gaps),
        "placebo_gaps": list(result.placebo_gaps),
    }
    if result.first_stage is not None:
        out["first_stage"] = [{"horizon": h, "estimate": v} for h, v in result.first_stage]
    if result.normalized_effect is not None:
        out["normalized_effect"] = {
            "estimate": result.normalized_effect[0],
            "se": result.normalized_effect[1],
        }
    if result.joint_placebo is not None:
        out["joint_placebo"] = {
            "statistic": result.joint_placebo.statistic,
            "p_value": result.joint_placebo.p_value,
            "rank": result.joint_placebo.rank,
        }
    return out


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def _cmd_weights(args):
    data = _load(args)
    table = diagnostics.static_weights(data, args.estimand)
    try:
        proxy_corr = diagnostics.weight_proxy_correlation(table, data)
    except MissingProxy:
        proxy_corr = None
    time_corr = diagnostics.weight_time_correlation(table, data)
    results = {
        "estimand": table.estimand_kind,
        "positive_count": table.positive_count,
        "negative_count": table.negative_count,
        "positive_sum": table.positive_sum,
        "negative_sum": table.negative_sum,
        "proxy_correlation": proxy_corr,
        "time_correlation": time_corr,
        "entries": [{"group": g, "time": t, "weight": w} for g, t, w in table.entries],
    }
    csv_rows = (
        ["group", "time", "weight"],
        [(g, t, w) for g, t, w in table.entries],
    )
    return results, csv_rows


def _cmd_bacon(args):
    data = _load(args)
    report = diagnostics.decompose_2x2(data)
    results = {
        "beta_fe": report.beta_fe,
        "reconstruction": report.reconstruction,
        "forbidden_share": report.forbidden_share,
        "comparisons": [
            {
                "treated": c.treated, "control": c.control,
                "window_start": c.window[0], "window_end": c.window[1],
                "weight": c.weight, "did": c.did, "kind": c.kind,
            }
            for c in report.comparisons
        ],
    }
    csv_rows = (
        ["treated", "control", "window_start", "window_end", "weight", "did", "kind"],
        [(c.treated, c.control, c.window[0], c.window[1], c.weight, c.did, c.kind)
         for c in report.comparisons],
    )
    return results, csv_rows


def _cmd_eventstudy(args):
    data = _load(args)
    leads, lags = args.leads, args.lags
    if leads is None or lags is None:
        rel = lsq.relative_time(data)
        finite = rel[np.isfinite(rel)]
        if leads is None:
            leads = max(0, -int(finite.min())) if finite.size else 0
        if lags is None:
            lags = max(0, int(finite.max())) if finite.size else 0
    spec = lsq.EventStudySpec(leads=leads, lags=lags, binning=args.binning,
                              omitted_relative_time=args.omitted)
    fit = lsq.fit_event_study(data, spec)
    meta = fit.term_meta or {}
    coef_rows = []
    for name in fit.term_names:
        mode, ell = meta[name]
        entry = {
            "term": name, "horizon": ell, "mode": mode,
            "estimate": fit.coefficients[name], "se": fit.se.get(name),
        }
        table = diagnostics.event_study_weights(data, spec, ell) if mode == "eq" else None
        if table is not None:
            entry["own_weight_sum"] = table.own_sum
            entry["contamination_sums"] = {str(h): s for h, s in table.contamination_sums.items()}
            if args.weight_detail:
                entry["own_weights"] = dict(table.own_weights)
                entry["contamination"] = {
                    str(h): dict(d) for h, d in table.contamination.items()
                }
        coef_rows.append(entry)
    results = {
        "leads": leads, "lags": lags, "binning": args.binning,
        "omitted": args.omitted,
        "dropped_terms": list(fit.dropped_terms),
        "coefficients": coef_rows,
        "n_obs": fit.n_obs, "n_clusters": fit.n_clusters,
    }
    csv_rows = (
        ["term", "horizon", "mode", "estimate", "se"],
        [(r["term"], r["horizon"], r["mode"], r["estimate"], r["se"]) for r in coef_rows],
    )
    return results, csv_rows


def _cmd_didm(args):
    data = _load(args)
    result = static.did_m(data, placebos=args.placebos)
    results = {
        "estimate": result.estimate,
        "n_switching_cells": result.n_switching_cells,
        "per_period": [
            {
                "time": p.time, "did_plus": p.did_plus, "did_minus": p.did_minus,
                "n_switchers_in": p.n_switchers_in, "n_switchers_out": p.n_switchers_out,
            }
            for p in result.per_period
        ],
        "placebos": list(result.placebo_estimates),
    }
    spec = _boot_spec(args)
    if spec is not None:
        def closure(d):
            r = static.did_m(d, placebos=args.placebos)
            return np.array([r.estimate, *r.placebo_estimates])

        boot = cluster_bootstrap(data, closure, spec, threads=_threads(args))
        se = np.atleast_1d(boot.se)
        lo = np.atleast_1d(boot.ci_lower)
        hi = np.atleast_1d(boot.ci_upper)
        results["se"] = float(se[0])
        results["ci"] = [float(lo[0]), float(hi[0])]
        results["placebo_se"] = [float(s) for s in se[1:]]
        results["bootstrap_failures"] = boot.n_failed
        if args.placebos:
            draws = np.atleast_2d(boot.replicates)[:, 1:]
            try:
                jt = joint_placebo_test(np.asarray(result.placebo_estimates), draws)
                results["joint_placebo"] = {
                    "statistic": jt.statistic, "p_value": jt.p_value, "rank": jt.rank,
                }
            except DegenerateCovariance:
                results["joint_placebo"] = None
    csv_rows = (
        ["time", "did_plus", "did_minus", "n_switchers_in", "n_switchers_out"],
        [(p.time, p.did_plus, p.did_minus, p.n_switchers_in, p.n_switchers_out)
         for p in result.per_period],
    )
    return results, csv_rows


def _cmd_cs(args):
    data = _load(args)
    result = dynamic.cohort_event_study(
        data, max_horizon=args.max_horizon, control_rule=args.control_group,
        placebos=args.placebos, bootstrap=_boot_spec(args), threads=_threads(args),
    )
    results = {"control_group": args.control_group, **_event_study_results(result)}
    csv_rows = (
        ["horizon", "kind", "estimate", "se", "n_treated"],
        _horizon_rows(result),
    )
    return results, csv_rows


def _cmd_impute(args):
    data = _load(args)
    result = dynamic.imputation_fit(data, trends=args.trends)
    placebo = dynamic.imputation_placebo(data, args.leads)
    results = {
        "att": result.att,
        "trends": result.trends,
        "n_treated_cells": result.n_treated_cells,
        "by_horizon": [
            {"horizon": e.horizon, "estimate": e.estimate, "n_treated": e.n_treated}
            for e in result.by_horizon
        ],
        "cell_effects": [
            {"group": g, "time": t, "estimate": v}
            for (g, t), v in sorted(result.cell_effects.items(), key=lambda kv: (str(kv[0][0]), kv[0][1]))
        ],
        "placebos": [
            {"lead": k, "estimate": est, "se": se}
            for k, est, se in zip(placebo.leads, placebo.estimates, placebo.se)
        ],
        "dropped_leads": list(placebo.dropped),
    }
    spec = _boot_spec(args)
    if spec is not None:
        def closure(d):
            r = dynamic.imputation_fit(d, trends=args.trends)
            p = dynamic.imputation_placebo(d, args.leads)
            if tuple(p.leads) != tuple(placebo.leads):
                raise UserDataError("replicate lost a lead indicator")
            return np.array([r.att, *p.estimates])

        boot = cluster_bootstrap(data, closure, spec, threads=_threads(args))
        se = np.atleast_1d(boot.se)
        lo, hi = np.atleast_1d(boot.ci_lower), np.atleast_1d(boot.ci_upper)
        results["se"] = float(se[0])
        results["ci"] = [float(lo[0]), float(hi[0])]
        results["placebo_bootstrap_se"] = [float(s) for s in se[1:]]
        results["bootstrap_failures"] = boot.n_failed
        if placebo.leads:
            draws = np.atleast_2d(boot.replicates)[:, 1:]
            try:
                jt = joint_placebo_test(np.asarray(placebo.estimates), draws)
                results["joint_placebo"] = {
                    "statistic": jt.statistic, "p_value": jt.p_value, "rank": jt.rank,
                }
            except DegenerateCovariance:
                results["joint_placebo"] = None
    csv_rows = (
        ["horizon", "estimate", "n_treated"],
        [(e.horizon, e.estimate, e.n_treated) for e in result.by_horizon],
    )
    return results, csv_rows


def _cmd_dynamic(args):
    data = _load(args)
    result = dynamic.first_switch_event_study(
        data, max_horizon=args.max_horizon, placebos=args.placebos,
        bootstrap=_boot_spec(args), threads=_threads(args),
        horizon_weights=args.horizon_weights,
    )
    results = _event_study_results(result)
    csv_rows = (
        ["horizon", "kind", "estimate", "se", "n_treated"],
        _horizon_rows(result),
    )
    return results, csv_rows


def _parse_params(pairs):
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise UserDataError(f"--param expects KEY=VALUE, got {pair!r}")
        key, raw = pair.split("=", 1)
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def _cmd_simulate(args):
    params = _parse_params(args.param)
    if "cohorts" in params and isinstance(params["cohorts"], dict):
        params["cohorts"] = {int(k): int(v) for k, v in params["cohorts"].items()}
    spec = simulate.DgpSpec(kind=args.kind, parameters=params, seed=args.seed)
    data, truth = simulate.generate(spec)
    data.write_csv(args.panel_out)
    results = {
        "kind": args.kind,
        "panel_path": args.panel_out,
        "n_groups": data.n_groups,
        "n_periods": data.n_periods,
        "n_effect_cells": len(truth.cell_effects),
        "att_all_cells": simulate.ground_truth_att(truth) if truth.cell_effects else None,
        "cell_effects": [
            {"group": g, "time": t, "effect": v}
            for (g, t), v in sorted(truth.cell_effects.items(), key=lambda kv: (str(kv[0][0]), kv[0][1]))
        ],
    }
    csv_rows = (
        ["group", "time", "effect"],
        [(g, t, v) for (g, t), v in sorted(truth.cell_effects.items(), key=lambda kv: (str(kv[0][0]), kv[0][1]))],
    )
    return results, csv_rows


_COMMANDS = {
    "weights": _cmd_weights,
    "bacon": _cmd_bacon,
    "eventstudy": _cmd_eventstudy,
    "didm": _cmd_didm,
    "cs": _cmd_cs,
    "impute": _cmd_impute,
    "dynamic": _cmd_dynamic,
    "simulate": _cmd_simulate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        results, csv_rows = _COMMANDS[args.subcommand](args)
    except UserDataError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2
    except NumericalError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 3
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except DidPanelError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 3
    _emit(args, _report(args, results), csv_rows)
    return 0


def entry_point():
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
