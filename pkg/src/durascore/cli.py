"""Command-line interface: clean, fit, forecast, evaluate, compare, simulate.

Every command is deterministic given its config and seed.  Results embed
the library version and a hash of the effective configuration so output
files are traceable to the run that produced them.  Exit codes: 0 success,
2 configuration or validation error, 3 data error, 4 non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys

import numpy as np

from . import __version__
from .estimation import (
    FitOptions,
    FitResult,
    InvertibilityReport,
    StaticParams,
    aic,
    fit,
    log_likelihood,
)
from .evaluation import diebold_mariano, forecast_scores
from .exceptions import (
    DegenerateData,
    DurascoreError,
    EmptyAfterCleaning,
    FilterDiverged,
    IncompatibleObservations,
    MalformedInput,
    NonConvergence,
    ZeroVariance,
)
from .families import CONTINUOUS_TAGS, FAMILY_TAGS, get_family
from .filtering import LINKS, SCALINGS, GasCoefficients
from .pipeline import (
    DEFAULT_EPS,
    SESSION_CLOSE,
    SESSION_OPEN,
    ZERO_TREATMENTS,
    apply_zero_treatment,
    clean,
    durations,
    read_ticks_csv,
)
from .simulation import (
    DEFAULT_ROUNDING_GRID,
    SimDesign,
    rounding_study,
    write_rounding_csv,
    write_rounding_json,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NONCONVERGENCE = 4


def _config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _provenance(config: dict) -> dict:
    return {
        "library_version": __version__,
        "config_hash": _config_hash(config),
        "config": config,
    }


def _write_json(path, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_durations(path) -> np.ndarray:
    values = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            cell = row[0].strip()
            if lineno == 1 and cell and not _is_float(cell):
                continue  # header
            if not cell:
                continue
            if not _is_float(cell):
                raise MalformedInput(f"{path}:{lineno}: not a number: {cell!r}", line=lineno)
            values.append(float(cell))
    if not values:
        raise DegenerateData(f"{path}: no observations")
    return np.array(values)


def _is_float(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def _write_durations(path, values):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["duration"])
        for v in values:
            w.writerow([repr(float(v))])


def _load_config(path) -> dict:
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return cfg


def _merge_config(args, parser_keys, config: dict):
    """Fill argparse values that were left at None from the config file.
    Unknown config keys are errors."""
    unknown = [k for k in config if k not in parser_keys]
    if unknown:
        raise ValueError(f"unknown config key '{unknown[0]}'")
    for key, value in config.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)


def fit_result_to_json(result: FitResult, config: dict) -> dict:
    params = result.params
    payload = _provenance(config)
    payload.update(
        {
            "family": params.family,
            "scaling": params.scaling,
            "link": params.link,
            "params": {n: float(v) for n, v in zip(params.names(), params.values())},
            "std_errors": result.std_errors,
            "loglik": result.loglik,
            "aic": result.aic,
            "n_obs": result.n_obs,
            "converged": result.converged,
            "f1": result.f1,
            "excess_zero_ratio": result.excess_zero_ratio,
            "invertibility": (
                None
                if result.invertibility is None
                else {
                    "condition_a": result.invertibility.condition_a,
                    "condition_b": result.invertibility.condition_b,
                    "satisfied": result.invertibility.satisfied,
                }
            ),
            "optimizer_trace": {
                "nfev_total": result.optimizer_trace.get("nfev_total"),
                "fun": result.optimizer_trace.get("fun"),
                "stages": result.optimizer_trace.get("stages"),
                "max_abs_grad_total": result.optimizer_trace.get("max_abs_grad_total"),
            },
        }
    )
    return payload


def load_fit_json(path) -> FitResult:
    """Reconstruct a fit from its JSON serialization (exact round-trip)."""
    with open(path) as fh:
        doc = json.load(fh)
    fam = get_family(doc["family"])
    p = doc["params"]
    params = StaticParams(
        family=doc["family"],
        scaling=doc["scaling"],
        link=doc["link"],
        coeffs=GasCoefficients(c=p["c"], b=p["b"], a=p["a"]),
        shape={n: p[n] for n in fam.shape_names},
    )
    inv = doc.get("invertibility")
    return FitResult(
        params=params,
        loglik=doc["loglik"],
        aic=doc["aic"],
        std_errors=doc.get("std_errors"),
        n_obs=doc["n_obs"],
        converged=doc["converged"],
        optimizer_trace=doc.get("optimizer_trace") or {},
        invertibility=None
        if inv is None
        else InvertibilityReport(
            condition_a=inv["condition_a"],
            condition_b=inv["condition_b"],
            satisfied=inv["satisfied"],
        ),
        f1=doc["f1"],
        excess_zero_ratio=doc.get("excess_zero_ratio"),
    )


def _model_view(family: str, xs: np.ndarray, eps: float) -> np.ndarray:
    """Data as one model family consumes it: floored counts for discrete
    families, eps-truncated positive reals for continuous ones."""
    fam = get_family(family)
    if fam.discrete:
        return np.floor(xs)
    return np.where(xs < eps, eps, xs)


def _parse_time(text: str) -> float:
    if _is_float(text):
        return float(text)
    parts = text.split(":")
    if len(parts) not in (2, 3) or not all(p.strip() for p in parts):
        raise ValueError(f"unparseable time {text!r}")
    h, m = int(parts[0]), int(parts[1])
    s = float(parts[2]) if len(parts) == 3 else 0.0
    return h * 3600.0 + m * 60.0 + s


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_clean(args) -> int:
    ticks = read_ticks_csv(args.in_path)
    session = (_parse_time(args.session_open), _parse_time(args.session_close))
    cleaned, report = clean(ticks, session=session, exchange_filter=args.exchange)
    series = durations(cleaned)
    if args.treatment != "none":
        series = apply_zero_treatment(series, args.treatment, eps=args.eps)
    _write_durations(args.out, series.values)
    config = {
        "command": "clean",
        "in": str(args.in_path),
        "out": str(args.out),
        "exchange": args.exchange,
        "session_open": args.session_open,
        "session_close": args.session_close,
        "treatment": args.treatment,
        "eps": args.eps,
    }
    if args.report:
        payload = _provenance(config)
        payload["cleaning"] = report.to_dict()
        payload["n_durations"] = int(len(series.values))
        payload["zero_treatment"] = series.zero_treatment
        _write_json(args.report, payload)
    print(
        f"retained {report.total_retained}/{report.total_input} ticks "
        f"({report.retention_ratio:.4f}); wrote {len(series.values)} durations to {args.out}"
    )
    return EXIT_OK


def _cmd_fit(args) -> int:
    x = _read_durations(args.in_path)
    options = FitOptions()
    if args.f1 is not None:
        options.f1 = args.f1
    options.raise_on_nonconvergence = False
    result = fit(x, args.family, scaling=args.scaling, link=args.link, options=options)
    config = {
        "command": "fit",
        "in": str(args.in_path),
        "out": str(args.out),
        "family": args.family,
        "scaling": args.scaling,
        "link": args.link,
        "f1": args.f1,
    }
    _write_json(args.out, fit_result_to_json(result, config))
    fam = get_family(args.family)
    if fam.discrete and "pi" in fam.shape_names and result.params.shape["pi"] < 1e-3:
        print(
            "warning: estimated excess-zero probability is ~0; "
            "the zero-inflated component is not supported by this data",
            file=sys.stderr,
        )
    if not result.converged:
        print(f"fit did not converge; partial result written to {args.out}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    print(
        f"fit {args.family}: loglik={result.loglik:.6f} aic={result.aic:.2f} "
        f"n={result.n_obs}; wrote {args.out}"
    )
    return EXIT_OK


def _cmd_forecast(args) -> int:
    result = load_fit_json(args.fit)
    family = result.params.family
    in_sample = _model_view(family, _read_durations(args.in_path), args.eps)
    raw_new = _read_durations(args.new)
    fam = get_family(family)
    interval = bool(args.interval) and not fam.discrete
    if fam.discrete:
        records = forecast_scores(in_sample, np.floor(raw_new), result)
    else:
        view = _model_view(family, raw_new, args.eps)
        records = forecast_scores(in_sample, view, result, interval=False)
        if interval:
            # score the raw values on the unit-interval grid
            records = [
                type(r)(index=r.index, f_pred=r.f_pred, log_score=ls)
                for r, ls in zip(
                    records,
                    [
                        _interval_ls(fam, r.f_pred, xv, result.params.shape)
                        for r, xv in zip(records, raw_new)
                    ],
                )
            ]
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "f_pred", "log_score"])
        for r in records:
            w.writerow([r.index, repr(r.f_pred), repr(r.log_score)])
    ls = np.array([r.log_score for r in records])
    finite = ls[np.isfinite(ls)]
    config = {
        "command": "forecast",
        "fit": str(args.fit),
        "in": str(args.in_path),
        "new": str(args.new),
        "out": str(args.out),
        "interval": interval,
        "eps": args.eps,
    }
    if args.summary:
        payload = _provenance(config)
        payload.update(
            {
                "mean_log_score": float(np.mean(finite)) if finite.size else None,
                "m": int(ls.size),
                "n_underflow": int(ls.size - finite.size),
            }
        )
        _write_json(args.summary, payload)
    print(f"scored {ls.size} forecasts; mean LS = {np.mean(finite):.6f}; wrote {args.out}")
    return EXIT_OK


def _interval_ls(fam, f_pred, x, shape):
    from .evaluation import interval_log_score

    return interval_log_score(float(x), fam, float(f_pred), shape)


def _cmd_evaluate(args) -> int:
    result = load_fit_json(args.fit)
    x = _model_view(result.params.family, _read_durations(args.in_path), args.eps)
    ll = log_likelihood(x, result.params, f1=result.f1)
    n = len(x)
    fam = get_family(result.params.family)
    config = {
        "command": "evaluate",
        "fit": str(args.fit),
        "in": str(args.in_path),
        "out": str(args.out),
        "eps": args.eps,
    }
    payload = _provenance(config)
    payload.update(
        {
            "family": result.params.family,
            "n_obs": n,
            "loglik": ll,
            "aic": 2.0 * fam.n_params - 2.0 * n * ll,
            "loglik_at_fit": result.loglik,
            "zero_fraction": float(np.mean(x == 0)) if fam.discrete else None,
            "excess_zero_ratio": result.excess_zero_ratio,
        }
    )
    _write_json(args.out, payload)
    print(f"evaluated {result.params.family} on {n} obs: loglik={ll:.6f}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    fits = [load_fit_json(p) for p in args.fits]
    names = [f"{i}_{r.params.family}" for i, r in enumerate(fits)]
    raw_in = _read_durations(args.in_path)
    raw_new = _read_durations(args.new)
    scores = []
    for result in fits:
        family = result.params.family
        fam = get_family(family)
        view_in = _model_view(family, raw_in, args.eps)
        if fam.discrete:
            records = forecast_scores(view_in, np.floor(raw_new), result)
        else:
            records = forecast_scores(view_in, _model_view(family, raw_new, args.eps), result)
            records = [
                type(r)(
                    index=r.index,
                    f_pred=r.f_pred,
                    log_score=_interval_ls(fam, r.f_pred, xv, result.params.shape),
                )
                for r, xv in zip(records, raw_new)
            ]
        scores.append(np.array([r.log_score for r in records]))

    k = len(fits)
    dm = np.full((k, k), 0.0)
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            try:
                dm[i, j] = diebold_mariano(scores[i], scores[j]).statistic
            except ZeroVariance:
                dm[i, j] = 0.0

    mean_ls = [float(np.mean(s[np.isfinite(s)])) for s in scores]
    with open(args.out_csv, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "family", "aic", "mean_ls"] + [f"dm_vs_{n}" for n in names])
        for i, (name, result) in enumerate(zip(names, fits)):
            w.writerow(
                [name, fits[i].params.family, repr(result.aic), repr(mean_ls[i])]
                + [repr(dm[i, j]) for j in range(k)]
            )
    config = {
        "command": "compare",
        "fits": [str(p) for p in args.fits],
        "in": str(args.in_path),
        "new": str(args.new),
        "out_csv": str(args.out_csv),
        "out_json": str(args.out_json),
        "eps": args.eps,
    }
    payload = _provenance(config)
    payload.update(
        {
            "models": [
                {
                    "name": name,
                    "family": result.params.family,
                    "aic": result.aic,
                    "mean_ls": mean_ls[i],
                    "n_underflow": int(np.sum(~np.isfinite(scores[i]))),
                }
                for i, (name, result) in enumerate(zip(names, fits))
            ],
            "dm": {names[i]: {names[j]: dm[i, j] for j in range(k)} for i in range(k)},
        }
    )
    _write_json(args.out_json, payload)
    best = names[int(np.argmin([r.aic for r in fits]))]
    print(f"compared {k} models on {len(raw_new)} forecasts; best AIC: {best}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    rounding = []
    for token in (args.rounding or "0,1,2,none").split(","):
        token = token.strip()
        rounding.append(None if token in ("none", "inf") else int(token))
    models = [m.strip() for m in (args.models or "geometric,exponential").split(",")]
    grid = []
    for model in models:
        for r in rounding:
            if model == "geometric" and r is None:
                continue  # needs a finite precision
            grid.append((model, r))
    design = SimDesign(
        family="exponential",
        coeffs=GasCoefficients(c=args.c, b=args.b, a=args.a),
        n_obs=args.n_obs,
        n_reps=args.reps,
        seed=args.seed,
    )
    reports = rounding_study(design, grid=grid, n_jobs=args.jobs)
    config = {
        "command": "simulate",
        "reps": args.reps,
        "n_obs": args.n_obs,
        "seed": args.seed,
        "c": args.c,
        "b": args.b,
        "a": args.a,
        "rounding": args.rounding,
        "models": args.models,
        "out_csv": str(args.out_csv),
        "out_json": str(args.out_json),
    }
    write_rounding_csv(reports, args.out_csv)
    write_rounding_json(reports, args.out_json, meta=_provenance(config))
    for r in reports:
        tag = f"{r.model[0].upper()}({'inf' if r.rounding is None else r.rounding})"
        print(
            f"{tag}: mae_c={r.mae['c']:.4f} mae_b={r.mae['b']:.4f} "
            f"mae_a={r.mae['a']:.4f} mae_beta={r.mae['beta']:.4f} fail={r.n_fail}"
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="durascore",
        description="Score-driven duration models for zero-inflated count data.",
    )
    parser.add_argument("--version", action="version", version=f"durascore {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_clean = sub.add_parser("clean", help="clean raw ticks and emit durations")
    p_clean.add_argument("--in", dest="in_path", required=True)
    p_clean.add_argument("--out", required=True)
    p_clean.add_argument("--report", default=None, help="cleaning report JSON path")
    p_clean.add_argument("--exchange", default=None)
    p_clean.add_argument("--session-open", dest="session_open", default=None)
    p_clean.add_argument("--session-close", dest="session_close", default=None)
    p_clean.add_argument("--treatment", choices=ZERO_TREATMENTS, default=None)
    p_clean.add_argument("--eps", type=float, default=None)
    p_clean.add_argument("--config", default=None)

    p_fit = sub.add_parser("fit", help="maximum likelihood fit")
    p_fit.add_argument("--in", dest="in_path", required=True)
    p_fit.add_argument("--out", required=True)
    p_fit.add_argument("--family", choices=FAMILY_TAGS, default=None)
    p_fit.add_argument("--scaling", choices=SCALINGS, default=None)
    p_fit.add_argument("--link", choices=LINKS, default=None)
    p_fit.add_argument("--f1", type=float, default=None)
    p_fit.add_argument("--seed", type=int, default=None)
    p_fit.add_argument("--config", default=None)

    p_fc = sub.add_parser("forecast", help="one-step-ahead forecast scores")
    p_fc.add_argument("--fit", required=True)
    p_fc.add_argument("--in", dest="in_path", required=True)
    p_fc.add_argument("--new", required=True, help="out-of-sample durations CSV")
    p_fc.add_argument("--out", required=True)
    p_fc.add_argument("--summary", default=None)
    p_fc.add_argument("--interval", action="store_true", help="interval log scores for continuous families")
    p_fc.add_argument("--eps", type=float, default=DEFAULT_EPS)
    p_fc.add_argument("--config", default=None)

    p_ev = sub.add_parser("evaluate", help="in-sample evaluation of a stored fit")
    p_ev.add_argument("--fit", required=True)
    p_ev.add_argument("--in", dest="in_path", required=True)
    p_ev.add_argument("--out", required=True)
    p_ev.add_argument("--eps", type=float, default=DEFAULT_EPS)
    p_ev.add_argument("--config", default=None)

    p_cmp = sub.add_parser("compare", help="AIC, mean log score, pairwise DM table")
    p_cmp.add_argument("--fits", nargs="+", required=True)
    p_cmp.add_argument("--in", dest="in_path", required=True)
    p_cmp.add_argument("--new", required=True)
    p_cmp.add_argument("--out-csv", dest="out_csv", required=True)
    p_cmp.add_argument("--out-json", dest="out_json", required=True)
    p_cmp.add_argument("--eps", type=float, default=DEFAULT_EPS)
    p_cmp.add_argument("--config", default=None)

    p_sim = sub.add_parser("simulate", help="rounding-bias Monte Carlo study")
    p_sim.add_argument("--out-csv", dest="out_csv", required=True)
    p_sim.add_argument("--out-json", dest="out_json", required=True)
    p_sim.add_argument("--reps", type=int, default=None)
    p_sim.add_argument("--n-obs", dest="n_obs", type=int, default=None)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--rounding", default=None, help="comma list, e.g. 0,1,2,none")
    p_sim.add_argument("--models", default=None, help="comma list of geometric,exponential")
    p_sim.add_argument("--c", type=float, default=None)
    p_sim.add_argument("--b", type=float, default=None)
    p_sim.add_argument("--a", type=float, default=None)
    p_sim.add_argument("--jobs", type=int, default=None)
    p_sim.add_argument("--config", default=None)

    return parser


_DEFAULTS = {
    "clean": {
        "exchange": "N",
        "session_open": "09:30",
        "session_close": "16:00",
        "treatment": "none",
        "eps": DEFAULT_EPS,
    },
    "fit": {"family": "zinb", "scaling": "unit", "link": "log"},
    "simulate": {
        "reps": 200,
        "n_obs": 1000,
        "seed": 1,
        "c": 0.0,
        "b": 0.9,
        "a": 0.1,
        "jobs": 1,
    },
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK

    try:
        if getattr(args, "config", None):
            cfg = _load_config(args.config)
            keys = {k for k in vars(args) if k != "config"}
            _merge_config(args, keys, cfg)
        for key, value in _DEFAULTS.get(args.command, {}).items():
            if getattr(args, key, None) is None:
                setattr(args, key, value)
        handler = {
            "clean": _cmd_clean,
            "fit": _cmd_fit,
            "forecast": _cmd_forecast,
            "evaluate": _cmd_evaluate,
            "compare": _cmd_compare,
            "simulate": _cmd_simulate,
        }[args.command]
        return handler(args)
    except (ValueError, MalformedInput, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (
        EmptyAfterCleaning,
        DegenerateData,
        IncompatibleObservations,
        FilterDiverged,
        FileNotFoundError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except DurascoreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
