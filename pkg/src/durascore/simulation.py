"""Monte-Carlo harness: GAS path simulation and the rounding-bias study.

The study simulates exponential score-driven durations, rounds them down
to a given number of decimal places, and refits either the exponential
model or the geometric model reparametrized through the floor identity
``mu = 1/(exp(1/beta) - 1)`` so both models target the same scale.  Mean
absolute errors of the recovered parameters quantify the rounding bias.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .estimation import FitOptions, default_init, fit, two_stage_minimize
from .exceptions import DegenerateData, FilterDiverged, NonConvergence
from .families import ContinuousFamily, DiscreteFamily, get_family
from .filtering import GasCoefficients, unconditional_value

__all__ = [
    "SimDesign",
    "SimReport",
    "DEFAULT_ROUNDING_GRID",
    "simulate_path",
    "exp_floor_reparam",
    "exp_floor_reparam_inv",
    "fit_exp_floor_geometric",
    "rounding_study",
    "write_rounding_csv",
    "write_rounding_json",
]

logger = logging.getLogger(__name__)

# Returned by exp_floor_reparam when beta is so small that the geometric
# mean underflows; keeps downstream logs finite.
MIN_GEOMETRIC_MU = 1e-300

# Smallest exponential scale the reparametrization evaluates directly.
_BETA_FLOOR = 1e-3

_SIM_RETRIES = 5

DEFAULT_ROUNDING_GRID = (
    ("geometric", 0),
    ("geometric", 1),
    ("geometric", 2),
    ("exponential", 0),
    ("exponential", 1),
    ("exponential", 2),
    ("exponential", None),
)


@dataclass(frozen=True)
class SimDesign:
    """One simulation configuration: the generating family and recursion,
    series length, replication count, rounding regime and seed."""

    family: str
    coeffs: GasCoefficients
    shape: dict = field(default_factory=dict)
    n_obs: int = 1000
    n_reps: int = 1000
    rounding: int | None = None
    seed: int = 0
    scaling: str = "unit"

    def __post_init__(self):
        if self.n_obs < 2:
            raise ValueError("n_obs must be at least 2")
        if self.n_reps < 1:
            raise ValueError("n_reps must be at least 1")
        if self.rounding is not None and self.rounding < 0:
            raise ValueError("rounding must be None or a non-negative integer")


@dataclass
class SimReport:
    """Per-cell outcome of the study: mean absolute errors and mean
    estimates across converged replications, plus the failure count."""

    model: str
    rounding: int | None
    n_reps: int
    n_fail: int
    mae: dict
    mean_est: dict

    @property
    def valid(self) -> bool:
        return self.n_fail <= 0.2 * self.n_reps


def _rep_rng(seed: int, rep: int) -> np.random.Generator:
    # counter-based streams: replication index keys an independent stream
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(rep,)))
    )


def simulate_path(design: SimDesign, rng: np.random.Generator, return_path: bool = False):
    """Generate one series from the score-driven model.

    The recursion is initialized at its unconditional value; each step
    draws from the family at the current parameter, then updates through
    the same scaled score used by the filter.  On the (rare) non-finite
    state the draw is retried with a fresh derived stream.
    """
    fam = get_family(design.family)
    scaling_code = {"unit": _kernels.UNIT, "invsqrt": _kernels.INVSQRT, "inv": _kernels.INV}[
        design.scaling
    ]
    for attempt in range(_SIM_RETRIES):
        try:
            return _simulate_once(design, fam, scaling_code, rng, return_path)
        except FilterDiverged:
            logger.warning(
                "simulated path diverged (attempt %d/%d); re-seeding", attempt + 1, _SIM_RETRIES
            )
            rng = rng.spawn(1)[0]
    raise FilterDiverged(f"simulation diverged {_SIM_RETRIES} times for {design}")


def _simulate_once(design, fam, scaling_code, rng, return_path):
    coeffs = design.coeffs
    f = unconditional_value(coeffs, "log")
    n = design.n_obs
    xs = np.empty(n)
    fs = np.empty(n)
    if isinstance(fam, DiscreteFamily):
        alpha, pi = fam.resolve(design.shape)
        for i in range(n):
            mu = math.exp(f)
            if not (_kernels.TV_MIN < mu < _kernels.TV_MAX):
                raise FilterDiverged("non-finite parameter during simulation", step=i)
            if pi > 0.0 and rng.random() < pi:
                x = 0.0
            elif alpha < 1e-8:
                x = float(rng.poisson(mu))
            else:
                x = float(rng.poisson(rng.gamma(1.0 / alpha, alpha * mu)))
            s = _kernels._scale(
                _kernels.disc_score_mu(x, mu, alpha, pi),
                _kernels.disc_fisher_mu(mu, alpha, pi),
                mu,
                scaling_code,
                _kernels.LOG,
            )
            xs[i] = x
            fs[i] = f
            f = coeffs.c + coeffs.b * f + coeffs.a * s
            if not math.isfinite(f):
                raise FilterDiverged("non-finite state during simulation", step=i)
    elif isinstance(fam, ContinuousFamily):
        psi, phi = fam.resolve(design.shape)
        for i in range(n):
            beta = math.exp(f)
            if not (_kernels.TV_MIN < beta < _kernels.TV_MAX):
                raise FilterDiverged("non-finite parameter during simulation", step=i)
            x = beta * rng.gamma(psi, 1.0) ** (1.0 / phi)
            s = _kernels._scale(
                _kernels.cont_score_beta(x, beta, psi, phi),
                _kernels.cont_fisher_beta(beta, psi, phi),
                beta,
                scaling_code,
                _kernels.LOG,
            )
            xs[i] = x
            fs[i] = f
            f = coeffs.c + coeffs.b * f + coeffs.a * s
            if not math.isfinite(f):
                raise FilterDiverged("non-finite state during simulation", step=i)
    else:  # pragma: no cover
        raise TypeError(f"unsupported family type {type(fam)!r}")
    if return_path:
        return xs, fs
    return xs


# ---------------------------------------------------------------------------
# exponential <-> geometric reparametrization
# ---------------------------------------------------------------------------


def exp_floor_reparam(beta: float) -> float:
    """Geometric mean of the floored exponential: ``mu = 1/(e^(1/beta)-1)``.

    For ``beta`` below 1e-3 the mean underflows; the documented minimum
    :data:`MIN_GEOMETRIC_MU` is returned instead.
    """
    if not (beta > 0 and math.isfinite(beta)):
        raise ValueError(f"beta must be a positive real, got {beta}")
    if beta < _BETA_FLOOR:
        return MIN_GEOMETRIC_MU
    return 1.0 / math.expm1(1.0 / beta)


def exp_floor_reparam_inv(mu: float) -> float:
    """Exponential scale recovering a given geometric mean:
    ``beta = 1/log(1/mu + 1)``."""
    if not (mu > 0 and math.isfinite(mu)):
        raise ValueError(f"mu must be a positive real, got {mu}")
    return 1.0 / math.log1p(1.0 / mu)


# ---------------------------------------------------------------------------
# reparametrized geometric fit
# ---------------------------------------------------------------------------


def fit_exp_floor_geometric(z, decimals: int = 0, options: FitOptions | None = None) -> dict:
    """Fit the geometric score model parameterized by the exponential
    scale: the recursion drives ``f = log(beta)`` while the observations
    ``z = floor(10^decimals * x)`` follow the geometric distribution with
    mean ``1/(exp(1/(10^decimals beta)) - 1)``.

    Returns the recovered coefficients, the implied unconditional scale and
    the mean log likelihood.
    """
    opts = options or FitOptions()
    z = np.asarray(z, dtype=np.float64)
    if np.any(z < 0) or np.any(z != np.floor(z)):
        raise ValueError("observations must be non-negative integers")
    if len(z) < opts.min_obs:
        raise DegenerateData(f"need at least {opts.min_obs} observations, got {len(z)}")
    if np.all(z == z[0]):
        raise DegenerateData("all observations identical")
    k = 10.0**decimals
    mean_z = float(np.mean(z))
    if mean_z <= 0:
        raise DegenerateData("all observations zero")
    beta0 = exp_floor_reparam_inv(mean_z) / k
    f1 = math.log(beta0)
    b0, a0 = 0.95, 0.05
    u0 = np.array([(1.0 - b0) * f1, math.atanh(b0), a0])
    n = len(z)

    def objective(u):
        c, b, a = u[0], math.tanh(u[1]), u[2]
        _, _, ll, _, status = _kernels.filter_geom_floor(z, c, b, a, k, f1)
        if status >= 0:
            return math.inf
        total = float(np.sum(ll))
        return -total / n if math.isfinite(total) else math.inf

    u_hat, fun_hat, trace = two_stage_minimize(objective, u0, opts)
    c, b, a = float(u_hat[0]), math.tanh(u_hat[1]), float(u_hat[2])
    loglik = -fun_hat
    converged = math.isfinite(loglik) and (
        trace["stages"][1]["success"] or trace["stages"][0]["success"]
    )
    beta_unc = math.exp(c / (1.0 - b)) if abs(b) < 1.0 else math.nan
    result = {
        "c": c,
        "b": b,
        "a": a,
        "beta": beta_unc,
        "loglik": loglik,
        "converged": converged,
        "trace": trace,
    }
    if not converged:
        raise NonConvergence("reparametrized geometric fit did not converge", result=result)
    return result


# ---------------------------------------------------------------------------
# rounding study
# ---------------------------------------------------------------------------


def round_down(x, decimals: int | None):
    """Round toward zero at the given decimal precision (None = exact)."""
    if decimals is None:
        return np.asarray(x, dtype=np.float64)
    k = 10.0**decimals
    return np.floor(np.asarray(x, dtype=np.float64) * k) / k


def _fit_cell(model: str, decimals: int | None, x, fit_options: FitOptions):
    if model == "geometric":
        if decimals is None:
            raise ValueError("the geometric cell needs a finite rounding precision")
        k = 10.0**decimals
        z = np.rint(round_down(x, decimals) * k)
        r = fit_exp_floor_geometric(z, decimals, options=fit_options)
        return r["c"], r["b"], r["a"], r["beta"]
    if model == "exponential":
        xd = round_down(x, decimals)
        res = fit(xd, "exponential", options=fit_options)
        c, b, a = res.params.coeffs.c, res.params.coeffs.b, res.params.coeffs.a
        beta_unc = math.exp(c / (1.0 - b)) if abs(b) < 1.0 else math.nan
        return c, b, a, beta_unc
    raise ValueError(f"unknown study model '{model}'")


def _rounding_rep(args):
    rep, design_tuple, grid = args
    family, c, b, a, n_obs, seed = design_tuple
    design = SimDesign(
        family=family, coeffs=GasCoefficients(c, b, a), n_obs=n_obs, n_reps=1, seed=seed
    )
    rng = _rep_rng(seed, rep)
    x = simulate_path(design, rng)
    fit_options = FitOptions(compute_std_errors=False, check_invert=False)
    out = {}
    for model, decimals in grid:
        try:
            est = _fit_cell(model, decimals, x, fit_options)
            if not all(math.isfinite(v) for v in est):
                est = None
        except (NonConvergence, DegenerateData, FilterDiverged):
            est = None
        out[(model, decimals)] = est
    return rep, out


def rounding_study(
    design: SimDesign, grid=None, n_jobs: int = 1, progress: bool = False
) -> list[SimReport]:
    """Run the rounding-bias experiment over a model/precision grid.

    Each replication simulates one path from ``design`` (the exponential
    truth), then every cell sees the same path rounded at its precision.
    Replications failing to converge are excluded from the MAEs and
    counted; a cell with more than 20% failures is flagged invalid.
    """
    grid = tuple(grid) if grid is not None else DEFAULT_ROUNDING_GRID
    truth = {
        "c": design.coeffs.c,
        "b": design.coeffs.b,
        "a": design.coeffs.a,
        "beta": unconditional_value(design.coeffs, "log", original_scale=True),
    }
    design_tuple = (
        design.family,
        design.coeffs.c,
        design.coeffs.b,
        design.coeffs.a,
        design.n_obs,
        design.seed,
    )
    args = [(rep, design_tuple, grid) for rep in range(design.n_reps)]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_rounding_rep, args, chunksize=8))
    else:
        results = [_rounding_rep(a) for a in args]
    results.sort(key=lambda t: t[0])

    reports = []
    names = ("c", "b", "a", "beta")
    for cell in grid:
        ests = [r[1][cell] for r in results]
        ok = np.array([e for e in ests if e is not None], dtype=np.float64)
        n_fail = sum(1 for e in ests if e is None)
        if ok.size:
            mae = {
                name: float(np.mean(np.abs(ok[:, j] - truth[name])))
                for j, name in enumerate(names)
            }
            mean_est = {name: float(np.mean(ok[:, j])) for j, name in enumerate(names)}
        else:
            mae = {name: math.nan for name in names}
            mean_est = {name: math.nan for name in names}
        reports.append(
            SimReport(
                model=cell[0],
                rounding=cell[1],
                n_reps=design.n_reps,
                n_fail=n_fail,
                mae=mae,
                mean_est=mean_est,
            )
        )
        if progress:
            logger.info("cell %s(%s): mae=%s fail=%d", cell[0], cell[1], reports[-1].mae, n_fail)
    return reports


def write_rounding_csv(reports: list[SimReport], path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "rounding", "mae_c", "mae_b", "mae_a", "mae_beta", "n_fail"])
        for r in reports:
            w.writerow(
                [
                    r.model,
                    "none" if r.rounding is None else r.rounding,
                    repr(r.mae["c"]),
                    repr(r.mae["b"]),
                    repr(r.mae["a"]),
                    repr(r.mae["beta"]),
                    r.n_fail,
                ]
            )


def write_rounding_json(reports: list[SimReport], path, meta: dict | None = None):
    payload = {
        "cells": [
            {
                "model": r.model,
                "rounding": r.rounding,
                "n_reps": r.n_reps,
                "n_fail": r.n_fail,
                "valid": r.valid,
                "mae": r.mae,
                "mean_est": r.mean_est,
            }
            for r in reports
        ]
    }
    if meta:
        payload.update(meta)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
