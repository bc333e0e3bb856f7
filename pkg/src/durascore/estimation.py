"""Maximum likelihood estimation of the score-driven duration model.

The static parameter vector (family shapes plus the recursion coefficients
c, b, a) is estimated by maximizing the mean per-observation log
likelihood over a smooth unconstrained reparametrization, using a
Nelder-Mead stage to localize and a BFGS stage with central-difference
gradients to polish.  Standard errors come from the observed information
(numerical Hessian) mapped back through the transforms by the delta
method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from .exceptions import (
    BoxDegenerate,
    DegenerateData,
    FilterDiverged,
    HessianNotPD,
    NonConvergence,
)
from .families import ALPHA_POISSON_EPS, DiscreteFamily, Family, get_family
from .filtering import GasCoefficients, default_f1, run_filter

__all__ = [
    "StaticParams",
    "InvertibilityReport",
    "FitOptions",
    "FitResult",
    "log_likelihood",
    "fit",
    "standard_errors",
    "check_invertibility",
    "aic",
    "default_init",
]


@dataclass(frozen=True)
class StaticParams:
    """Full static parameterization of one model: family, scaling, link,
    recursion coefficients and family shape parameters."""

    family: str
    scaling: str
    link: str
    coeffs: GasCoefficients
    shape: dict = field(default_factory=dict)

    def names(self) -> list[str]:
        fam = get_family(self.family)
        return list(fam.shape_names) + ["c", "b", "a"]

    def values(self) -> np.ndarray:
        vals = [self.shape[n] for n in get_family(self.family).shape_names]
        return np.array(vals + [self.coeffs.c, self.coeffs.b, self.coeffs.a])


@dataclass(frozen=True)
class InvertibilityReport:
    """Sufficient-condition check for exponentially fast forgetting of the
    filter initialization.  ``condition_a`` must be below one and
    ``condition_b`` negative; the condition is sufficient, not necessary."""

    condition_a: float
    condition_b: float
    satisfied: bool


@dataclass
class FitOptions:
    nm_budget_per_dim: int = 500
    nm_xatol: float = 1e-6
    nm_fatol: float = 1e-10
    bfgs_maxiter: int = 200
    bfgs_gtol: float = 1e-7
    grad_step: float = 1e-6
    hess_step: float = 1e-4
    min_obs: int = 10
    f1: float | None = None
    compute_std_errors: bool = True
    check_invert: bool = True
    raise_on_nonconvergence: bool = True


@dataclass
class FitResult:
    params: StaticParams
    loglik: float
    aic: float
    std_errors: dict | None
    n_obs: int
    converged: bool
    optimizer_trace: dict
    invertibility: InvertibilityReport | None
    f1: float
    excess_zero_ratio: float | None = None

    @property
    def n_free_params(self) -> int:
        return get_family(self.params.family).n_params


# ---------------------------------------------------------------------------
# unconstrained reparametrization
# ---------------------------------------------------------------------------

_LOG_NAMES = ("alpha", "psi", "phi")


def _to_unconstrained(name: str, value: float) -> float:
    if name in _LOG_NAMES:
        return math.log(max(value, 1e-300))
    if name == "pi":
        return float(logit(min(max(value, 1e-12), 1.0 - 1e-12)))
    if name == "b":
        return math.atanh(min(max(value, -1.0 + 1e-12), 1.0 - 1e-12))
    return value


def _to_natural(name: str, u: float) -> float:
    if name in _LOG_NAMES:
        return math.exp(u)
    if name == "pi":
        return float(expit(u))
    if name == "b":
        return math.tanh(u)
    return u


def _dnatural_du(name: str, natural: float) -> float:
    if name in _LOG_NAMES:
        return natural
    if name == "pi":
        return natural * (1.0 - natural)
    if name == "b":
        return 1.0 - natural * natural
    return 1.0


def _vector_to_params(u, names, family, scaling, link) -> StaticParams:
    natural = {n: _to_natural(n, ui) for n, ui in zip(names, u)}
    shape = {n: natural[n] for n in names if n not in ("c", "b", "a")}
    return StaticParams(
        family=family,
        scaling=scaling,
        link=link,
        coeffs=GasCoefficients(c=natural["c"], b=natural["b"], a=natural["a"]),
        shape=shape,
    )


def _params_to_vector(params: StaticParams) -> np.ndarray:
    return np.array(
        [_to_unconstrained(n, v) for n, v in zip(params.names(), params.values())]
    )


# ---------------------------------------------------------------------------
# likelihood
# ---------------------------------------------------------------------------


def log_likelihood(observations, params: StaticParams, f1: float | None = None) -> float:
    """Mean per-observation log likelihood under the filtered parameter.

    Filter divergence maps to ``-inf`` so optimizers retreat; invalid
    static parameters raise, distinguishing domain errors from divergence.
    """
    try:
        path = run_filter(
            observations,
            params.family,
            params.scaling,
            params.link,
            params.coeffs,
            params.shape,
            f1=f1,
        )
    except FilterDiverged:
        return -math.inf
    return path.mean_loglik


def default_init(observations, family) -> StaticParams:
    """Data-driven starting point: high persistence, small score loading,
    constant matched to the sample mean, shapes from method of moments."""
    fam: Family = get_family(family) if isinstance(family, str) else family
    x = np.asarray(observations, dtype=np.float64)
    mean = float(np.mean(x))
    var = float(np.var(x))
    b0, a0 = 0.95, 0.05
    c0 = (1.0 - b0) * math.log(max(mean, 0.1))
    shape: dict[str, float] = {}
    if fam.discrete:
        alpha_eff = fam.fixed_alpha
        if "alpha" in fam.shape_names:
            alpha_mom = (var / mean - 1.0) / mean if mean > 0 else 1.0
            shape["alpha"] = float(np.clip(alpha_mom, 1e-3, 100.0))
            alpha_eff = shape["alpha"]
        if "pi" in fam.shape_names:
            zero_frac = float(np.mean(x == 0))
            if alpha_eff < ALPHA_POISSON_EPS:
                p0 = math.exp(-mean)
            else:
                p0 = math.exp(-math.log1p(alpha_eff * mean) / alpha_eff)
            shape["pi"] = float(np.clip(zero_frac - p0, 0.05, 0.90))
    else:
        if "psi" in fam.shape_names:
            shape["psi"] = 1.0
        if "phi" in fam.shape_names:
            shape["phi"] = 1.0
    return StaticParams(
        family=fam.tag,
        scaling="unit",
        link="log",
        coeffs=GasCoefficients(c=c0, b=b0, a=a0),
        shape=shape,
    )


# ---------------------------------------------------------------------------
# two-stage optimizer
# ---------------------------------------------------------------------------


class _Tracker:
    """Objective wrapper recording the best iterate ever evaluated, so the
    returned optimum never regresses below the initialization."""

    def __init__(self, fun):
        self.fun = fun
        self.nfev = 0
        self.best_u = None
        self.best_val = math.inf

    def __call__(self, u):
        self.nfev += 1
        if not np.all(np.isfinite(u)):
            return math.inf
        val = self.fun(u)
        if not math.isfinite(val):
            return math.inf
        if val < self.best_val:
            self.best_val = val
            self.best_u = np.array(u, dtype=np.float64)
        return val


def _central_gradient(fun, u, rel_step):
    if not np.all(np.isfinite(u)):
        return np.full_like(u, np.nan)
    g = np.empty_like(u)
    for i in range(len(u)):
        h = rel_step * max(1.0, abs(u[i]))
        up = u.copy()
        um = u.copy()
        up[i] += h
        um[i] -= h
        g[i] = (fun(up) - fun(um)) / (2.0 * h)
    return g


def two_stage_minimize(fun, u0, options: FitOptions):
    """Nelder-Mead localization followed by BFGS polishing with
    central-difference gradients; returns the best iterate seen.

    Returns ``(u_hat, fun_hat, trace)`` where trace summarizes both stages.
    """
    tracker = _Tracker(fun)
    dim = len(u0)
    nm = minimize(
        tracker,
        u0,
        method="Nelder-Mead",
        options={
            "maxfev": options.nm_budget_per_dim * dim,
            "xatol": options.nm_xatol,
            "fatol": options.nm_fatol,
        },
    )
    start = tracker.best_u if tracker.best_u is not None else np.asarray(u0, dtype=float)
    bfgs = minimize(
        tracker,
        start,
        method="BFGS",
        jac=lambda u: _central_gradient(tracker, u, options.grad_step),
        options={"maxiter": options.bfgs_maxiter, "gtol": options.bfgs_gtol},
    )
    u_hat = tracker.best_u if tracker.best_u is not None else np.asarray(u0, dtype=float)
    trace = {
        "stages": [
            {"stage": "nelder-mead", "nfev": int(nm.nfev), "fun": float(nm.fun), "success": bool(nm.success)},
            {"stage": "bfgs", "nfev": int(bfgs.nfev), "fun": float(bfgs.fun), "success": bool(bfgs.success)},
        ],
        "nfev_total": tracker.nfev,
        "fun": float(tracker.best_val),
    }
    return u_hat, tracker.best_val, trace


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------


def fit(
    observations,
    family,
    scaling: str = "unit",
    link: str = "log",
    init: StaticParams | None = None,
    options: FitOptions | None = None,
) -> FitResult:
    """Estimate the model by maximum likelihood.

    Raises :class:`DegenerateData` for uninformative series and
    :class:`NonConvergence` (carrying the partial result) when the reported
    optimum fails the stationarity check.
    """
    opts = options or FitOptions()
    fam: Family = get_family(family) if isinstance(family, str) else family
    x = fam.validate_obs(observations)
    n = len(x)
    if n < opts.min_obs:
        raise DegenerateData(f"need at least {opts.min_obs} observations, got {n}")
    if np.all(x == x[0]):
        raise DegenerateData("all observations identical; dynamics not identifiable")

    start = init if init is not None else default_init(x, fam)
    if start.family != fam.tag:
        raise ValueError(f"init is for family '{start.family}', fitting '{fam.tag}'")
    names = start.names()
    f1 = opts.f1 if opts.f1 is not None else default_f1(x, link=link)

    def objective(u):
        params = _vector_to_params(u, names, fam.tag, scaling, link)
        ll = log_likelihood(x, params, f1=f1)
        return -ll if math.isfinite(ll) else math.inf

    u0 = _params_to_vector(start)
    u_hat, fun_hat, trace = two_stage_minimize(objective, u0, opts)
    params_hat = _vector_to_params(u_hat, names, fam.tag, scaling, link)
    loglik = -fun_hat

    # stationarity check on the total log likelihood
    g = _central_gradient(lambda u: objective(u) * n, u_hat, opts.grad_step)
    grad_ok = bool(np.all(np.isfinite(g))) and float(np.max(np.abs(g))) < 1e-4 * max(
        1.0, abs(n * loglik)
    )
    converged = grad_ok and math.isfinite(loglik)
    trace["max_abs_grad_total"] = float(np.max(np.abs(g))) if np.all(np.isfinite(g)) else math.inf

    aic_value = 2.0 * fam.n_params - 2.0 * n * loglik

    std_errors = None
    if converged and opts.compute_std_errors:
        try:
            std_errors = standard_errors(x, params_hat, f1=f1, hess_step=opts.hess_step)
        except HessianNotPD:
            std_errors = None

    invertibility = None
    if opts.check_invert and fam.discrete:
        positive = x[x > 0]
        alpha_hat = params_hat.shape.get("alpha", fam.fixed_alpha)
        if alpha_hat > 0 and positive.size > 0:
            invertibility = check_invertibility(params_hat, positive)

    excess_zero_ratio = None
    if isinstance(fam, DiscreteFamily) and fam.zero_inflated and converged:
        excess_zero_ratio = _excess_zero_ratio(x, params_hat, f1)

    result = FitResult(
        params=params_hat,
        loglik=loglik,
        aic=aic_value,
        std_errors=std_errors,
        n_obs=n,
        converged=converged,
        optimizer_trace=trace,
        invertibility=invertibility,
        f1=f1,
        excess_zero_ratio=excess_zero_ratio,
    )
    if not converged and opts.raise_on_nonconvergence:
        raise NonConvergence(
            "optimizer failed the stationarity check "
            f"(max |grad| = {trace['max_abs_grad_total']:.3g})",
            result=result,
        )
    return result


def _excess_zero_ratio(x, params: StaticParams, f1: float) -> float:
    """Fraction of zeros attributed to the inflation component:
    ``pi / mean_i P(X = 0 | f_i)`` along the filtered path."""
    path = run_filter(
        x, params.family, params.scaling, params.link, params.coeffs, params.shape, f1=f1
    )
    fam = get_family(params.family)
    mu = np.exp(path.f) if params.link == "log" else path.f
    alpha, pi = fam.resolve(params.shape)
    if alpha < ALPHA_POISSON_EPS:
        log_p0_nb = -mu
    else:
        log_p0_nb = -np.log1p(alpha * mu) / alpha
    p0 = pi + (1.0 - pi) * np.exp(log_p0_nb)
    return float(pi / np.mean(p0))


# ---------------------------------------------------------------------------
# standard errors
# ---------------------------------------------------------------------------


def _numerical_hessian(fun, u, rel_step):
    d = len(u)
    h = rel_step * np.maximum(1.0, np.abs(u))
    f0 = fun(u)
    H = np.empty((d, d))
    for i in range(d):
        up = u.copy()
        um = u.copy()
        up[i] += h[i]
        um[i] -= h[i]
        H[i, i] = (fun(up) - 2.0 * f0 + fun(um)) / h[i] ** 2
        for j in range(i + 1, d):
            upp = u.copy()
            upm = u.copy()
            ump = u.copy()
            umm = u.copy()
            upp[[i, j]] += [h[i], h[j]]
            upm[i] += h[i]
            upm[j] -= h[j]
            ump[i] -= h[i]
            ump[j] += h[j]
            umm[[i, j]] -= [h[i], h[j]]
            H[i, j] = H[j, i] = (fun(upp) - fun(upm) - fun(ump) + fun(umm)) / (
                4.0 * h[i] * h[j]
            )
    return H


def standard_errors(
    observations, params_hat: StaticParams, f1: float | None = None, hess_step: float = 1e-4
) -> dict:
    """Delta-method standard errors from the observed information.

    The Hessian of the total negative log likelihood is taken in the
    unconstrained parameter space; raises :class:`HessianNotPD` when it is
    not positive definite.
    """
    fam = get_family(params_hat.family)
    x = fam.validate_obs(observations)
    n = len(x)
    names = params_hat.names()
    if f1 is None:
        f1 = default_f1(x, link=params_hat.link)

    def neg_total(u):
        params = _vector_to_params(u, names, params_hat.family, params_hat.scaling, params_hat.link)
        ll = log_likelihood(x, params, f1=f1)
        return -n * ll if math.isfinite(ll) else math.inf

    u_hat = _params_to_vector(params_hat)
    H = _numerical_hessian(neg_total, u_hat, hess_step)
    if not np.all(np.isfinite(H)):
        raise HessianNotPD("observed information could not be evaluated")
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        raise HessianNotPD("observed information is not positive definite") from None
    cov = np.linalg.inv(L.T) @ np.linalg.inv(L)
    se_u = np.sqrt(np.diag(cov))
    natural = params_hat.values()
    return {
        name: float(abs(_dnatural_du(name, nat)) * se)
        for name, nat, se in zip(names, natural, se_u)
    }


# ---------------------------------------------------------------------------
# invertibility diagnostic
# ---------------------------------------------------------------------------


def check_invertibility(
    params: StaticParams,
    positive_obs_sample,
    param_box: Mapping[str, tuple[float, float]] | None = None,
) -> InvertibilityReport:
    """Evaluate the sufficient invertibility restrictions over a parameter
    box (a point box at the estimates by default).

    The first restriction bounds the zero-branch contraction, the second is
    an empirical expectation over the positive observations.  Requires a
    strictly positive dispersion floor; reported, never enforced.
    """
    fam = get_family(params.family)
    values = dict(zip(params.names(), params.values()))
    alpha_pt = values.get("alpha", fam.fixed_alpha if fam.discrete else None)
    if alpha_pt is None:
        raise BoxDegenerate(f"family '{params.family}' has no dispersion parameter")
    pi_pt = values.get("pi", 0.0)

    box = dict(param_box) if param_box is not None else {}
    alpha_lo, alpha_hi = box.get("alpha", (alpha_pt, alpha_pt))
    pi_lo, _ = box.get("pi", (pi_pt, pi_pt))
    _, b_hi_raw = box.get("b", (values["b"], values["b"]))
    a_bounds = box.get("a", (values["a"], values["a"]))

    if alpha_lo <= 0:
        raise BoxDegenerate("invertibility bounds require a strictly positive dispersion floor")
    x = np.asarray(positive_obs_sample, dtype=np.float64)
    if x.size == 0 or np.any(x <= 0):
        raise ValueError("positive_obs_sample must be non-empty and strictly positive")

    # the restrictions are derived for positive a, b; |.| covers sign-flipped
    # estimates conservatively
    a_plus = max(abs(a_bounds[0]), abs(a_bounds[1]))
    b_plus = abs(b_hi_raw)

    condition_a = (
        a_plus * (pi_lo - 1.0) ** 2 / (2.0 * alpha_lo)
        + a_plus * abs(pi_lo - 1.0) / alpha_lo**2
        + b_plus
    )
    with np.errstate(divide="ignore"):
        condition_b = float(
            np.mean(np.log(a_plus * (alpha_hi * x + 1.0) / (4.0 * alpha_lo) + b_plus))
        )
    return InvertibilityReport(
        condition_a=float(condition_a),
        condition_b=condition_b,
        satisfied=bool(condition_a < 1.0 and condition_b < 0.0),
    )


def aic(fit_result: FitResult) -> float:
    """Akaike information criterion ``2 q - 2 n L`` with ``L`` the mean
    per-observation log likelihood."""
    q = fit_result.n_free_params
    return 2.0 * q - 2.0 * fit_result.n_obs * fit_result.loglik
