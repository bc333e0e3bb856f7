"""Out-of-sample forecast scoring and model comparison.

One-step-ahead predictive log scores come from running the fitted filter
through the estimation window and onward over the validation window with
frozen parameters.  Continuous models are made comparable to discrete ones
by scoring the probability of the unit interval containing the realized
value.  Score sequences are compared with the Diebold-Mariano statistic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimation import FitResult
from .exceptions import ZeroVariance
from .families import ContinuousFamily, get_family
from .filtering import run_filter

__all__ = [
    "ForecastRecord",
    "DmResult",
    "forecast_scores",
    "interval_log_score",
    "diebold_mariano",
]


@dataclass(frozen=True)
class ForecastRecord:
    """One out-of-sample step: position in the validation window, predicted
    link-scale parameter, and the predictive log score."""

    index: int
    f_pred: float
    log_score: float


@dataclass(frozen=True)
class DmResult:
    """Diebold-Mariano comparison: ``statistic = sqrt(m) mean / sd`` of the
    score differences.  ``n_excluded`` counts non-finite score pairs dropped
    before the statistic was formed."""

    statistic: float
    mean_diff: float
    sd_diff: float
    m: int
    n_excluded: int = 0


def forecast_scores(
    in_sample, out_sample, fit: FitResult, interval: bool = False
) -> list[ForecastRecord]:
    """Predictive log scores over the validation window.

    The filter runs over the concatenated series with the fitted
    parameters, seeding the validation window from the last in-sample
    state.  With ``interval=True`` a continuous family is scored on the
    probability of the unit interval around each realized value instead of
    its density.
    """
    out = np.asarray(out_sample, dtype=np.float64)
    if out.size == 0:
        raise ValueError("out_sample must be non-empty")
    xs = np.concatenate([np.asarray(in_sample, dtype=np.float64), out])
    params = fit.params
    path = run_filter(
        xs, params.family, params.scaling, params.link, params.coeffs, params.shape, f1=fit.f1
    )
    n = len(xs) - len(out)
    fam = get_family(params.family)
    records = []
    for j in range(len(out)):
        f_pred = float(path.f[n + j])
        if interval and isinstance(fam, ContinuousFamily):
            ls = interval_log_score(out[j], fam, f_pred, params.shape)
        else:
            ls = float(path.loglik_terms[n + j])
        records.append(ForecastRecord(index=j, f_pred=f_pred, log_score=ls))
    return records


def interval_log_score(x, family, f_pred: float, shape=None) -> float:
    """Log predictive probability of the unit interval containing ``x``:
    ``log P(floor(x) < X <= floor(x) + 1)`` under a continuous family.

    Returns ``-inf`` when the interval probability underflows; callers
    decide whether to exclude such steps.
    """
    fam = get_family(family) if isinstance(family, str) else family
    if not isinstance(fam, ContinuousFamily):
        raise ValueError("interval_log_score applies to continuous families only")
    if not (x >= 0 and math.isfinite(x)):
        raise ValueError(f"x must be a non-negative real, got {x}")
    tv = math.exp(f_pred)
    lo = math.floor(x)
    hi = lo + 1.0
    p = float(fam.cdf(hi, tv, shape) - fam.cdf(lo, tv, shape))
    if p <= 0.0:
        return -math.inf
    return math.log(min(p, 1.0))


def diebold_mariano(ls_a, ls_b) -> DmResult:
    """Equal-predictive-accuracy statistic for two log score sequences.

    Non-finite score pairs are excluded (and counted) rather than allowed
    to dominate the mean; raises :class:`ZeroVariance` when the remaining
    differences have no spread.
    """
    a = np.asarray(ls_a, dtype=np.float64)
    b = np.asarray(ls_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("score sequences must be one-dimensional and of equal length")
    keep = np.isfinite(a) & np.isfinite(b)
    n_excluded = int(a.size - keep.sum())
    d = a[keep] - b[keep]
    m = int(d.size)
    if m < 2:
        raise ValueError(f"need at least 2 finite score pairs, got {m}")
    mean = float(np.mean(d))
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        raise ZeroVariance("score differences have zero sample variance")
    return DmResult(
        statistic=math.sqrt(m) * mean / sd,
        mean_diff=mean,
        sd_diff=sd,
        m=m,
        n_excluded=n_excluded,
    )
