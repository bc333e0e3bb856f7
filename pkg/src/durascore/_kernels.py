"""Compiled inner loops for the score filter.

The recursion is strictly sequential, so the per-observation work lives in
numba-jitted scalar kernels.  The formulas here must agree with the numpy
reference implementations in :mod:`durascore.families`; the test suite
asserts the two paths match to near machine precision.

Status convention: the filter kernels return ``status = -1`` on success and
the 0-based index of the first bad step otherwise.
"""

import math

import numpy as np
from numba import njit

from .families import ALPHA_POISSON_EPS

# scaling codes
UNIT = 0
INVSQRT = 1
INV = 2

# link codes
LOG = 0
IDENTITY = 1

# A time-varying parameter outside this range is treated as divergence:
# squares and products of values beyond it underflow or overflow.
TV_MIN = 1e-150
TV_MAX = 1e150


@njit(cache=True)
def disc_log_pmf(x, mu, alpha, pi):
    if alpha < ALPHA_POISSON_EPS:
        base = -mu + x * math.log(mu) - math.lgamma(x + 1.0)
        logp0 = -mu
    else:
        r = 1.0 / alpha
        am = alpha * mu
        base = (
            math.lgamma(x + r)
            - math.lgamma(x + 1.0)
            - math.lgamma(r)
            - r * math.log1p(am)
            + x * (math.log(am) - math.log1p(am))
        )
        logp0 = -r * math.log1p(am)
    if pi <= 0.0:
        return base
    if x == 0.0:
        a = math.log(pi)
        b = math.log1p(-pi) + logp0
        hi = a if a >= b else b
        lo = b if a >= b else a
        return hi + math.log1p(math.exp(lo - hi))
    return math.log1p(-pi) + base


@njit(cache=True)
def disc_score_mu(x, mu, alpha, pi):
    am1 = alpha * mu + 1.0
    if x > 0.0 or pi <= 0.0:
        return (x - mu) / (mu * am1)
    if alpha < ALPHA_POISSON_EPS:
        k = mu
    else:
        k = math.log1p(alpha * mu) / alpha
    denom = 1.0 + pi * math.expm1(k)
    return (pi - 1.0) / (am1 * denom)


@njit(cache=True)
def disc_fisher_mu(mu, alpha, pi):
    am1 = alpha * mu + 1.0
    base = 1.0 / (mu * am1)
    if pi <= 0.0:
        return base
    if alpha < ALPHA_POISSON_EPS:
        k = mu
    else:
        k = math.log1p(alpha * mu) / alpha
    denom = 1.0 + pi * math.expm1(k)
    return pi * (pi - 1.0) / (am1 * am1 * denom) + (1.0 - pi) * base


@njit(cache=True)
def cont_log_pdf(x, beta, psi, phi):
    if x <= 0.0:
        if x == 0.0 and psi * phi == 1.0:
            return math.log(phi) - math.lgamma(psi) - math.log(beta)
        return -np.inf
    z = x / beta
    return (
        math.log(phi)
        - math.lgamma(psi)
        - math.log(beta)
        + (psi * phi - 1.0) * math.log(z)
        - z**phi
    )


@njit(cache=True)
def cont_score_beta(x, beta, psi, phi):
    return phi / beta * ((x / beta) ** phi - psi)


@njit(cache=True)
def cont_fisher_beta(beta, psi, phi):
    return psi * phi * phi / (beta * beta)


@njit(cache=True)
def _scale(raw, fisher, tv, scaling, link):
    """Scaled score of the reparametrized model at one step.

    For the log link the reparametrized score is ``tv * raw`` and the
    reparametrized information ``tv^2 * fisher``; the three scalings follow.
    """
    if link == LOG:
        if scaling == UNIT:
            return tv * raw
        if fisher <= 0.0 or not math.isfinite(fisher):
            return np.nan
        if scaling == INVSQRT:
            return raw / math.sqrt(fisher)
        d = tv * fisher
        if d <= 0.0 or not math.isfinite(d):
            return np.nan
        return raw / d
    if scaling == UNIT:
        return raw
    if fisher <= 0.0 or not math.isfinite(fisher):
        return np.nan
    if scaling == INVSQRT:
        return raw / math.sqrt(fisher)
    return raw / fisher


@njit(cache=True)
def filter_discrete(xs, c, b, a, alpha, pi, scaling, link, f1):
    n = xs.shape[0]
    f = np.empty(n)
    s = np.empty(n)
    ll = np.empty(n)
    fi = f1
    for i in range(n):
        mu = math.exp(fi) if link == LOG else fi
        if not (TV_MIN < mu < TV_MAX):
            return f, s, ll, np.nan, i
        x = xs[i]
        lli = disc_log_pmf(x, mu, alpha, pi)
        si = _scale(disc_score_mu(x, mu, alpha, pi), disc_fisher_mu(mu, alpha, pi), mu, scaling, link)
        if not (math.isfinite(lli) and math.isfinite(si)):
            return f, s, ll, np.nan, i
        f[i] = fi
        s[i] = si
        ll[i] = lli
        fi = c + b * fi + a * si
        if not math.isfinite(fi):
            return f, s, ll, np.nan, i
    return f, s, ll, fi, -1


@njit(cache=True)
def filter_continuous(xs, c, b, a, psi, phi, scaling, link, f1):
    n = xs.shape[0]
    f = np.empty(n)
    s = np.empty(n)
    ll = np.empty(n)
    fi = f1
    for i in range(n):
        beta = math.exp(fi) if link == LOG else fi
        if not (TV_MIN < beta < TV_MAX):
            return f, s, ll, np.nan, i
        x = xs[i]
        lli = cont_log_pdf(x, beta, psi, phi)
        si = _scale(cont_score_beta(x, beta, psi, phi), cont_fisher_beta(beta, psi, phi), beta, scaling, link)
        if not (math.isfinite(lli) and math.isfinite(si)):
            return f, s, ll, np.nan, i
        f[i] = fi
        s[i] = si
        ll[i] = lli
        fi = c + b * fi + a * si
        if not math.isfinite(fi):
            return f, s, ll, np.nan, i
    return f, s, ll, fi, -1


@njit(cache=True)
def geom_floor_log_pmf(z, t):
    """Geometric log pmf in the exponential clock: ``t = 1/(k * beta)``.

    The mean is ``mu = 1/(e^t - 1)``; the pmf collapses to
    ``exp(-z t) (1 - e^{-t})``.
    """
    return -z * t + math.log(-math.expm1(-t))


@njit(cache=True)
def filter_geom_floor(zs, c, b, a, scale_k, f1):
    """Unit-scaled filter for the geometric model parameterized by the
    exponential scale: ``f = log(beta)``, observations ``z = floor(k x)``.

    In this parameterization the unit-scaled score reduces to
    ``t (z - mu)`` with ``t = 1/(k e^f)`` and ``mu = 1/expm1(t)``.
    """
    n = zs.shape[0]
    f = np.empty(n)
    s = np.empty(n)
    ll = np.empty(n)
    fi = f1
    for i in range(n):
        beta = math.exp(fi)
        if not (TV_MIN < beta < TV_MAX):
            return f, s, ll, np.nan, i
        t = 1.0 / (scale_k * beta)
        z = zs[i]
        if t > 700.0:
            # beta so small that mu underflows: pmf degenerates onto zero
            lli = 0.0 if z == 0.0 else -np.inf
            si = t * z
        else:
            lli = geom_floor_log_pmf(z, t)
            si = t * (z - 1.0 / math.expm1(t))
        if not (math.isfinite(lli) and math.isfinite(si)):
            return f, s, ll, np.nan, i
        f[i] = fi
        s[i] = si
        ll[i] = lli
        fi = c + b * fi + a * si
        if not math.isfinite(fi):
            return f, s, ll, np.nan, i
    return f, s, ll, fi, -1
