"""Observation distributions for duration counts and positive durations.

Discrete families (Poisson, geometric, negative binomial and their
zero-inflated variants) share the NB2 core: mean ``mu``, variance
``mu * (1 + alpha * mu)``, with ``alpha = 0`` the Poisson limit and
``alpha = 1`` the geometric case.  Zero inflation mixes in a point mass
``pi`` at zero.  Continuous families (exponential, Weibull, gamma,
generalized gamma) share the three-parameter generalized gamma core with
scale ``beta`` and shapes ``psi``, ``phi``.

Every family exposes the same surface: log mass/density, the analytic
score in the time-varying parameter (``mu`` or ``beta``), the Fisher
information in that parameter, moments, and exact sampling.  The filter
and the estimator are written against this surface and never branch on
the family themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.special import gammaln, gammainc

from .exceptions import IncompatibleObservations

__all__ = [
    "ALPHA_POISSON_EPS",
    "NbParams",
    "ZinbParams",
    "GenGammaParams",
    "nb_log_pmf",
    "nb_score_mu",
    "nb_fisher_mu",
    "zinb_log_pmf",
    "zinb_score_mu",
    "zinb_fisher_mu",
    "zinb_moments",
    "zinb_sample",
    "gengamma_log_pdf",
    "gengamma_score_beta",
    "gengamma_fisher_beta",
    "Family",
    "DiscreteFamily",
    "ContinuousFamily",
    "FAMILY_TAGS",
    "DISCRETE_TAGS",
    "CONTINUOUS_TAGS",
    "get_family",
]

# Below this dispersion the NB2 formulas are evaluated on their exact
# Poisson limit; the (1/alpha) exponents are numerically unusable there.
ALPHA_POISSON_EPS = 1e-8


# ---------------------------------------------------------------------------
# parameter records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NbParams:
    """NB2 parameters: location ``mu > 0``, dispersion ``alpha >= 0``."""

    mu: float
    alpha: float

    def __post_init__(self):
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ValueError(f"mu must be a positive real, got {self.mu}")
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be a non-negative real, got {self.alpha}")


@dataclass(frozen=True)
class ZinbParams:
    """Zero-inflated NB2 parameters; ``pi`` is the excess-zero probability."""

    mu: float
    alpha: float
    pi: float

    def __post_init__(self):
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ValueError(f"mu must be a positive real, got {self.mu}")
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be a non-negative real, got {self.alpha}")
        if not (0.0 <= self.pi < 1.0):
            raise ValueError(f"pi must lie in [0, 1), got {self.pi}")


@dataclass(frozen=True)
class GenGammaParams:
    """Generalized gamma parameters: scale ``beta``, shapes ``psi``, ``phi``.

    ``phi = 1`` is the gamma distribution, ``psi = 1`` the Weibull, and
    ``psi = phi = 1`` the exponential.
    """

    beta: float
    psi: float
    phi: float

    def __post_init__(self):
        for name in ("beta", "psi", "phi"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be a positive real, got {v}")


def _check_counts(x) -> np.ndarray:
    x = np.asarray(x)
    if np.any(x < 0) or np.any(x != np.floor(x)):
        raise ValueError("observations must be non-negative integers")
    return x.astype(np.float64)


# ---------------------------------------------------------------------------
# negative binomial (NB2) core
# ---------------------------------------------------------------------------


def _nb_log_pmf(x, mu, alpha):
    x = np.asarray(x, dtype=np.float64)
    if alpha < ALPHA_POISSON_EPS:
        return -mu + x * np.log(mu) - gammaln(x + 1.0)
    r = 1.0 / alpha
    # mu / (r + mu) == alpha*mu / (1 + alpha*mu); both factors kept in logs
    am = alpha * mu
    return (
        gammaln(x + r)
        - gammaln(x + 1.0)
        - gammaln(r)
        - r * np.log1p(am)
        + x * (np.log(am) - np.log1p(am))
    )


def _nb_score_mu(x, mu, alpha):
    x = np.asarray(x, dtype=np.float64)
    return (x - mu) / (mu * (alpha * mu + 1.0))


def _nb_fisher_mu(mu, alpha):
    return 1.0 / (mu * (alpha * mu + 1.0))


def _nb_log_p0(mu, alpha):
    """log P(X = 0) for the NB2 (Poisson limit below the alpha threshold)."""
    if alpha < ALPHA_POISSON_EPS:
        return -mu
    return -np.log1p(alpha * mu) / alpha


def nb_log_pmf(x, p: NbParams):
    """Log NB2 probability mass at the count(s) ``x``."""
    return _nb_log_pmf(_check_counts(x), p.mu, p.alpha)


def nb_score_mu(x, p: NbParams):
    """Derivative of the log NB2 mass with respect to ``mu``."""
    return _nb_score_mu(_check_counts(x), p.mu, p.alpha)


def nb_fisher_mu(p: NbParams) -> float:
    """Fisher information of the NB2 in ``mu``: ``1 / (mu (alpha mu + 1))``."""
    return _nb_fisher_mu(p.mu, p.alpha)


# ---------------------------------------------------------------------------
# zero-inflated negative binomial core
# ---------------------------------------------------------------------------


def _zinb_log_pmf(x, mu, alpha, pi):
    x = np.asarray(x, dtype=np.float64)
    base = _nb_log_pmf(x, mu, alpha)
    if pi <= 0.0:
        return base
    out = np.log1p(-pi) + base
    # zero branch: log(pi + (1 - pi) * p0) as a two-term log-sum-exp
    lp0 = np.log1p(-pi) + _nb_log_p0(mu, alpha)
    lpi = math.log(pi)
    hi, lo = (lpi, lp0) if lpi >= lp0 else (lp0, lpi)
    zero_val = hi + math.log1p(math.exp(lo - hi))
    return np.where(x == 0, zero_val, out)


def _zinb_score_mu(x, mu, alpha, pi):
    x = np.asarray(x, dtype=np.float64)
    pos = _nb_score_mu(x, mu, alpha)
    if pi <= 0.0:
        return pos
    am1 = alpha * mu + 1.0
    if alpha < ALPHA_POISSON_EPS:
        k = mu
    else:
        k = np.log1p(alpha * mu) / alpha
    # 1 - pi + pi * (1 + alpha*mu)^(1/alpha), immune to pi near 0 or 1
    denom = 1.0 + pi * np.expm1(k)
    zero_val = (pi - 1.0) / (am1 * denom)
    return np.where(x == 0, zero_val, pos)


def _zinb_fisher_mu(mu, alpha, pi):
    base = _nb_fisher_mu(mu, alpha)
    if pi <= 0.0:
        return base
    am1 = alpha * mu + 1.0
    if alpha < ALPHA_POISSON_EPS:
        k = mu
    else:
        k = math.log1p(alpha * mu) / alpha
    denom = 1.0 + pi * math.expm1(k)
    return pi * (pi - 1.0) / (am1 * am1 * denom) + (1.0 - pi) * base


def zinb_log_pmf(x, p: ZinbParams):
    """Log zero-inflated NB2 mass; reduces exactly to the NB2 at ``pi = 0``."""
    return _zinb_log_pmf(_check_counts(x), p.mu, p.alpha, p.pi)


def zinb_score_mu(x, p: ZinbParams):
    """Score of the zero-inflated NB2 in ``mu`` (two-branch closed form)."""
    return _zinb_score_mu(_check_counts(x), p.mu, p.alpha, p.pi)


def zinb_fisher_mu(p: ZinbParams) -> float:
    """Fisher information of the zero-inflated NB2 in ``mu``."""
    return float(_zinb_fisher_mu(p.mu, p.alpha, p.pi))


def zinb_moments(p: ZinbParams) -> tuple[float, float]:
    """Mean and variance: ``mu (1-pi)`` and ``mu (1-pi)(1 + pi mu + alpha mu)``."""
    mean = p.mu * (1.0 - p.pi)
    var = p.mu * (1.0 - p.pi) * (1.0 + p.pi * p.mu + p.alpha * p.mu)
    return mean, var


def _nb_sample(mu, alpha, rng, size=None):
    # Poisson-gamma mixture; collapses to a plain Poisson draw at alpha ~ 0.
    if alpha < ALPHA_POISSON_EPS:
        return rng.poisson(mu, size=size)
    lam = rng.gamma(1.0 / alpha, alpha * mu, size=size)
    return rng.poisson(lam)


def zinb_sample(p: ZinbParams, rng: np.random.Generator, size=None):
    """Draw from the zero-inflated NB2 mixture.

    With probability ``pi`` the draw is zero; otherwise it comes from the
    NB2 via its Poisson-gamma mixture representation.
    """
    base = _nb_sample(p.mu, p.alpha, rng, size=size)
    if p.pi <= 0.0:
        return base
    if size is None:
        return 0 if rng.random() < p.pi else base
    return np.where(rng.random(size) < p.pi, 0, base)


# ---------------------------------------------------------------------------
# generalized gamma core
# ---------------------------------------------------------------------------


def _gg_log_pdf(x, beta, psi, phi):
    x = np.asarray(x, dtype=np.float64)
    z = x / beta
    return (
        math.log(phi)
        - gammaln(psi)
        - math.log(beta)
        + (psi * phi - 1.0) * np.log(z)
        - z**phi
    )


def _gg_score_beta(x, beta, psi, phi):
    x = np.asarray(x, dtype=np.float64)
    return phi / beta * ((x / beta) ** phi - psi)


def _gg_fisher_beta(beta, psi, phi):
    return psi * phi * phi / (beta * beta)


def gengamma_log_pdf(x, p: GenGammaParams):
    """Log generalized gamma density at ``x > 0``.

    Strictly positive support: zeros must be pre-treated (discarded,
    truncated, or modeled discretely) before evaluating this density.
    """
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0):
        raise ValueError("x must be strictly positive")
    return _gg_log_pdf(x, p.beta, p.psi, p.phi)


def gengamma_score_beta(x, p: GenGammaParams):
    """Score of the generalized gamma in ``beta``."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0):
        raise ValueError("x must be strictly positive")
    return _gg_score_beta(x, p.beta, p.psi, p.phi)


def gengamma_fisher_beta(p: GenGammaParams) -> float:
    """Fisher information of the generalized gamma in ``beta``."""
    return _gg_fisher_beta(p.beta, p.psi, p.phi)


def _gg_cdf(x, beta, psi, phi):
    x = np.asarray(x, dtype=np.float64)
    return gammainc(psi, np.maximum(x, 0.0) ** phi / beta**phi)


def _gg_mean_var(beta, psi, phi):
    lg = gammaln(psi)
    m = beta * math.exp(gammaln(psi + 1.0 / phi) - lg)
    v = beta * beta * math.exp(gammaln(psi + 2.0 / phi) - lg) - m * m
    return m, v


def _gg_sample(beta, psi, phi, rng, size=None):
    return beta * rng.gamma(psi, 1.0, size=size) ** (1.0 / phi)


# ---------------------------------------------------------------------------
# uniform family interface
# ---------------------------------------------------------------------------


class Family:
    """Common surface over one observation distribution.

    ``tv`` is the time-varying parameter on its natural scale (``mu`` for
    discrete families, ``beta`` for continuous ones); ``shape`` maps the
    family's free static parameters by name.
    """

    tag: str
    discrete: bool
    shape_names: tuple[str, ...]

    @property
    def n_params(self) -> int:
        """Free parameters of the full dynamic model: (c, b, a) + shapes."""
        return 3 + len(self.shape_names)

    def _shape_value(self, shape, name, fixed):
        if fixed is not None:
            return fixed
        if shape is None or name not in shape:
            raise ValueError(f"family '{self.tag}' requires shape parameter '{name}'")
        return float(shape[name])

    def validate_obs(self, x) -> np.ndarray:
        raise NotImplementedError

    def log_prob(self, x, tv, shape=None):
        raise NotImplementedError

    def score(self, x, tv, shape=None):
        raise NotImplementedError

    def fisher(self, tv, shape=None) -> float:
        raise NotImplementedError

    def moments(self, tv, shape=None) -> tuple[float, float]:
        raise NotImplementedError

    def sample(self, tv, shape=None, rng=None, size=None):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.tag!r})"


class DiscreteFamily(Family):
    """Count families built on the (zero-inflated) NB2 core."""

    discrete = True

    def __init__(self, tag, fixed_alpha, zero_inflated):
        self.tag = tag
        self.fixed_alpha = fixed_alpha
        self.zero_inflated = zero_inflated
        names = []
        if fixed_alpha is None:
            names.append("alpha")
        if zero_inflated:
            names.append("pi")
        self.shape_names = tuple(names)

    def resolve(self, shape) -> tuple[float, float]:
        """Return (alpha, pi) from free/fixed shape parameters, validated."""
        alpha = self._shape_value(shape, "alpha", self.fixed_alpha)
        pi = self._shape_value(shape, "pi", None if self.zero_inflated else 0.0)
        if not (alpha >= 0 and math.isfinite(alpha)):
            raise ValueError(f"alpha must be non-negative, got {alpha}")
        if not (0.0 <= pi < 1.0):
            raise ValueError(f"pi must lie in [0, 1), got {pi}")
        return alpha, pi

    def validate_obs(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.size == 0:
            raise IncompatibleObservations("observations must be non-empty")
        if not np.all(np.isfinite(x)):
            raise IncompatibleObservations("observations contain non-finite values")
        if np.any(x < 0) or np.any(x != np.floor(x)):
            raise IncompatibleObservations(
                f"family '{self.tag}' requires non-negative integer observations"
            )
        return x

    def _check_tv(self, tv):
        if not (tv > 0 and math.isfinite(tv)):
            raise ValueError(f"mu must be a positive real, got {tv}")

    def log_prob(self, x, tv, shape=None):
        self._check_tv(tv)
        alpha, pi = self.resolve(shape)
        return _zinb_log_pmf(np.asarray(x, dtype=np.float64), tv, alpha, pi)

    def score(self, x, tv, shape=None):
        self._check_tv(tv)
        alpha, pi = self.resolve(shape)
        return _zinb_score_mu(np.asarray(x, dtype=np.float64), tv, alpha, pi)

    def fisher(self, tv, shape=None) -> float:
        self._check_tv(tv)
        alpha, pi = self.resolve(shape)
        return _zinb_fisher_mu(tv, alpha, pi)

    def moments(self, tv, shape=None):
        self._check_tv(tv)
        alpha, pi = self.resolve(shape)
        return zinb_moments(ZinbParams(tv, alpha, pi))

    def zero_prob(self, tv, shape=None) -> float:
        self._check_tv(tv)
        alpha, pi = self.resolve(shape)
        return float(np.exp(_zinb_log_pmf(np.array(0.0), tv, alpha, pi)))

    def sample(self, tv, shape=None, rng=None, size=None):
        self._check_tv(tv)
        alpha, pi = self.resolve(shape)
        base = _nb_sample(tv, alpha, rng, size=size)
        if pi <= 0.0:
            return base
        if size is None:
            return 0 if rng.random() < pi else base
        return np.where(rng.random(size) < pi, 0, base)


class ContinuousFamily(Family):
    """Positive-duration families built on the generalized gamma core."""

    discrete = False

    def __init__(self, tag, fixed_psi, fixed_phi):
        self.tag = tag
        self.fixed_psi = fixed_psi
        self.fixed_phi = fixed_phi
        names = []
        if fixed_psi is None:
            names.append("psi")
        if fixed_phi is None:
            names.append("phi")
        self.shape_names = tuple(names)

    def resolve(self, shape) -> tuple[float, float]:
        psi = self._shape_value(shape, "psi", self.fixed_psi)
        phi = self._shape_value(shape, "phi", self.fixed_phi)
        for name, v in (("psi", psi), ("phi", phi)):
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be a positive real, got {v}")
        return psi, phi

    @property
    def allows_zero_obs(self) -> bool:
        # Only a density with psi*phi == 1 pinned by the family itself is
        # finite at zero, i.e. the exponential.
        return self.fixed_psi == 1.0 and self.fixed_phi == 1.0

    def validate_obs(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.size == 0:
            raise IncompatibleObservations("observations must be non-empty")
        if not np.all(np.isfinite(x)):
            raise IncompatibleObservations("observations contain non-finite values")
        if np.any(x < 0):
            raise IncompatibleObservations(
                f"family '{self.tag}' requires non-negative real observations"
            )
        if np.any(x == 0) and not self.allows_zero_obs:
            raise IncompatibleObservations(
                f"family '{self.tag}' has zero density at 0; apply a zero "
                "treatment (discard or truncate) first"
            )
        return x

    def _check_tv(self, tv):
        if not (tv > 0 and math.isfinite(tv)):
            raise ValueError(f"beta must be a positive real, got {tv}")

    def log_prob(self, x, tv, shape=None):
        self._check_tv(tv)
        psi, phi = self.resolve(shape)
        x = np.asarray(x, dtype=np.float64)
        out = np.where(
            x > 0,
            _gg_log_pdf(np.maximum(x, 1e-300), tv, psi, phi),
            (math.log(phi) - gammaln(psi) - math.log(tv)) if psi * phi == 1.0 else -np.inf,
        )
        return out if out.ndim else float(out)

    def score(self, x, tv, shape=None):
        self._check_tv(tv)
        psi, phi = self.resolve(shape)
        return _gg_score_beta(np.asarray(x, dtype=np.float64), tv, psi, phi)

    def fisher(self, tv, shape=None) -> float:
        self._check_tv(tv)
        psi, phi = self.resolve(shape)
        return _gg_fisher_beta(tv, psi, phi)

    def moments(self, tv, shape=None):
        self._check_tv(tv)
        psi, phi = self.resolve(shape)
        return _gg_mean_var(tv, psi, phi)

    def cdf(self, x, tv, shape=None):
        self._check_tv(tv)
        psi, phi = self.resolve(shape)
        return _gg_cdf(x, tv, psi, phi)

    def sample(self, tv, shape=None, rng=None, size=None):
        self._check_tv(tv)
        psi, phi = self.resolve(shape)
        return _gg_sample(tv, psi, phi, rng, size=size)


_FAMILIES: dict[str, Family] = {
    f.tag: f
    for f in (
        DiscreteFamily("poisson", fixed_alpha=0.0, zero_inflated=False),
        DiscreteFamily("geometric", fixed_alpha=1.0, zero_inflated=False),
        DiscreteFamily("negbin", fixed_alpha=None, zero_inflated=False),
        DiscreteFamily("zip", fixed_alpha=0.0, zero_inflated=True),
        DiscreteFamily("zigeom", fixed_alpha=1.0, zero_inflated=True),
        DiscreteFamily("zinb", fixed_alpha=None, zero_inflated=True),
        ContinuousFamily("exponential", fixed_psi=1.0, fixed_phi=1.0),
        ContinuousFamily("weibull", fixed_psi=1.0, fixed_phi=None),
        ContinuousFamily("gamma", fixed_psi=None, fixed_phi=1.0),
        ContinuousFamily("gengamma", fixed_psi=None, fixed_phi=None),
    )
}

FAMILY_TAGS = tuple(_FAMILIES)
DISCRETE_TAGS = tuple(t for t, f in _FAMILIES.items() if f.discrete)
CONTINUOUS_TAGS = tuple(t for t, f in _FAMILIES.items() if not f.discrete)


def get_family(tag: str) -> Family:
    """Look up a family by tag; raises ``ValueError`` for unknown tags."""
    try:
        return _FAMILIES[tag]
    except KeyError:
        raise ValueError(
            f"unknown family '{tag}'; expected one of {', '.join(FAMILY_TAGS)}"
        ) from None
