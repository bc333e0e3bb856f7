"""Score-driven filtering of the time-varying parameter.

The recursion ``f[i+1] = c + b f[i] + a s(x[i], f[i])`` runs on the
unbounded link scale (log by default), with the scaled score ``s`` taken
from the chosen family and scaling.  The per-step log likelihood terms are
collected alongside so a single pass serves both estimation and forecast
scoring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .exceptions import FilterDiverged
from .families import ContinuousFamily, DiscreteFamily, Family, get_family

__all__ = [
    "SCALINGS",
    "LINKS",
    "GasCoefficients",
    "FilterPath",
    "reparam_score",
    "run_filter",
    "unconditional_value",
    "default_f1",
]

SCALINGS = ("unit", "invsqrt", "inv")
LINKS = ("log", "identity")

_SCALING_CODE = {"unit": _kernels.UNIT, "invsqrt": _kernels.INVSQRT, "inv": _kernels.INV}
_LINK_CODE = {"log": _kernels.LOG, "identity": _kernels.IDENTITY}

# Link-scale fallback when a discrete estimation window is all zeros.
ALL_ZERO_F1 = math.log(0.1)


def _check_scaling(scaling: str) -> int:
    if scaling not in _SCALING_CODE:
        raise ValueError(f"unknown scaling '{scaling}'; expected one of {SCALINGS}")
    return _SCALING_CODE[scaling]


def _check_link(link: str) -> int:
    if link not in _LINK_CODE:
        raise ValueError(f"unknown link '{link}'; expected one of {LINKS}")
    return _LINK_CODE[link]


@dataclass(frozen=True)
class GasCoefficients:
    """Recursion coefficients: constant ``c``, autoregression ``b``, score
    loading ``a``.  No structural constraints; stability is a diagnostic."""

    c: float
    b: float
    a: float


@dataclass
class FilterPath:
    """Filtered output: link-scale parameters ``f``, scaled scores ``s`` and
    per-observation log likelihood contributions, all of equal length.
    ``f_next`` is the one-step-ahead link-scale parameter after the final
    observation."""

    f: np.ndarray
    s: np.ndarray
    loglik_terms: np.ndarray
    f_next: float

    def __post_init__(self):
        n = len(self.f)
        if len(self.s) != n or len(self.loglik_terms) != n:
            raise ValueError("FilterPath sequences must have equal length")

    @property
    def mean_loglik(self) -> float:
        return float(np.mean(self.loglik_terms))


def reparam_score(family, scaling: str, link: str, x, f: float, shape=None) -> float:
    """Scaled score ``s(x, f)`` of the reparametrized model at one step.

    Reference implementation used by tests and one-off callers; the filter
    itself runs the compiled kernels, which must agree with this function.
    """
    fam = get_family(family) if isinstance(family, str) else family
    _check_scaling(scaling)
    _check_link(link)
    if not math.isfinite(f):
        raise ValueError("f must be finite")
    tv = math.exp(f) if link == "log" else f
    raw = float(fam.score(x, tv, shape))
    if scaling == "unit":
        return tv * raw if link == "log" else raw
    info = fam.fisher(tv, shape)
    if not (info > 0 and math.isfinite(info)):
        raise ValueError(f"Fisher information underflowed ({info}); cannot scale")
    if scaling == "invsqrt":
        return raw / math.sqrt(info)
    # inverse-information scaling
    return raw / (tv * info) if link == "log" else raw / info


def run_filter(
    observations,
    family,
    scaling: str,
    link: str,
    coeffs: GasCoefficients,
    shape=None,
    f1: float | None = None,
) -> FilterPath:
    """Run the score recursion over one series.

    Raises :class:`FilterDiverged` if any state, score or likelihood term
    goes non-finite; nothing is clamped.
    """
    fam: Family = get_family(family) if isinstance(family, str) else family
    scaling_code = _check_scaling(scaling)
    link_code = _check_link(link)
    xs = fam.validate_obs(observations)
    if f1 is None:
        f1 = default_f1(xs, link=link)
    if not math.isfinite(f1):
        raise ValueError("f1 must be finite")

    if isinstance(fam, DiscreteFamily):
        alpha, pi = fam.resolve(shape)
        f, s, ll, f_next, status = _kernels.filter_discrete(
            xs, coeffs.c, coeffs.b, coeffs.a, alpha, pi, scaling_code, link_code, f1
        )
    elif isinstance(fam, ContinuousFamily):
        psi, phi = fam.resolve(shape)
        f, s, ll, f_next, status = _kernels.filter_continuous(
            xs, coeffs.c, coeffs.b, coeffs.a, psi, phi, scaling_code, link_code, f1
        )
    else:  # pragma: no cover - registry only holds the two kinds
        raise TypeError(f"unsupported family type {type(fam)!r}")

    if status >= 0:
        raise FilterDiverged(
            f"filter produced a non-finite state at observation {status} "
            f"(family={fam.tag}, c={coeffs.c}, b={coeffs.b}, a={coeffs.a})",
            step=int(status),
        )
    return FilterPath(f=f, s=s, loglik_terms=ll, f_next=float(f_next))


def unconditional_value(coeffs: GasCoefficients, link: str = "log", original_scale: bool = False) -> float:
    """Long-run value ``c / (1 - b)`` on the link scale, or mapped through
    the inverse link when ``original_scale`` is set."""
    _check_link(link)
    if coeffs.b == 1.0:
        raise ValueError("unconditional value undefined at b = 1")
    f = coeffs.c / (1.0 - coeffs.b)
    if original_scale and link == "log":
        return math.exp(f)
    return f


def default_f1(observations, link: str = "log") -> float:
    """Default filter initialization: the sample mean mapped to the link
    scale, with a documented floor for all-zero windows."""
    _check_link(link)
    m = float(np.mean(np.asarray(observations, dtype=np.float64)))
    if link == "log":
        return math.log(m) if m > 0 else ALL_ZERO_F1
    return m if m > 0 else 0.1
