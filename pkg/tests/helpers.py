"""Shared test oracles: finite differences, brute-force expectations,
goodness-of-fit helpers.  These stay independent of the library code paths
they check."""

import numpy as np
from scipy import stats


def central_fd(fn, x0, rel_step=1e-6):
    """Central finite difference with the step tied to the argument scale."""
    h = rel_step * max(1.0, abs(x0))
    return (fn(x0 + h) - fn(x0 - h)) / (2.0 * h)


def close_rel(actual, expected, rel=1e-6, floor=1.0):
    """Mixed relative/absolute comparison: |a-e| <= rel * max(floor, |e|)."""
    return abs(actual - expected) <= rel * max(floor, abs(expected))


def discrete_support(log_pmf_fn, tail=1e-14, cap=10**6):
    """Enumerate the support until the remaining mass drops below ``tail``."""
    xs = []
    total = 0.0
    x = 0
    while total < 1.0 - tail and x < cap:
        xs.append(x)
        total += np.exp(log_pmf_fn(x))
        x += 1
    return np.array(xs, dtype=float)


def brute_fisher_discrete(log_pmf_fn, score_fn, tail=1e-14):
    xs = discrete_support(log_pmf_fn, tail=tail)
    pmf = np.exp([log_pmf_fn(x) for x in xs])
    sc = np.array([score_fn(x) for x in xs])
    return float(np.sum(pmf * sc**2))


def brute_moments_discrete(log_pmf_fn, tail=1e-14):
    xs = discrete_support(log_pmf_fn, tail=tail)
    pmf = np.exp([log_pmf_fn(x) for x in xs])
    mean = float(np.sum(xs * pmf))
    var = float(np.sum((xs - mean) ** 2 * pmf))
    return mean, var


def chi_square_gof(samples, log_pmf_fn, min_expected=5.0):
    """Chi-square goodness of fit of integer samples against a pmf.

    Bins with expected counts below ``min_expected`` are merged into the
    tail.  Returns the p-value.
    """
    samples = np.asarray(samples)
    n = len(samples)
    kmax = int(samples.max())
    support = np.arange(kmax + 1)
    pmf = np.exp([log_pmf_fn(k) for k in support])
    p_tail = max(1.0 - pmf.sum(), 0.0)
    expected = np.append(pmf * n, p_tail * n)
    observed = np.append(np.bincount(samples.astype(int), minlength=kmax + 1), 0)

    # merge from the right until every bin is large enough
    obs_bins, exp_bins = [], []
    acc_o, acc_e = 0.0, 0.0
    for o, e in zip(observed[::-1], expected[::-1]):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            obs_bins.append(acc_o)
            exp_bins.append(acc_e)
            acc_o, acc_e = 0.0, 0.0
    if acc_e > 0:
        if obs_bins:
            obs_bins[-1] += acc_o
            exp_bins[-1] += acc_e
        else:
            obs_bins.append(acc_o)
            exp_bins.append(acc_e)
    obs_bins = np.array(obs_bins[::-1])
    exp_bins = np.array(exp_bins[::-1])
    exp_bins *= obs_bins.sum() / exp_bins.sum()
    if len(obs_bins) < 2:
        return 1.0
    return float(stats.chisquare(obs_bins, exp_bins).pvalue)
