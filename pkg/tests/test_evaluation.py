"""Forecast scoring and Diebold-Mariano tests."""

import math

import numpy as np
import pytest
from scipy import integrate

from durascore.estimation import FitResult, StaticParams, log_likelihood
from durascore.evaluation import diebold_mariano, forecast_scores, interval_log_score
from durascore.exceptions import ZeroVariance
from durascore.families import get_family
from durascore.filtering import GasCoefficients
from durascore.simulation import SimDesign, simulate_path


def _result(family, coeffs, shape=None, f1=0.0):
    params = StaticParams(family, "unit", "log", coeffs, shape or {})
    return FitResult(
        params=params,
        loglik=0.0,
        aic=0.0,
        std_errors=None,
        n_obs=0,
        converged=True,
        optimizer_trace={},
        invertibility=None,
        f1=f1,
    )


def _sim(family, coeffs, shape=None, n=300, seed=0):
    design = SimDesign(family=family, coeffs=coeffs, shape=shape or {}, n_obs=n, n_reps=1, seed=seed)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(0,))))
    return simulate_path(design, rng)


class TestForecastScores:
    def test_single_step_constant_model(self):
        mu = 2.0
        res = _result("geometric", GasCoefficients(math.log(mu), 0.0, 0.0), f1=math.log(mu))
        records = forecast_scores([1, 3, 0], [2], res)
        assert len(records) == 1
        fam = get_family("geometric")
        assert records[0].log_score == pytest.approx(float(fam.log_prob(2, mu)), rel=1e-14)

    def test_agrees_with_concatenated_likelihood(self):
        coeffs = GasCoefficients(0.02, 0.9, 0.07)
        shape = {"alpha": 1.3, "pi": 0.3}
        x = _sim("zinb", coeffs, shape, n=400, seed=1)
        res = _result("zinb", coeffs, shape, f1=0.1)
        records = forecast_scores(x[:300], x[300:], res)
        total_mean = log_likelihood(x, res.params, f1=0.1)
        in_mean = None
        # restrict the concatenated likelihood to the out-of-sample terms
        from durascore.filtering import run_filter

        path = run_filter(x, "zinb", "unit", "log", coeffs, shape, f1=0.1)
        np.testing.assert_array_equal(
            np.array([r.log_score for r in records]), path.loglik_terms[300:]
        )
        assert np.isfinite(total_mean)

    def test_true_model_beats_misspecified_poisson(self):
        coeffs = GasCoefficients(0.01, 0.9, 0.08)
        shape = {"alpha": 1.5, "pi": 0.35}
        res_true = _result("zinb", coeffs, shape, f1=0.0)
        wins = 0
        reps = 60
        for rep in range(reps):
            x = _sim("zinb", coeffs, shape, n=300, seed=1000 + rep)
            mean = max(x.mean(), 0.1)
            res_pois = _result(
                "poisson", GasCoefficients(math.log(mean), 0.0, 0.0), f1=math.log(mean)
            )
            ls_true = [r.log_score for r in forecast_scores(x[:200], x[200:], res_true)]
            ls_pois = [r.log_score for r in forecast_scores(x[:200], x[200:], res_pois)]
            if np.mean(ls_true) > np.mean(ls_pois):
                wins += 1
        assert wins > 0.8 * reps

    def test_empty_out_sample(self):
        res = _result("geometric", GasCoefficients(0.0, 0.0, 0.0))
        with pytest.raises(ValueError):
            forecast_scores([1, 2], [], res)


class TestIntervalLogScore:
    def test_exponential_unit_interval(self):
        for x in (0.0, 0.2, 0.999):
            got = interval_log_score(x, "exponential", 0.0)
            assert got == pytest.approx(math.log(1.0 - math.exp(-1.0)), abs=1e-12)

    def test_gamma_matches_quadrature(self):
        shape = {"psi": 2.3}
        fam = get_family("gamma")
        f_pred = math.log(1.4)
        got = interval_log_score(3.6, fam, f_pred, shape)
        val, _ = integrate.quad(
            lambda t: math.exp(float(fam.log_prob(t, 1.4, shape))), 3.0, 4.0, limit=200
        )
        assert math.exp(got) == pytest.approx(val, abs=1e-8)

    def test_gengamma_matches_quadrature(self):
        shape = {"psi": 2.0, "phi": 0.8}
        fam = get_family("gengamma")
        f_pred = math.log(1.5)
        got = interval_log_score(2.4, fam, f_pred, shape)
        val, _ = integrate.quad(
            lambda t: math.exp(float(fam.log_prob(t, 1.5, shape))), 2.0, 3.0, limit=200
        )
        assert math.exp(got) == pytest.approx(val, abs=1e-8)

    def test_probability_bounds_and_unit_sum(self):
        shape = {"psi": 2.0, "phi": 0.8}
        total = 0.0
        for k in range(200):
            ls = interval_log_score(k + 0.5, "gengamma", math.log(1.5), shape)
            p = math.exp(ls)
            assert p <= 1.0
            # -inf flags tail underflow; every representable mass is positive
            if math.isfinite(ls):
                assert p > 0.0
            total += p
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_underflow_returns_minus_inf(self):
        # far in the tail of a thin-tailed member the interval mass underflows
        got = interval_log_score(5000.0, "weibull", math.log(0.01), {"phi": 2.0})
        assert got == -math.inf

    def test_discrete_family_rejected(self):
        with pytest.raises(ValueError):
            interval_log_score(1.0, "zinb", 0.0, {"alpha": 1.0, "pi": 0.1})


class TestDieboldMariano:
    def test_identical_scores_zero_variance(self):
        with pytest.raises(ZeroVariance):
            diebold_mariano([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])

    def test_alternating_differences(self):
        res = diebold_mariano([1.0, -1.0, 1.0, -1.0], [0.0, 0.0, 0.0, 0.0])
        assert res.mean_diff == 0.0
        assert res.statistic == 0.0
        assert res.m == 4

    def test_statistic_formula(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=50)
        b = rng.normal(size=50)
        res = diebold_mariano(a, b)
        d = a - b
        expected = math.sqrt(50) * d.mean() / d.std(ddof=1)
        assert res.statistic == pytest.approx(expected, rel=1e-14)

    def test_antisymmetry_exact(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=100)
        b = rng.normal(size=100)
        assert diebold_mariano(a, b).statistic == -diebold_mariano(b, a).statistic

    def test_location_shift_invariance(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=100)
        b = rng.normal(size=100)
        base = diebold_mariano(a, b).statistic
        shifted = diebold_mariano(a - 7.25, b - 7.25).statistic
        assert shifted == pytest.approx(base, rel=1e-10)

    def test_excludes_nonfinite_pairs(self):
        a = np.array([1.0, -math.inf, 2.0, 3.0, 4.0])
        b = np.array([0.5, 1.0, 1.5, math.nan, 3.0])
        res = diebold_mariano(a, b)
        assert res.n_excluded == 2
        assert res.m == 3

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            diebold_mariano([1.0, 2.0], [1.0])
