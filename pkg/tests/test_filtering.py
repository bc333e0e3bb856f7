"""Filter recursion tests: scaled-score identities, a step-by-step manual
trace oracle, determinism, contraction, and divergence handling."""

import math

import numpy as np
import pytest
from scipy import stats

from durascore.estimation import StaticParams, log_likelihood
from durascore.exceptions import FilterDiverged, IncompatibleObservations
from durascore.families import get_family
from durascore.filtering import (
    GasCoefficients,
    default_f1,
    reparam_score,
    run_filter,
    unconditional_value,
)


class TestReparamScore:
    def test_zinb_unit_positive_branch(self):
        alpha, pi, f = 1.4851, 0.3619, 0.9
        shape = {"alpha": alpha, "pi": pi}
        for x in (1, 3, 10):
            got = reparam_score("zinb", "unit", "log", x, f, shape)
            expected = (x - math.exp(f)) / (alpha * math.exp(f) + 1.0)
            assert got == pytest.approx(expected, rel=1e-12)

    def test_zinb_unit_zero_branch(self):
        alpha, pi, f = 1.4851, 0.3619, 0.9
        mu = math.exp(f)
        got = reparam_score("zinb", "unit", "log", 0, f, {"alpha": alpha, "pi": pi})
        expected = (pi - 1.0) * mu / (
            (alpha * mu + 1.0) * (1.0 + pi * (alpha * mu + 1.0) ** (1.0 / alpha) - pi)
        )
        assert got == pytest.approx(expected, rel=1e-12)

    def test_nb_unit_vanishes_at_conditional_mean(self):
        f = 0.7
        x = math.exp(f)
        # integer x only; pick f = log(2)
        f = math.log(2.0)
        assert reparam_score("negbin", "unit", "log", 2, f, {"alpha": 0.8}) == pytest.approx(0.0)

    def test_zinb_pi_zero_equals_nb_all_scalings(self):
        f = 0.4
        for scaling in ("unit", "invsqrt", "inv"):
            for x in range(0, 12):
                a = reparam_score("zinb", scaling, "log", x, f, {"alpha": 1.3, "pi": 0.0})
                b = reparam_score("negbin", scaling, "log", x, f, {"alpha": 1.3})
                assert abs(a - b) <= 1e-12 * max(1.0, abs(b))

    def test_sign_matches_innovation_for_positive_x(self):
        r = np.random.default_rng(5)
        for _ in range(60):
            f = float(r.uniform(-1.5, 2.0))
            x = int(r.integers(1, 20))
            shape = {"alpha": float(r.uniform(0.05, 3.0)), "pi": float(r.uniform(0.0, 0.9))}
            for scaling in ("unit", "invsqrt", "inv"):
                s = reparam_score("zinb", scaling, "log", x, f, shape)
                assert np.sign(s) == np.sign(x - math.exp(f))

    def test_kernel_matches_reference(self):
        # the compiled filter and the numpy reference must agree step by step
        r = np.random.default_rng(17)
        cases = [
            ("zinb", {"alpha": 1.2, "pi": 0.4}, r.integers(0, 9, size=30).astype(float)),
            ("negbin", {"alpha": 0.6}, r.integers(0, 9, size=30).astype(float)),
            ("poisson", {}, r.integers(0, 6, size=30).astype(float)),
            ("gengamma", {"psi": 1.7, "phi": 0.9}, r.uniform(0.05, 6.0, size=30)),
            ("exponential", {}, r.uniform(0.0, 6.0, size=30)),
        ]
        coeffs = GasCoefficients(c=0.02, b=0.92, a=0.07)
        for tag, shape, xs in cases:
            for scaling in ("unit", "invsqrt", "inv"):
                path = run_filter(xs, tag, scaling, "log", coeffs, shape, f1=0.3)
                for i in (0, 7, 29):
                    s_ref = reparam_score(tag, scaling, "log", xs[i], path.f[i], shape)
                    assert path.s[i] == pytest.approx(s_ref, rel=1e-12, abs=1e-12), (tag, scaling)
                    ll_ref = float(get_family(tag).log_prob(xs[i], math.exp(path.f[i]), shape))
                    assert path.loglik_terms[i] == pytest.approx(ll_ref, rel=1e-12, abs=1e-12)


def manual_zinb_trace(xs, c, b, a, alpha, pi, f1):
    """Independent spreadsheet-style evaluation of the recursion."""
    f = f1
    fs, ss, lls = [], [], []
    for x in xs:
        mu = math.exp(f)
        if x == 0:
            s = (pi - 1.0) * mu / (
                (alpha * mu + 1.0) * (1.0 + pi * (alpha * mu + 1.0) ** (1.0 / alpha) - pi)
            )
            ll = math.log(pi + (1.0 - pi) * (1.0 + alpha * mu) ** (-1.0 / alpha))
        else:
            s = (x - mu) / (alpha * mu + 1.0)
            r = 1.0 / alpha
            ll = math.log(1.0 - pi) + stats.nbinom.logpmf(x, r, r / (r + mu))
        fs.append(f)
        ss.append(s)
        lls.append(ll)
        f = c + b * f + a * s
    return np.array(fs), np.array(ss), np.array(lls), f


class TestRunFilter:
    def test_degenerate_recursion_constant(self):
        xs = np.array([1, 2, 0, 3, 1], dtype=float)
        path = run_filter(xs, "geometric", "unit", "log", GasCoefficients(0.25, 0.0, 0.0), f1=0.7)
        assert path.f[0] == 0.7
        assert np.all(path.f[1:] == 0.25)

    def test_deterministic_ar1(self):
        xs = np.ones(20)
        path = run_filter(xs, "geometric", "unit", "log", GasCoefficients(0.1, 0.9, 0.0), f1=0.0)
        expected = 1.0 - 0.9 ** np.arange(20)
        assert np.allclose(path.f, expected, atol=1e-14)

    def test_manual_trace_oracle(self):
        xs = np.array([3, 0, 1, 0, 0, 7, 2, 0, 1, 4], dtype=float)
        c, b, a, alpha, pi, f1 = 0.05, 0.9, 0.1, 1.4851, 0.3619, math.log(2.0)
        path = run_filter(
            xs, "zinb", "unit", "log", GasCoefficients(c, b, a), {"alpha": alpha, "pi": pi}, f1=f1
        )
        fs, ss, lls, f_next = manual_zinb_trace(xs, c, b, a, alpha, pi, f1)
        np.testing.assert_allclose(path.f, fs, rtol=1e-12)
        np.testing.assert_allclose(path.s, ss, rtol=1e-12)
        np.testing.assert_allclose(path.loglik_terms, lls, rtol=1e-10)
        assert path.f_next == pytest.approx(f_next, rel=1e-12)

    def test_determinism_bit_identical(self):
        r = np.random.default_rng(3)
        xs = r.integers(0, 10, size=200).astype(float)
        coeffs = GasCoefficients(0.01, 0.95, 0.08)
        shape = {"alpha": 1.5, "pi": 0.35}
        p1 = run_filter(xs, "zinb", "unit", "log", coeffs, shape, f1=0.2)
        p2 = run_filter(xs, "zinb", "unit", "log", coeffs, shape, f1=0.2)
        assert np.array_equal(p1.f, p2.f)
        assert np.array_equal(p1.s, p2.s)
        assert np.array_equal(p1.loglik_terms, p2.loglik_terms)

    def test_contraction_to_unconditional(self):
        xs = np.ones(1000)
        coeffs = GasCoefficients(0.05, 0.95, 0.0)
        path = run_filter(xs, "geometric", "unit", "log", coeffs, f1=3.0)
        target = unconditional_value(coeffs, "log")
        assert abs(path.f_next - target) < 1e-10

    def test_loglik_terms_match_estimation(self):
        r = np.random.default_rng(9)
        xs = r.integers(0, 8, size=150).astype(float)
        coeffs = GasCoefficients(0.02, 0.9, 0.06)
        shape = {"alpha": 1.1, "pi": 0.2}
        path = run_filter(xs, "zinb", "unit", "log", coeffs, shape, f1=0.5)
        params = StaticParams("zinb", "unit", "log", coeffs, shape)
        assert log_likelihood(xs, params, f1=0.5) == path.mean_loglik

    def test_diverged_raises_with_step(self):
        xs = np.arange(1, 50, dtype=float)
        with pytest.raises(FilterDiverged) as exc:
            run_filter(xs, "geometric", "unit", "log", GasCoefficients(0.0, 1.0, 1e8), f1=1.0)
        assert exc.value.step is not None

    def test_incompatible_observations(self):
        with pytest.raises(IncompatibleObservations):
            run_filter([0.5, 1.5], "zinb", "unit", "log", GasCoefficients(0, 0.9, 0.05), {"alpha": 1, "pi": 0.1})
        with pytest.raises(IncompatibleObservations):
            run_filter([0.0, 1.0], "gengamma", "unit", "log", GasCoefficients(0, 0.9, 0.05), {"psi": 2.0, "phi": 0.5})

    def test_single_observation_loglik(self):
        # one-term likelihood: constant-parameter model reduces to the pmf
        mu = 2.5
        params = StaticParams(
            "zinb", "unit", "log", GasCoefficients(math.log(mu), 0.0, 0.0),
            {"alpha": 1.2, "pi": 0.3},
        )
        got = log_likelihood([0], params, f1=math.log(mu))
        fam = get_family("zinb")
        assert got == pytest.approx(float(fam.log_prob(0, mu, params.shape)), rel=1e-14)

    def test_constant_geometric_closed_form(self):
        params = StaticParams("geometric", "unit", "log", GasCoefficients(0.0, 0.0, 0.0), {})
        got = log_likelihood([0, 1, 2], params, f1=0.0)
        expected = (math.log(0.5) + math.log(0.25) + math.log(0.125)) / 3.0
        assert got == pytest.approx(expected, rel=1e-13)


class TestUnconditionalValue:
    def test_simulation_design_values(self):
        assert unconditional_value(GasCoefficients(0.0, 0.9, 0.1), "log") == 0.0
        assert unconditional_value(GasCoefficients(0.0, 0.9, 0.1), "log", original_scale=True) == 1.0
        assert unconditional_value(GasCoefficients(1.0, 0.0, 0.0), "log") == 1.0

    def test_b_one_is_domain_error(self):
        with pytest.raises(ValueError):
            unconditional_value(GasCoefficients(0.1, 1.0, 0.0))


class TestDefaultF1:
    def test_log_of_mean(self):
        assert default_f1([1, 2, 3]) == pytest.approx(math.log(2.0))

    def test_all_zero_fallback(self):
        assert default_f1([0, 0, 0]) == pytest.approx(math.log(0.1))
