"""Normal cdf/quantile plumbing and the lattice rectangle integrator.

Oracles: closed-form orthant probabilities (arcsine laws), a bivariate
rectangle integrated with mpmath to 40 digits, and analytic product forms
under independence.
"""
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from dgcopula import (
    AR1,
    ExchangeableBlocks,
    Identity,
    RectangleProbResult,
    rectangle_prob,
    sample_mvn,
    std_normal_cdf,
    std_normal_log_cdf,
    std_normal_quantile,
)

# mpmath, 40 digits
LOG_NCDF_M38 = -726.5572160188201
LOG_NCDF_M10 = -53.23128515051247
BIV_ORTHANT_RHO06 = 0.3524163823495667
# mpmath 2-d quadrature of the AR1(0.6) density over the square
# [ndtri(0.42319008112684353), ndtri(0.6472318887822313)]^2
BIV_RECT_RHO06 = 0.06201068187228829
BIV_RECT_LO = 0.42319008112684353
BIV_RECT_HI = 0.6472318887822313


class TestScalarNormal:
    def test_quantile_oracle_value(self):
        assert_allclose(std_normal_quantile(0.975), 1.959963984540054, rtol=1e-15)

    def test_round_trip_u_grid(self):
        u = np.linspace(1e-12, 1.0 - 1e-12, 1000)
        back = std_normal_cdf(std_normal_quantile(u))
        assert np.max(np.abs(back - u)) <= 1e-12

    def test_round_trip_x_grid(self):
        x = np.linspace(-4.0, 4.0, 1000)
        back = std_normal_quantile(std_normal_cdf(x))
        assert np.max(np.abs(back - x)) <= 1e-12

    def test_log_cdf_deep_tail(self):
        assert_allclose(std_normal_log_cdf(-10.0), LOG_NCDF_M10, rtol=1e-14)
        assert_allclose(std_normal_log_cdf(-38.0), LOG_NCDF_M38, rtol=1e-14)
        assert math.isfinite(std_normal_log_cdf(-300.0))

    def test_quantile_endpoints_and_domain(self):
        assert std_normal_quantile(0.0) == -math.inf
        assert std_normal_quantile(1.0) == math.inf
        with pytest.raises(ValueError):
            std_normal_quantile(-0.1)
        with pytest.raises(ValueError):
            std_normal_quantile(math.nan)


class TestSampleMvn:
    def test_matches_factor_times_normals(self, rng):
        L = AR1(0.7, 4).cholesky()
        probe = np.random.default_rng(7)
        draw = sample_mvn(L, probe)
        again = np.random.default_rng(7).standard_normal(4)
        assert_allclose(draw, L @ again, rtol=1e-15)

    def test_sample_correlation(self, rng):
        L = AR1(0.6, 2).cholesky()
        draws = np.array([sample_mvn(L, rng) for _ in range(20_000)])
        r = np.corrcoef(draws.T)[0, 1]
        assert abs(r - 0.6) < 0.02


class TestRectangleProb:
    def test_one_dimension_closed_form(self):
        res = rectangle_prob(Identity(1), [-1.0], [2.0])
        assert res.standard_error == 0.0
        assert res.points_used == 0
        assert_allclose(
            res.estimate, std_normal_cdf(2.0) - std_normal_cdf(-1.0), rtol=1e-15
        )

    def test_independence_product_form(self):
        lo = np.array([-1.0, -0.5, 0.0, -2.0])
        hi = np.array([0.5, 1.5, 2.0, -1.0])
        res = rectangle_prob(Identity(4), lo, hi, seed=3)
        expected = np.prod(std_normal_cdf(hi) - std_normal_cdf(lo))
        assert abs(res.estimate - expected) < 1e-12

    def test_bivariate_orthant_arcsine_law(self):
        res = rectangle_prob(AR1(0.6, 2), [-np.inf, -np.inf], [0.0, 0.0], seed=5)
        assert abs(res.estimate - BIV_ORTHANT_RHO06) <= max(4 * res.standard_error, 2e-6)

    def test_trivariate_orthant_quarter(self):
        ex = ExchangeableBlocks(0.5, (3,))
        res = rectangle_prob(ex, -np.inf * np.ones(3), np.zeros(3), seed=9)
        assert abs(res.estimate - 0.25) <= max(4 * res.standard_error, 2e-6)

    def test_bivariate_rectangle_mpmath_oracle(self):
        lo = std_normal_quantile(BIV_RECT_LO)
        hi = std_normal_quantile(BIV_RECT_HI)
        res = rectangle_prob(AR1(0.6, 2), [lo, lo], [hi, hi], seed=1)
        assert abs(res.estimate - BIV_RECT_RHO06) <= max(4 * res.standard_error, 2e-6)

    def test_deterministic_per_seed(self):
        ar = AR1(0.55, 5)
        lo, hi = -np.ones(5), np.ones(5)
        a = rectangle_prob(ar, lo, hi, seed=77)
        b = rectangle_prob(ar, lo, hi, seed=77)
        assert a.estimate == b.estimate
        assert a.standard_error == b.standard_error
        c = rectangle_prob(ar, lo, hi, seed=78)
        assert c.estimate != a.estimate  # different shifts move the estimate

    def test_budget_respected(self):
        ar = AR1(0.9, 6)
        lo, hi = -0.2 * np.ones(6), 0.2 * np.ones(6)
        res = rectangle_prob(
            ar, lo, hi, target_se=1e-12, n_shifts=10, start_points=256, max_points=20_000
        )
        assert res.points_used <= 20_000
        assert res.standard_error > 1e-12

    def test_permutation_consistency(self, rng):
        ex = ExchangeableBlocks(0.4, (2, 2))
        lo = np.array([-2.0, -0.3, -1.0, 0.1])
        hi = np.array([0.4, 1.2, 2.5, 1.4])
        perm = np.array([2, 0, 3, 1])
        dense = ex.dense()[np.ix_(perm, perm)]
        a = rectangle_prob(ex, lo, hi, seed=2)
        b = rectangle_prob(dense, lo[perm], hi[perm], seed=2)
        tol = 4 * (a.standard_error + b.standard_error) + 1e-9
        assert abs(a.estimate - b.estimate) <= tol

    def test_bound_validation(self):
        with pytest.raises(ValueError):
            rectangle_prob(Identity(2), [0.0, 0.0], [1.0, 0.0])
        with pytest.raises(ValueError):
            rectangle_prob(Identity(2), [0.0, math.nan], [1.0, 1.0])

    def test_result_invariants(self):
        with pytest.raises(ValueError):
            RectangleProbResult(1.2, 0.0, 10)
        with pytest.raises(ValueError):
            RectangleProbResult(0.5, -1e-9, 10)
