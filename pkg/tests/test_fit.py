"""Optimizer behavior, finite-difference stencils, and end-to-end fits."""
import math
import warnings

import numpy as np
import pytest

import dgcopula as dg
from dgcopula.fit import (
    BoundaryStepWarning,
    default_start,
    hessian_fd,
    likelihood_ratio,
    mle_ce,
    mle_dt,
    optimize,
    score_fd,
)
from dgcopula.likelihood import JitterMatrix, loglik_dt
from dgcopula.rng import SIMULATE, stream


def _bowl(pv):
    return -((pv["mu"] - 5.0) ** 2) - (pv["k"] - 2.0) ** 2


class TestOptimize:
    def test_recovers_quadratic_maximum(self):
        start = dg.ParamVector(("mu", "k"), [1.0, 1.0])
        res = optimize(_bowl, start, kind="bowl")
        assert res.converged
        assert res.objective_kind == "bowl"
        assert res.theta_hat["mu"] == pytest.approx(5.0, abs=1e-4)
        assert res.theta_hat["k"] == pytest.approx(2.0, abs=1e-4)
        assert res.loglik_at_max == pytest.approx(0.0, abs=1e-7)

    def test_curvature_is_negative_at_maximum(self):
        start = dg.ParamVector(("mu", "k"), [1.0, 1.0])
        res = optimize(_bowl, start)
        # the stored matrix is the negated curvature, so it must be positive
        info = np.linalg.eigvalsh(res.hessian_unconstrained)
        assert np.all(info > 0)

    def test_objective_exceptions_steer_the_search(self):
        def partial(pv):
            if pv["mu"] > 8.0:
                raise ValueError("outside the supported region")
            return -((pv["mu"] - 3.0) ** 2)

        res = optimize(partial, dg.ParamVector(("mu",), [2.0]))
        assert res.theta_hat["mu"] == pytest.approx(3.0, abs=1e-4)

    def test_never_finite_raises(self):
        def broken(pv):
            return math.nan

        with pytest.raises(ValueError, match="never found"):
            optimize(broken, dg.ParamVector(("mu",), [1.0]))

    def test_result_hessian_read_only(self):
        res = optimize(_bowl, dg.ParamVector(("mu", "k"), [4.0, 2.0]))
        with pytest.raises(ValueError):
            res.hessian_unconstrained[0, 0] = 0.0


class TestMLE:
    def setup_method(self):
        self.model = dg.CopulaModel("ar1", "poisson", 400)
        theta = self.model.pack((0.6,), (3.0,))
        self.y = self.model.simulate(theta, stream(77, SIMULATE, 0))

    def test_dt_recovers_truth(self):
        res = mle_dt(self.model, self.y)
        assert res.converged
        assert res.objective_kind == "DT"
        assert res.theta_hat["rho"] == pytest.approx(0.6, abs=0.15)
        assert res.theta_hat["lambda"] == pytest.approx(3.0, abs=0.3)

    def test_ce_recovers_truth_and_is_deterministic(self):
        jit = JitterMatrix.generate(400, 400, seed=3)
        res1 = mle_ce(self.model, self.y, jitters=jit)
        res2 = mle_ce(self.model, self.y, jitters=jit)
        assert res1.objective_kind == "CE"
        assert res1.theta_hat["rho"] == pytest.approx(0.6, abs=0.15)
        np.testing.assert_array_equal(res1.theta_hat.values, res2.theta_hat.values)
        assert res1.loglik_at_max == res2.loglik_at_max

    def test_explicit_start_is_respected(self):
        start = self.model.pack((0.55,), (2.9,))
        res = mle_dt(self.model, self.y, theta0=start)
        direct = loglik_dt(self.model, self.y, res.theta_hat)
        assert direct == pytest.approx(res.loglik_at_max, abs=1e-9)


class TestDefaultStart:
    def test_poisson_moment_match(self):
        model = dg.CopulaModel("ar1", "poisson", 4)
        start = default_start(model, np.array([2, 4, 3, 3]))
        assert start["lambda"] == pytest.approx(3.0)
        assert start["rho"] == 0.3

    def test_negbinomial_overdispersion(self):
        model = dg.CopulaModel("identity", "negbinomial", 6)
        y = np.array([0, 2, 30, 5, 12, 23])
        start = default_start(model, y)
        assert start["mu"] == pytest.approx(y.mean())
        assert start["k"] > 0

    def test_degenerate_sample_stays_inside_domain(self):
        model = dg.CopulaModel("identity", "poisson", 3)
        start = default_start(model, np.zeros(3, dtype=int))
        assert start["lambda"] > 0


def _richardson_grad(f, x, h0=1e-3):
    """Fourth-order Richardson extrapolation of the central difference."""
    x = np.asarray(x, dtype=float)
    g = np.empty(x.size)
    for j in range(x.size):
        h = h0 * max(abs(x[j]), 1.0)

        def central(step):
            xp, xm = x.copy(), x.copy()
            xp[j] += step
            xm[j] -= step
            return (f(xp) - f(xm)) / (2.0 * step)

        g[j] = (4.0 * central(h / 2.0) - central(h)) / 3.0
    return g


class TestScoreFD:
    def test_matches_richardson_on_smooth_function(self):
        def f(x):
            return math.sin(x[0]) + x[0] ** 2 * x[1] - math.exp(0.3 * x[1])

        x = np.array([0.7, -1.3])
        g = score_fd(f, x)
        ref = _richardson_grad(f, x)
        assert np.max(np.abs(g - ref) / np.abs(ref)) < 1e-6

    def test_matches_analytic_gradient(self):
        def f(x):
            return x[0] ** 3 - 2.0 * x[0] * x[1]

        x = np.array([1.5, 0.4])
        g = score_fd(f, x)
        np.testing.assert_allclose(g, [3 * 1.5 ** 2 - 2 * 0.4, -2 * 1.5], rtol=1e-8)

    def test_one_sided_fallback_warns(self):
        def half_line(x):
            if x[0] > 0.7:
                raise ValueError("out of domain")
            return x[0] ** 2

        with pytest.warns(BoundaryStepWarning):
            g = score_fd(half_line, np.array([0.7]))
        assert g[0] == pytest.approx(1.4, abs=1e-3)

    def test_nowhere_evaluable_gives_nan(self):
        def broken(x):
            raise ValueError("nope")

        g = score_fd(broken, np.array([1.0, 2.0]))
        assert np.all(np.isnan(g))


class TestHessianFD:
    def test_exact_on_quadratics(self):
        a = np.array([[2.0, 0.7, -0.3], [0.7, 1.5, 0.2], [-0.3, 0.2, 3.0]])
        b = np.array([1.0, -2.0, 0.5])

        def f(x):
            return 0.5 * float(x @ a @ x) + float(b @ x)

        for x in (np.zeros(3), np.array([0.3, -1.1, 2.0])):
            h = hessian_fd(f, x)
            assert np.max(np.abs(h - a)) < 1e-6

    def test_output_is_symmetric(self):
        def f(x):
            return math.cos(x[0] * x[1]) + x[0] ** 3

        h = hessian_fd(f, np.array([0.4, 0.9]))
        np.testing.assert_array_equal(h, h.T)

    def test_one_sided_fallback_warns(self):
        def half_line(x):
            if np.any(x > 1.0):
                raise ValueError("out of domain")
            return float(x[0] ** 2 + x[0] * x[1])

        with pytest.warns(BoundaryStepWarning):
            h = hessian_fd(half_line, np.array([1.0, 1.0]))
        assert h[0, 0] == pytest.approx(2.0, abs=1e-2)


class TestLikelihoodRatio:
    def test_zero_at_the_same_point(self):
        theta = dg.ParamVector(("mu",), [3.0])
        assert likelihood_ratio(lambda pv: -pv["mu"], theta, theta) == 0.0

    def test_positive_when_hat_is_better(self):
        hat = dg.ParamVector(("mu",), [5.0])
        null = dg.ParamVector(("mu",), [3.0])
        lam = likelihood_ratio(lambda pv: -((pv["mu"] - 5.0) ** 2), hat, null)
        assert lam == pytest.approx(8.0)

    def test_tiny_negative_clipped_silently(self):
        hat = dg.ParamVector(("mu",), [4.0])
        null = dg.ParamVector(("mu",), [3.0])

        def obj(pv):
            return -2.5e-7 if pv["mu"] == 4.0 else 0.0

        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert likelihood_ratio(obj, hat, null) == 0.0

    def test_material_negative_warns(self):
        hat = dg.ParamVector(("mu",), [4.0])
        null = dg.ParamVector(("mu",), [3.0])
        with pytest.warns(RuntimeWarning, match="not a maximizer"):
            lam = likelihood_ratio(lambda pv: -pv["mu"], hat, null)
        assert lam == 0.0
