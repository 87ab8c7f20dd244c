"""Structured correlation families against dense linear-algebra oracles."""
import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from dgcopula import (
    AR1,
    ExchangeableBlocks,
    FactorizationError,
    Identity,
    dense_log_det,
    dense_quad_form_excess,
)


class TestAR1:
    def test_dense_layout(self):
        ar = AR1(0.6, 3)
        expected = np.array(
            [[1.0, 0.6, 0.36], [0.6, 1.0, 0.6], [0.36, 0.6, 1.0]]
        )
        assert_allclose(ar.dense(), expected, rtol=0, atol=0)

    def test_log_det_closed_form(self):
        # (n-1) * log(1 - rho^2): 2 * log(0.64) for n=3
        ar = AR1(0.6, 3)
        assert_allclose(ar.log_det(), 2.0 * math.log(0.64), rtol=1e-15)
        assert_allclose(ar.log_det(), dense_log_det(ar.dense()), rtol=1e-12)

    def test_quad_form_hand_value(self):
        # n=2: inv = [[1, -rho], [-rho, 1]] / (1 - rho^2); z = (1, 1)
        # z' inv z = 2(1 - rho)/(1 - rho^2) = 2/(1 + rho); excess subtracts 2
        ar = AR1(0.6, 2)
        z = np.array([1.0, 1.0])
        assert_allclose(ar.quad_form_excess(z), 2.0 / 1.6 - 2.0, rtol=1e-14)

    def test_cholesky_known_factor(self):
        ar = AR1(0.6, 2)
        assert_allclose(ar.cholesky(), np.array([[1.0, 0.0], [0.6, 0.8]]), rtol=1e-15)

    def test_batched_rows_match_looped(self, rng):
        ar = AR1(-0.35, 7)
        zz = rng.standard_normal((11, 7))
        batch = ar.quad_form_excess(zz)
        single = np.array([ar.quad_form_excess(z) for z in zz])
        assert_allclose(batch, single, rtol=1e-12)

    def test_near_singular_rejected(self):
        with pytest.raises(FactorizationError):
            AR1(1.0 - 1e-12, 5)
        AR1(0.999, 5)  # comfortably factorable

    def test_n_one_has_no_excess(self):
        ar = AR1(0.9, 1)
        assert ar.log_det() == 0.0
        assert ar.quad_form_excess(np.array([2.0])) == 0.0


class TestExchangeableBlocks:
    def test_log_det_closed_form(self):
        ex = ExchangeableBlocks(0.7, (3,))
        # (m-1) log(1-w) + log(1+(m-1)w) = 2 log(0.3) + log(2.4)
        assert_allclose(ex.log_det(), 2 * math.log(0.3) + math.log(2.4), rtol=1e-14)
        assert_allclose(ex.log_det(), dense_log_det(ex.dense()), rtol=1e-12)

    def test_mixed_block_sizes_match_dense(self, rng):
        ex = ExchangeableBlocks(0.45, (3, 1, 4, 2))
        assert_allclose(ex.log_det(), dense_log_det(ex.dense()), rtol=1e-12)
        zz = rng.standard_normal((9, 10))
        assert_allclose(
            ex.quad_form_excess(zz),
            dense_quad_form_excess(ex.dense(), zz),
            rtol=1e-10, atol=1e-12,
        )

    def test_negative_omega_within_block_bound(self):
        ex = ExchangeableBlocks(-0.3, (3,) * 4)
        assert_allclose(ex.log_det(), dense_log_det(ex.dense()), rtol=1e-12)
        with pytest.raises(FactorizationError):
            ExchangeableBlocks(-0.5, (3,) * 4)  # 1 + 2(-0.5) = 0

    def test_block_permutation_invariance(self, rng):
        z = rng.standard_normal(8)
        a = ExchangeableBlocks(0.6, (3, 5))
        b = ExchangeableBlocks(0.6, (5, 3))
        za = z
        zb = np.concatenate([z[3:], z[:3]])
        assert_allclose(a.quad_form_excess(za), b.quad_form_excess(zb), rtol=1e-12)
        assert_allclose(a.log_det(), b.log_det(), rtol=1e-15)


class TestIdentity:
    def test_everything_vanishes(self, rng):
        ident = Identity(6)
        assert ident.log_det() == 0.0
        z = rng.standard_normal((4, 6))
        assert np.all(ident.quad_form_excess(z) == 0.0)
        assert_allclose(ident.cholesky(), np.eye(6), rtol=0, atol=0)


def test_dimension_mismatch_raises(rng):
    ar = AR1(0.5, 4)
    with pytest.raises(ValueError):
        ar.quad_form_excess(np.zeros(5))
    with pytest.raises(ValueError):
        ExchangeableBlocks(0.5, (2, 2)).quad_form_excess(np.zeros((3, 5)))


def test_structured_vs_dense_random_sweep(rng):
    # 1000 random parameter draws split across the two structured families
    for _ in range(500):
        n = int(rng.integers(2, 9))
        rho = float(rng.uniform(-0.95, 0.95))
        ar = AR1(rho, n)
        z = rng.standard_normal(n)
        assert abs(ar.log_det() - dense_log_det(ar.dense())) < 1e-8
        assert abs(
            ar.quad_form_excess(z) - dense_quad_form_excess(ar.dense(), z)
        ) < 1e-8
    for _ in range(500):
        blocks = tuple(int(b) for b in rng.integers(1, 5, size=int(rng.integers(1, 5))))
        top = max(blocks)
        lo = -1.0 / (top - 1) + 0.05 if top > 1 else -0.9
        w = float(rng.uniform(lo, 0.95))
        ex = ExchangeableBlocks(w, blocks)
        z = rng.standard_normal(sum(blocks))
        assert abs(ex.log_det() - dense_log_det(ex.dense())) < 1e-8
        assert abs(
            ex.quad_form_excess(z) - dense_quad_form_excess(ex.dense(), z)
        ) < 1e-8


@given(
    st.floats(-0.9, 0.9),
    st.integers(2, 8),
    st.integers(0, 2 ** 32 - 1),
)
@settings(max_examples=60, deadline=None)
def test_ar1_quad_form_property(rho, n, seed):
    ar = AR1(rho, n)
    z = np.random.default_rng(seed).standard_normal(n)
    dense = dense_quad_form_excess(ar.dense(), z)
    assert ar.quad_form_excess(z) == pytest.approx(dense, rel=1e-9, abs=1e-9)


def test_quad_form_scales_linearly_smoke(rng):
    # Non-binding performance smoke check: O(n) quadratic form at n = 10^4
    ar = AR1(0.6, 10_000)
    z = rng.standard_normal(10_000)
    ar.quad_form_excess(z)  # warm up
    t0 = time.perf_counter()
    for _ in range(10):
        ar.quad_form_excess(z)
    per_call = (time.perf_counter() - t0) / 10
    assert per_call < 0.05


def test_cholesky_cached_and_read_only():
    ar = AR1(0.3, 5)
    first = ar.cholesky()
    assert ar.cholesky() is first
    with pytest.raises(ValueError):
        first[0, 0] = 2.0
