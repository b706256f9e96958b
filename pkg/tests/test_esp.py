"""Forward evaluation of the elementary symmetric polynomials."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from topkloss.esp import esp_forward_dc, esp_forward_sum, esp_forward_sum_linear, log_binomial
from topkloss.oracle import brute_sigma

FORWARDS = (esp_forward_dc, esp_forward_sum)

vectors = st.lists(
    st.floats(min_value=-6.0, max_value=6.0, allow_nan=False), min_size=3, max_size=12
)


class TestKnownValues:
    @pytest.mark.parametrize("forward", FORWARDS)
    def test_small_instance(self, forward):
        res = forward(np.log([1.0, 2.0, 3.0]), k=2)
        np.testing.assert_allclose(np.exp(res.log_sigma), [1.0, 6.0, 11.0], rtol=1e-12)

    @pytest.mark.parametrize("forward", FORWARDS)
    def test_sigma0_is_exactly_one(self, forward):
        res = forward(np.random.default_rng(0).uniform(-3, 3, 9), k=3, p=1)
        assert res.log_sigma[0] == 0.0

    @pytest.mark.parametrize("forward", FORWARDS)
    def test_constant_vector_binomials(self, forward):
        # sigma_j(c, ..., c) = C(n, j) c^j
        n, c = 8, 1.7
        res = forward(np.full(n, math.log(c)), k=4)
        expect = [math.comb(n, j) * c**j for j in range(5)]
        np.testing.assert_allclose(np.exp(res.log_sigma), expect, rtol=1e-12)

    def test_full_order_is_product(self):
        e = np.array([0.5, 1.5, 2.5, 3.5])
        res = esp_forward_sum(np.log(e), k=4)
        assert np.exp(res.log_sigma[4]) == pytest.approx(e.prod(), rel=1e-12)

    def test_c44_counts_subsets(self):
        res = esp_forward_sum(np.zeros(4), k=2)
        assert np.exp(res.log_sigma[2]) == pytest.approx(6.0, rel=1e-12)


class TestOracleEquivalence:
    @pytest.mark.parametrize("forward", FORWARDS)
    def test_random_instances(self, forward):
        rng = np.random.default_rng(42)
        for _ in range(60):
            n = int(rng.integers(3, 21))
            kp = int(rng.integers(1, min(n, 6) + 1))
            log_e = rng.uniform(-10, 10, n)
            res = forward(log_e, k=kp)
            e = np.exp(log_e)
            for j in range(kp + 1):
                expect = brute_sigma(e, j)
                assert np.exp(res.log_sigma[j]) == pytest.approx(expect, rel=1e-10)

    def test_dc_matches_sum(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            n = int(rng.integers(4, 40))
            k = int(rng.integers(1, min(n, 6) + 1))
            log_e = rng.uniform(-8, 8, n)
            a = esp_forward_dc(log_e, k).log_sigma
            b = esp_forward_sum(log_e, k).log_sigma
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


class TestInvariants:
    @given(vectors, st.integers(min_value=0, max_value=2**32 - 1))
    def test_permutation_invariance(self, log_e, seed):
        log_e = np.asarray(log_e)
        k = min(3, len(log_e))
        permuted = log_e[np.random.default_rng(seed).permutation(len(log_e))]
        a = esp_forward_dc(log_e, k).log_sigma
        b = esp_forward_dc(permuted, k).log_sigma
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)

    @given(vectors, st.floats(min_value=-3, max_value=3))
    def test_scaling_shifts_log_coefficients(self, log_e, log_c):
        # sigma_j(c e) = c^j sigma_j(e): log domain shift of j log c.
        log_e = np.asarray(log_e)
        k = min(3, len(log_e))
        base = esp_forward_dc(log_e, k).log_sigma
        scaled = esp_forward_dc(log_e + log_c, k).log_sigma
        j = np.arange(k + 1)
        np.testing.assert_allclose(scaled, base + j * log_c, rtol=1e-10, atol=1e-9)

    @given(vectors)
    def test_first_and_monotone_bound(self, log_e):
        log_e = np.asarray(log_e)
        k = min(4, len(log_e))
        res = esp_forward_dc(log_e, k)
        # sigma_1 = sum e_i
        assert np.exp(res.log_sigma[1]) == pytest.approx(np.exp(log_e).sum(), rel=1e-10)
        # sigma_j <= C(n, j) max(e)^j
        j = np.arange(k + 1)
        cap = log_binomial(len(log_e), j) + j * log_e.max()
        assert (res.log_sigma <= cap + 1e-9).all()

    def test_batch_matches_single_rows(self):
        rng = np.random.default_rng(3)
        batch = rng.uniform(-4, 4, (6, 11))
        res = esp_forward_dc(batch, k=3, p=1)
        for i in range(6):
            row = esp_forward_dc(batch[i], k=3, p=1)
            np.testing.assert_array_equal(res.log_sigma[i], row.log_sigma)

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        log_e = rng.uniform(-10, 10, 500)
        a = esp_forward_dc(log_e, 5, 1).log_sigma
        b = esp_forward_dc(log_e.copy(), 5, 1).log_sigma
        np.testing.assert_array_equal(a, b)


class TestStability:
    @pytest.mark.parametrize("tau", [10.0, 1.0, 0.1, 0.01, 0.001, 0.0001])
    def test_f32_finite_across_temperatures(self, tau):
        rng = np.random.default_rng(11)
        scores = rng.uniform(-20, 20, 300).astype(np.float32)
        log_e = (scores / np.float32(5 * tau)).astype(np.float32)
        res = esp_forward_dc(log_e, k=5, p=1, dtype=np.float32)
        assert np.isfinite(res.log_sigma).all()
        assert res.log_sigma.dtype == np.float32

    def test_linear_space_overflows_where_log_does_not(self):
        rng = np.random.default_rng(11)
        scores = rng.uniform(-20, 20, 300).astype(np.float32)
        arg = scores / np.float32(5 * 0.01)
        with np.errstate(over="ignore"):
            e = np.exp(arg)
        sig = esp_forward_sum_linear(e, 5, dtype=np.float32)
        assert not np.isfinite(sig).all()


class TestUsageErrors:
    def test_k_too_large(self):
        with pytest.raises(ValueError):
            esp_forward_dc(np.zeros(4), k=5)

    def test_k_plus_p_too_large(self):
        with pytest.raises(ValueError):
            esp_forward_dc(np.zeros(4), k=3, p=2)

    def test_k_zero(self):
        with pytest.raises(ValueError):
            esp_forward_dc(np.zeros(4), k=0)

    def test_non_finite_input(self):
        with pytest.raises(ValueError):
            esp_forward_dc(np.array([0.0, np.inf, 1.0]), k=2)
