"""
우도 헤드 테스트

가우시안/혼합 헤드, 음의 로그우도의 수치 안정성, 샘플링 분포, 모멘트를 검증한다.
"""

import numpy as np
import pytest
from scipy.stats import kstest, norm

from arm3dnet.core.exceptions import ShapeMismatchError
from arm3dnet.models.density import GaussianParams, GmmParams
from arm3dnet.services.density import (
    Dense,
    gaussian_head,
    gaussian_nll,
    gmm_cdf,
    gmm_head,
    gmm_moments,
    gmm_nll,
    gmm_sample,
)
from arm3dnet.services.nn_core import softplus

HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
REFERENCE = GmmParams(weights=np.array([0.3, 0.7]), means=np.array([-1.0, 2.0]), sigmas=np.array([0.5, 1.5]))

# 1% 유의수준 KS 임계값 (큰 표본 근사)
KS_CRITICAL_1PCT = 1.628 / np.sqrt(100_000)


def _naive_nll(params: GmmParams, z: float) -> float:
    density = sum(
        w * np.exp(-0.5 * ((z - m) / s) ** 2) / (s * np.sqrt(2.0 * np.pi))
        for w, m, s in zip(params.weights, params.means, params.sigmas)
    )
    return -np.log(density)


def _dense(rng: np.random.Generator, k: int, h: int) -> Dense:
    return Dense(rng.normal(size=(k, h)), rng.normal(size=k))


# ============================================================
# 헤드
# ============================================================
class TestGaussianHead:
    def test_zero_weights(self):
        params = gaussian_head(np.ones(3), np.zeros((1, 3)), np.zeros(1), np.zeros((1, 3)), np.zeros(1))

        assert params.mu == 0.0
        assert params.sigma == pytest.approx(np.log(2.0), abs=1e-15)

    def test_large_sigma_path(self):
        params = gaussian_head(np.zeros(2), np.zeros((1, 2)), np.zeros(1), np.zeros((1, 2)), np.array([100.0]))

        assert params.sigma == pytest.approx(100.0, abs=1e-9)

    def test_hand_arithmetic(self):
        h = np.array([0.5, -1.0])
        W_mu, b_mu = np.array([[2.0, 1.0]]), np.array([0.25])
        W_sigma, b_sigma = np.array([[-0.5, 0.3]]), np.array([0.1])

        params = gaussian_head(h, W_mu, b_mu, W_sigma, b_sigma)

        assert params.mu == pytest.approx(2.0 * 0.5 - 1.0 + 0.25, abs=1e-12)
        assert params.sigma == pytest.approx(np.log1p(np.exp(-0.25 - 0.3 + 0.1)), abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            gaussian_head(np.ones(3), np.zeros((1, 2)), np.zeros(1), np.zeros((1, 3)), np.zeros(1))


class TestGmmHead:
    def test_zero_hidden_state(self):
        zero = Dense(np.ones((5, 4)), np.zeros(5))

        params = gmm_head(np.zeros(4), zero, zero, zero, floor=0.0)

        np.testing.assert_allclose(params.weights, 0.2, atol=1e-15)
        np.testing.assert_allclose(params.sigmas, np.log(2.0), atol=1e-15)
        np.testing.assert_array_equal(params.means, 0.0)

    def test_single_component(self):
        rng = np.random.default_rng(0)

        params = gmm_head(rng.normal(size=3), _dense(rng, 1, 3), _dense(rng, 1, 3), _dense(rng, 1, 3))

        np.testing.assert_array_equal(params.weights, [1.0])

    def test_always_valid(self):
        rng = np.random.default_rng(1)
        for _ in range(500):
            k, h = int(rng.integers(1, 17)), int(rng.integers(1, 6))
            params = gmm_head(
                rng.normal(scale=5.0, size=(3, h)), _dense(rng, k, h), _dense(rng, k, h), _dense(rng, k, h)
            )
            assert params.n_components == k
            np.testing.assert_allclose(params.weights.sum(axis=-1), 1.0, atol=1e-12)
            assert np.all(params.sigmas > 0)

    def test_component_count_mismatch(self):
        rng = np.random.default_rng(2)

        with pytest.raises(ShapeMismatchError):
            gmm_head(np.zeros(3), _dense(rng, 2, 3), _dense(rng, 3, 3), _dense(rng, 2, 3))


# ============================================================
# 음의 로그우도
# ============================================================
class TestGmmNll:
    def test_standard_normal_at_mode(self):
        single = GmmParams(np.array([1.0]), np.array([0.0]), np.array([1.0]))

        assert gmm_nll(single, 0.0) == pytest.approx(HALF_LOG_2PI, abs=1e-15)

    def test_duplicate_components_collapse(self):
        double = GmmParams(np.array([0.5, 0.5]), np.zeros(2), np.ones(2))

        assert gmm_nll(double, 0.0) == pytest.approx(HALF_LOG_2PI, abs=1e-15)

    def test_matches_density_summation(self):
        assert gmm_nll(REFERENCE, 0.4) == pytest.approx(_naive_nll(REFERENCE, 0.4), abs=1e-10)

    def test_random_oracle_and_far_tails(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            k = int(rng.integers(1, 6))
            params = GmmParams(
                weights=rng.dirichlet(np.ones(k)),
                means=rng.normal(size=k),
                sigmas=rng.uniform(0.2, 2.0, size=k),
            )
            z = params.means[0] + rng.uniform(-50.0, 50.0) * params.sigmas.min()
            value = gmm_nll(params, z)
            assert np.isfinite(value)
            naive = _naive_nll(params, z)
            if naive < 700.0:
                assert value == pytest.approx(naive, abs=1e-10, rel=1e-12)

    def test_stable_far_from_every_mean(self):
        assert np.isfinite(gmm_nll(REFERENCE, 1e6 * 1.5))
        assert np.isfinite(gmm_nll(REFERENCE, -1e6 * 1.5))

    def test_single_component_equals_gaussian(self):
        rng = np.random.default_rng(4)
        h = rng.normal(size=3)
        mu_layer, sigma_layer = _dense(rng, 1, 3), _dense(rng, 1, 3)
        gaussian = gaussian_head(h, mu_layer.W, mu_layer.b, sigma_layer.W, sigma_layer.b, floor=1e-6)
        mixture = gmm_head(h, Dense(np.zeros((1, 3)), np.zeros(1)), mu_layer, sigma_layer)

        assert gmm_nll(mixture, 0.3) == pytest.approx(gaussian_nll(gaussian, 0.3), abs=1e-12)
        assert gaussian_nll(gaussian, 0.3) == pytest.approx(-norm.logpdf(0.3, gaussian.mu, gaussian.sigma), abs=1e-15)

    def test_batched(self):
        params = GmmParams(
            weights=np.tile(REFERENCE.weights, (3, 1)),
            means=np.tile(REFERENCE.means, (3, 1)),
            sigmas=np.tile(REFERENCE.sigmas, (3, 1)),
        )

        values = gmm_nll(params, np.array([0.4, 0.4, 0.4]))

        np.testing.assert_allclose(values, _naive_nll(REFERENCE, 0.4), atol=1e-10)


# ============================================================
# 샘플링 / 모멘트
# ============================================================
class TestGmmSample:
    def test_degenerate_component(self):
        params = GmmParams(np.array([1.0]), np.array([7.0]), np.array([1e-12]))

        assert gmm_sample(params, np.random.default_rng(0)) == pytest.approx(7.0, abs=1e-9)

    def test_zero_weight_excluded(self):
        # Given: 가중치 0인 성분이 100에 있다
        params = GmmParams(np.array([1.0, 0.0]), np.array([3.0, 100.0]), np.array([1.0, 1.0]))
        rng = np.random.default_rng(1)

        # When
        draws = np.array([gmm_sample(params, rng) for _ in range(2000)])

        # Then
        assert draws.max() < 50.0

    def test_reproducible(self):
        a = [gmm_sample(REFERENCE, np.random.default_rng(5)) for _ in range(3)]
        b = [gmm_sample(REFERENCE, np.random.default_rng(5)) for _ in range(3)]

        assert a == b

    def test_empirical_mean(self):
        """표본 10^6개의 평균과 분산이 혼합 분포의 모멘트와 맞는다."""
        # Given
        batch = GmmParams(
            weights=np.tile(REFERENCE.weights, (1_000_000, 1)),
            means=np.tile(REFERENCE.means, (1_000_000, 1)),
            sigmas=np.tile(REFERENCE.sigmas, (1_000_000, 1)),
        )

        # When
        draws = gmm_sample(batch, np.random.default_rng(6))

        # Then: 평균은 표준오차 3배 안
        _, variance = gmm_moments(REFERENCE)
        standard_error = np.sqrt(variance / draws.size)
        assert abs(draws.mean() - 1.1) < 3 * standard_error
        assert draws.var() == pytest.approx(variance, rel=0.01)

    @pytest.mark.parametrize(
        "weights, means, sigmas",
        [
            ([1.0], [0.0], [1.0]),
            ([0.3, 0.7], [-1.0, 2.0], [0.5, 1.5]),
            ([0.5, 0.5], [-4.0, 4.0], [1.0, 1.0]),
            ([0.2, 0.3, 0.5], [0.0, 5.0, 10.0], [0.3, 2.0, 1.0]),
            ([0.1, 0.1, 0.1, 0.1, 0.6], [-3.0, -1.0, 0.0, 1.0, 3.0], [0.5, 0.5, 0.5, 0.5, 2.0]),
        ],
    )
    def test_ks_against_mixture_cdf(self, weights, means, sigmas):
        params = GmmParams(np.array(weights), np.array(means), np.array(sigmas))
        batch = GmmParams(
            weights=np.tile(params.weights, (100_000, 1)),
            means=np.tile(params.means, (100_000, 1)),
            sigmas=np.tile(params.sigmas, (100_000, 1)),
        )

        draws = gmm_sample(batch, np.random.default_rng(7))

        assert kstest(draws, lambda x: gmm_cdf(params, x)).statistic < KS_CRITICAL_1PCT


class TestGmmMoments:
    def test_single_component(self):
        mean, variance = gmm_moments(GaussianParams(np.array(2.0), np.array(3.0)).as_mixture())

        assert (mean, variance) == (2.0, 9.0)

    def test_symmetric_mixture(self):
        mean, _ = gmm_moments(GmmParams(np.array([0.5, 0.5]), np.array([-3.0, 3.0]), np.array([1.0, 1.0])))

        assert mean == 0.0

    def test_reference_values(self):
        mean, variance = gmm_moments(REFERENCE)

        expected_second = 0.3 * (0.25 + 1.0) + 0.7 * (2.25 + 4.0)
        assert mean == pytest.approx(1.1, abs=1e-15)
        assert variance == pytest.approx(expected_second - 1.1**2, abs=1e-12)


class TestParamsValidation:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            GmmParams(np.array([0.5, 0.4]), np.zeros(2), np.ones(2))

    def test_sigma_must_be_positive(self):
        with pytest.raises(ValueError):
            GaussianParams(np.array(0.0), np.array(0.0))

    def test_softplus_head_never_zero_with_floor(self):
        assert softplus(-800.0) + 1e-6 > 0.0
