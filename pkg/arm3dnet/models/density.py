"""
확률 분포 파라미터 도메인 모델

배열의 마지막 축이 혼합 성분(K)이고, 앞쪽 축은 노드 등 배치 차원이다.
스칼라 한 개에 대한 분포는 형상 (K,)로 표현한다.
"""

from dataclasses import dataclass

import numpy as np

from arm3dnet.core.exceptions import ShapeMismatchError


@dataclass(frozen=True)
class GaussianParams:
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=np.float64)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if mu.shape != sigma.shape:
            raise ShapeMismatchError("GaussianParams", {"mu": mu.shape, "sigma": sigma.shape})
        if not (np.all(sigma > 0) and np.isfinite(mu).all() and np.isfinite(sigma).all()):
            raise ValueError("GaussianParams: sigma는 양수, 모든 값은 유한해야 합니다")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    def as_mixture(self) -> "GmmParams":
        """성분 하나짜리 혼합으로 본다 (K=1 축 추가)."""
        return GmmParams(
            weights=np.ones(self.mu.shape + (1,)),
            means=self.mu[..., None],
            sigmas=self.sigma[..., None],
        )


@dataclass(frozen=True)
class GmmParams:
    """
    가우시안 혼합 파라미터.

    weights는 음수가 아니고 마지막 축 합이 1 (1e-9 이내),
    sigmas는 양수이며, K >= 1이다.
    """

    weights: np.ndarray
    means: np.ndarray
    sigmas: np.ndarray

    def __post_init__(self) -> None:
        weights = np.asarray(self.weights, dtype=np.float64)
        means = np.asarray(self.means, dtype=np.float64)
        sigmas = np.asarray(self.sigmas, dtype=np.float64)
        if weights.ndim == 0 or not (weights.shape == means.shape == sigmas.shape):
            raise ShapeMismatchError(
                "GmmParams", {"weights": weights.shape, "means": means.shape, "sigmas": sigmas.shape}
            )
        if np.any(weights < 0) or not np.allclose(weights.sum(axis=-1), 1.0, rtol=0.0, atol=1e-9):
            raise ValueError("GmmParams: weights는 음수가 아니고 합이 1이어야 합니다")
        if not np.all(sigmas > 0):
            raise ValueError("GmmParams: sigmas는 양수여야 합니다")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "sigmas", sigmas)

    @property
    def n_components(self) -> int:
        return self.weights.shape[-1]

    def row(self, index: int) -> "GmmParams":
        return GmmParams(self.weights[index], self.means[index], self.sigmas[index])
