"""
우도 헤드 서비스

은닉 상태 h를 단일 가우시안 또는 K성분 가우시안 혼합 파라미터로 바꾸고,
음의 로그우도 평가와 조상 샘플링, 혼합 모멘트를 제공한다.

링크 함수:
    weights = softmax(W_p h + b_p)
    means   = W_mu h + b_mu                     (항등 링크)
    sigmas  = softplus(W_sigma h + b_sigma) + floor   (sigma_link="exp"이면 exp)
"""

from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp
from scipy.stats import norm

from arm3dnet.core.exceptions import ShapeMismatchError
from arm3dnet.models.density import GaussianParams, GmmParams
from arm3dnet.services.nn_core import Tape, Variable, softmax

DEFAULT_SIGMA_FLOOR = 1e-6


class Dense(NamedTuple):
    W: np.ndarray
    b: np.ndarray


# ============================================================
# 테이프 헤드 (학습/예측 공용 경로)
# ============================================================
def sigma_link(tape: Tape, raw: Variable, link: str, floor: float) -> Variable:
    activated = tape.exp(raw) if link == "exp" else tape.softplus(raw)
    return tape.add_const(activated, floor) if floor else activated


def head_forward(
    tape: Tape,
    h: Variable,
    weights: dict[str, Variable],
    link: str = "softplus",
    floor: float = DEFAULT_SIGMA_FLOOR,
) -> tuple[Variable | None, Variable, Variable]:
    """
    (logits, mu, sigma)를 반환한다. 단일 가우시안 헤드(head.W_p 없음)는 logits가 None이다.
    """
    mu = tape.linear(h, weights["head.W_mu"], weights["head.b_mu"])
    sigma = sigma_link(tape, tape.linear(h, weights["head.W_sigma"], weights["head.b_sigma"]), link, floor)
    logits = None
    if "head.W_p" in weights:
        logits = tape.linear(h, weights["head.W_p"], weights["head.b_p"])
    return logits, mu, sigma


def _head_weights(**dense: Dense) -> dict[str, Variable]:
    out = {}
    for key, layer in dense.items():
        out[f"head.W_{key}"] = Tape.constant(layer.W)
        out[f"head.b_{key}"] = Tape.constant(layer.b)
    return out


def _check_head(h: np.ndarray, **dense: Dense) -> None:
    for key, layer in dense.items():
        W, b = np.asarray(layer.W), np.asarray(layer.b)
        if W.ndim != 2 or W.shape[1] != h.shape[-1] or b.shape != (W.shape[0],):
            raise ShapeMismatchError(f"head.{key}", {"h": h.shape, "W": W.shape, "b": b.shape})


def gaussian_head(
    h: np.ndarray,
    W_mu: np.ndarray,
    b_mu: np.ndarray,
    W_sigma: np.ndarray,
    b_sigma: np.ndarray,
    link: str = "softplus",
    floor: float = 0.0,
) -> GaussianParams:
    """mu = W_mu h + b_mu, sigma = softplus(W_sigma h + b_sigma). 출력 차원은 1이다."""
    h = np.asarray(h, dtype=np.float64)
    dense = {"mu": Dense(np.atleast_2d(W_mu), np.atleast_1d(b_mu)), "sigma": Dense(np.atleast_2d(W_sigma), np.atleast_1d(b_sigma))}
    _check_head(h, **dense)
    tape = Tape(record=False)
    _, mu, sigma = head_forward(tape, tape.constant(h), _head_weights(**dense), link, floor)
    return GaussianParams(mu=mu.value[..., 0], sigma=sigma.value[..., 0])


def gmm_head(
    h: np.ndarray,
    theta_p: Dense,
    theta_mu: Dense,
    theta_sigma: Dense,
    link: str = "softplus",
    floor: float = DEFAULT_SIGMA_FLOOR,
) -> GmmParams:
    """은닉 상태에서 K성분 혼합 파라미터를 계산한다. K는 theta_p의 행 수로 정해진다."""
    h = np.asarray(h, dtype=np.float64)
    _check_head(h, p=theta_p, mu=theta_mu, sigma=theta_sigma)
    k = np.shape(theta_p.W)[0]
    if np.shape(theta_mu.W)[0] != k or np.shape(theta_sigma.W)[0] != k:
        raise ShapeMismatchError(
            "gmm_head", {"theta_p": np.shape(theta_p.W), "theta_mu": np.shape(theta_mu.W), "theta_sigma": np.shape(theta_sigma.W)}
        )
    tape = Tape(record=False)
    logits, mu, sigma = head_forward(
        tape, tape.constant(h), _head_weights(p=theta_p, mu=theta_mu, sigma=theta_sigma), link, floor
    )
    return GmmParams(weights=softmax(logits.value), means=mu.value, sigmas=sigma.value)


def params_from_head(logits: Variable | None, mu: Variable, sigma: Variable) -> GmmParams:
    """테이프 헤드 출력값을 GmmParams로 묶는다 (단일 가우시안은 K=1 혼합)."""
    weights = np.ones_like(mu.value) if logits is None else softmax(logits.value)
    return GmmParams(weights=weights, means=mu.value, sigmas=sigma.value)


# ============================================================
# 우도 / 샘플링 / 모멘트
# ============================================================
def gaussian_nll(params: GaussianParams, z: np.ndarray | float) -> np.ndarray | float:
    return -norm.logpdf(z, loc=params.mu, scale=params.sigma)


def gmm_nll(params: GmmParams, z: np.ndarray | float) -> np.ndarray | float:
    """
    -log Σ_k p_k N(z; μ_k, σ_k²) 를 log-sum-exp로 평가한다.
    z는 배치 형상(weights.shape[:-1])과 같거나 브로드캐스트 가능해야 한다.
    """
    z = np.asarray(z, dtype=np.float64)[..., None]
    with np.errstate(divide="ignore"):
        log_w = np.log(params.weights)
    log_joint = log_w + norm.logpdf(z, loc=params.means, scale=params.sigmas)
    out = -logsumexp(log_joint, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def gmm_sample(params: GmmParams, rng: np.random.Generator) -> np.ndarray | float:
    """
    성분 k ~ Categorical(weights)를 뽑은 뒤 z ~ N(μ_k, σ_k)를 뽑는다.
    배치 형상마다 한 개씩 뽑으며, 같은 시드의 rng면 같은 결과가 나온다.
    """
    batch_shape = params.weights.shape[:-1]
    u = rng.random(batch_shape)
    cdf = np.cumsum(params.weights, axis=-1)
    k = np.minimum((cdf <= np.asarray(u)[..., None]).sum(axis=-1), params.n_components - 1)
    k = k[..., None]
    mu = np.take_along_axis(params.means, k, axis=-1)[..., 0]
    sigma = np.take_along_axis(params.sigmas, k, axis=-1)[..., 0]
    z = mu + sigma * rng.standard_normal(batch_shape)
    return float(z) if np.ndim(z) == 0 else z


def gmm_moments(params: GmmParams) -> tuple[np.ndarray | float, np.ndarray | float]:
    """혼합 평균 Σ p_k μ_k 와 분산 Σ p_k(σ_k² + μ_k²) - mean²."""
    mean = np.sum(params.weights * params.means, axis=-1)
    second = np.sum(params.weights * (params.sigmas**2 + params.means**2), axis=-1)
    variance = np.maximum(second - mean**2, 0.0)
    if np.ndim(mean) == 0:
        return float(mean), float(variance)
    return mean, variance


def gmm_cdf(params: GmmParams, x: np.ndarray) -> np.ndarray:
    """단일 혼합(배치 없음)의 CDF. 표본 분포 검정에 쓴다."""
    x = np.asarray(x, dtype=np.float64)[..., None]
    return np.sum(params.weights * norm.cdf(x, loc=params.means, scale=params.sigmas), axis=-1)
