"""
모델 입출력 도메인 모델

StepInput: 재귀 한 스텝의 입력 (직전 타깃, 그래프 합성곱 공변량, 순환 상태)
ConditionedState: 조건 구간을 통과한 뒤의 순환 상태와 마지막 관측값
ForecastArtifact: 조상 샘플링 결과 궤적과 분위수 요약
TrainingWindow: 학습 인스턴스 하나를 정의하는 시간 구간
"""

from dataclasses import dataclass

import numpy as np

from arm3dnet.core.exceptions import ShapeMismatchError

QUANTILES = (0.1, 0.5, 0.9)


@dataclass(frozen=True)
class RecurrentState:
    """층별 (h, c). 각 배열은 (N, H)."""

    h: tuple[np.ndarray, ...]
    c: tuple[np.ndarray, ...]

    @classmethod
    def zeros(cls, n_nodes: int, hidden_size: int, n_layers: int) -> "RecurrentState":
        return cls(
            h=tuple(np.zeros((n_nodes, hidden_size)) for _ in range(n_layers)),
            c=tuple(np.zeros((n_nodes, hidden_size)) for _ in range(n_layers)),
        )


@dataclass(frozen=True)
class ConditionedState:
    """
    조건 구간을 교사 강제로 통과한 결과.

    z_last는 마지막 관측값으로, 예측 첫 스텝의 z_prev가 된다.
    step_nll은 (N, C) 스텝별 음의 로그우도다.
    """

    state: RecurrentState
    z_last: np.ndarray
    step_nll: np.ndarray


@dataclass(frozen=True)
class StepInput:
    z_prev: np.ndarray  # (N,)
    gc: np.ndarray  # (N, P)
    state: RecurrentState

    def __post_init__(self) -> None:
        n = self.z_prev.shape[0]
        if self.z_prev.ndim != 1 or self.gc.ndim != 2 or self.gc.shape[0] != n:
            raise ShapeMismatchError("StepInput", {"z_prev": self.z_prev.shape, "gc": self.gc.shape})
        for h in self.state.h:
            if h.shape[0] != n:
                raise ShapeMismatchError("StepInput", {"z_prev": self.z_prev.shape, "h": h.shape})


@dataclass(frozen=True)
class ForecastArtifact:
    """
    샘플 궤적 S×N×H와 노드/스텝별 q10/q50/q90, 혼합 평균 점 예측.

    point는 각 궤적이 지나간 스텝별 혼합 분포 평균을 궤적들에 대해 평균낸 값이다.
    """

    node_ids: tuple[str, ...]
    samples: np.ndarray  # (S, N, H)
    quantiles: np.ndarray  # (3, N, H)
    point: np.ndarray  # (N, H)

    @classmethod
    def from_samples(
        cls, node_ids: tuple[str, ...], samples: np.ndarray, mixture_means: np.ndarray
    ) -> "ForecastArtifact":
        quantiles = np.quantile(samples, QUANTILES, axis=0)
        # 보간 반올림 오차로 순서가 뒤집히지 않도록 누적 최대값을 취한다
        quantiles = np.maximum.accumulate(quantiles, axis=0)
        return cls(
            node_ids=tuple(node_ids),
            samples=samples,
            quantiles=quantiles,
            point=mixture_means.mean(axis=0),
        )

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def horizon(self) -> int:
        return self.samples.shape[2]

    @property
    def q10(self) -> np.ndarray:
        return self.quantiles[0]

    @property
    def q50(self) -> np.ndarray:
        return self.quantiles[1]

    @property
    def q90(self) -> np.ndarray:
        return self.quantiles[2]

    def point_forecast(self, kind: str = "mean") -> np.ndarray:
        return self.q50 if kind == "median" else self.point


@dataclass(frozen=True)
class TrainingWindow:
    start: int
    cond_len: int
    pred_len: int

    @property
    def stop(self) -> int:
        return self.start + self.cond_len + self.pred_len

    @property
    def length(self) -> int:
        return self.cond_len + self.pred_len
