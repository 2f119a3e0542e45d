"""
동적 그래프 도메인 모델

일별 가중 인접 행렬 A_t와 그로부터 만든 전이 행렬 Ã_t = D^{-1} clamp(A_t)를 함께 보관한다.
"""

from dataclasses import dataclass

import numpy as np

from arm3dnet.core.exceptions import ShapeMismatchError


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TransitionMatrix:
    """음수가 없고, 간선이 있는 행은 합이 1, 간선이 없는 행은 0인 N×N 행렬."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "matrix", _frozen(self.matrix))


@dataclass(frozen=True)
class DynamicAdjacency:
    node_ids: tuple[str, ...]
    per_day: np.ndarray  # (T, N, N) 피어슨 가중치, [-1, 1]
    transitions: np.ndarray  # (T, N, N) 행 정규화된 전이 행렬
    threshold: float
    window: int

    def __post_init__(self) -> None:
        per_day = _frozen(self.per_day)
        transitions = _frozen(self.transitions)
        object.__setattr__(self, "node_ids", tuple(self.node_ids))
        object.__setattr__(self, "per_day", per_day)
        object.__setattr__(self, "transitions", transitions)
        n = len(self.node_ids)
        if per_day.ndim != 3 or per_day.shape[1:] != (n, n) or transitions.shape != per_day.shape:
            raise ShapeMismatchError(
                "DynamicAdjacency",
                {"node_ids": (n,), "per_day": per_day.shape, "transitions": transitions.shape},
            )

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def t_days(self) -> int:
        return self.per_day.shape[0]

    def day(self, t: int) -> np.ndarray:
        return self.per_day[t]

    def transition(self, t: int) -> TransitionMatrix:
        return TransitionMatrix(self.transitions[t])

    def slice_days(self, start: int, length: int) -> "DynamicAdjacency":
        return DynamicAdjacency(
            node_ids=self.node_ids,
            per_day=self.per_day[start : start + length],
            transitions=self.transitions[start : start + length],
            threshold=self.threshold,
            window=self.window,
        )
