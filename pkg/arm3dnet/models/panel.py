"""
시계열 패널 도메인 모델

N개 카운티의 T일 타깃 시계열과 일별 공변량을 담는다.
배열은 생성 시 읽기 전용으로 고정되며, 변형 연산은 항상 새 패널을 반환한다.

시간 인덱스 규약:
    t0는 1부터 시작하는 분할 지점이다.
    조건 구간 = [1, t0-1]  -> 배열 인덱스 0 .. t0-2  (길이 cond_len = t0-1)
    예측 구간 = [t0, T]    -> 배열 인덱스 t0-1 .. T-1 (길이 pred_len = T-t0+1)
"""

from dataclasses import dataclass, field, replace

import numpy as np

from arm3dnet.core.exceptions import HorizonTooLongError, MissingTargetsError, ShapeMismatchError


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FeatureStats:
    """공변량 한 컬럼의 표준화 통계 (모집단 표준편차)."""

    mean: float
    std: float


@dataclass(frozen=True)
class TimeSeriesPanel:
    node_ids: tuple[str, ...]
    targets: np.ndarray  # (N, T)
    covariates: np.ndarray  # (T, N, P)
    t0: int
    dates: tuple[str, ...] | None = field(default=None)

    def __post_init__(self) -> None:
        targets = _frozen(self.targets)
        covariates = _frozen(self.covariates)
        object.__setattr__(self, "node_ids", tuple(str(n) for n in self.node_ids))
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "covariates", covariates)
        if self.dates is not None:
            object.__setattr__(self, "dates", tuple(self.dates))

        if targets.ndim != 2 or covariates.ndim != 3:
            raise ShapeMismatchError(
                "TimeSeriesPanel", {"targets": targets.shape, "covariates": covariates.shape}
            )
        n, t = targets.shape
        if len(self.node_ids) != n or covariates.shape[:2] != (t, n):
            raise ShapeMismatchError(
                "TimeSeriesPanel",
                {"node_ids": (len(self.node_ids),), "targets": targets.shape, "covariates": covariates.shape},
            )
        if self.dates is not None and len(self.dates) != t:
            raise ShapeMismatchError("TimeSeriesPanel", {"dates": (len(self.dates),), "targets": targets.shape})
        if not 1 < self.t0 <= t:
            raise HorizonTooLongError(t - self.t0 + 1, t)
        if not (np.isfinite(targets).all() and np.isfinite(covariates).all()):
            raise MissingTargetsError(required=n * t, available=int(np.isfinite(targets).sum()))

    # ------------------------------------------------------------
    # 형상 정보
    # ------------------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return self.targets.shape[0]

    @property
    def t_days(self) -> int:
        return self.targets.shape[1]

    @property
    def n_features(self) -> int:
        return self.covariates.shape[2]

    @property
    def cond_len(self) -> int:
        return self.t0 - 1

    @property
    def pred_len(self) -> int:
        return self.t_days - self.t0 + 1

    @property
    def conditioning_targets(self) -> np.ndarray:
        return self.targets[:, : self.cond_len]

    @property
    def prediction_targets(self) -> np.ndarray:
        return self.targets[:, self.cond_len :]

    # ------------------------------------------------------------
    # 파생 패널
    # ------------------------------------------------------------
    def with_t0(self, t0: int) -> "TimeSeriesPanel":
        return replace(self, t0=t0)

    def with_values(
        self, targets: np.ndarray | None = None, covariates: np.ndarray | None = None
    ) -> "TimeSeriesPanel":
        return replace(
            self,
            targets=self.targets if targets is None else targets,
            covariates=self.covariates if covariates is None else covariates,
        )

    def window(self, start: int, cond_len: int, pred_len: int) -> "TimeSeriesPanel":
        """[start, start+cond_len+pred_len) 구간을 잘라 t0 = cond_len+1인 패널을 만든다."""
        stop = start + cond_len + pred_len
        if start < 0 or stop > self.t_days:
            raise MissingTargetsError(required=stop, available=self.t_days)
        return TimeSeriesPanel(
            node_ids=self.node_ids,
            targets=self.targets[:, start:stop],
            covariates=self.covariates[start:stop],
            t0=cond_len + 1,
            dates=None if self.dates is None else self.dates[start:stop],
        )

    def truncate(self, t_days: int) -> "TimeSeriesPanel":
        """앞쪽 t_days일만 남긴다. 분할 지점은 잘린 길이에 맞춰 t_days로 둔다."""
        return TimeSeriesPanel(
            node_ids=self.node_ids,
            targets=self.targets[:, :t_days],
            covariates=self.covariates[:t_days],
            t0=min(self.t0, t_days),
            dates=None if self.dates is None else self.dates[:t_days],
        )

    def node_index(self, node_ids: list[str] | tuple[str, ...]) -> list[int]:
        lookup = {n: i for i, n in enumerate(self.node_ids)}
        return [lookup[n] for n in node_ids]
