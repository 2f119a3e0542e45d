"""
평가 지표 서비스

예측 구간의 모든 (노드, 스텝) 칸을 한데 모아(pooled) 계산한다.

    NRMSE = sqrt(mean((Z - Ẑ)²)) / mean(|Z|)
    ND    = Σ|Z - Ẑ| / Σ|Z|
"""

import numpy as np
import pandas as pd

from arm3dnet.core.exceptions import ShapeMismatchError, ZeroDenominatorError
from arm3dnet.models.forecast import ForecastArtifact
from arm3dnet.models.panel import TimeSeriesPanel
from arm3dnet.schemas.reports import MetricsReport


def _pair(actual: np.ndarray, predicted: np.ndarray, metric: str) -> tuple[np.ndarray, np.ndarray]:
    actual = np.asarray(actual, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    if actual.shape != predicted.shape:
        raise ShapeMismatchError(metric, {"actual": actual.shape, "predicted": predicted.shape})
    if np.abs(actual).sum() == 0.0:
        raise ZeroDenominatorError(metric)
    return actual, predicted


def nrmse(actual: np.ndarray, predicted: np.ndarray) -> float:
    actual, predicted = _pair(actual, predicted, "nrmse")
    return float(np.sqrt(np.mean((actual - predicted) ** 2)) / np.mean(np.abs(actual)))


def nd(actual: np.ndarray, predicted: np.ndarray) -> float:
    actual, predicted = _pair(actual, predicted, "nd")
    return float(np.abs(actual - predicted).sum() / np.abs(actual).sum())


def persistence_baseline(panel: TimeSeriesPanel) -> np.ndarray:
    """예측 구간 전체를 노드별 마지막 조건 구간 관측값으로 채운 (N, H) 배열."""
    last = panel.targets[:, panel.cond_len - 1]
    return np.repeat(last[:, None], panel.pred_len, axis=1)


def uncertainty_growth(artifact: ForecastArtifact) -> np.ndarray:
    """스텝별 평균 q90 - q10 폭 (H,)."""
    return (artifact.q90 - artifact.q10).mean(axis=0)


def build_report(name: str, actual: np.ndarray, predicted: np.ndarray) -> MetricsReport:
    actual = np.asarray(actual)
    return MetricsReport(
        model=name,
        nrmse=nrmse(actual, predicted),
        nd=nd(actual, predicted),
        n_series=actual.shape[0],
        horizon=actual.shape[1],
    )


def format_table(reports: list[MetricsReport]) -> str:
    """모델/베이스라인마다 한 행인 비교 표."""
    frame = pd.DataFrame([r.model_dump() for r in reports], columns=["model", "nrmse", "nd", "n_series", "horizon"])
    return frame.to_string(index=False, float_format=lambda v: f"{v:.4f}")
