"""
동적 그래프 서비스

이동량 기록으로 일별 가중 인접 행렬을 만들고, 확산 전이 행렬로 정규화한 뒤
마스크 확산 합성곱 GC_t = (W ∘ Ã_t) X_t 를 적용한다.

인접 행렬 규칙:
    노드 i의 방문 시계열 s_i(d) = Σ_{j≠i} visits(i→j, d)  (과거 window일)
    A_t[i][j] = pearson(s_i, s_j)   if visits(i→j, t) >= threshold
              = 0                   otherwise
    A_t[i][i] = 1
"""

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from arm3dnet.core.exceptions import (
    ConstantVectorError,
    InsufficientHistoryError,
    LengthMismatchError,
    ShapeMismatchError,
)
from arm3dnet.models.graph import DynamicAdjacency, TransitionMatrix
from arm3dnet.schemas.records import MobilityRecord
from arm3dnet.services.nn_core import Tape, Variable

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 200.0
DEFAULT_WINDOW = 14


# ============================================================
# 피어슨 상관
# ============================================================
def pearson_correlation(x: np.ndarray, y: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatchError(x.size, y.size)
    if x.size < 2:
        raise ConstantVectorError()
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(np.dot(xc, xc))
    syy = float(np.dot(yc, yc))
    if sxx == 0.0 or syy == 0.0:
        raise ConstantVectorError()
    r = float(np.dot(xc, yc)) / np.sqrt(sxx * syy)
    return float(np.clip(r, -1.0, 1.0))


def _correlation_matrix(series: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(window, N) 시계열의 노드 간 상관 행렬과 상수가 아닌 노드 마스크."""
    centered = series - series.mean(axis=0)
    ss = np.einsum("dn,dn->n", centered, centered)
    valid = ss > 0.0
    denom = np.sqrt(np.outer(ss, ss))
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = (centered.T @ centered) / denom
    corr = np.where(np.outer(valid, valid), np.clip(corr, -1.0, 1.0), 0.0)
    return corr, valid


# ============================================================
# 인접 행렬 구성
# ============================================================
def visits_cube(
    mobility: list[MobilityRecord], node_ids: list[str] | tuple[str, ...], dates: list[str] | tuple[str, ...]
) -> np.ndarray:
    """(T, N, N) 일별 방문 수 배열. 노드/날짜 목록 밖의 기록은 무시한다."""
    node_index = {n: i for i, n in enumerate(node_ids)}
    date_index = {d: t for t, d in enumerate(dates)}
    cube = np.zeros((len(dates), len(node_ids), len(node_ids)))
    if not mobility:
        return cube
    frame = pd.DataFrame(
        {
            "t": [date_index.get(r.date.isoformat(), -1) for r in mobility],
            "i": [node_index.get(r.origin_fips, -1) for r in mobility],
            "j": [node_index.get(r.dest_fips, -1) for r in mobility],
            "visits": [r.aggregated_visits for r in mobility],
        }
    )
    frame = frame[(frame["t"] >= 0) & (frame["i"] >= 0) & (frame["j"] >= 0)]
    np.add.at(cube, (frame["t"].to_numpy(), frame["i"].to_numpy(), frame["j"].to_numpy()), frame["visits"].to_numpy(float))
    return cube


def adjacency_from_visits(cube: np.ndarray, threshold: float) -> np.ndarray:
    """과거 window일 방문 배열 (w, N, N)의 마지막 날 기준 A_t를 만든다."""
    if cube.shape[0] < 2:
        raise InsufficientHistoryError(day=cube.shape[0] - 1, available=cube.shape[0])
    n = cube.shape[1]
    off_diagonal = ~np.eye(n, dtype=bool)
    series = (cube * off_diagonal).sum(axis=2)
    corr, _ = _correlation_matrix(series)
    edges = (cube[-1] >= threshold) & off_diagonal
    adjacency = np.where(edges, corr, 0.0)
    np.fill_diagonal(adjacency, 1.0)
    return adjacency


def build_daily_adjacency(
    mobility: list[MobilityRecord], nodes: list[str] | tuple[str, ...], threshold: float = DEFAULT_THRESHOLD
) -> np.ndarray:
    """
    과거 윈도우의 이동 기록으로 윈도우 마지막 날의 A_t를 만든다.

    Raises:
        InsufficientHistoryError: 기록된 날짜가 2일 미만일 때
    """
    dates = sorted({r.date.isoformat() for r in mobility})
    if len(dates) < 2:
        raise InsufficientHistoryError(day=len(dates) - 1, available=len(dates))
    return adjacency_from_visits(visits_cube(mobility, nodes, dates), threshold)


def build_dynamic_adjacency(
    mobility: list[MobilityRecord] | np.ndarray,
    node_ids: list[str] | tuple[str, ...],
    dates: list[str] | tuple[str, ...] | None = None,
    threshold: float = DEFAULT_THRESHOLD,
    window: int = DEFAULT_WINDOW,
) -> DynamicAdjacency:
    """
    패널의 모든 날짜에 대해 A_t와 Ã_t를 만든다.

    mobility는 레코드 목록 또는 미리 만든 (T, N, N) 방문 배열이다.
    이력이 2일 미만인 초기 날짜는 자기 자신만 연결된 단위 행렬을 쓴다.
    """
    cube = mobility if isinstance(mobility, np.ndarray) else visits_cube(mobility, node_ids, dates or ())
    t_days, n = cube.shape[0], len(node_ids)
    per_day = np.empty((t_days, n, n))
    for t in range(t_days):
        lo = max(0, t - window + 1)
        per_day[t] = np.eye(n) if t - lo + 1 < 2 else adjacency_from_visits(cube[lo : t + 1], threshold)
    transitions = np.stack([to_transition(a).matrix for a in per_day]) if t_days else per_day.copy()
    edges = int(np.count_nonzero(per_day)) - t_days * n
    logger.info(
        "동적 인접 행렬 생성 완료",
        extra={"n_nodes": n, "t_days": t_days, "threshold": threshold, "window": window, "edges": edges},
    )
    return DynamicAdjacency(
        node_ids=tuple(node_ids), per_day=per_day, transitions=transitions, threshold=threshold, window=window
    )


def subset_adjacency(adjacency: DynamicAdjacency, node_ids: list[str] | tuple[str, ...]) -> DynamicAdjacency:
    """노드 부분집합으로 A_t를 자르고 Ã_t를 다시 정규화한다."""
    lookup = {n: i for i, n in enumerate(adjacency.node_ids)}
    idx = np.asarray([lookup[n] for n in node_ids])
    per_day = adjacency.per_day[:, idx][:, :, idx]
    return DynamicAdjacency(
        node_ids=tuple(node_ids),
        per_day=per_day,
        transitions=np.stack([to_transition(a).matrix for a in per_day]),
        threshold=adjacency.threshold,
        window=adjacency.window,
    )


# ============================================================
# 전이 행렬 / 확산 합성곱
# ============================================================
def to_transition(A: np.ndarray) -> TransitionMatrix:
    """음수를 0으로 자른 뒤 0이 아닌 행을 행 합으로 나눈다. 0인 행은 그대로 둔다."""
    clamped = np.maximum(np.asarray(A, dtype=np.float64), 0.0)
    row_sum = clamped.sum(axis=1, keepdims=True)
    safe = np.where(row_sum > 0.0, row_sum, 1.0)
    return TransitionMatrix(np.where(row_sum > 0.0, clamped / safe, 0.0))


def _matrix(tilde_A: TransitionMatrix | np.ndarray) -> np.ndarray:
    return tilde_A.matrix if isinstance(tilde_A, TransitionMatrix) else np.asarray(tilde_A, dtype=np.float64)


def _check_convolve(W: np.ndarray, tilde_A: np.ndarray, X: np.ndarray) -> None:
    n = tilde_A.shape[0]
    if W.shape != (n, n) or tilde_A.shape != (n, n) or X.ndim != 2 or X.shape[0] != n:
        raise ShapeMismatchError("diffusion_convolve", {"W": W.shape, "tilde_A": tilde_A.shape, "X": X.shape})


def diffusion_convolve(W: np.ndarray, tilde_A: TransitionMatrix | np.ndarray, X: np.ndarray) -> np.ndarray:
    """GC = (W ∘ Ã) X. W는 N×N 학습 간선 필터, X는 N×P 공변량."""
    W = np.asarray(W, dtype=np.float64)
    tilde = _matrix(tilde_A)
    X = np.asarray(X, dtype=np.float64)
    _check_convolve(W, tilde, X)
    return (W * tilde) @ X


def diffusion_op(tape: Tape, W: Variable, tilde_A: np.ndarray, X: Variable) -> Variable:
    """테이프 위의 확산 합성곱. W와 X 모두로 기울기가 흐른다."""
    _check_convolve(W.value, tilde_A, X.value)
    return tape.matmul(tape.mul(W, tape.constant(tilde_A)), X)


def init_edge_filter(rng: np.random.Generator, n_nodes: int) -> np.ndarray:
    """1 + U[-0.01, 0.01]. 순수 확산에서 시작한다."""
    return 1.0 + rng.uniform(-0.01, 0.01, size=(n_nodes, n_nodes))


# ============================================================
# 덤프
# ============================================================
def write_adjacency_dump(adjacency: DynamicAdjacency, path: str | Path) -> Path:
    """0이 아닌 간선을 day,i,j,weight 삼중항 텍스트로 기록한다."""
    t, i, j = np.nonzero(adjacency.per_day)
    frame = pd.DataFrame(
        {
            "day": t,
            "i": [adjacency.node_ids[k] for k in i],
            "j": [adjacency.node_ids[k] for k in j],
            "weight": adjacency.per_day[t, i, j],
        }
    )
    path = Path(path)
    frame.to_csv(path, index=False, float_format="%.12g")
    return path
