"""
공용 pytest fixture

작은 합성 패널/그래프, 작은 모델 설정, 그리고 기울기 검사에 쓰는
무작위 소형 문제 생성기를 제공한다.
"""

import numpy as np
import pytest

from arm3dnet.models.graph import DynamicAdjacency
from arm3dnet.models.panel import TimeSeriesPanel
from arm3dnet.schemas.configs import Arm3dnetConfig, SyntheticConfig, TrainConfig
from arm3dnet.services.data_ingest import split_ranges, standardize_covariates
from arm3dnet.services.graph import build_dynamic_adjacency, to_transition


@pytest.fixture(scope="session")
def synthetic_data():
    """4노드 40일 합성 패널, 이동량 기록, 생성기 설명."""
    from arm3dnet.services.synthetic import generate_synthetic_panel

    return generate_synthetic_panel(SyntheticConfig(n_nodes=4, t_days=40, seed=3))


@pytest.fixture
def small_panel(synthetic_data):
    """예측 구간 5일로 나누고 공변량을 표준화한 패널과 동적 인접 행렬."""
    panel, records, _ = synthetic_data
    graph = build_dynamic_adjacency(records, panel.node_ids, panel.dates, threshold=200.0, window=7)
    panel = split_ranges(panel, 5)
    panel, _ = standardize_covariates(panel)
    return panel, graph


@pytest.fixture
def tiny_config() -> Arm3dnetConfig:
    return Arm3dnetConfig(hidden_size=3, mixture_K=2, horizon=3, n_samples=4)


@pytest.fixture
def fast_train_config() -> TrainConfig:
    return TrainConfig(epochs=3, patience=2, lr=0.01, cond_len=10, stride=5, val_fraction=0.3, batch_size=2, seed=0)


def make_problem(rng: np.random.Generator, n: int, t: int, p: int, t0: int | None = None):
    """무작위 타깃/공변량 패널과 음수 상관을 포함한 무작위 인접 행렬."""
    node_ids = tuple(f"{10001 + i:05d}" for i in range(n))
    panel = TimeSeriesPanel(
        node_ids=node_ids,
        targets=rng.standard_normal((n, t)),
        covariates=rng.standard_normal((t, n, p)),
        t0=t0 if t0 is not None else max(2, t - 2),
    )
    per_day = rng.uniform(-1.0, 1.0, size=(t, n, n))
    for day in per_day:
        np.fill_diagonal(day, 1.0)
    graph = DynamicAdjacency(
        node_ids=node_ids,
        per_day=per_day,
        transitions=np.stack([to_transition(a).matrix for a in per_day]),
        threshold=0.0,
        window=2,
    )
    return panel, graph


@pytest.fixture
def problem_factory():
    return make_problem


def finite_difference_check(store, loss_value, analytic: dict[str, np.ndarray], step: float = 1e-5) -> float:
    """
    모든 파라미터 원소에 중앙 차분을 적용해 역전파 기울기와의 최대 상대 오차를 반환한다.

    loss_value(store)는 현재 파라미터 값으로 손실을 계산하는 함수다.
    상대 오차 = |a - n| / max(|a|, |n|, 1e-6)
    """
    worst = 0.0
    for name, param in store.params.items():
        flat = param.reshape(-1)
        grad = analytic[name].reshape(-1)
        for k in range(flat.size):
            original = flat[k]
            flat[k] = original + step
            plus = loss_value(store)
            flat[k] = original - step
            minus = loss_value(store)
            flat[k] = original
            numeric = (plus - minus) / (2.0 * step)
            worst = max(worst, abs(grad[k] - numeric) / max(abs(grad[k]), abs(numeric), 1e-6))
    return worst


@pytest.fixture
def gradient_checker():
    return finite_difference_check
