"""
학습 서비스

패널을 고정 길이 윈도우로 자르고, Adam과 조기 종료로 에폭 루프를 돈다.
검증 ND가 가장 낮은 에폭의 파라미터를 체크포인트로 남긴다.

난수 스트림 (모두 TrainConfig.seed에서 파생):
    "init"                파라미터 초기화
    "shuffle.{epoch}"     에폭별 학습 윈도우 순서
    "validation.{k}"      k번째 검증 윈도우의 조상 샘플링 (에폭마다 동일)
"""

import copy
import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from arm3dnet.core.exceptions import NoWindowsError, NonFiniteLossError, WindowTooLongError
from arm3dnet.core.seeding import make_rng
from arm3dnet.models.forecast import TrainingWindow
from arm3dnet.models.graph import DynamicAdjacency
from arm3dnet.models.panel import TimeSeriesPanel
from arm3dnet.schemas.configs import Arm3dnetConfig, TrainConfig
from arm3dnet.schemas.reports import EpochRecord, TrainReport
from arm3dnet.services.data_ingest import select_nodes
from arm3dnet.services.graph import subset_adjacency
from arm3dnet.services.metrics import nd, nrmse
from arm3dnet.services.model import forecast, init_params, window_nll_grad
from arm3dnet.services.nn_core import AdamState, ParamStore, adam_update, clip_grad_norm
from arm3dnet.services.storage import Checkpoint

logger = logging.getLogger(__name__)

SCALING_SIZES = (4, 8, 16, 32)


# ============================================================
# 윈도우
# ============================================================
def make_windows(panel: TimeSeriesPanel, cond_len: int, pred_len: int, stride: int) -> list[TrainingWindow]:
    """시작점 0, stride, 2·stride, ... 중 패널 안에 들어가는 윈도우 전부."""
    total = cond_len + pred_len
    if total > panel.t_days:
        raise WindowTooLongError(total, panel.t_days)
    return [TrainingWindow(start, cond_len, pred_len) for start in range(0, panel.t_days - total + 1, stride)]


def split_windows(
    windows: list[TrainingWindow], val_fraction: float
) -> tuple[list[TrainingWindow], list[TrainingWindow]]:
    """시간 순서 뒤쪽 val_fraction(올림, 최소 1개)을 검증용으로 뗀다."""
    if len(windows) < 2:
        raise NoWindowsError(len(windows))
    n_val = min(max(1, int(np.ceil(len(windows) * val_fraction))), len(windows) - 1)
    return windows[:-n_val], windows[-n_val:]


def _slice(panel: TimeSeriesPanel, graph: DynamicAdjacency, window: TrainingWindow):
    return (
        panel.window(window.start, window.cond_len, window.pred_len),
        graph.slice_days(window.start, window.length),
    )


# ============================================================
# 기울기 / 검증
# ============================================================
def accumulate_gradients(
    cfg: Arm3dnetConfig,
    params: ParamStore,
    panel: TimeSeriesPanel,
    graph: DynamicAdjacency,
    windows: list[TrainingWindow],
) -> list[float]:
    """윈도우별 window_nll 기울기를 params.grads에 더한다. 배치 기울기 = 윈도우 기울기의 합."""
    losses = []
    for window in windows:
        sub_panel, sub_graph = _slice(panel, graph, window)
        losses.append(window_nll_grad(cfg, params, sub_panel, sub_graph))
    return losses


def evaluate_windows(
    cfg: Arm3dnetConfig,
    params: ParamStore,
    panel: TimeSeriesPanel,
    graph: DynamicAdjacency,
    windows: list[TrainingWindow],
    seed: int,
) -> tuple[float, float]:
    """검증 윈도우들의 예측 구간을 모아 (ND, NRMSE)를 계산한다. 점 예측은 혼합 평균이다."""
    actual, predicted = [], []
    for k, window in enumerate(windows):
        sub_panel, sub_graph = _slice(panel, graph, window)
        artifact = forecast(cfg, params, sub_panel, sub_graph, make_rng(seed, f"validation.{k}"))
        actual.append(sub_panel.prediction_targets)
        predicted.append(artifact.point)
    actual_all = np.concatenate(actual, axis=1)
    predicted_all = np.concatenate(predicted, axis=1)
    return nd(actual_all, predicted_all), nrmse(actual_all, predicted_all)


def _dump_window(
    dump_dir: str | None, epoch: int, index: int, window: TrainingWindow, panel: TimeSeriesPanel
) -> str | None:
    if dump_dir is None:
        return None
    sub = panel.window(window.start, window.cond_len, window.pred_len)
    path = Path(dump_dir) / f"nonfinite_epoch{epoch}_window{index}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "epoch": epoch,
        "window_index": index,
        "start": window.start,
        "cond_len": window.cond_len,
        "pred_len": window.pred_len,
        "node_ids": list(sub.node_ids),
        "targets": sub.targets.tolist(),
        "covariates": sub.covariates.tolist(),
    }
    path.write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")
    return str(path)


# ============================================================
# 학습 루프
# ============================================================
def train(
    model_cfg: Arm3dnetConfig,
    train_cfg: TrainConfig,
    panel: TimeSeriesPanel,
    graph: DynamicAdjacency,
    resume: Checkpoint | None = None,
) -> tuple[Checkpoint, TrainReport]:
    """
    에폭마다: 학습 윈도우를 시드 셔플 -> batch_size개씩 기울기 누적 -> 클리핑 -> Adam.
    이후 검증 ND/NRMSE를 계산해 최적 체크포인트를 갱신하고,
    patience 에폭 연속 개선이 없으면 멈춘다.

    Raises:
        NoWindowsError: 윈도우가 2개 미만일 때 (학습/검증 각 1개 이상 필요)
        NonFiniteLossError: 어느 에폭에서든 손실이 유한하지 않았을 때 학습을 끝까지 마친 뒤 발생한다.
            그 에폭은 해당 배치를 버리고 중단되며 검증도 건너뛴다. 예외의 checkpoint/report 속성에
            최적 결과가, detail에 첫 발생 위치와 중단된 에폭 목록이 담긴다.
    """
    windows = make_windows(panel, train_cfg.cond_len, model_cfg.horizon, train_cfg.stride)
    train_windows, val_windows = split_windows(windows, train_cfg.val_fraction)

    if resume is not None:
        params = resume.params.copy()
        adam = copy.deepcopy(resume.adam) if resume.adam is not None else None
        first_epoch = resume.epoch + 1
    else:
        params = init_params(model_cfg, panel.n_nodes, make_rng(train_cfg.seed, "init"))
        adam = None
        first_epoch = 1
    if adam is None:
        adam = AdamState(lr=train_cfg.lr, beta1=train_cfg.beta1, beta2=train_cfg.beta2, eps=train_cfg.eps)

    logger.info(
        "학습 시작",
        extra={
            "n_nodes": panel.n_nodes,
            "train_windows": len(train_windows),
            "val_windows": len(val_windows),
            "first_epoch": first_epoch,
        },
    )

    records: list[EpochRecord] = []
    best: Checkpoint | None = resume
    best_nd = np.inf if resume is None or resume.best_val_nd is None else resume.best_val_nd
    since_best = 0
    stopped_early = False

    def snapshot(epoch: int, val_nd: float | None) -> Checkpoint:
        return Checkpoint(
            config=model_cfg,
            node_ids=panel.node_ids,
            params=params.copy(),
            adam=copy.deepcopy(adam),
            epoch=epoch,
            best_val_nd=val_nd,
        )

    def current_report() -> TrainReport:
        best_epoch = records[int(np.argmin([r.val_nd for r in records]))].epoch if records else 0
        return TrainReport(epochs=records, best_epoch=best_epoch, stopped_early=stopped_early)

    first_failure: tuple[int, int, str | None] | None = None
    aborted: list[int] = []

    for epoch in range(first_epoch, train_cfg.epochs + 1):
        order = make_rng(train_cfg.seed, f"shuffle.{epoch}").permutation(len(train_windows))
        losses: list[float] = []
        failed = False
        for lo in range(0, len(order), train_cfg.batch_size):
            batch = [int(i) for i in order[lo : lo + train_cfg.batch_size]]
            for index in batch:
                (loss,) = accumulate_gradients(model_cfg, params, panel, graph, [train_windows[index]])
                if not np.isfinite(loss):
                    dump_path = _dump_window(train_cfg.dump_dir, epoch, index, train_windows[index], panel)
                    logger.error(
                        "유한하지 않은 손실, 에폭 중단",
                        extra={"epoch": epoch, "window_index": index, "dump_path": dump_path},
                    )
                    first_failure = first_failure or (epoch, index, dump_path)
                    failed = True
                    break
                losses.append(loss)
            if failed:
                # 이 배치의 기울기는 버린다
                params.zero_grad()
                break
            clip_grad_norm(params, train_cfg.clip_norm)
            adam_update(adam, params)
        if failed:
            aborted.append(epoch)
            continue

        val_nd, val_nrmse = evaluate_windows(model_cfg, params, panel, graph, val_windows, train_cfg.seed)
        records.append(EpochRecord(epoch=epoch, train_loss=float(np.mean(losses)), val_nd=val_nd, val_nrmse=val_nrmse))
        logger.info(
            "에폭 완료",
            extra={"epoch": epoch, "train_loss": records[-1].train_loss, "val_nd": val_nd, "val_nrmse": val_nrmse},
        )

        if val_nd < best_nd:
            best_nd = val_nd
            since_best = 0
            best = snapshot(epoch, val_nd)
        else:
            since_best += 1
            if since_best >= train_cfg.patience:
                stopped_early = True
                logger.info("조기 종료", extra={"epoch": epoch, "best_epoch": best.epoch if best else None})
                break

    if first_failure is not None:
        epoch, index, dump_path = first_failure
        raise NonFiniteLossError(
            epoch, index, dump_path, checkpoint=best, report=current_report(), aborted_epochs=aborted
        )
    if best is None:
        best = snapshot(first_epoch + len(records) - 1, None)
    return best, current_report()


# ============================================================
# 진단
# ============================================================
def nd_vs_epoch_trace(report: TrainReport) -> pd.DataFrame:
    """그래프로 그리기 좋은 (epoch, val_nd) 표."""
    return pd.DataFrame({"epoch": [r.epoch for r in report.epochs], "val_nd": report.val_nd})


def paired_covariate_traces(
    model_cfg: Arm3dnetConfig,
    train_cfg: TrainConfig,
    panel: TimeSeriesPanel,
    graph: DynamicAdjacency,
) -> tuple[pd.DataFrame, TrainReport, TrainReport]:
    """
    같은 시드로 공변량 사용/미사용 두 번 학습해 에폭별 검증 ND를 나란히 놓는다.
    조기 종료로 길이가 다르면 짧은 쪽은 NaN이다.
    """
    _, with_report = train(model_cfg, train_cfg, panel, graph)
    _, without_report = train(model_cfg.model_copy(update={"use_covariates": False}), train_cfg, panel, graph)
    with_trace = nd_vs_epoch_trace(with_report).rename(columns={"val_nd": "with_covariates"})
    without_trace = nd_vs_epoch_trace(without_report).rename(columns={"val_nd": "without_covariates"})
    frame = with_trace.merge(without_trace, on="epoch", how="outer").sort_values("epoch").reset_index(drop=True)
    return frame, with_report, without_report


def node_scaling_study(
    model_cfg: Arm3dnetConfig,
    train_cfg: TrainConfig,
    panel: TimeSeriesPanel,
    graph: DynamicAdjacency,
    sizes: tuple[int, ...] = SCALING_SIZES,
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4),
) -> pd.DataFrame:
    """
    노드 부분집합 크기별로 학습해 최적 검증 ND를 모은다.

    부분집합은 (seed, size)마다 무작위로 고르고 인접 행렬은 부분집합으로 다시 정규화한다.

    Returns:
        size, seed, best_val_nd 컬럼의 표
    """
    rows = []
    for size in sizes:
        if size > panel.n_nodes:
            logger.warning("노드 수보다 큰 부분집합은 건너뜀", extra={"size": size, "n_nodes": panel.n_nodes})
            continue
        for seed in seeds:
            picked = make_rng(seed, f"subset.{size}").choice(panel.n_nodes, size=size, replace=False)
            node_ids = tuple(panel.node_ids[i] for i in sorted(picked))
            _, report = train(
                model_cfg,
                train_cfg.model_copy(update={"seed": seed}),
                select_nodes(panel, node_ids),
                subset_adjacency(graph, node_ids),
            )
            rows.append({"size": size, "seed": seed, "best_val_nd": report.best_val_nd})
            logger.info("부분집합 학습 완료", extra=rows[-1])
    return pd.DataFrame(rows, columns=["size", "seed", "best_val_nd"])
