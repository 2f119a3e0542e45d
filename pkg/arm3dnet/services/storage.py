"""
저장소 서비스

패널 캐시와 체크포인트는 같은 바이너리 형식을 쓴다:

    MAGIC(8바이트) | 헤더 길이(<u8) | JSON 헤더 | .npy 배열 스트림 (헤더의 arrays 순서)

zip 기반 형식과 달리 타임스탬프가 들어가지 않아 같은 내용이면 바이트까지 같다.
배열은 np.lib.format으로 기록하므로 float64 값이 비트 단위로 보존된다.

텍스트 결과물(CSV, JSONL)도 여기서 쓴다. 부동소수점은 %.17g로 기록한다.
"""

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, BinaryIO

import numpy as np
import pandas as pd

from arm3dnet.core.exceptions import CheckpointMismatchError, IoError
from arm3dnet.models.forecast import ForecastArtifact
from arm3dnet.models.panel import TimeSeriesPanel
from arm3dnet.schemas.configs import Arm3dnetConfig, parse_config
from arm3dnet.schemas.reports import MetricsReport, TrainReport
from arm3dnet.services.model import param_shapes
from arm3dnet.services.nn_core import AdamState, ParamStore

logger = logging.getLogger(__name__)

MAGIC = b"ARM3DNET"
PANEL_VERSION = 1
CHECKPOINT_VERSION = 1
# 파라미터 형상이나 의미를 바꾸는 필드. 샘플 수, 예측 길이 같은 실행 옵션은 비교하지 않는다.
STRUCTURAL_FIELDS = ("hidden_size", "n_layers", "mixture_K", "covariate_dim", "likelihood", "sigma_link", "gc_include_target")
FLOAT_FORMAT = "%.17g"


# ============================================================
# 바이너리 컨테이너
# ============================================================
def _write_container(path: str | Path, header: dict[str, Any], arrays: dict[str, np.ndarray]) -> Path:
    path = Path(path)
    header = {**header, "arrays": list(arrays)}
    encoded = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<Q", len(encoded)))
            fh.write(encoded)
            for value in arrays.values():
                np.lib.format.write_array(fh, np.ascontiguousarray(value), allow_pickle=False)
    except OSError as exc:
        raise IoError(str(path), str(exc)) from exc
    return path


def _read_header(fh: BinaryIO, path: Path) -> dict[str, Any]:
    if fh.read(len(MAGIC)) != MAGIC:
        raise CheckpointMismatchError("알 수 없는 파일 형식", {"path": str(path)})
    (length,) = struct.unpack("<Q", fh.read(8))
    return json.loads(fh.read(length).decode("utf-8"))


def _read_container(path: str | Path) -> tuple[dict[str, Any], dict[str, np.ndarray]]:
    path = Path(path)
    if not path.is_file():
        raise IoError(str(path), "파일이 존재하지 않습니다")
    with path.open("rb") as fh:
        header = _read_header(fh, path)
        arrays = {name: np.lib.format.read_array(fh, allow_pickle=False) for name in header["arrays"]}
    return header, arrays


# ============================================================
# 패널 캐시
# ============================================================
def save_panel(panel: TimeSeriesPanel, path: str | Path) -> Path:
    header = {
        "kind": "panel",
        "version": PANEL_VERSION,
        "node_ids": list(panel.node_ids),
        "dates": None if panel.dates is None else list(panel.dates),
        "t0": panel.t0,
    }
    return _write_container(path, header, {"targets": panel.targets, "covariates": panel.covariates})


def load_panel(path: str | Path) -> TimeSeriesPanel:
    header, arrays = _read_container(path)
    if header.get("kind") != "panel" or header.get("version") != PANEL_VERSION:
        raise CheckpointMismatchError(
            "패널 캐시 버전이 맞지 않습니다", {"kind": header.get("kind"), "version": header.get("version")}
        )
    return TimeSeriesPanel(
        node_ids=tuple(header["node_ids"]),
        targets=arrays["targets"],
        covariates=arrays["covariates"],
        t0=header["t0"],
        dates=None if header["dates"] is None else tuple(header["dates"]),
    )


# ============================================================
# 체크포인트
# ============================================================
@dataclass
class Checkpoint:
    """최적 에폭의 파라미터와 이어서 학습하기 위한 Adam 상태."""

    config: Arm3dnetConfig
    node_ids: tuple[str, ...]
    params: ParamStore
    adam: AdamState | None = None
    epoch: int = 0
    best_val_nd: float | None = None
    metadata: dict[str, Any] = field(default_factory=dict)


def save_checkpoint(checkpoint: Checkpoint, path: str | Path) -> Path:
    arrays = {f"param.{name}": value for name, value in checkpoint.params.params.items()}
    adam_header = None
    if checkpoint.adam is not None:
        adam = checkpoint.adam
        adam_header = {"lr": adam.lr, "beta1": adam.beta1, "beta2": adam.beta2, "eps": adam.eps, "step": adam.step}
        for name in adam.m:
            arrays[f"adam.m.{name}"] = adam.m[name]
            arrays[f"adam.v.{name}"] = adam.v[name]
    header = {
        "kind": "checkpoint",
        "version": CHECKPOINT_VERSION,
        "config": checkpoint.config.model_dump(),
        "node_ids": list(checkpoint.node_ids),
        "epoch": checkpoint.epoch,
        "best_val_nd": checkpoint.best_val_nd,
        "adam": adam_header,
        "metadata": checkpoint.metadata,
    }
    path = _write_container(path, header, arrays)
    logger.info("체크포인트 저장", extra={"path": str(path), "epoch": checkpoint.epoch})
    return path


def load_checkpoint(
    path: str | Path,
    expected_config: Arm3dnetConfig | None = None,
    expected_nodes: tuple[str, ...] | None = None,
) -> Checkpoint:
    """
    체크포인트를 읽고 형상을 검증한다.

    Raises:
        CheckpointMismatchError: 버전, 모델 구조, 노드 집합, 파라미터 형상이 맞지 않을 때
    """
    header, arrays = _read_container(path)
    if header.get("kind") != "checkpoint" or header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointMismatchError(
            "체크포인트 버전이 맞지 않습니다", {"kind": header.get("kind"), "version": header.get("version")}
        )
    config = parse_config(Arm3dnetConfig, header["config"])
    node_ids = tuple(header["node_ids"])
    if expected_config is not None:
        diff = {
            key: {"checkpoint": getattr(config, key), "config": getattr(expected_config, key)}
            for key in STRUCTURAL_FIELDS
            if getattr(expected_config, key) != getattr(config, key)
        }
        if diff:
            raise CheckpointMismatchError("모델 설정이 체크포인트와 다릅니다", {"fields": diff})
    if expected_nodes is not None and tuple(expected_nodes) != node_ids:
        raise CheckpointMismatchError(
            "노드 목록이 체크포인트와 다릅니다",
            {"missing": sorted(set(node_ids) - set(expected_nodes)), "extra": sorted(set(expected_nodes) - set(node_ids))},
        )

    shapes = param_shapes(config, len(node_ids))
    params = ParamStore()
    for name, shape in shapes.items():
        value = arrays.get(f"param.{name}")
        if value is None or value.shape != shape:
            raise CheckpointMismatchError(
                "파라미터 형상이 맞지 않습니다",
                {"name": name, "expected": list(shape), "found": None if value is None else list(value.shape)},
            )
        params.add(name, value)

    adam = None
    if header["adam"] is not None:
        adam = AdamState(**header["adam"])
        for name in shapes:
            if f"adam.m.{name}" in arrays:
                adam.m[name] = arrays[f"adam.m.{name}"].copy()
                adam.v[name] = arrays[f"adam.v.{name}"].copy()
    return Checkpoint(
        config=config,
        node_ids=node_ids,
        params=params,
        adam=adam,
        epoch=header["epoch"],
        best_val_nd=header["best_val_nd"],
        metadata=header.get("metadata", {}),
    )


# ============================================================
# 텍스트 결과물
# ============================================================
def _write_frame(frame: pd.DataFrame, path: str | Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as exc:
        raise IoError(str(path), str(exc)) from exc
    return path


def _read_frame(path: str | Path, columns: list[str]) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise IoError(str(path), "파일이 존재하지 않습니다")
    frame = pd.read_csv(path, dtype={"node": str}, float_precision="round_trip")
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise IoError(str(path), f"필수 컬럼 누락: {', '.join(missing)}")
    return frame


def _node_step_frame(node_ids: tuple[str, ...], horizon: int) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "node": np.repeat(np.asarray(node_ids, dtype=object), horizon),
            "step": np.tile(np.arange(1, horizon + 1), len(node_ids)),
        }
    )


def write_forecast_csv(artifact: ForecastArtifact, path: str | Path) -> Path:
    """node,step,q10,q50,q90,mean. step은 예측 구간 안에서 1부터 센다."""
    frame = _node_step_frame(artifact.node_ids, artifact.horizon)
    frame["q10"] = artifact.q10.ravel()
    frame["q50"] = artifact.q50.ravel()
    frame["q90"] = artifact.q90.ravel()
    frame["mean"] = artifact.point.ravel()
    return _write_frame(frame, path)


def write_samples_csv(artifact: ForecastArtifact, path: str | Path) -> Path:
    """node,step,sample_idx,value. 노드-스텝마다 S개 행."""
    S, N, H = artifact.samples.shape
    frame = pd.DataFrame(
        {
            "node": np.repeat(np.asarray(artifact.node_ids, dtype=object), H * S),
            "step": np.tile(np.repeat(np.arange(1, H + 1), S), N),
            "sample_idx": np.tile(np.arange(S), N * H),
            "value": artifact.samples.transpose(1, 2, 0).ravel(),
        }
    )
    return _write_frame(frame, path)


def write_actuals_csv(node_ids: tuple[str, ...], values: np.ndarray, path: str | Path) -> Path:
    """node,step,value. values는 (N, H)."""
    frame = _node_step_frame(tuple(node_ids), values.shape[1])
    frame["value"] = np.asarray(values).ravel()
    return _write_frame(frame, path)


def _pivot(frame: pd.DataFrame, column: str) -> tuple[tuple[str, ...], np.ndarray]:
    table = frame.pivot(index="node", columns="step", values=column).sort_index()
    return tuple(str(n) for n in table.index), table.to_numpy(dtype=np.float64)


def read_forecast_csv(path: str | Path) -> dict[str, Any]:
    """{'node_ids', 'q10', 'q50', 'q90', 'mean'}; 각 배열은 노드 정렬 순서 (N, H)."""
    frame = _read_frame(path, ["node", "step", "q10", "q50", "q90", "mean"])
    out: dict[str, Any] = {}
    for column in ("q10", "q50", "q90", "mean"):
        out["node_ids"], out[column] = _pivot(frame, column)
    return out


def read_actuals_csv(path: str | Path) -> tuple[tuple[str, ...], np.ndarray]:
    return _pivot(_read_frame(path, ["node", "step", "value"]), "value")


def write_train_report(report: TrainReport, path: str | Path) -> Path:
    """에폭마다 JSON 레코드 한 줄, 마지막 줄은 요약."""
    path = Path(path)
    lines = [json.dumps(r.model_dump(), sort_keys=True) for r in report.epochs]
    lines.append(
        json.dumps({"best_epoch": report.best_epoch, "stopped_early": report.stopped_early}, sort_keys=True)
    )
    return _write_text(path, "\n".join(lines) + "\n")


def read_train_report(path: str | Path) -> TrainReport:
    path = Path(path)
    if not path.is_file():
        raise IoError(str(path), "파일이 존재하지 않습니다")
    rows = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    summary = rows.pop()
    return TrainReport(epochs=rows, **summary)


def write_metrics_json(reports: list[MetricsReport], path: str | Path) -> Path:
    payload = {"reports": [r.model_dump() for r in reports]}
    return _write_text(Path(path), json.dumps(payload, sort_keys=True, indent=2) + "\n")


def write_json(payload: dict[str, Any], path: str | Path) -> Path:
    return _write_text(Path(path), json.dumps(payload, sort_keys=True, indent=2) + "\n")


def read_json(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise IoError(str(path), str(exc)) from exc


def write_table_csv(frame: pd.DataFrame, path: str | Path) -> Path:
    return _write_frame(frame, path)


def _write_text(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(str(path), str(exc)) from exc
    return path
