"""
커맨드 공통 모듈

설정 파일 로드와 --set/--seed 덮어쓰기, 출력 디렉토리 결정,
데이터 준비 파이프라인(패널 구성 -> 인접 행렬 -> 구간 분할 -> 표준화)을 모아 둔다.
모든 커맨드가 같은 경로로 데이터를 준비하므로 train/forecast의 입력이 항상 일치한다.
"""

import argparse
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from arm3dnet.core.config import get_settings
from arm3dnet.core.exceptions import InvalidConfigError, IoError
from arm3dnet.models.graph import DynamicAdjacency
from arm3dnet.models.panel import FeatureStats, TimeSeriesPanel
from arm3dnet.schemas.configs import RunConfig, SyntheticConfig, parse_config
from arm3dnet.schemas.records import MobilityRecord
from arm3dnet.services.data_ingest import (
    build_panel,
    load_covid_csv,
    load_mobility_csv,
    scale_targets,
    split_ranges,
    standardize_covariates,
)
from arm3dnet.services.graph import build_dynamic_adjacency
from arm3dnet.services.storage import load_panel, read_json
from arm3dnet.services.synthetic import generate_synthetic_panel

logger = logging.getLogger(__name__)

PANEL_FILE = "panel.bin"
MOBILITY_FILE = "mobility.csv"
GENERATOR_FILE = "generator.json"
CHECKPOINT_FILE = "checkpoint.bin"
TRAIN_REPORT_FILE = "train_report.jsonl"
TRACE_FILE = "nd_trace.csv"
PAIRED_TRACE_FILE = "nd_trace_paired.csv"
SCALING_FILE = "node_scaling.csv"
FORECAST_FILE = "forecast.csv"
SAMPLES_FILE = "samples.csv"
ACTUALS_FILE = "actuals.csv"
BASELINE_FILE = "baseline.csv"
METRICS_FILE = "metrics.json"


# ============================================================
# 설정
# ============================================================
def _apply_override(raw: dict[str, Any], assignment: str) -> None:
    key, sep, value = assignment.partition("=")
    if not sep or not key:
        raise InvalidConfigError(f"--set 형식은 key=value 입니다: {assignment}", {"override": assignment})
    node = raw
    parts = key.split(".")
    for part in parts[:-1]:
        child = node.get(part)
        if child is None:
            child = node[part] = {}
        if not isinstance(child, dict):
            raise InvalidConfigError(f"{part}는 하위 키를 가질 수 없습니다", {"override": assignment})
        node = child
    node[parts[-1]] = yaml.safe_load(value)


def load_run_config(
    path: str | None, overrides: list[str] | None = None, seed: int | None = None
) -> RunConfig:
    """
    YAML 설정을 읽고 덮어쓰기를 적용한 뒤 검증한다.

    최상위 seed가 있으면 합성 데이터 시드와 학습 시드로 함께 퍼뜨린다.
    """
    raw: dict[str, Any] = {}
    if path is not None:
        config_path = Path(path)
        if not config_path.is_file():
            raise IoError(str(config_path), "설정 파일이 존재하지 않습니다")
        raw = yaml.safe_load(config_path.read_text(encoding="utf-8")) or {}
        if not isinstance(raw, dict):
            raise InvalidConfigError("설정 파일의 최상위는 매핑이어야 합니다", {"path": str(config_path)})
    for assignment in overrides or []:
        _apply_override(raw, assignment)
    if seed is not None:
        raw["seed"] = seed

    run = parse_config(RunConfig, raw)
    if run.seed is not None:
        train = run.train.model_copy(update={"seed": run.seed})
        data = run.data
        if data.synthetic is not None:
            data = data.model_copy(update={"synthetic": data.synthetic.model_copy(update={"seed": run.seed})})
        run = run.model_copy(update={"train": train, "data": data})
    return run


def resolve_out_dir(args: argparse.Namespace, run: RunConfig) -> Path:
    out = Path(args.out or run.out_dir or get_settings().OUTPUT_DIR)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(str(out), str(exc)) from exc
    return out


def run_seed(run: RunConfig) -> int:
    return run.seed if run.seed is not None else get_settings().DEFAULT_SEED


# ============================================================
# 데이터 준비
# ============================================================
@dataclass(frozen=True)
class PreparedData:
    """
    모델 입력으로 바로 쓰는 데이터 묶음.

    panel: 예측 구간이 horizon일로 나뉘고 공변량이 표준화된 패널 (타깃 스케일링 선택)
    raw_targets: 스케일링 전 타깃 (N, T)
    scales: 노드별 타깃 스케일 (스케일링하지 않으면 None)
    """

    panel: TimeSeriesPanel
    graph: DynamicAdjacency
    feature_stats: list[FeatureStats]
    raw_targets: np.ndarray
    scales: np.ndarray | None

    @property
    def training_panel(self) -> TimeSeriesPanel:
        """조건 구간만 남긴 학습용 패널. 예측 구간은 평가에만 쓴다."""
        return self.panel.truncate(self.panel.cond_len)

    @property
    def training_graph(self) -> DynamicAdjacency:
        return self.graph.slice_days(0, self.panel.cond_len)


def _cached_synthetic(run: RunConfig, source_dir: Path | None) -> tuple[TimeSeriesPanel, list[MobilityRecord]] | None:
    """synth가 같은 설정으로 남긴 panel.bin/mobility.csv가 있으면 읽는다."""
    if source_dir is None:
        return None
    files = [source_dir / name for name in (PANEL_FILE, MOBILITY_FILE, GENERATOR_FILE)]
    if not all(path.is_file() for path in files):
        return None
    cached = parse_config(SyntheticConfig, read_json(source_dir / GENERATOR_FILE).get("config", {}))
    if cached != run.data.synthetic:
        logger.warning("저장된 합성 데이터의 설정이 달라 다시 생성", extra={"source_dir": str(source_dir)})
        return None
    logger.info("저장된 합성 데이터 사용", extra={"source_dir": str(source_dir)})
    return load_panel(source_dir / PANEL_FILE), load_mobility_csv(source_dir / MOBILITY_FILE)


def load_source(run: RunConfig, source_dir: Path | None = None) -> tuple[TimeSeriesPanel, list[MobilityRecord]]:
    """
    패널과 이동량 기록을 읽는다.

    합성 데이터 설정이면 source_dir에 synth 결과물이 있을 때 그것을, 없으면 새로 생성한 것을 쓴다.
    """
    data = run.data
    if data.synthetic is not None:
        cached = _cached_synthetic(run, source_dir)
        if cached is not None:
            return cached
        panel, mobility, _ = generate_synthetic_panel(data.synthetic)
        return panel, mobility
    covid = load_covid_csv(data.covid_path)
    mobility = load_mobility_csv(data.mobility_path)
    panel = build_panel(
        covid,
        mobility,
        target=data.target,
        difference=data.difference,
        forward_fill=data.forward_fill,
        max_nodes=data.max_nodes,
    )
    return panel, mobility


def prepare_data(run: RunConfig, source_dir: Path | None = None) -> PreparedData:
    panel, mobility = load_source(run, source_dir)
    graph = build_dynamic_adjacency(
        mobility, panel.node_ids, panel.dates, threshold=run.graph.threshold, window=run.graph.window
    )
    panel = split_ranges(panel, run.model.horizon)
    panel, stats = standardize_covariates(panel)
    raw_targets = panel.targets
    scales = None
    if run.data.scale_targets:
        panel, scales = scale_targets(panel)
    return PreparedData(panel=panel, graph=graph, feature_stats=stats, raw_targets=raw_targets, scales=scales)
