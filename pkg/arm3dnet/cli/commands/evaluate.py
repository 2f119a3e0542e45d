"""
evaluate 커맨드

forecast.csv와 actuals.csv를 맞춰 NRMSE/ND를 계산해 metrics.json에 쓴다.
--baseline이면 지속성 베이스라인 행을, --table이면 비교 표를 함께 출력한다.
"""

import argparse
import json
import logging
from pathlib import Path

import numpy as np

from arm3dnet.cli.commands.common import (
    ACTUALS_FILE,
    BASELINE_FILE,
    FORECAST_FILE,
    METRICS_FILE,
    load_run_config,
    resolve_out_dir,
)
from arm3dnet.core.exceptions import AlignmentError
from arm3dnet.services.metrics import build_report, format_table
from arm3dnet.services.storage import read_actuals_csv, read_forecast_csv, write_metrics_json

logger = logging.getLogger(__name__)


def add_parser(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("evaluate", help="예측 평가")
    parser.add_argument("--forecast", default=None, help="예측 CSV (기본: 출력 디렉토리의 forecast.csv)")
    parser.add_argument("--actuals", default=None, help="실제값 CSV (기본: 출력 디렉토리의 actuals.csv)")
    parser.add_argument("--baseline", action="store_true", help="지속성 베이스라인 행 추가")
    parser.add_argument("--table", action="store_true", help="모델/베이스라인 비교 표 출력")
    parser.add_argument("--median", action="store_true", help="점 예측으로 혼합 평균 대신 표본 중앙값 사용")
    parser.set_defaults(handler=run)


def align(
    forecast_nodes: tuple[str, ...], actual_nodes: tuple[str, ...], predicted: np.ndarray, actual: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """
    노드 집합이 같은지 확인하고, 실제값이 있는 스텝까지 예측을 자른다.

    Raises:
        AlignmentError: 노드 집합이 다르거나 예측 스텝이 실제값보다 적을 때
    """
    missing = sorted(set(actual_nodes) - set(forecast_nodes))
    extra = sorted(set(forecast_nodes) - set(actual_nodes))
    if missing or extra or predicted.shape[1] < actual.shape[1]:
        raise AlignmentError(missing, extra)
    return actual, predicted[:, : actual.shape[1]]


def run(args: argparse.Namespace) -> int:
    config = load_run_config(args.config, args.set, args.seed)
    out = resolve_out_dir(args, config)
    forecast_path = Path(args.forecast) if args.forecast else out / FORECAST_FILE
    actuals_path = Path(args.actuals) if args.actuals else out / ACTUALS_FILE

    table = read_forecast_csv(forecast_path)
    actual_nodes, actual = read_actuals_csv(actuals_path)
    point = "q50" if args.median or config.forecast.point == "median" else "mean"
    actual, predicted = align(table["node_ids"], actual_nodes, table[point], actual)

    reports = [build_report("arm3dnet", actual, predicted)]
    if args.baseline:
        baseline_nodes, baseline = read_actuals_csv(forecast_path.parent / BASELINE_FILE)
        actual, baseline = align(baseline_nodes, actual_nodes, baseline, actual)
        reports.append(build_report("persistence", actual, baseline))

    write_metrics_json(reports, out / METRICS_FILE)
    for report in reports:
        print(json.dumps(report.model_dump(), sort_keys=True))
    if args.table:
        print(format_table(reports))
    logger.info("평가 완료", extra={"point": point, "nd": reports[0].nd, "nrmse": reports[0].nrmse})
    return 0
