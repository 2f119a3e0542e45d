"""
forecast 커맨드

체크포인트로 조건 구간을 통과시킨 뒤 예측 구간을 조상 샘플링한다.
분위수 표, 실제값, 지속성 베이스라인, (선택) 전체 샘플 덤프를 쓴다.
"""

import argparse
import logging
from pathlib import Path

import numpy as np

from arm3dnet.cli.commands.common import (
    ACTUALS_FILE,
    BASELINE_FILE,
    CHECKPOINT_FILE,
    FORECAST_FILE,
    SAMPLES_FILE,
    load_run_config,
    prepare_data,
    resolve_out_dir,
    run_seed,
)
from arm3dnet.core.seeding import make_rng
from arm3dnet.models.forecast import ForecastArtifact
from arm3dnet.services.data_ingest import unscale_values
from arm3dnet.services.metrics import persistence_baseline, uncertainty_growth
from arm3dnet.services.model import forecast
from arm3dnet.services.storage import (
    load_checkpoint,
    write_actuals_csv,
    write_forecast_csv,
    write_samples_csv,
)

logger = logging.getLogger(__name__)


def add_parser(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("forecast", help="예측 구간 샘플링")
    parser.add_argument("--checkpoint", default=None, help="체크포인트 경로 (기본: 출력 디렉토리의 checkpoint.bin)")
    parser.add_argument("--horizon", type=int, default=None, help="샘플링할 스텝 수 (기본: model.horizon)")
    parser.add_argument("--samples", action="store_true", help="node,step,sample_idx,value 덤프 작성")
    parser.set_defaults(handler=run)


def _unscaled(artifact: ForecastArtifact, scales: np.ndarray | None) -> ForecastArtifact:
    if scales is None:
        return artifact
    factor = scales[None, :, None]
    return ForecastArtifact(
        node_ids=artifact.node_ids,
        samples=artifact.samples * factor,
        quantiles=artifact.quantiles * factor,
        point=artifact.point * scales[:, None],
    )


def run(args: argparse.Namespace) -> int:
    config = load_run_config(args.config, args.set, args.seed)
    out = resolve_out_dir(args, config)
    data = prepare_data(config, out)
    panel = data.panel

    checkpoint_path = Path(args.checkpoint) if args.checkpoint else out / CHECKPOINT_FILE
    checkpoint = load_checkpoint(checkpoint_path, expected_config=config.model, expected_nodes=panel.node_ids)
    model_cfg = checkpoint.config.model_copy(
        update={
            "n_samples": config.model.n_samples,
            "use_future_covariates": config.model.use_future_covariates,
            "horizon": config.model.horizon,
        }
    )

    horizon = args.horizon or model_cfg.horizon
    artifact = forecast(
        model_cfg, checkpoint.params, panel, data.graph, make_rng(run_seed(config), "forecast"), horizon=horizon
    )
    artifact = _unscaled(artifact, data.scales)

    write_forecast_csv(artifact, out / FORECAST_FILE)
    if args.samples or config.forecast.write_samples:
        write_samples_csv(artifact, out / SAMPLES_FILE)

    raw_panel = panel.with_values(targets=data.raw_targets)
    steps = min(horizon, raw_panel.pred_len)
    write_actuals_csv(panel.node_ids, raw_panel.prediction_targets[:, :steps], out / ACTUALS_FILE)
    write_actuals_csv(panel.node_ids, persistence_baseline(raw_panel)[:, :steps], out / BASELINE_FILE)

    widths = uncertainty_growth(artifact)
    logger.info(
        "예측 완료",
        extra={"horizon": horizon, "n_samples": artifact.n_samples, "interval_width": widths.tolist()},
    )
    print("step," + ",".join(str(h + 1) for h in range(len(widths))))
    print("q90-q10," + ",".join(f"{w:.4f}" for w in widths))
    return 0
