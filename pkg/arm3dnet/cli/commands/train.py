"""
train 커맨드

조건 구간 데이터로 모델을 학습해 최적 체크포인트, 에폭별 리포트, ND 추이 표를 쓴다.
유한하지 않은 손실로 중단되어도 그때까지의 최적 체크포인트와 리포트는 저장한 뒤 종료 코드 3을 낸다.
"""

import argparse
import logging

from arm3dnet.cli.commands.common import (
    CHECKPOINT_FILE,
    PAIRED_TRACE_FILE,
    SCALING_FILE,
    TRACE_FILE,
    TRAIN_REPORT_FILE,
    load_run_config,
    prepare_data,
    resolve_out_dir,
)
from arm3dnet.core.exceptions import NonFiniteLossError
from arm3dnet.services.storage import load_checkpoint, save_checkpoint, write_table_csv, write_train_report
from arm3dnet.services.training import node_scaling_study, nd_vs_epoch_trace, paired_covariate_traces, train

logger = logging.getLogger(__name__)


def add_parser(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("train", help="모델 학습")
    parser.add_argument("--no-covariates", action="store_true", help="그래프 합성곱 입력을 0으로 둔다")
    parser.add_argument("--resume", action="store_true", help="출력 디렉토리의 체크포인트에서 이어서 학습")
    parser.add_argument("--paired", action="store_true", help="공변량 사용/미사용 ND 추이를 함께 기록")
    parser.add_argument("--node-scaling", action="store_true", help="노드 부분집합 크기별 학습 결과를 기록")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_run_config(args.config, args.set, args.seed)
    if args.no_covariates:
        config = config.model_copy(update={"model": config.model.model_copy(update={"use_covariates": False})})
    out = resolve_out_dir(args, config)
    train_cfg = config.train
    if train_cfg.dump_dir is None:
        train_cfg = train_cfg.model_copy(update={"dump_dir": str(out / "nonfinite")})

    data = prepare_data(config, out)
    panel, graph = data.training_panel, data.training_graph

    resume = None
    if args.resume:
        resume = load_checkpoint(out / CHECKPOINT_FILE, expected_config=config.model, expected_nodes=panel.node_ids)

    try:
        checkpoint, report = train(config.model, train_cfg, panel, graph, resume=resume)
    except NonFiniteLossError as exc:
        if exc.checkpoint is not None:
            save_checkpoint(exc.checkpoint, out / CHECKPOINT_FILE)
        if exc.report is not None:
            write_train_report(exc.report, out / TRAIN_REPORT_FILE)
        raise

    save_checkpoint(checkpoint, out / CHECKPOINT_FILE)
    write_train_report(report, out / TRAIN_REPORT_FILE)
    write_table_csv(nd_vs_epoch_trace(report), out / TRACE_FILE)

    if args.paired:
        paired, _, _ = paired_covariate_traces(config.model, train_cfg, panel, graph)
        write_table_csv(paired, out / PAIRED_TRACE_FILE)
    if args.node_scaling:
        write_table_csv(node_scaling_study(config.model, train_cfg, panel, graph), out / SCALING_FILE)

    print(f"best_epoch={checkpoint.epoch} best_val_nd={checkpoint.best_val_nd} epochs={len(report.epochs)}")
    return 0
