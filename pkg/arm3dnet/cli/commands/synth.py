"""
synth 커맨드

합성 패널, 이동량 CSV, 생성기 설명 JSON 세 파일을 만든다.
"""

import argparse
import logging

import pandas as pd

from arm3dnet.cli.commands.common import (
    GENERATOR_FILE,
    MOBILITY_FILE,
    PANEL_FILE,
    load_run_config,
    resolve_out_dir,
)
from arm3dnet.core.exceptions import InvalidConfigError
from arm3dnet.services.data_ingest import write_mobility_csv
from arm3dnet.services.storage import save_panel, write_json
from arm3dnet.services.synthetic import generate_synthetic_panel

logger = logging.getLogger(__name__)


def add_parser(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("synth", help="합성 패널 생성")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_run_config(args.config, args.set, args.seed)
    if config.data.synthetic is None:
        raise InvalidConfigError("synth에는 data.synthetic 설정이 필요합니다")
    out = resolve_out_dir(args, config)

    panel, mobility, description = generate_synthetic_panel(config.data.synthetic)
    save_panel(panel, out / PANEL_FILE)
    write_mobility_csv(mobility, out / MOBILITY_FILE)
    write_json(description, out / GENERATOR_FILE)

    summary = pd.DataFrame(
        {"node": panel.node_ids, "mean": panel.targets.mean(axis=1), "max": panel.targets.max(axis=1)}
    )
    print(summary.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    logger.info("합성 데이터 저장 완료", extra={"out_dir": str(out), "n_records": len(mobility)})
    return 0
