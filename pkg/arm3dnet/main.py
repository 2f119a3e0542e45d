"""
CLI 진입점 (Entry Point)

설정과 로깅을 초기화하고, 서브커맨드를 실행하며,
도메인 예외를 한 곳에서 종료 코드로 바꾼다.

실행 방법:
    $ python -m arm3dnet --config config.example.yaml --out runs/demo synth
    $ python -m arm3dnet --config config.example.yaml --out runs/demo train
    $ python -m arm3dnet --config config.example.yaml --out runs/demo forecast
    $ python -m arm3dnet --config config.example.yaml --out runs/demo evaluate --baseline --table

종료 코드:
    0 성공 / 1 사용법·설정 오류 / 2 데이터 오류 / 3 수치 오류
"""

import json
import logging
import sys

from arm3dnet.cli.router import build_parser
from arm3dnet.core.config import get_settings
from arm3dnet.core.exceptions import ArmError, UsageError
from arm3dnet.core.logging import setup_logging

logger = logging.getLogger(__name__)


def main(argv: list[str] | None = None) -> int:
    setup_logging(get_settings())
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse는 --help/--version에 0, 잘못된 인자에 2로 종료한다
        return 0 if exc.code in (0, None) else UsageError.exit_code

    logger.debug("커맨드 시작", extra={"command": args.command})
    try:
        return args.handler(args)
    except ArmError as exc:
        logger.error(
            exc.message,
            extra={"code": exc.code, "detail": exc.detail, "exit_code": exc.exit_code},
        )
        print(json.dumps({"error": exc.to_dict()}, ensure_ascii=False, sort_keys=True, default=str), file=sys.stderr)
        return exc.exit_code
