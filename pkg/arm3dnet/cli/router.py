"""
CLI 라우터 통합 모듈

모든 서브커맨드 파서를 하나로 결합한다.
새로운 커맨드를 추가할 때 commands/ 아래에 add_parser()와 run()을 가진 모듈을 만들고
COMMANDS에 추가하면 된다.

구조:
    build_parser (이 모듈)
    ├── synth    (commands/synth.py)
    ├── train    (commands/train.py)
    ├── forecast (commands/forecast.py)
    └── evaluate (commands/evaluate.py)
"""

import argparse

from arm3dnet import __version__
from arm3dnet.cli.commands import evaluate, forecast, synth, train

COMMANDS = (synth, train, forecast, evaluate)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arm3dnet",
        description="이동량 기반 동적 그래프 확산 합성곱 + 자기회귀 LSTM 확률 예측",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", default=None, help="YAML 실험 설정 파일")
    parser.add_argument("--seed", type=int, default=None, help="실행 시드 (설정 파일의 seed를 덮어씀)")
    parser.add_argument("--out", default=None, help="출력 디렉토리")
    parser.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE", help="설정 값 덮어쓰기 (예: model.mixture_K=3)"
    )

    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for command in COMMANDS:
        command.add_parser(subparsers)
    return parser
