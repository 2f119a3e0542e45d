"""
로깅 설정 모듈

텍스트 포맷(StreamHandler + Formatter)과 JSON 구조화 포맷(python-json-logger)
두 가지 출력 방식을 지원한다. 모든 모듈은 logging.getLogger(__name__)으로
"arm3dnet" 하위 로거를 얻고, 구조화 값은 extra={...}로 전달한다.
"""

import logging
import sys

from pythonjsonlogger import json as jsonlogger

from arm3dnet.core.config import Settings

ROOT_LOGGER = "arm3dnet"

TEXT_FORMAT = "%(asctime)s | %(name)s | %(levelname)-8s | %(message)s"
JSON_FORMAT = "%(asctime)s %(name)s %(levelname)s %(message)s"


def setup_logging(settings: Settings) -> logging.Logger:
    """
    arm3dnet 루트 로거에 stderr 핸들러를 하나 설치한다.

    결과 파일(CSV/JSON)은 로그와 분리되어 있으므로
    로그의 타임스탬프가 결과 재현성에 영향을 주지 않는다.
    여러 번 호출해도 핸들러가 중복되지 않는다.
    """
    logger = logging.getLogger(ROOT_LOGGER)
    logger.setLevel(settings.LOG_LEVEL.upper())

    for handler in list(logger.handlers):
        logger.removeHandler(handler)

    handler = logging.StreamHandler(sys.stderr)
    if settings.LOG_JSON:
        formatter: logging.Formatter = jsonlogger.JsonFormatter(
            fmt=JSON_FORMAT,
            datefmt="%Y-%m-%dT%H:%M:%S",
            rename_fields={"asctime": "timestamp", "levelname": "level"},
        )
    else:
        formatter = logging.Formatter(fmt=TEXT_FORMAT, datefmt="%Y-%m-%d %H:%M:%S")
    handler.setFormatter(formatter)
    logger.addHandler(handler)
    logger.propagate = False
    return logger
