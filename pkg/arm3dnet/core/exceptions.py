"""
예외 계층 모듈

모든 도메인 예외는 ArmError를 상속받는다.
각 예외는 고유한 에러 코드, 메시지, 상세 정보(detail), 종료 코드(exit_code)를 가지며
CLI 진입점(main.py)에서 한 곳에서 처리된다.

계층 구조:
    ArmError
    ├── UsageError      (exit 1) 설정/사용법 오류
    ├── DataError       (exit 2) 입력 데이터 및 형상 오류
    └── NumericError    (exit 3) 수치 계산 실패
"""

from typing import Any


class ArmError(Exception):
    """
    애플리케이션 기본 예외 클래스.
    모든 커스텀 예외의 부모 클래스로, 공통 속성을 정의한다.
    """

    exit_code: int = 2

    def __init__(
        self,
        code: str = "ARM_ERROR",
        message: str = "처리 중 오류가 발생했습니다",
        detail: dict[str, Any] | None = None,
    ):
        self.code = code
        self.message = message
        self.detail = detail or {}
        super().__init__(self.message)

    def to_dict(self) -> dict[str, Any]:
        return {"code": self.code, "message": self.message, "detail": self.detail}


class UsageError(ArmError):
    exit_code = 1


class DataError(ArmError):
    exit_code = 2


class NumericError(ArmError):
    exit_code = 3


# ============================================================
# 설정 / 사용법 오류
# ============================================================
class InvalidConfigError(UsageError):
    """설정 값이 유효하지 않을 때 발생하는 예외."""

    def __init__(self, message: str, detail: dict[str, Any] | None = None):
        super().__init__(code="INVALID_CONFIG", message=message, detail=detail)


class IoError(UsageError):
    """출력 경로에 쓸 수 없거나 입력 파일을 읽을 수 없을 때 발생하는 예외."""

    def __init__(self, path: str, reason: str):
        super().__init__(
            code="IO_ERROR",
            message=f"경로 '{path}'에 접근할 수 없습니다: {reason}",
            detail={"path": path, "reason": reason},
        )


# ============================================================
# 데이터 수집 오류
# ============================================================
class MissingColumnError(DataError):
    def __init__(self, path: str, missing: list[str]):
        super().__init__(
            code="MISSING_COLUMN",
            message=f"'{path}' 헤더에 필요한 컬럼이 없습니다: {', '.join(missing)}",
            detail={"path": path, "missing": missing},
        )


class MalformedRowError(DataError):
    """필드 불변식을 위반한 행 (음수 카운트, 잘못된 날짜 등)."""

    def __init__(self, path: str, row: int, reason: str):
        super().__init__(
            code="MALFORMED_ROW",
            message=f"'{path}' {row}번째 행이 올바르지 않습니다: {reason}",
            detail={"path": path, "row": row, "reason": reason},
        )


class DuplicateKeyError(DataError):
    def __init__(self, path: str, key: tuple, row: int):
        super().__init__(
            code="DUPLICATE_KEY",
            message=f"'{path}' {row}번째 행의 키 {key}가 중복되었습니다",
            detail={"path": path, "key": list(key), "row": row},
        )


class EmptyDataError(DataError):
    def __init__(self, source: str):
        super().__init__(
            code="EMPTY_DATA",
            message=f"{source} 기록이 하나도 없습니다",
            detail={"source": source},
        )


class MissingCaseDataError(DataError):
    def __init__(self, day: str, fips: list[str]):
        super().__init__(
            code="MISSING_CASE_DATA",
            message=f"{day}에 확진자 기록이 없는 출발 카운티가 있습니다",
            detail={"date": day, "fips": fips},
        )


class DataGapError(DataError):
    """카운티 시계열에 누락된 날짜가 있을 때 발생한다. detail에 누락 보고서를 담는다."""

    def __init__(self, gaps: dict[str, list[str]]):
        super().__init__(
            code="DATA_GAP",
            message=f"{len(gaps)}개 카운티에 누락된 날짜가 있습니다 (--forward-fill 참고)",
            detail={"gaps": gaps},
        )


class DegenerateFeatureError(DataError):
    def __init__(self, feature: int):
        super().__init__(
            code="DEGENERATE_FEATURE",
            message=f"공변량 {feature}번 컬럼이 조건 구간에서 상수입니다 (표준편차 0)",
            detail={"feature": feature},
        )


class HorizonTooLongError(DataError):
    def __init__(self, horizon: int, t_days: int):
        super().__init__(
            code="HORIZON_TOO_LONG",
            message=f"예측 구간 {horizon}일이 전체 길이 {t_days}일보다 짧아야 합니다",
            detail={"horizon": horizon, "t_days": t_days},
        )


# ============================================================
# 그래프 / 수치 코어 오류
# ============================================================
class ConstantVectorError(DataError):
    def __init__(self):
        super().__init__(
            code="CONSTANT_VECTOR",
            message="상수 벡터에 대해서는 피어슨 상관계수가 정의되지 않습니다",
        )


class LengthMismatchError(DataError):
    def __init__(self, left: int, right: int):
        super().__init__(
            code="LENGTH_MISMATCH",
            message=f"벡터 길이가 다릅니다: {left} != {right}",
            detail={"left": left, "right": right},
        )


class InsufficientHistoryError(DataError):
    def __init__(self, day: int, available: int):
        super().__init__(
            code="INSUFFICIENT_HISTORY",
            message=f"{day}일차 인접 행렬을 만들 방문 이력이 부족합니다 ({available}일)",
            detail={"day": day, "available": available},
        )


class ShapeMismatchError(DataError):
    def __init__(self, operation: str, shapes: dict[str, Any]):
        super().__init__(
            code="SHAPE_MISMATCH",
            message=f"{operation}: 배열 형상이 맞지 않습니다",
            detail={"operation": operation, "shapes": {k: list(v) for k, v in shapes.items()}},
        )


class GraphNotRecordedError(NumericError):
    def __init__(self):
        super().__init__(
            code="GRAPH_NOT_RECORDED",
            message="역전파할 연산 기록이 없습니다 (기록 중인 테이프에서 순전파를 먼저 수행하세요)",
        )


# ============================================================
# 모델 / 학습 오류
# ============================================================
class MissingTargetsError(DataError):
    def __init__(self, required: int, available: int):
        super().__init__(
            code="MISSING_TARGETS",
            message=f"관측 타깃이 부족합니다: 필요 {required}일, 보유 {available}일",
            detail={"required": required, "available": available},
        )


class WindowTooLongError(DataError):
    def __init__(self, total: int, t_days: int):
        super().__init__(
            code="WINDOW_TOO_LONG",
            message=f"윈도우 길이 {total}일이 시계열 길이 {t_days}일을 초과합니다",
            detail={"total": total, "t_days": t_days},
        )


class NoWindowsError(DataError):
    def __init__(self, n_windows: int):
        super().__init__(
            code="NO_WINDOWS",
            message=f"학습/검증 윈도우가 부족합니다 (생성된 윈도우 {n_windows}개, 최소 2개 필요)",
            detail={"n_windows": n_windows},
        )


class NonFiniteLossError(NumericError):
    """checkpoint/report에는 학습을 마친 시점의 최적 체크포인트와 학습 리포트가 담긴다."""

    def __init__(
        self,
        epoch: int,
        window_index: int,
        dump_path: str | None = None,
        checkpoint: Any = None,
        report: Any = None,
        aborted_epochs: list[int] | None = None,
    ):
        self.checkpoint = checkpoint
        self.report = report
        aborted_epochs = aborted_epochs if aborted_epochs is not None else [epoch]
        super().__init__(
            code="NON_FINITE_LOSS",
            message=f"{epoch}번째 에폭, 윈도우 {window_index}에서 손실이 유한하지 않습니다 (중단된 에폭 {len(aborted_epochs)}개)",
            detail={
                "epoch": epoch,
                "window_index": window_index,
                "dump_path": dump_path,
                "aborted_epochs": aborted_epochs,
            },
        )


class CheckpointMismatchError(DataError):
    def __init__(self, reason: str, detail: dict[str, Any] | None = None):
        super().__init__(
            code="CHECKPOINT_MISMATCH",
            message=f"체크포인트가 현재 설정/데이터와 맞지 않습니다: {reason}",
            detail=detail,
        )


class CovariatesUnavailableError(DataError):
    def __init__(self, horizon: int, available: int):
        super().__init__(
            code="COVARIATES_UNAVAILABLE",
            message=f"예측 구간 {horizon}일 중 공변량은 {available}일만 있습니다 (use_future_covariates 확인)",
            detail={"horizon": horizon, "available": available},
        )


# ============================================================
# 평가 오류
# ============================================================
class ZeroDenominatorError(NumericError):
    def __init__(self, metric: str):
        super().__init__(
            code="ZERO_DENOMINATOR",
            message=f"{metric}: 실제값의 절대값 합이 0입니다",
            detail={"metric": metric},
        )


class AlignmentError(DataError):
    def __init__(self, missing: list[str], extra: list[str]):
        super().__init__(
            code="ALIGNMENT_ERROR",
            message="예측과 실제값의 노드 집합이 일치하지 않습니다",
            detail={"missing": missing, "extra": extra},
        )
