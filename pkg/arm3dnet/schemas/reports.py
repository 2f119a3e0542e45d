"""
리포트 스키마 모듈

학습 리포트와 평가 리포트를 Pydantic 모델로 정의한다.
파일로 쓸 때는 model_dump()로 직렬화해 한 줄에 JSON 레코드 하나씩 기록한다.
"""

from pydantic import BaseModel, Field, model_validator


class EpochRecord(BaseModel):
    epoch: int = Field(..., ge=1)
    train_loss: float
    val_nd: float
    val_nrmse: float


class TrainReport(BaseModel):
    """
    에폭별 학습 손실과 검증 ND/NRMSE, 최적 에폭, 조기 종료 여부.

    best_epoch는 검증 ND가 최소인 에폭 번호다 (이어서 학습하면 1이 아닌 번호부터 시작한다).
    """

    epochs: list[EpochRecord] = Field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    @model_validator(mode="after")
    def _best_epoch_consistent(self) -> "TrainReport":
        if self.epochs:
            best = min(self.epochs, key=lambda r: r.val_nd)
            if self._record(self.best_epoch).val_nd != best.val_nd:
                raise ValueError("best_epoch가 최소 검증 ND 에폭과 다릅니다")
        return self

    def _record(self, epoch: int) -> EpochRecord:
        for record in self.epochs:
            if record.epoch == epoch:
                return record
        raise ValueError(f"best_epoch {epoch}에 해당하는 에폭 기록이 없습니다")

    @property
    def train_loss(self) -> list[float]:
        return [r.train_loss for r in self.epochs]

    @property
    def val_nd(self) -> list[float]:
        return [r.val_nd for r in self.epochs]

    @property
    def best_val_nd(self) -> float:
        return self._record(self.best_epoch).val_nd


class MetricsReport(BaseModel):
    model: str = Field("arm3dnet", description="평가 대상 이름 (모델 또는 베이스라인)")
    nrmse: float = Field(..., ge=0.0)
    nd: float = Field(..., ge=0.0)
    n_series: int = Field(..., ge=1)
    horizon: int = Field(..., ge=1)
