"""
실험 설정 스키마 모듈

하나의 YAML 설정 파일이 실험의 모든 값을 담는다.
계층 구조:
    RunConfig
    ├── DataConfig        데이터 소스 (파일 또는 합성 데이터 중 정확히 하나)
    │   └── SyntheticConfig
    ├── GraphConfig       인접 행렬 구성 (임계값, 상관 윈도우)
    ├── Arm3dnetConfig    모델 구조
    ├── TrainConfig       학습 하이퍼파라미터
    └── ForecastConfig    예측/평가 옵션
"""

from typing import Any, Literal, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from arm3dnet.core.exceptions import InvalidConfigError

ConfigT = TypeVar("ConfigT", bound=BaseModel)


class SyntheticConfig(BaseModel):
    """
    합성 패널 생성 설정

    잠재 강도 lambda_t = rho * T~ * lambda_{t-1} + (n_modes개 봉우리 구동항)을
    따르는 패널을 만든다. 같은 설정이면 항상 같은 패널이 나온다.
    """

    model_config = ConfigDict(extra="forbid")

    n_nodes: int = Field(8, ge=2, description="노드(카운티) 수")
    t_days: int = Field(120, ge=16, description="일 수")
    seed: int = Field(7, description="생성기 시드")
    n_modes: int = Field(2, ge=1, description="시계열당 봉우리 수")
    edge_density: float = Field(0.35, gt=0.0, le=1.0, description="간선 밀도")
    noise_scale: float = Field(0.1, ge=0.0, description="관측 잡음 표준편차")
    coupling: float = Field(0.6, ge=0.0, lt=1.0, description="확산 결합 계수 rho")
    amplitude: float = Field(3.0, gt=0.0, description="구동항 평균 진폭")


class DataConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    covid_path: str | None = Field(None, description="확진자 CSV 경로")
    mobility_path: str | None = Field(None, description="이동량 CSV 경로")
    synthetic: SyntheticConfig | None = Field(None, description="합성 데이터 설정")
    target: Literal["cases", "deaths"] = "cases"
    difference: bool = Field(False, description="누적값 대신 일별 증가분을 타깃으로 사용")
    forward_fill: bool = Field(False, description="누락일을 직전 관측값으로 채움")
    max_nodes: int | None = Field(None, ge=2, description="최종 누적값 상위 카운티만 사용")
    scale_targets: bool = Field(False, description="노드별 1 + mean|Z| 스케일링")

    @model_validator(mode="after")
    def _exactly_one_source(self) -> "DataConfig":
        has_files = self.covid_path is not None or self.mobility_path is not None
        if has_files == (self.synthetic is not None):
            raise ValueError("데이터 소스는 파일(covid_path, mobility_path)과 synthetic 중 정확히 하나여야 합니다")
        if has_files and (self.covid_path is None or self.mobility_path is None):
            raise ValueError("파일 소스에는 covid_path와 mobility_path가 모두 필요합니다")
        return self


class GraphConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    threshold: float = Field(200.0, ge=0.0, description="간선을 연결할 최소 일별 방문 수")
    window: int = Field(14, ge=2, description="피어슨 상관을 계산할 과거 일 수")


class Arm3dnetConfig(BaseModel):
    """모델 구조 설정. 체크포인트에 함께 저장되어 로드 시 형상 검증에 쓰인다."""

    model_config = ConfigDict(extra="forbid")

    hidden_size: int = Field(16, ge=1)
    n_layers: int = Field(1, ge=1)
    mixture_K: int = Field(5, ge=1, le=16, description="혼합 성분 수")
    horizon: int = Field(7, ge=1, description="예측 구간 길이")
    n_samples: int = Field(12, ge=1, description="조상 샘플링 궤적 수")
    covariate_dim: int = Field(2, ge=1, description="노드별 공변량 수 P")
    likelihood: Literal["gmm", "gaussian"] = "gmm"
    sigma_link: Literal["softplus", "exp"] = "softplus"
    sigma_floor: float = Field(1e-6, ge=0.0)
    use_covariates: bool = Field(True, description="False면 그래프 합성곱 입력을 0으로 둔다")
    gc_include_target: bool = Field(False, description="직전 타깃을 확산 합성곱 입력에 추가")
    full_range_loss: bool = Field(False, description="조건 구간까지 손실에 포함")
    use_future_covariates: bool = Field(False, description="예측 구간의 실제 공변량 사용 (백테스트)")

    @property
    def gc_dim(self) -> int:
        return self.covariate_dim + (1 if self.gc_include_target else 0)

    @property
    def n_components(self) -> int:
        return 1 if self.likelihood == "gaussian" else self.mixture_K


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(50, ge=1)
    patience: int = Field(5, ge=1, description="검증 ND 개선이 없을 때 기다릴 에폭 수")
    lr: float = Field(1e-3, ge=0.0)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    eps: float = Field(1e-8, gt=0.0)
    clip_norm: float | None = Field(5.0, gt=0.0, description="전역 노름 클리핑 (None이면 끔)")
    cond_len: int = Field(28, ge=1, description="학습 윈도우 조건 구간 길이")
    stride: int = Field(7, ge=1)
    val_fraction: float = Field(0.2, gt=0.0, lt=1.0)
    batch_size: int = Field(1, ge=1, description="Adam 한 스텝에 누적할 윈도우 수")
    seed: int = 0
    dump_dir: str | None = Field(None, description="유한하지 않은 손실 윈도우를 저장할 디렉토리")


class ForecastConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    point: Literal["mean", "median"] = Field("mean", description="점 예측 요약 방식")
    write_samples: bool = Field(False, description="node,step,sample_idx,value 덤프 작성")


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int | None = None
    out_dir: str | None = None
    data: DataConfig = Field(default_factory=lambda: DataConfig(synthetic=SyntheticConfig()))
    graph: GraphConfig = Field(default_factory=GraphConfig)
    model: Arm3dnetConfig = Field(default_factory=Arm3dnetConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    forecast: ForecastConfig = Field(default_factory=ForecastConfig)


def parse_config(model_cls: type[ConfigT], data: Any) -> ConfigT:
    """
    설정 매핑을 검증한다. 이미 모델 인스턴스면 그대로 반환한다.

    Raises:
        InvalidConfigError: 검증 실패 시 (필드별 오류 목록을 detail에 담는다)
    """
    if isinstance(data, model_cls):
        return data
    try:
        return model_cls.model_validate(data)
    except ValidationError as exc:
        errors = [
            {"field": ".".join(str(loc) for loc in err["loc"]), "message": err["msg"]}
            for err in exc.errors()
        ]
        raise InvalidConfigError(f"{model_cls.__name__} 설정이 유효하지 않습니다", {"errors": errors}) from exc
