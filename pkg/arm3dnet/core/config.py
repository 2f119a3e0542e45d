"""
프로세스 환경 설정 모듈

pydantic-settings의 BaseSettings를 활용하여
환경변수 및 .env 파일에서 설정값을 자동으로 로드한다.
실험 설정(모델, 학습 하이퍼파라미터 등)은 schemas.configs.RunConfig가 담당하고,
이 모듈은 로깅 레벨이나 기본 출력 경로처럼 실행 환경에 속한 값만 다룬다.
"""

from functools import lru_cache

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    실행 환경 설정 클래스

    환경변수에서 값을 읽어오며, 접두사 "ARM3D_"가 붙은 변수를 자동 매핑한다.
    예: ARM3D_LOG_LEVEL=DEBUG -> Settings.LOG_LEVEL

    Attributes:
        LOG_LEVEL: 로깅 레벨
        LOG_JSON: JSON 구조화 로그 사용 여부
        OUTPUT_DIR: --out을 주지 않았을 때 사용하는 출력 디렉토리
        DEFAULT_SEED: --seed와 설정 파일 모두 시드를 주지 않았을 때의 시드
    """

    LOG_LEVEL: str = "INFO"
    LOG_JSON: bool = False
    OUTPUT_DIR: str = "runs"
    DEFAULT_SEED: int = 0

    model_config = SettingsConfigDict(
        env_prefix="ARM3D_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )


@lru_cache
def get_settings() -> Settings:
    """캐시된 Settings 인스턴스를 반환한다."""
    return Settings()
