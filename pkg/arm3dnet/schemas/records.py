"""
입력 레코드 스키마 모듈

확진자 파일과 이동량 파일의 한 행을 Pydantic 모델로 정의한다.
필드 불변식(음수 금지, 5자리 FIPS 등)은 Field 제약으로 검증되며,
위반 시 로더가 MalformedRowError로 변환한다.
"""

import datetime as dt

from pydantic import BaseModel, ConfigDict, Field

COVID_COLUMNS = ["date", "fips", "cum_cases", "cum_deaths"]
MOBILITY_COLUMNS = [
    "date",
    "origin_fips",
    "dest_fips",
    "aggregated_visits",
    "mean_distance",
    "device_count",
]

Fips = str


class CovidRecord(BaseModel):
    """카운티별 누적 확진자/사망자 기록 한 건."""

    model_config = ConfigDict(frozen=True)

    date: dt.date = Field(..., description="기준 일자 (YYYY-MM-DD)")
    fips: Fips = Field(..., min_length=5, max_length=5, pattern=r"^\d{5}$", description="카운티 FIPS 코드")
    cum_cases: int = Field(..., ge=0, description="누적 확진자 수")
    cum_deaths: int = Field(..., ge=0, description="누적 사망자 수")


class MobilityRecord(BaseModel):
    """출발 카운티 -> 도착 카운티 일별 이동 기록 한 건."""

    model_config = ConfigDict(frozen=True)

    date: dt.date = Field(..., description="기준 일자 (YYYY-MM-DD)")
    origin_fips: Fips = Field(..., min_length=5, max_length=5, pattern=r"^\d{5}$")
    dest_fips: Fips = Field(..., min_length=5, max_length=5, pattern=r"^\d{5}$")
    aggregated_visits: int = Field(..., ge=0, description="출발지 -> 도착지 총 방문 수")
    mean_distance: float = Field(..., ge=0, allow_inf_nan=False, description="기기당 평균 이동 거리 (출발 카운티 기준)")
    device_count: int = Field(..., ge=0, description="기기 수")
