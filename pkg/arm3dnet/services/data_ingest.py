"""
데이터 수집 서비스

확진자/이동량 CSV를 읽어 검증하고, 유입량(inflow) 공변량을 유도하여
TimeSeriesPanel을 만든다. 공변량 표준화와 조건/예측 구간 분할도 담당한다.

계층 구조에서의 위치:
    CLI 커맨드 -> data_ingest(이 모듈) -> schemas.records / models.panel
"""

import datetime as dt
import logging
from pathlib import Path
from typing import Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from arm3dnet.core.exceptions import (
    DataGapError,
    DegenerateFeatureError,
    DuplicateKeyError,
    EmptyDataError,
    HorizonTooLongError,
    IoError,
    MalformedRowError,
    MissingCaseDataError,
    MissingColumnError,
)
from arm3dnet.models.panel import FeatureStats, TimeSeriesPanel
from arm3dnet.schemas.records import COVID_COLUMNS, MOBILITY_COLUMNS, CovidRecord, MobilityRecord

logger = logging.getLogger(__name__)

COVARIATE_NAMES = ("inflow", "mean_distance")


# ============================================================
# CSV 로딩 / 저장
# ============================================================
def _read_rows(path: str | Path, columns: list[str]) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise IoError(str(path), "파일이 존재하지 않습니다")
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise MissingColumnError(str(path), missing)
    return frame[columns]


def _validate_rows(
    path: str | Path, frame: pd.DataFrame, model: type[BaseModel], key_fields: tuple[str, ...]
) -> list:
    records = []
    seen: set[tuple] = set()
    for offset, row in enumerate(frame.to_dict(orient="records")):
        line = offset + 2  # 헤더가 1번째 줄
        try:
            record = model.model_validate(row)
        except ValidationError as exc:
            reason = "; ".join(f"{'.'.join(map(str, e['loc']))}: {e['msg']}" for e in exc.errors())
            raise MalformedRowError(str(path), line, reason) from exc
        key = tuple(str(getattr(record, f)) for f in key_fields)
        if key in seen:
            raise DuplicateKeyError(str(path), key, line)
        seen.add(key)
        records.append(record)
    return records


def load_covid_csv(path: str | Path) -> list[CovidRecord]:
    """
    확진자 CSV를 읽는다. 헤더: date,fips,cum_cases,cum_deaths

    Returns:
        (fips, date) 순으로 정렬된 CovidRecord 리스트

    Raises:
        MissingColumnError, MalformedRowError, DuplicateKeyError
    """
    frame = _read_rows(path, COVID_COLUMNS)
    records = _validate_rows(path, frame, CovidRecord, ("date", "fips"))
    records.sort(key=lambda r: (r.fips, r.date))
    logger.info("확진자 파일 로드 완료", extra={"path": str(path), "rows": len(records)})
    return records


def load_mobility_csv(path: str | Path) -> list[MobilityRecord]:
    """이동량 CSV를 읽는다. (date, origin, dest)가 중복되면 DuplicateKeyError."""
    frame = _read_rows(path, MOBILITY_COLUMNS)
    records = _validate_rows(path, frame, MobilityRecord, ("date", "origin_fips", "dest_fips"))
    records.sort(key=lambda r: (r.date, r.origin_fips, r.dest_fips))
    logger.info("이동량 파일 로드 완료", extra={"path": str(path), "rows": len(records)})
    return records


def _records_frame(records: list[BaseModel], columns: list[str]) -> pd.DataFrame:
    frame = pd.DataFrame([r.model_dump() for r in records], columns=columns)
    if not frame.empty:
        frame["date"] = frame["date"].map(lambda d: d.isoformat())
    return frame


def _write_records(frame: pd.DataFrame, path: str | Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    except OSError as exc:
        raise IoError(str(path), str(exc)) from exc
    return path


def write_covid_csv(records: list[CovidRecord], path: str | Path) -> Path:
    return _write_records(_records_frame(records, COVID_COLUMNS), path)


def write_mobility_csv(records: list[MobilityRecord], path: str | Path) -> Path:
    return _write_records(_records_frame(records, MOBILITY_COLUMNS), path)


# ============================================================
# 유입량 (inflow)
# ============================================================
def _as_date(day: dt.date | str) -> dt.date:
    return day if isinstance(day, dt.date) else dt.date.fromisoformat(day)


def derive_inflow(
    mobility: list[MobilityRecord],
    covid: list[CovidRecord],
    day: dt.date | str,
    node_ids: list[str] | tuple[str, ...] | None = None,
) -> np.ndarray:
    """
    inflow[i] = Σ_j visits(j→i) × cum_cases(j)  (해당 날짜 기준)

    Args:
        node_ids: 출력 벡터의 노드 순서. 없으면 해당 날짜에 등장한 모든 카운티를 정렬해 쓴다.

    Raises:
        MissingCaseDataError: 출발 카운티에 그날 확진자 기록이 없을 때
    """
    day = _as_date(day)
    cases = {r.fips: r.cum_cases for r in covid if r.date == day}
    todays = [r for r in mobility if r.date == day]
    missing = sorted({r.origin_fips for r in todays if r.origin_fips not in cases})
    if missing:
        raise MissingCaseDataError(day.isoformat(), missing)
    if node_ids is None:
        node_ids = sorted(set(cases) | {r.dest_fips for r in todays} | {r.origin_fips for r in todays})
    index = {n: i for i, n in enumerate(node_ids)}
    inflow = np.zeros(len(node_ids))
    for record in todays:
        if record.dest_fips in index:
            inflow[index[record.dest_fips]] += record.aggregated_visits * cases[record.origin_fips]
    return inflow


# ============================================================
# 패널 구성
# ============================================================
def _gap_report(values: pd.DataFrame) -> dict[str, list[str]]:
    gaps = {}
    for fips, row in values.iterrows():
        missing = row.index[row.isna()]
        if len(missing):
            gaps[str(fips)] = [d for d in missing]
    return gaps


def build_panel(
    covid: list[CovidRecord],
    mobility: list[MobilityRecord],
    target: Literal["cases", "deaths"] = "cases",
    difference: bool = False,
    forward_fill: bool = False,
    max_nodes: int | None = None,
) -> TimeSeriesPanel:
    """
    레코드로 패널을 만든다. 공변량은 (inflow, mean_distance) 두 개다.

    누락된 날짜가 있으면 DataGapError로 즉시 실패한다.
    forward_fill=True면 직전 관측값으로 채우되, 첫날 누락은 채울 수 없으므로 여전히 실패한다.
    """
    if not covid:
        raise EmptyDataError("covid")
    covid_frame = _records_frame(covid, COVID_COLUMNS)
    dates = [d.date().isoformat() for d in pd.date_range(covid_frame["date"].min(), covid_frame["date"].max())]

    def pivot(column: str) -> pd.DataFrame:
        table = covid_frame.pivot(index="fips", columns="date", values=column).reindex(columns=dates)
        if forward_fill:
            table = table.ffill(axis=1)
        return table.astype(float)

    cases = pivot("cum_cases")
    values = cases if target == "cases" else pivot("cum_deaths")

    nodes = sorted(values.index)
    if max_nodes is not None and max_nodes < len(nodes):
        final = values.ffill(axis=1).iloc[:, -1].fillna(0.0)
        ranked = sorted(nodes, key=lambda f: (-final[f], f))
        nodes = sorted(ranked[:max_nodes])
    values = values.loc[nodes]

    gaps = _gap_report(values)
    if gaps:
        logger.error("누락된 날짜 발견", extra={"n_counties": len(gaps)})
        raise DataGapError(gaps)

    covariates = _mobility_covariates(mobility, cases, nodes, dates)
    targets = values.to_numpy()
    if difference:
        targets = np.diff(targets, axis=1)
        covariates = covariates[1:]
        dates = dates[1:]

    logger.info(
        "패널 구성 완료",
        extra={"n_nodes": len(nodes), "t_days": len(dates), "target": target, "difference": difference},
    )
    return TimeSeriesPanel(
        node_ids=tuple(nodes), targets=targets, covariates=covariates, t0=len(dates), dates=tuple(dates)
    )


def _mobility_covariates(
    mobility: list[MobilityRecord], cases: pd.DataFrame, nodes: list[str], dates: list[str]
) -> np.ndarray:
    """(T, N, 2): 유입량과 출발 기준 기기 가중 평균 이동 거리."""
    out = np.zeros((len(dates), len(nodes), len(COVARIATE_NAMES)))
    if not mobility:
        return out
    frame = _records_frame(mobility, MOBILITY_COLUMNS)
    frame = frame[frame["date"].isin(dates)]

    case_long = cases.stack(future_stack=True).rename("origin_cases").reset_index()
    case_long.columns = ["origin_fips", "date", "origin_cases"]
    merged = frame.merge(case_long, on=["origin_fips", "date"], how="left")
    missing = merged[merged["origin_cases"].isna()]
    if not missing.empty:
        first = missing.iloc[0]
        raise MissingCaseDataError(first["date"], sorted(missing["origin_fips"].unique().tolist()))

    merged["inflow"] = merged["aggregated_visits"] * merged["origin_cases"]
    inflow = merged.pivot_table(index="date", columns="dest_fips", values="inflow", aggfunc="sum")
    inflow = inflow.reindex(index=dates, columns=nodes).fillna(0.0)

    frame = frame.assign(weighted=frame["mean_distance"] * frame["device_count"])
    grouped = frame.groupby(["date", "origin_fips"]).agg(
        weighted=("weighted", "sum"), devices=("device_count", "sum"), plain=("mean_distance", "mean")
    )
    devices = grouped["devices"]
    distance = (grouped["weighted"] / devices.where(devices > 0)).fillna(grouped["plain"])
    distance = distance.unstack("origin_fips")
    distance = distance.reindex(index=dates, columns=nodes).fillna(0.0)

    out[:, :, 0] = inflow.to_numpy()
    out[:, :, 1] = distance.to_numpy()
    return out


# ============================================================
# 표준화 / 스케일링
# ============================================================
def standardize_covariates(panel: TimeSeriesPanel) -> tuple[TimeSeriesPanel, list[FeatureStats]]:
    """
    조건 구간의 (노드, 날짜) 전체 값으로 특성별 평균과 모집단 표준편차를 구해
    전체 구간에 적용한다.

    Raises:
        DegenerateFeatureError: 조건 구간에서 특성 값이 상수일 때
    """
    conditioning = panel.covariates[: panel.cond_len].reshape(-1, panel.n_features)
    stats = []
    for p in range(panel.n_features):
        column = conditioning[:, p]
        mean = float(column.mean())
        std = float(column.std())
        if std == 0.0 or np.unique(column).size < 2:
            raise DegenerateFeatureError(p)
        stats.append(FeatureStats(mean=mean, std=std))
    means = np.array([s.mean for s in stats])
    stds = np.array([s.std for s in stats])
    return panel.with_values(covariates=(panel.covariates - means) / stds), stats


def invert_covariates(panel: TimeSeriesPanel, stats: list[FeatureStats]) -> TimeSeriesPanel:
    means = np.array([s.mean for s in stats])
    stds = np.array([s.std for s in stats])
    return panel.with_values(covariates=panel.covariates * stds + means)


def scale_targets(panel: TimeSeriesPanel) -> tuple[TimeSeriesPanel, np.ndarray]:
    """노드별 1 + mean|Z| (조건 구간)로 타깃을 나눈다."""
    scales = 1.0 + np.abs(panel.conditioning_targets).mean(axis=1)
    return panel.with_values(targets=panel.targets / scales[:, None]), scales


def unscale_values(values: np.ndarray, scales: np.ndarray) -> np.ndarray:
    """(..., N, H) 배열에 노드별 스케일을 되돌려 곱한다."""
    return np.asarray(values) * np.asarray(scales)[:, None]


# ============================================================
# 구간 분할 / 부분 패널
# ============================================================
def split_ranges(panel: TimeSeriesPanel, horizon: int) -> TimeSeriesPanel:
    """t0 = T - horizon + 1로 두어 예측 구간이 정확히 horizon일이 되게 한다."""
    if horizon < 1 or horizon >= panel.t_days:
        raise HorizonTooLongError(horizon, panel.t_days)
    return panel.with_t0(panel.t_days - horizon + 1)


def select_nodes(panel: TimeSeriesPanel, node_ids: list[str] | tuple[str, ...]) -> TimeSeriesPanel:
    idx = panel.node_index(node_ids)
    return TimeSeriesPanel(
        node_ids=tuple(node_ids),
        targets=panel.targets[idx],
        covariates=panel.covariates[:, idx],
        t0=panel.t0,
        dates=panel.dates,
    )
