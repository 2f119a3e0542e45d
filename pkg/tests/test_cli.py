"""
CLI 통합 테스트

main([...])을 직접 호출해 synth -> train -> forecast -> evaluate 흐름과
종료 코드, 결과 파일의 바이트 단위 재현성을 검증한다.
"""

import json

import numpy as np
import pandas as pd
import pytest
import yaml

from arm3dnet.main import main
from arm3dnet.services.storage import load_checkpoint, load_panel, read_actuals_csv, save_panel

PIPELINE_FILES = (
    "panel.bin",
    "mobility.csv",
    "generator.json",
    "checkpoint.bin",
    "train_report.jsonl",
    "nd_trace.csv",
    "forecast.csv",
    "samples.csv",
    "actuals.csv",
    "baseline.csv",
    "metrics.json",
)

SMALL_RUN = {
    "seed": 5,
    "data": {"synthetic": {"n_nodes": 4, "t_days": 40}},
    "graph": {"threshold": 200.0, "window": 7},
    "model": {"hidden_size": 3, "mixture_K": 2, "horizon": 3, "n_samples": 4},
    "train": {"epochs": 2, "patience": 2, "lr": 0.01, "cond_len": 10, "stride": 5, "val_fraction": 0.3, "batch_size": 2},
}


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(SMALL_RUN), encoding="utf-8")
    return str(path)


def _error(capsys) -> dict:
    for line in capsys.readouterr().err.splitlines():
        if line.startswith('{"error"'):
            return json.loads(line)["error"]
    raise AssertionError("stderr에 오류 JSON이 없습니다")


def _pipeline(config_path: str, out: str) -> None:
    base = ["--config", config_path, "--out", out]
    assert main(base + ["synth"]) == 0
    assert main(base + ["train"]) == 0
    assert main(base + ["forecast", "--samples"]) == 0
    assert main(base + ["evaluate", "--baseline"]) == 0


# ============================================================
# synth
# ============================================================
class TestSynth:
    def test_writes_three_files(self, config_path, tmp_path):
        out = tmp_path / "synth"

        assert main(["--config", config_path, "--out", str(out), "synth"]) == 0

        assert sorted(p.name for p in out.iterdir()) == ["generator.json", "mobility.csv", "panel.bin"]
        assert json.loads((out / "generator.json").read_text(encoding="utf-8"))["config"]["seed"] == 5

    def test_same_seed_identical_bytes(self, config_path, tmp_path):
        for name in ("a", "b"):
            assert main(["--config", config_path, "--out", str(tmp_path / name), "synth"]) == 0

        for name in ("generator.json", "mobility.csv", "panel.bin"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_seed_flag_overrides(self, config_path, tmp_path):
        main(["--config", config_path, "--out", str(tmp_path / "a"), "synth"])
        main(["--config", config_path, "--seed", "6", "--out", str(tmp_path / "b"), "synth"])

        assert (tmp_path / "a" / "panel.bin").read_bytes() != (tmp_path / "b" / "panel.bin").read_bytes()


# ============================================================
# train -> forecast -> evaluate
# ============================================================
class TestPipeline:
    def test_outputs_byte_identical_across_runs(self, config_path, tmp_path):
        _pipeline(config_path, str(tmp_path / "first"))
        _pipeline(config_path, str(tmp_path / "second"))

        for name in PIPELINE_FILES:
            assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes(), name

    def test_forecast_outputs(self, config_path, tmp_path):
        out = tmp_path / "run"
        _pipeline(config_path, str(out))

        forecast = pd.read_csv(out / "forecast.csv", dtype={"node": str})
        samples = pd.read_csv(out / "samples.csv", dtype={"node": str})
        assert len(forecast) == 4 * 3
        assert samples.groupby(["node", "step"]).size().eq(4).all()
        metrics = json.loads((out / "metrics.json").read_text(encoding="utf-8"))
        assert [r["model"] for r in metrics["reports"]] == ["arm3dnet", "persistence"]

    def test_train_and_forecast_read_synth_outputs(self, config_path, tmp_path):
        """synth가 남긴 panel.bin을 train/forecast가 그대로 입력으로 쓴다."""
        # Given: synth 결과물의 타깃을 100만큼 옮겨 다시 저장
        out = tmp_path / "run"
        base = ["--config", config_path, "--out", str(out)]
        assert main(base + ["synth"]) == 0
        panel = load_panel(out / "panel.bin")
        shifted = panel.with_values(targets=panel.targets + 100.0)
        save_panel(shifted, out / "panel.bin")

        # When
        assert main(base + ["train"]) == 0
        assert main(base + ["forecast"]) == 0

        # Then: 실제값 파일이 옮긴 패널의 마지막 horizon일과 같다
        _, actuals = read_actuals_csv(out / "actuals.csv")
        np.testing.assert_array_equal(actuals, shifted.targets[:, -3:])

    def test_stale_synth_outputs_regenerated(self, config_path, tmp_path, capsys):
        out = str(tmp_path / "run")
        assert main(["--config", config_path, "--out", out, "synth"]) == 0
        capsys.readouterr()

        assert main(["--config", config_path, "--seed", "6", "--out", out, "train"]) == 0

        assert "다시 생성" in capsys.readouterr().err

    def test_sample_count_is_runtime_option(self, config_path, tmp_path):
        out = str(tmp_path / "run")
        assert main(["--config", config_path, "--out", out, "train"]) == 0

        assert main(["--config", config_path, "--out", out, "--set", "model.n_samples=12", "forecast", "--samples"]) == 0

        samples = pd.read_csv(tmp_path / "run" / "samples.csv", dtype={"node": str})
        assert samples.groupby(["node", "step"]).size().eq(12).all()

    def test_no_covariates_flag(self, config_path, tmp_path):
        out = tmp_path / "run"

        assert main(["--config", config_path, "--out", str(out), "train", "--no-covariates"]) == 0

        assert load_checkpoint(out / "checkpoint.bin").config.use_covariates is False

    def test_future_covariates_beyond_panel(self, config_path, tmp_path, capsys):
        out = str(tmp_path / "run")
        assert main(["--config", config_path, "--out", out, "train"]) == 0
        capsys.readouterr()

        code = main(
            ["--config", config_path, "--out", out, "--set", "model.use_future_covariates=true", "forecast", "--horizon", "5"]
        )

        assert code == 2
        assert _error(capsys)["code"] == "COVARIATES_UNAVAILABLE"


# ============================================================
# evaluate
# ============================================================
class TestEvaluate:
    @staticmethod
    def _write(tmp_path, forecast_nodes=("00001", "00002")):
        forecast = tmp_path / "forecast.csv"
        rows = ["node,step,q10,q50,q90,mean"]
        rows += [f"{node},{step},0,{step},9,{step}" for node in forecast_nodes for step in (1, 2)]
        forecast.write_text("\n".join(rows) + "\n", encoding="utf-8")
        actuals = tmp_path / "actuals.csv"
        rows = ["node,step,value"] + [f"{node},{step},{step}" for node in ("00001", "00002") for step in (1, 2)]
        actuals.write_text("\n".join(rows) + "\n", encoding="utf-8")
        baseline = tmp_path / "baseline.csv"
        rows = ["node,step,value"] + [f"{node},{step},1" for node in ("00001", "00002") for step in (1, 2)]
        baseline.write_text("\n".join(rows) + "\n", encoding="utf-8")

    def test_perfect_forecast(self, tmp_path, capsys):
        self._write(tmp_path)

        assert main(["--out", str(tmp_path), "evaluate"]) == 0

        report = json.loads(capsys.readouterr().out.splitlines()[0])
        assert (report["nd"], report["nrmse"]) == (0.0, 0.0)

    def test_baseline_row(self, tmp_path):
        self._write(tmp_path)

        assert main(["--out", str(tmp_path), "evaluate", "--baseline", "--table"]) == 0

        reports = json.loads((tmp_path / "metrics.json").read_text(encoding="utf-8"))["reports"]
        assert reports[1]["model"] == "persistence"
        assert reports[1]["nd"] == pytest.approx(2.0 / 6.0, abs=1e-12)

    def test_misaligned_nodes(self, tmp_path, capsys):
        self._write(tmp_path, forecast_nodes=("00001", "00003"))

        assert main(["--out", str(tmp_path), "evaluate"]) == 2

        error = _error(capsys)
        assert error["code"] == "ALIGNMENT_ERROR"
        assert error["detail"] == {"missing": ["00002"], "extra": ["00003"]}


# ============================================================
# 사용법 오류
# ============================================================
class TestUsageErrors:
    def test_missing_mobility_file(self, tmp_path, capsys):
        covid = tmp_path / "covid.csv"
        covid.write_text("date,fips,cum_cases,cum_deaths\n2020-06-01,00001,1,0\n", encoding="utf-8")
        missing = tmp_path / "absent_mobility.csv"
        config = tmp_path / "files.yaml"
        config.write_text(
            yaml.safe_dump({"data": {"covid_path": str(covid), "mobility_path": str(missing)}}), encoding="utf-8"
        )

        assert main(["--config", str(config), "--out", str(tmp_path / "run"), "train"]) == 1

        error = _error(capsys)
        assert error["code"] == "IO_ERROR"
        assert error["detail"]["path"] == str(missing)

    @pytest.mark.parametrize("assignment", ["model.hidden_size", "model.unknown=1", "train.epochs=0"])
    def test_bad_override(self, config_path, tmp_path, assignment, capsys):
        code = main(["--config", config_path, "--out", str(tmp_path), "--set", assignment, "train"])

        assert code == 1
        assert _error(capsys)["code"] == "INVALID_CONFIG"

    def test_missing_config_file(self, tmp_path):
        assert main(["--config", str(tmp_path / "absent.yaml"), "--out", str(tmp_path), "synth"]) == 1

    def test_unknown_command(self):
        assert main(["explode"]) == 1

    def test_missing_command(self):
        assert main([]) == 1

    def test_help(self, capsys):
        assert main(["--help"]) == 0
        assert "synth" in capsys.readouterr().out


# ============================================================
# 데이터 오류
# ============================================================
class TestDataErrors:
    def test_header_only_covid_file(self, tmp_path, capsys):
        # Given: 헤더만 있는 확진자 파일과 이동량 파일
        covid = tmp_path / "covid.csv"
        covid.write_text("date,fips,cum_cases,cum_deaths\n", encoding="utf-8")
        mobility = tmp_path / "mobility.csv"
        mobility.write_text(
            "date,origin_fips,dest_fips,aggregated_visits,mean_distance,device_count\n", encoding="utf-8"
        )
        config = tmp_path / "files.yaml"
        config.write_text(
            yaml.safe_dump({"data": {"covid_path": str(covid), "mobility_path": str(mobility)}}), encoding="utf-8"
        )

        # When
        code = main(["--config", str(config), "--out", str(tmp_path / "run"), "train"])

        # Then: 트레이스백 대신 종료 코드 2와 오류 JSON
        assert code == 2
        assert _error(capsys)["code"] == "EMPTY_DATA"
