"""
저장소 테스트

바이너리 패널 캐시/체크포인트의 비트 단위 보존과 검증, CSV 결과물 형식을 확인한다.
"""

import numpy as np
import pandas as pd
import pytest

from arm3dnet.core.exceptions import CheckpointMismatchError, IoError
from arm3dnet.models.forecast import ForecastArtifact
from arm3dnet.schemas.reports import EpochRecord, TrainReport
from arm3dnet.services.model import init_params
from arm3dnet.services.nn_core import AdamState, adam_update
from arm3dnet.services.storage import (
    MAGIC,
    Checkpoint,
    load_checkpoint,
    load_panel,
    read_actuals_csv,
    read_forecast_csv,
    read_train_report,
    save_checkpoint,
    save_panel,
    write_actuals_csv,
    write_forecast_csv,
    write_samples_csv,
    write_train_report,
)


@pytest.fixture
def checkpoint(tiny_config):
    params = init_params(tiny_config, 3, np.random.default_rng(0))
    for grad in params.grads.values():
        grad.fill(0.5)
    adam = AdamState(lr=0.01)
    adam_update(adam, params)
    return Checkpoint(
        config=tiny_config,
        node_ids=("00001", "00002", "00003"),
        params=params,
        adam=adam,
        epoch=4,
        best_val_nd=0.25,
        metadata={"seed": 3},
    )


@pytest.fixture
def artifact():
    samples = np.random.default_rng(1).normal(size=(4, 2, 3))
    return ForecastArtifact.from_samples(("00002", "00001"), samples, samples * 0.5)


class TestPanelCache:
    def test_bit_exact_round_trip(self, small_panel, tmp_path):
        panel, _ = small_panel

        loaded = load_panel(save_panel(panel, tmp_path / "panel.bin"))

        assert loaded.node_ids == panel.node_ids
        assert loaded.dates == panel.dates
        assert loaded.t0 == panel.t0
        assert loaded.targets.tobytes() == panel.targets.tobytes()
        assert loaded.covariates.tobytes() == panel.covariates.tobytes()

    def test_identical_bytes_for_identical_panel(self, small_panel, tmp_path):
        panel, _ = small_panel

        first = save_panel(panel, tmp_path / "a.bin").read_bytes()
        second = save_panel(panel, tmp_path / "b.bin").read_bytes()

        assert first == second
        assert first.startswith(MAGIC)

    def test_panel_is_not_checkpoint(self, small_panel, tmp_path):
        panel, _ = small_panel
        path = save_panel(panel, tmp_path / "panel.bin")

        with pytest.raises(CheckpointMismatchError):
            load_checkpoint(path)


class TestCheckpoint:
    def test_round_trip(self, checkpoint, tmp_path, tiny_config):
        loaded = load_checkpoint(save_checkpoint(checkpoint, tmp_path / "model.ckpt"), tiny_config, checkpoint.node_ids)

        assert loaded.config == checkpoint.config
        assert loaded.node_ids == checkpoint.node_ids
        assert (loaded.epoch, loaded.best_val_nd, loaded.metadata) == (4, 0.25, {"seed": 3})
        for name in checkpoint.params.names():
            assert loaded.params[name].tobytes() == checkpoint.params[name].tobytes()
            assert loaded.adam.m[name].tobytes() == checkpoint.adam.m[name].tobytes()
        assert loaded.adam.step == 1

    def test_runtime_options_ignored(self, checkpoint, tmp_path, tiny_config):
        path = save_checkpoint(checkpoint, tmp_path / "model.ckpt")

        loaded = load_checkpoint(path, tiny_config.model_copy(update={"n_samples": 50, "horizon": 9}))

        assert loaded.epoch == 4

    def test_structural_mismatch(self, checkpoint, tmp_path, tiny_config):
        path = save_checkpoint(checkpoint, tmp_path / "model.ckpt")

        with pytest.raises(CheckpointMismatchError) as excinfo:
            load_checkpoint(path, tiny_config.model_copy(update={"hidden_size": 4}))

        assert "hidden_size" in excinfo.value.detail["fields"]

    def test_node_mismatch(self, checkpoint, tmp_path):
        path = save_checkpoint(checkpoint, tmp_path / "model.ckpt")

        with pytest.raises(CheckpointMismatchError) as excinfo:
            load_checkpoint(path, expected_nodes=("00001", "00002", "00009"))

        assert excinfo.value.detail == {"missing": ["00003"], "extra": ["00009"]}

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "model.ckpt"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 16)

        with pytest.raises(CheckpointMismatchError):
            load_checkpoint(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError) as excinfo:
            load_checkpoint(tmp_path / "absent.ckpt")

        assert excinfo.value.exit_code == 1


class TestForecastCsv:
    def test_layout(self, artifact, tmp_path):
        path = write_forecast_csv(artifact, tmp_path / "forecast.csv")

        frame = pd.read_csv(path, dtype={"node": str})
        assert list(frame.columns) == ["node", "step", "q10", "q50", "q90", "mean"]
        assert frame["node"].tolist() == ["00002"] * 3 + ["00001"] * 3
        assert frame["step"].tolist() == [1, 2, 3, 1, 2, 3]
        assert np.all(frame["q10"] <= frame["q50"]) and np.all(frame["q50"] <= frame["q90"])

    def test_read_back_sorted_by_node(self, artifact, tmp_path):
        table = read_forecast_csv(write_forecast_csv(artifact, tmp_path / "forecast.csv"))

        assert table["node_ids"] == ("00001", "00002")
        np.testing.assert_array_equal(table["mean"], artifact.point[::-1])
        np.testing.assert_array_equal(table["q50"], artifact.q50[::-1])

    def test_samples_rows_per_node_step(self, artifact, tmp_path):
        frame = pd.read_csv(
            write_samples_csv(artifact, tmp_path / "samples.csv"), dtype={"node": str}, float_precision="round_trip"
        )

        assert list(frame.columns) == ["node", "step", "sample_idx", "value"]
        assert frame.groupby(["node", "step"]).size().eq(4).all()
        first = frame[(frame["node"] == "00002") & (frame["step"] == 2)]
        np.testing.assert_array_equal(first["value"], artifact.samples[:, 0, 1])

    def test_actuals_round_trip(self, tmp_path):
        values = np.array([[1.5, 2.25], [0.1, 1e-17]])

        node_ids, loaded = read_actuals_csv(write_actuals_csv(("00001", "00002"), values, tmp_path / "actuals.csv"))

        assert node_ids == ("00001", "00002")
        np.testing.assert_array_equal(loaded, values)

    def test_random_values_bit_exact(self, tmp_path):
        """%.17g로 쓴 값은 읽을 때 마지막 비트까지 같아야 한다."""
        # Given: 십진수로 딱 떨어지지 않는 값들
        values = np.random.default_rng(3).normal(size=(5, 7)) / 3.0

        # When
        nodes = tuple(f"{i:05d}" for i in range(1, 6))
        _, loaded = read_actuals_csv(write_actuals_csv(nodes, values, tmp_path / "actuals.csv"))

        # Then
        assert loaded.tobytes() == values.tobytes()

    def test_missing_column(self, tmp_path):
        path = tmp_path / "forecast.csv"
        path.write_text("node,step,q10\n00001,1,0.5\n", encoding="utf-8")

        with pytest.raises(IoError):
            read_forecast_csv(path)


class TestTrainReport:
    def test_round_trip(self, tmp_path):
        report = TrainReport(
            epochs=[
                EpochRecord(epoch=3, train_loss=1.5, val_nd=0.4, val_nrmse=0.6),
                EpochRecord(epoch=4, train_loss=1.2, val_nd=0.3, val_nrmse=0.5),
            ],
            best_epoch=4,
            stopped_early=True,
        )

        loaded = read_train_report(write_train_report(report, tmp_path / "train_report.jsonl"))

        assert loaded == report
        assert loaded.best_val_nd == 0.3

    def test_inconsistent_best_epoch(self):
        with pytest.raises(ValueError):
            TrainReport(epochs=[EpochRecord(epoch=1, train_loss=1.0, val_nd=0.2, val_nrmse=0.2)], best_epoch=2)

    def test_unwritable_path(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("", encoding="utf-8")

        with pytest.raises(IoError):
            write_train_report(TrainReport(), blocker / "nested" / "report.jsonl")
