"""
평가 지표 테스트
"""

import numpy as np
import pytest

from arm3dnet.core.exceptions import ShapeMismatchError, ZeroDenominatorError
from arm3dnet.models.forecast import ForecastArtifact
from arm3dnet.models.panel import TimeSeriesPanel
from arm3dnet.services.metrics import build_report, format_table, nd, nrmse, persistence_baseline, uncertainty_growth

ACTUAL = np.array([[1.0, 2.0, 3.0]])
PREDICTED = np.array([[2.0, 2.0, 2.0]])


class TestNrmseNd:
    def test_reference_pair(self):
        assert nrmse(ACTUAL, PREDICTED) == pytest.approx(np.sqrt(2.0 / 3.0) / 2.0, abs=1e-12)
        assert nd(ACTUAL, PREDICTED) == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_identical_is_zero(self):
        assert nrmse(ACTUAL, ACTUAL) == 0.0
        assert nd(ACTUAL, ACTUAL) == 0.0

    def test_zero_prediction_nd_is_one(self):
        assert nd(ACTUAL, np.zeros_like(ACTUAL)) == pytest.approx(1.0, abs=1e-15)

    def test_scale_invariant(self):
        rng = np.random.default_rng(0)
        actual, predicted = rng.normal(size=(2, 4, 5))

        for c in (0.01, 3.0, 1e4):
            assert nd(c * actual, c * predicted) == pytest.approx(nd(actual, predicted), rel=1e-12)
            assert nrmse(c * actual, c * predicted) == pytest.approx(nrmse(actual, predicted), rel=1e-12)

    def test_pooled_over_nodes(self):
        """노드별 평균이 아니라 모든 칸을 합쳐 계산한다."""
        # Given: 오차는 첫 노드에만 있다
        actual = np.array([[1.0, 1.0], [10.0, 10.0]])
        predicted = np.array([[2.0, 2.0], [10.0, 10.0]])

        # Then: 노드 평균이면 0.5, 합치면 2/22
        assert nd(actual, predicted) == pytest.approx(2.0 / 22.0, abs=1e-15)

    def test_zero_denominator(self):
        with pytest.raises(ZeroDenominatorError) as excinfo:
            nd(np.zeros((2, 2)), np.ones((2, 2)))

        assert excinfo.value.exit_code == 3

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            nrmse(ACTUAL, np.ones((1, 2)))


class TestPersistenceBaseline:
    def test_repeats_last_observation(self):
        # Given: 조건 구간 끝 값이 10인 한 노드 패널
        panel = TimeSeriesPanel(
            node_ids=("00001",),
            targets=np.array([[10.0, 11.0, 12.0]]),
            covariates=np.zeros((3, 1, 1)),
            t0=2,
        )

        # When
        predicted = persistence_baseline(panel)

        # Then
        np.testing.assert_array_equal(predicted, [[10.0, 10.0]])
        assert nd(panel.prediction_targets, predicted) == pytest.approx(3.0 / 23.0, abs=1e-12)


class TestReports:
    def test_uncertainty_growth(self):
        """스텝별 q90 - q10 폭의 노드 평균을 돌려준다."""
        # Given: 두 표본이 스텝마다 ±1, ±2, ±3으로 벌어진다
        samples = np.stack([np.tile([[-1.0, -2.0, -3.0]], (2, 1)), np.tile([[1.0, 2.0, 3.0]], (2, 1))])
        artifact = ForecastArtifact.from_samples(("a", "b"), samples, np.zeros_like(samples))

        # Then
        np.testing.assert_allclose(uncertainty_growth(artifact), [1.6, 3.2, 4.8], atol=1e-12)

    def test_build_report(self):
        report = build_report("persistence", ACTUAL, PREDICTED)

        assert report.model == "persistence"
        assert (report.n_series, report.horizon) == (1, 3)
        assert report.nd == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_format_table_rows(self):
        table = format_table([build_report("arm3dnet", ACTUAL, ACTUAL), build_report("persistence", ACTUAL, PREDICTED)])

        lines = table.splitlines()
        assert lines[0].split() == ["model", "nrmse", "nd", "n_series", "horizon"]
        assert lines[1].split()[:3] == ["arm3dnet", "0.0000", "0.0000"]
        assert lines[2].split()[2] == "0.3333"
