"""
Unit tests for evaluation metrics and the scaleup benchmark.
"""

import time
import pytest
import numpy as np
import sys
import os

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from anomaly import AnomalyRanking
from evaluation import BenchMethod, jaccard_spans, roc_auc, scaleup_bench
from synthgen import gen_cross_style
from trajectory import SubTrajectorySpan, normalize
from utils import MetricError, ParameterError, ValidationError


class TestRocAuc:
    """Test the rank-sum ROC-AUC."""

    def test_perfect_and_inverted(self):
        """Test perfect, inverted and polarity-aware rankings."""
        ranking = AnomalyRanking(("a", "b", "c", "d"), [0.9, 0.1, 0.2, 0.3], "anomaly")
        labels = {"a": 1, "b": 0, "c": 0, "d": 0}
        assert roc_auc(ranking, labels) == 1.0
        assert roc_auc(ranking.flipped(), labels) == 1.0
        similarity = AnomalyRanking(ranking.ids, ranking.scores, "similarity")
        assert roc_auc(similarity, labels) == 0.0

    def test_ties_count_half(self):
        """Test tied scores contribute one half."""
        ranking = AnomalyRanking(("a", "b"), [0.5, 0.5], "anomaly")
        assert roc_auc(ranking, [1, 0]) == 0.5

    def test_matches_sklearn(self):
        """Test agreement with scikit-learn on random scores."""
        from sklearn.metrics import roc_auc_score

        rng = np.random.default_rng(0)
        scores = rng.normal(size=50)
        labels = (rng.uniform(size=50) < 0.3).astype(int)
        ranking = AnomalyRanking(tuple(str(i) for i in range(50)), scores, "anomaly")
        assert roc_auc(ranking, labels) == pytest.approx(roc_auc_score(labels, scores))

    def test_single_class(self):
        """Test one-class labels are rejected."""
        ranking = AnomalyRanking(("a", "b"), [0.1, 0.2], "anomaly")
        with pytest.raises(MetricError):
            roc_auc(ranking, {"a": 0, "b": 0})
        with pytest.raises(MetricError):
            roc_auc(ranking, {"a": 0})


class TestJaccard:
    """Test the Jaccard index over covered points."""

    def test_values(self):
        """Test overlap, disjoint and empty cases."""
        a = [SubTrajectorySpan("q", 1, 4)]
        b = [SubTrajectorySpan("q", 3, 6)]
        assert jaccard_spans(a, b) == pytest.approx(2 / 6)
        assert jaccard_spans(a, [SubTrajectorySpan("q", 5, 6)]) == 0.0
        assert jaccard_spans([], []) == 1.0
        assert jaccard_spans(a, a) == 1.0

    def test_out_of_range(self):
        """Test spans beyond the trajectory are rejected."""
        with pytest.raises(ValidationError):
            jaccard_spans([SubTrajectorySpan("q", 1, 9)], [], length=5)


class TestScaleup:
    """Test the benchmark harness."""

    def test_mock_method_ratio(self):
        """Test a constant-time method has a ratio near 1."""
        def sleep(*args):
            time.sleep(0.01)

        method = BenchMethod("sleep", prep=sleep, detect=sleep)
        report = scaleup_bench(lambda n, seed: normalize(gen_cross_style(n, seed)), [19, 38], [method], repeats=2)
        assert len(report.timings) == 2
        assert 0.5 < report.ratios["sleep"]["prep"] < 2.0
        assert list(report.to_frame().columns) == ["method", "n", "prep", "detect"]

    def test_sizes_ascending(self):
        """Test sizes must be strictly ascending."""
        with pytest.raises(ParameterError):
            scaleup_bench(lambda n, seed: None, [100, 100], ["ik-idk2"])
        with pytest.raises(ParameterError):
            scaleup_bench(lambda n, seed: None, [100, 200], ["nothing"])

    @pytest.mark.slow
    def test_kernel_scales_linearly(self):
        """Test the embedding grows near-linearly while DTW grows quadratically."""
        report = scaleup_bench(lambda n, seed: normalize(gen_cross_style(n, seed)), [100, 1000],
                               ["ik-idk2", "dtw-lof"], repeats=1)
        assert report.ratios["ik-idk2"]["prep"] <= 30
        assert report.ratios["dtw-lof"]["prep"] >= 80
        kernel = next(r for r in report.timings if r["method"] == "ik-idk2" and r["n"] == 1000)
        dtw = next(r for r in report.timings if r["method"] == "dtw-lof" and r["n"] == 1000)
        assert dtw["prep"] >= 50 * kernel["prep"]


if __name__ == "__main__":
    pytest.main([__file__])
