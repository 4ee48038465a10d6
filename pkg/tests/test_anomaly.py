"""
Unit tests for anomalous trajectory detection.
Tests cover rankings, the idk2/gdk/LOF detectors and parameter search.
"""

import pytest
import numpy as np
import sys
import os

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from anomaly import (
    AnomalyRanking,
    DetectorParams,
    auto_search,
    default_psi2,
    detect,
    distance_lof,
    fit_detector,
    fit_pipeline,
    idk_point_scores,
    lof_scores,
    read_score_file,
    search_grid
)
import isolation_kernel
from embedding import SchemeParams, embed_trajectories
from evaluation import roc_auc
from synthgen import gen_dense_sparse, gen_separable_singleton
from trajectory import LabeledDataset, Trajectory, normalize
from utils import ConfigurationError, ParameterError, ValidationError


@pytest.fixture
def singleton():
    return normalize(gen_separable_singleton(20, seed=0, separation=5.0))


class TestAnomalyRanking:
    """Test ranking order, polarity and files."""

    def test_similarity_order(self):
        """Test low similarity ranks first and ties keep input order."""
        ranking = AnomalyRanking(("a", "b", "c", "d"), [0.5, 0.1, 0.5, 0.9], "similarity")
        assert ranking.ranked_ids == ["b", "a", "c", "d"]
        assert ranking.flipped().ranked_ids == ["b", "a", "c", "d"]

    def test_anomaly_order(self):
        """Test high anomaly scores rank first."""
        ranking = AnomalyRanking(("a", "b"), [1.0, 3.0], "anomaly")
        assert ranking.ranked_ids == ["b", "a"]
        assert ranking.score_of("a") == 1.0

    def test_validation(self):
        """Test bad polarity and duplicate ids are rejected."""
        with pytest.raises(ValidationError):
            AnomalyRanking(("a",), [1.0], "weird")
        with pytest.raises(ValidationError):
            AnomalyRanking(("a", "a"), [1.0, 2.0], "anomaly")

    def test_csv_round_trip(self, tmp_path):
        """Test the polarity travels in the header line."""
        ranking = AnomalyRanking(("a", "b", "c"), [0.2, 0.9, 0.4], "similarity")
        path = str(tmp_path / "r.csv")
        ranking.to_csv(path, {"psi": 16})
        again = read_score_file(path)
        assert again.polarity == "similarity"
        assert again.ranked_ids == ranking.ranked_ids
        assert roc_auc(again, {"a": 1, "b": 0, "c": 0}) == 1.0

    def test_external_scores_default_anomaly(self, tmp_path):
        """Test a plain score file defaults to anomaly polarity."""
        path = tmp_path / "s.csv"
        path.write_text("id,score\nx,1.0\ny,5.0\n")
        assert read_score_file(str(path)).ranked_ids == ["y", "x"]
        assert read_score_file(str(path), "similarity").ranked_ids == ["x", "y"]


class TestIdk2:
    """Test the isolation-based detector."""

    def test_default_psi2(self):
        """Test the level-2 sample size default."""
        assert default_psi2(16, 103) == 16
        assert default_psi2(512, 103) == 32
        assert default_psi2(16, 3) == 2

    def test_singleton_ranked_first(self, singleton):
        """Test the separated trajectory ranks most anomalous."""
        ranking = detect(singleton, SchemeParams(psi=16, t=100, seed=0), DetectorParams("idk2"), workers=1)
        assert ranking.polarity == "similarity"
        assert ranking.ranked_ids[0] == "19"
        assert roc_auc(ranking, singleton.labels) == 1.0

    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_singleton_default_parameters(self, seed):
        """Test every default detector ranks the separated trajectory first."""
        data = normalize(gen_separable_singleton(20, seed=seed))
        for level1, detector in ((SchemeParams(seed=seed), "idk2"),
                                 (SchemeParams(scheme="nystrom", seed=seed), "gdk"),
                                 (SchemeParams(seed=seed), "lof")):
            ranking = detect(data, level1, DetectorParams(detector, k=5), workers=1)
            assert ranking.ranked_ids[0] == "19", detector

    def test_level2_cells(self, singleton):
        """Test idk2 records its level-2 cells and rejects unknown ones."""
        _, embedded = embed_trajectories(singleton, SchemeParams(psi=16, t=20))
        model = fit_detector(embedded, DetectorParams("idk2"), SchemeParams(psi=16, t=20))
        assert model.params["cells2"] == "ball"
        assert model.level2.cells == "ball"
        with pytest.raises(ParameterError):
            DetectorParams("idk2", cells2="square")

    def test_isolated_embedding_scores_lowest(self):
        """Test a far mean map is isolated by level-2 balls and scores below every cluster member."""
        rng = np.random.default_rng(3)
        matrix = np.vstack([rng.uniform(0.0, 0.1, size=(60, 2)), [[1.0, 1.0]]])
        level2 = isolation_kernel.fit_on_reference(matrix, 16, 200, seed=1, cells="ball")
        cells = isolation_kernel.reference_cell_assignments(level2, matrix)
        anchored = (level2.index == 60).any(axis=1)
        # the far row only ever sits in a cell when it is an anchor itself
        assert np.all((cells[60] != isolation_kernel.UNCOVERED) == anchored)
        scores = idk_point_scores(level2, matrix)
        assert np.argmin(scores) == 60

    def test_psi2_too_large(self, singleton):
        """Test psi2 above the trajectory count is rejected."""
        with pytest.raises(ParameterError):
            detect(singleton, SchemeParams(psi=16, t=20), DetectorParams("idk2", psi2=64))

    def test_too_few_trajectories(self):
        """Test detection needs two trajectories."""
        data = LabeledDataset((Trajectory("a", [[0.0, 0.0], [1.0, 1.0]]),))
        with pytest.raises(ValidationError):
            detect(data, SchemeParams(psi=2, t=5))

    def test_translation_monotone(self):
        """Test the anomaly's score does not increase as it moves farther from the data."""
        raw = gen_separable_singleton(20, seed=0, separation=5.0)
        pipeline = fit_pipeline(raw, SchemeParams(psi=16, t=100, seed=0), DetectorParams("idk2"), workers=1)
        base = raw.get("19")
        moved = [Trajectory(f"m{m}", base.points + np.array([0.0, m])) for m in (0.0, 1.0, 2.0, 4.0, 8.0)]
        scores = pipeline.score_trajectories(moved)
        assert np.all(np.diff(scores) <= 1e-12)
        assert scores[0] == pytest.approx(pipeline.ranking.score_of("19"))
        normal = [pipeline.ranking.score_of(str(k)) for k in range(19)]
        assert scores.max() < min(normal)

    def test_point_scores(self):
        """Test an isolated point scores lowest under ball cells."""
        rng = np.random.default_rng(0)
        points = np.vstack([rng.normal(0.0, 0.05, size=(100, 2)), [[3.0, 3.0]]])
        model = isolation_kernel.fit(points, 16, 100, seed=0, cells="ball")
        scores = idk_point_scores(model, points)
        assert np.argmin(scores) == 100


class TestGdkAndLof:
    """Test the Gaussian detector and LOF."""

    def test_gdk_runs(self, singleton):
        """Test gdk ranks the separated trajectory first."""
        level1 = SchemeParams(scheme="nystrom", n_components=50, sigma=0.25, seed=0)
        ranking = detect(singleton, level1, DetectorParams("gdk"), workers=1)
        assert ranking.ranked_ids[0] == "19"

    def test_lof_outlier(self):
        """Test LOF flags a point away from a regular cluster."""
        values = np.array([0.0, 0.1, 0.2, 0.3, 0.4, 5.0])
        dist = np.abs(values[:, None] - values[None, :])
        ranking = lof_scores(dist, k=2)
        assert ranking.polarity == "anomaly"
        assert ranking.ranked_ids[0] == "5"

    def test_lof_matches_sklearn(self):
        """Test agreement with scikit-learn on tie-free data."""
        from scipy.spatial.distance import cdist
        from sklearn.neighbors import LocalOutlierFactor

        points = np.random.default_rng(1).normal(size=(40, 2))
        dist = cdist(points, points)
        reference = LocalOutlierFactor(n_neighbors=5, metric="precomputed").fit(dist)
        assert np.allclose(lof_scores(dist, k=5).scores, -reference.negative_outlier_factor_, rtol=1e-6)

    def test_lof_duplicates_finite(self):
        """Test identical items give finite scores of 1."""
        ranking = lof_scores(np.zeros((4, 4)), k=2)
        assert np.all(np.isfinite(ranking.scores))
        assert np.allclose(ranking.scores, 1.0)

    def test_lof_k_range(self):
        """Test k must lie in [1, n - 1]."""
        with pytest.raises(ParameterError):
            lof_scores(np.zeros((3, 3)), k=3)

    def test_lof_over_embeddings(self, singleton):
        """Test LOF on mean maps and on DTW distances."""
        ranking = detect(singleton, SchemeParams(psi=16, t=50), DetectorParams("lof", k=5), workers=1)
        assert ranking.ranked_ids[0] == "19"
        assert distance_lof(singleton, "dtw", k=5, workers=1).ranked_ids[0] == "19"

    def test_lof_cannot_score_new(self, singleton):
        """Test LOF refuses to score trajectories outside its fitting set."""
        _, embedded = embed_trajectories(singleton, SchemeParams(psi=8, t=10))
        model = fit_detector(embedded, DetectorParams("lof", k=3))
        with pytest.raises(ConfigurationError):
            model.score(embedded.matrix)


class TestSearch:
    """Test the parameter search."""

    def test_grid(self):
        """Test the grids respect the data size."""
        assert search_grid("idk2", 20, 10) == [{"psi": 2}, {"psi": 4}, {"psi": 8}]
        assert len(search_grid("gdk", 20, 100)) == 16
        ks = [row["k"] for row in search_grid("lof", 20, 100)]
        assert ks[0] == 1 and max(ks) <= 19

    def test_needs_labels(self):
        """Test search without labels is a configuration error."""
        data = LabeledDataset(gen_separable_singleton(5).trajectories)
        with pytest.raises(ConfigurationError):
            auto_search(data, "idk2")

    def test_best_configuration(self, singleton):
        """Test the search returns the best AUC and the first configuration on ties."""
        grid = [{"psi": 4}, {"psi": 8}]
        result = auto_search(singleton, "idk2", SchemeParams(t=50), grid=grid, workers=1)
        assert result.best_auc == max(row["auc"] for row in result.table)
        first_best = next(row for row in result.table if row["auc"] == result.best_auc)
        assert result.best_params == {"psi": first_best["psi"]}
        assert len(result.ranking) == len(singleton)


@pytest.mark.slow
class TestDenseSparse:
    """Test idk2 against gdk on the dense/sparse family dataset with default parameters."""

    def test_idk2_beats_gdk(self):
        """Test idk2 separates all three anomalies in most seeds while gdk does worse."""
        idk_aucs, gdk_aucs, gdk_tops = [], [], []
        for seed in range(10):
            data = normalize(gen_dense_sparse(seed=seed))
            idk = detect(data, SchemeParams(seed=seed), DetectorParams("idk2"), workers=1)
            idk_aucs.append(roc_auc(idk, data.labels))
            gdk = detect(data, SchemeParams(scheme="nystrom", seed=seed), DetectorParams("gdk"), workers=1)
            gdk_aucs.append(roc_auc(gdk, data.labels))
            gdk_tops.append(set(gdk.ranked_ids[:3]))
        assert sum(auc == 1.0 for auc in idk_aucs) >= 8
        assert sum(g < i for g, i in zip(gdk_aucs, idk_aucs)) >= 8
        # the straight line inside the dense family looks normal to a density estimate
        assert sum("40" in top for top in gdk_tops) <= 2


if __name__ == "__main__":
    pytest.main([__file__])
