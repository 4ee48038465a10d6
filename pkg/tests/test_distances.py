"""
Unit tests for the baseline trajectory distances.
"""

import pytest
import numpy as np
import sys
import os

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from distances import DistanceMatrix, dtw, frechet_discrete, hausdorff, pairwise_matrix
from synthgen import gen_cross_style
from trajectory import Trajectory
from utils import ParameterError, ValidationError


class TestDistances:
    """Test DTW, Hausdorff and discrete Frechet on small cases."""

    def test_identical(self):
        """Test every measure is zero on identical trajectories."""
        a = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 1.0]])
        for func in (dtw, hausdorff, frechet_discrete):
            assert func(a, a) == 0.0

    def test_dtw_known_value(self):
        """Test DTW against a hand-computed alignment."""
        a = np.array([[0.0], [1.0], [2.0]])
        b = np.array([[0.0], [2.0]])
        # path (1,1) (2,1) (3,2)
        assert dtw(a, b) == pytest.approx(1.0)

    def test_hausdorff_known_value(self):
        """Test the symmetric Hausdorff distance."""
        a = np.array([[0.0, 0.0], [1.0, 0.0]])
        b = np.array([[0.0, 0.0], [0.0, 3.0]])
        assert hausdorff(a, b) == pytest.approx(3.0)

    def test_frechet_known_value(self):
        """Test the discrete Frechet distance of parallel segments."""
        a = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        b = a + np.array([0.0, 0.5])
        assert frechet_discrete(a, b) == pytest.approx(0.5)

    def test_ordering_between_measures(self):
        """Test Hausdorff <= discrete Frechet <= DTW on random trajectories."""
        rng = np.random.default_rng(0)
        for _ in range(10):
            a = rng.uniform(size=(rng.integers(2, 8), 2))
            b = rng.uniform(size=(rng.integers(2, 8), 2))
            assert hausdorff(a, b) <= frechet_discrete(a, b) + 1e-12
            assert frechet_discrete(a, b) <= dtw(a, b) + 1e-12

    def test_trajectory_inputs(self):
        """Test Trajectory objects are accepted."""
        a = Trajectory("a", [[0.0, 0.0], [1.0, 0.0]])
        b = Trajectory("b", [[0.0, 1.0], [1.0, 1.0]])
        assert dtw(a, b) == pytest.approx(2.0)

    def test_invalid_inputs(self):
        """Test empty inputs and dimension mismatches are rejected."""
        with pytest.raises(ValidationError):
            dtw(np.empty((0, 2)), np.zeros((1, 2)))
        with pytest.raises(ValidationError):
            hausdorff(np.zeros((2, 2)), np.zeros((2, 3)))


def _warping_paths(m, n):
    """Every monotone path from (0, 0) to (m - 1, n - 1) with right, down and diagonal moves."""
    if m == 1 and n == 1:
        return [[(0, 0)]]
    paths = []
    for di, dj in ((1, 0), (0, 1), (1, 1)):
        if m - di >= 1 and n - dj >= 1:
            paths.extend(path + [(m - 1, n - 1)] for path in _warping_paths(m - di, n - dj))
    return paths


class TestExhaustiveOracles:
    """Test the dynamic programs against enumeration of every warping path."""

    def test_random_instances(self):
        """Test DTW, discrete Frechet and Hausdorff on 50 random pairs of up to 6 points."""
        rng = np.random.default_rng(11)
        for _ in range(50):
            a = rng.uniform(-1.0, 1.0, size=(rng.integers(1, 7), 2))
            b = rng.uniform(-1.0, 1.0, size=(rng.integers(1, 7), 2))
            cost = [[float(np.linalg.norm(p - q)) for q in b] for p in a]
            sums, peaks = [], []
            for path in _warping_paths(len(a), len(b)):
                total = 0.0
                for i, j in path:
                    total += cost[i][j]
                sums.append(total)
                peaks.append(max(cost[i][j] for i, j in path))
            assert dtw(a, b) == pytest.approx(min(sums), abs=1e-12)
            assert frechet_discrete(a, b) == pytest.approx(min(peaks), abs=1e-12)
            directed_ab = max(min(row) for row in cost)
            directed_ba = max(min(cost[i][j] for i in range(len(a))) for j in range(len(b)))
            assert hausdorff(a, b) == pytest.approx(max(directed_ab, directed_ba), abs=1e-12)

    def test_path_count(self):
        """Test the enumeration yields the Delannoy number of paths."""
        assert len(_warping_paths(3, 3)) == 13
        assert len(_warping_paths(1, 6)) == 1


class TestDistanceMatrix:
    """Test pairwise matrices."""

    def test_symmetric_zero_diagonal(self):
        """Test the matrix is symmetric with a zero diagonal and matches direct calls."""
        data = gen_cross_style(20, seed=0)
        matrix = pairwise_matrix(data, "hausdorff", workers=1)
        assert np.allclose(matrix.values, matrix.values.T)
        assert np.all(np.diag(matrix.values) == 0.0)
        a, b = data.trajectories[2], data.trajectories[7]
        assert matrix.values[2, 7] == pytest.approx(hausdorff(a, b))

    def test_workers_do_not_change_result(self):
        """Test the matrix is identical with several workers."""
        data = gen_cross_style(20, seed=0)
        one = pairwise_matrix(data, "dtw", workers=1)
        many = pairwise_matrix(data, "dtw", workers=2)
        assert np.array_equal(one.values, many.values)

    def test_unknown_measure(self):
        """Test an unknown measure is rejected."""
        with pytest.raises(ParameterError):
            pairwise_matrix(gen_cross_style(19, seed=0), "manhattan")

    def test_csv(self, tmp_path):
        """Test the matrix reads back from its CSV."""
        matrix = pairwise_matrix(gen_cross_style(19, seed=0), "frechet", workers=1)
        path = str(tmp_path / "d.csv")
        matrix.to_csv(path, {"measure": "frechet"})
        again = DistanceMatrix.from_csv(path)
        assert again.ids == matrix.ids
        assert again.measure == "frechet"
        assert np.allclose(again.values, matrix.values)


if __name__ == "__main__":
    pytest.main([__file__])
