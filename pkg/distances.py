"""
Point-to-point baseline distances between trajectories: DTW, Hausdorff and
discrete Frechet, plus pairwise distance matrices.
"""

import logging
from dataclasses import dataclass
from functools import partial
from typing import Callable, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist

from trajectory import LabeledDataset, Trajectory
from utils import ParameterError, ValidationError, parallel_map, read_csv_with_header, write_csv_with_header

logger = logging.getLogger(__name__)

TrajectoryLike = Union[Trajectory, np.ndarray]


def _cost(X: TrajectoryLike, Y: TrajectoryLike) -> np.ndarray:
    a = X.points if isinstance(X, Trajectory) else np.atleast_2d(np.asarray(X, dtype=np.float64))
    b = Y.points if isinstance(Y, Trajectory) else np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if a.shape[0] == 0 or b.shape[0] == 0 or a.size == 0 or b.size == 0:
        raise ValidationError("distance between empty trajectories is undefined")
    if a.shape[1] != b.shape[1]:
        raise ValidationError(f"dimensionality mismatch: {a.shape[1]} vs {b.shape[1]}")
    return cdist(a, b)


def dtw(X: TrajectoryLike, Y: TrajectoryLike) -> float:
    """
    Dynamic time warping with Euclidean ground cost

    Moves are right, down and diagonal; returns the accumulated cost of the
    cheapest warping path from (1, 1) to (m, n).
    """
    cost = _cost(X, Y).tolist()
    m, n = len(cost), len(cost[0])
    inf = float("inf")
    previous = [inf] * (n + 1)
    previous[0] = 0.0
    for i in range(m):
        row = cost[i]
        current = [inf] * (n + 1)
        for j in range(n):
            current[j + 1] = row[j] + min(previous[j + 1], current[j], previous[j])
        previous = current
        previous[0] = inf
    return previous[n]


def hausdorff(X: TrajectoryLike, Y: TrajectoryLike) -> float:
    """Symmetric Hausdorff distance between the point sets of X and Y."""
    cost = _cost(X, Y)
    return float(max(cost.min(axis=1).max(), cost.min(axis=0).max()))


def frechet_discrete(X: TrajectoryLike, Y: TrajectoryLike) -> float:
    """Discrete Frechet (coupling) distance."""
    cost = _cost(X, Y).tolist()
    m, n = len(cost), len(cost[0])
    inf = float("inf")
    previous = [inf] * (n + 1)
    previous[0] = 0.0
    for i in range(m):
        row = cost[i]
        current = [inf] * (n + 1)
        for j in range(n):
            current[j + 1] = max(row[j], min(previous[j + 1], current[j], previous[j]))
        previous = current
        previous[0] = inf
    return previous[n]


MEASURES: Dict[str, Callable[[TrajectoryLike, TrajectoryLike], float]] = {
    "dtw": dtw,
    "hausdorff": hausdorff,
    "frechet": frechet_discrete,
}


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Symmetric n x n matrix of one baseline distance, zero on the diagonal."""

    ids: tuple
    values: np.ndarray
    measure: str

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.shape != (len(self.ids), len(self.ids)):
            raise ValidationError(f"{len(self.ids)} ids for a distance matrix of shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.ids)

    def to_csv(self, path: str, header: Optional[dict] = None) -> None:
        frame = pd.DataFrame(self.values, columns=list(self.ids))
        frame.insert(0, "id", list(self.ids))
        write_csv_with_header(frame, path, header)

    @classmethod
    def from_csv(cls, path: str, measure: str = "") -> "DistanceMatrix":
        frame, header = read_csv_with_header(path, dtype={"id": str})
        if "id" not in frame.columns:
            raise ValidationError("distance matrix CSV needs an 'id' column")
        ids = tuple(frame["id"].astype(str))
        values = frame.drop(columns="id").to_numpy(dtype=np.float64)
        measure = measure or (header or {}).get("measure", "")
        return cls(ids, values, measure)


def _row_distances(i: int, points: List[np.ndarray], func: Callable) -> List[float]:
    return [func(points[i], points[j]) for j in range(i + 1, len(points))]


def pairwise_matrix(dataset: LabeledDataset, measure: str = "dtw", workers: Optional[int] = None) -> DistanceMatrix:
    """Upper triangle computed row by row, then mirrored."""
    if measure not in MEASURES:
        raise ParameterError(f"measure must be one of {sorted(MEASURES)}, got {measure!r}")
    points = [traj.points for traj in dataset.trajectories]
    n = len(points)
    rows = parallel_map(partial(_row_distances, points=points, func=MEASURES[measure]), range(n), workers)
    values = np.zeros((n, n))
    for i, row in enumerate(rows):
        values[i, i + 1:] = row
    values = values + values.T
    logger.debug(f"Computed {n * (n - 1) // 2} {measure} distances")
    return DistanceMatrix(tuple(dataset.ids), values, measure)
