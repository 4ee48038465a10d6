"""
Maximal anomalous sub-trajectories of a query trajectory against a set of
normal trajectories.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

import isolation_kernel
from config import KERNEL_CONFIG, SUBTRAJ_CONFIG
from embedding import KernelModel, embed_dataset, mean_of_maps, point_features
from trajectory import LabeledDataset, SubTrajectorySpan, Trajectory, concat_points, maximal_runs
from utils import ParameterError, ValidationError, write_csv_with_header

logger = logging.getLogger(__name__)


@dataclass
class SubTrajReport:
    """Spans of the query whose points all score <= tau, with the per-point scores."""

    query_id: str
    spans: List[SubTrajectorySpan]
    beta: np.ndarray
    tau: float
    min_len: int
    params: Dict[str, Any] = field(default_factory=dict)

    def anomalous_mask(self) -> np.ndarray:
        mask = np.zeros(len(self.beta), dtype=bool)
        for span in self.spans:
            mask[span.indices()] = True
        return mask

    def to_dict(self) -> Dict[str, Any]:
        return {
            "query_id": self.query_id,
            "spans": [span.to_dict() for span in self.spans],
            "beta": [float(b) for b in self.beta],
            "tau": self.tau,
            "min_len": self.min_len,
        }

    def plot_frame(self, query: Trajectory) -> pd.DataFrame:
        """Per-point rows (index, x, y, ..., beta, anomalous) for downstream rendering."""
        names = ["x", "y"] + [f"x{j + 1}" for j in range(2, query.dim)]
        frame = pd.DataFrame(query.points, columns=names[:query.dim])
        frame.insert(0, "index", np.arange(1, len(query) + 1))
        frame["beta"] = self.beta
        frame["anomalous"] = self.anomalous_mask().astype(int)
        return frame

    def to_plot_csv(self, query: Trajectory, path: str, header: Optional[dict] = None) -> None:
        write_csv_with_header(self.plot_frame(query), path, header)


def score_points(model: KernelModel, normal: LabeledDataset, Q: Trajectory) -> np.ndarray:
    """beta_x = <phi(x), mean of the normal trajectories' mean maps> for every point of Q."""
    if len(normal) == 0:
        raise ValidationError("no normal trajectories to score against")
    center = mean_of_maps(embed_dataset(model, normal, workers=1))
    return np.asarray(point_features(model, Q.points) @ center.values).ravel()


def extract_maximal(scores: Sequence[float], tau: float = SUBTRAJ_CONFIG["tau"],
                    min_len: int = SUBTRAJ_CONFIG["min_len"], trajectory_id: str = "") -> List[SubTrajectorySpan]:
    """Maximal runs of consecutive points with score <= tau, at least min_len long."""
    return maximal_runs(np.asarray(scores, dtype=np.float64) <= tau, min_len, trajectory_id)


def detect_subtraj(D: LabeledDataset, Q: Trajectory, psi: int = KERNEL_CONFIG["psi"], t: int = KERNEL_CONFIG["t"],
                   tau: float = SUBTRAJ_CONFIG["tau"], min_len: int = SUBTRAJ_CONFIG["min_len"],
                   seed: int = KERNEL_CONFIG["seed"], cells: str = SUBTRAJ_CONFIG["cells"]) -> SubTrajReport:
    """
    Fit the isolation partitionings on the normal points, score Q's points and
    extract the maximal low-scoring runs.

    Labeled anomalies and Q itself are left out of the normal set.
    """
    normal = D.normal_subset()
    if Q.id in normal.ids:
        normal = normal.subset([i for i in normal.ids if i != Q.id])
    if len(normal) == 0:
        raise ValidationError("no normal trajectories to score against")
    if normal.dim != Q.dim:
        raise ValidationError(f"query dimensionality {Q.dim} does not match data dimensionality {normal.dim}")

    model = isolation_kernel.fit(concat_points(normal), psi, t, seed, cells)
    beta = score_points(model, normal, Q)
    spans = extract_maximal(beta, tau, min_len, Q.id)
    logger.info(f"Query {Q.id}: {len(spans)} anomalous sub-trajectories at tau={tau}")
    params = {"psi": psi, "t": t, "tau": tau, "min_len": min_len, "seed": seed, "cells": cells}
    return SubTrajReport(Q.id, spans, beta, tau, min_len, params)


def ground_truth_labeler(D: LabeledDataset, Q: Trajectory, radius: float = SUBTRAJ_CONFIG["radius"],
                         min_len: int = SUBTRAJ_CONFIG["min_len"]) -> List[SubTrajectorySpan]:
    """Runs of Q's points with no normal point within radius."""
    if radius <= 0:
        raise ParameterError(f"radius must be > 0, got {radius}")
    normal = D.normal_subset()
    if Q.id in normal.ids:
        normal = normal.subset([i for i in normal.ids if i != Q.id])
    if len(normal) == 0:
        return maximal_runs(np.ones(len(Q), dtype=bool), min_len, Q.id)
    nearest, _ = cKDTree(concat_points(normal)).query(Q.points, k=1)
    return maximal_runs(nearest > radius, min_len, Q.id)
