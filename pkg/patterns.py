"""
Frequent sub-trajectory pattern mining over a clustered dataset.

Each cluster is summarised by the member closest to the cluster's mean map;
runs of its points that score above gamma against the mean of all cluster
means are the patterns.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

import isolation_kernel
from config import KERNEL_CONFIG, MINING_CONFIG
from embedding import EmbeddedDataset, embed_dataset, mean_of_maps, point_features
from isolation_kernel import Embedding
from trajectory import LabeledDataset, SubTrajectorySpan, Trajectory, concat_points, maximal_runs
from utils import ConfigurationError, ValidationError, parallel_map

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Pattern:
    cluster: int
    representative_id: str
    span: SubTrajectorySpan
    length: float


@dataclass
class PatternSet:
    """Mined patterns plus the per-cluster representative scores they were cut from."""

    patterns: List[Pattern]
    gamma: float
    representatives: Dict[int, str] = field(default_factory=dict)
    theta: Dict[int, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.patterns)

    def for_cluster(self, cluster: int) -> List[Pattern]:
        return [p for p in self.patterns if p.cluster == cluster]

    def summary(self) -> Tuple[int, float, float]:
        """(#FP, min length, max length)."""
        if not self.patterns:
            return 0, 0.0, 0.0
        lengths = [p.length for p in self.patterns]
        return len(self.patterns), float(min(lengths)), float(max(lengths))

    def to_dict(self) -> Dict[str, Any]:
        count, shortest, longest = self.summary()
        clusters = []
        for cluster, rep in self.representatives.items():
            found = self.for_cluster(cluster)
            clusters.append({
                "cluster": cluster,
                "representative_id": rep,
                "spans": [p.span.to_dict() for p in found],
                "lengths": [p.length for p in found],
            })
        return {
            "gamma": self.gamma,
            "clusters": clusters,
            "summary": {"fp": count, "min_length": shortest, "max_length": longest},
        }


def cluster_means(embedded: EmbeddedDataset, clusters: Mapping[str, int],
                  k: Optional[int] = None) -> Dict[int, Embedding]:
    """Mean of the member mean maps of every cluster, by ascending cluster index."""
    members: Dict[int, List[int]] = {}
    for row, traj_id in enumerate(embedded.ids):
        if traj_id not in clusters:
            raise ValidationError(f"trajectory {traj_id!r} has no cluster")
        members.setdefault(int(clusters[traj_id]), []).append(row)
    if k is not None:
        empty = [c for c in range(1, k + 1) if c not in members]
        if empty:
            raise ValidationError(f"cluster {empty[0]} has no members")
    return {
        c: Embedding(embedded.matrix[rows].mean(axis=0), embedded.scheme)
        for c, rows in sorted(members.items())
    }


def id_order(trajectory_id: str) -> Tuple[int, Union[int, str]]:
    """Sort key: integer ids numerically, ahead of any other ids in string order."""
    text = str(trajectory_id)
    numeric = text[1:] if text.startswith("-") else text
    return (0, int(text)) if numeric.isdigit() else (1, text)


def representative(members: EmbeddedDataset, center: Embedding) -> str:
    """Member with the largest dot product with center; the lowest id wins ties."""
    if len(members) == 0:
        raise ValidationError("cannot pick a representative of an empty cluster")
    scores = members.matrix @ center.values
    best = np.flatnonzero(scores == scores.max())
    return min((members.ids[k] for k in best), key=id_order)


def pattern_length(trajectory: Trajectory, span: SubTrajectorySpan) -> float:
    """Sum of Euclidean distances between consecutive points of the span."""
    span.check(len(trajectory))
    piece = trajectory.points[span.start - 1:span.end]
    return float(np.linalg.norm(np.diff(piece, axis=0), axis=1).sum())


def mine_patterns(D: LabeledDataset, psi: int = KERNEL_CONFIG["psi"], t: int = KERNEL_CONFIG["t"],
                  gamma: float = MINING_CONFIG["gamma"], min_len: int = MINING_CONFIG["min_len"],
                  seed: int = KERNEL_CONFIG["seed"], cells: str = KERNEL_CONFIG["cells"],
                  workers: Optional[int] = None) -> PatternSet:
    """Runs of theta_x > gamma on every cluster representative, at least min_len points long."""
    if D.clusters is None:
        raise ConfigurationError("pattern mining needs cluster assignments")
    model = isolation_kernel.fit(concat_points(D), psi, t, seed, cells)
    embedded = embed_dataset(model, D, workers)
    means = cluster_means(embedded, D.clusters)
    overall = mean_of_maps(list(means.values()))

    def mine_cluster(item):
        cluster, center = item
        member_ids = [i for i in D.ids if D.clusters[i] == cluster]
        rep_id = representative(embedded.subset(member_ids), center)
        rep = D.get(rep_id)
        theta = np.asarray(point_features(model, rep.points) @ overall.values).ravel()
        spans = maximal_runs(theta > gamma, min_len, rep_id)
        return cluster, rep_id, theta, [Pattern(cluster, rep_id, s, pattern_length(rep, s)) for s in spans]

    results = parallel_map(mine_cluster, list(means.items()), workers)
    patterns = [p for _, _, _, found in results for p in found]
    result = PatternSet(
        patterns=patterns,
        gamma=gamma,
        representatives={c: rep for c, rep, _, _ in results},
        theta={c: theta for c, _, theta, _ in results},
    )
    logger.info(f"Mined {len(patterns)} patterns from {len(means)} clusters at gamma={gamma}")
    return result
