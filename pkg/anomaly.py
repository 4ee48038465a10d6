"""
Anomalous trajectory detection over kernel mean maps.

Every trajectory is embedded as one point of the feature space (level 1) and a
detector is fitted on that set: the isolation score of a second isolation
model (idk2), the same with a second Nystrom map (gdk), or LOF.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist

import isolation_kernel
import nystrom
from config import DETECTOR_CONFIG, SEARCH_GRIDS
from distances import DistanceMatrix, pairwise_matrix
from embedding import (
    EmbeddedDataset,
    KernelModel,
    SchemeParams,
    embed_dataset,
    fit_scheme,
    point_features,
)
from evaluation import roc_auc
from trajectory import LabeledDataset, Trajectory, concat_points
from utils import (
    ConfigurationError,
    FormatError,
    ParameterError,
    ValidationError,
    parallel_map,
    read_csv_with_header,
    write_csv_with_header,
)

logger = logging.getLogger(__name__)

POLARITIES = ("similarity", "anomaly")
DETECTORS = tuple(DETECTOR_CONFIG["detectors"])


@dataclass(frozen=True, eq=False)
class AnomalyRanking:
    """
    One score per trajectory with its polarity

    similarity: low scores are anomalous; anomaly: high scores are anomalous.
    order lists positions most anomalous first, ties kept in input order.
    """

    ids: tuple
    scores: np.ndarray
    polarity: str

    def __post_init__(self):
        if self.polarity not in POLARITIES:
            raise ValidationError(f"polarity must be one of {POLARITIES}, got {self.polarity!r}")
        ids = tuple(str(i) for i in self.ids)
        scores = np.array(self.scores, dtype=np.float64, copy=True).ravel()
        if scores.shape[0] != len(ids):
            raise ValidationError(f"{len(ids)} ids for {scores.shape[0]} scores")
        if len(set(ids)) != len(ids):
            raise ValidationError("ranking ids must be unique")
        scores.setflags(write=False)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "scores", scores)

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def anomaly_scores(self) -> np.ndarray:
        """Scores oriented so that higher means more anomalous."""
        return self.scores if self.polarity == "anomaly" else -self.scores

    @property
    def order(self) -> np.ndarray:
        return np.argsort(-self.anomaly_scores, kind="stable")

    @property
    def ranked_ids(self) -> List[str]:
        return [self.ids[k] for k in self.order]

    def score_of(self, trajectory_id: str) -> float:
        return float(self.scores[self.ids.index(str(trajectory_id))])

    def flipped(self) -> "AnomalyRanking":
        return AnomalyRanking(self.ids, -self.scores, "anomaly" if self.polarity == "similarity" else "similarity")

    def to_frame(self) -> pd.DataFrame:
        order = self.order
        return pd.DataFrame({
            "id": [self.ids[k] for k in order],
            "score": self.scores[order],
            "rank": np.arange(1, len(order) + 1),
        })

    def to_csv(self, path: str, header: Optional[dict] = None) -> None:
        header = dict(header or {})
        header["polarity"] = self.polarity
        write_csv_with_header(self.to_frame(), path, header)


def read_score_file(path: str, polarity: Optional[str] = None) -> AnomalyRanking:
    """
    Read an (id, score[, rank]) CSV

    Rankings written by this toolkit record their polarity in the header line;
    external detector scores need it passed explicitly (default anomaly).
    """
    frame, header = read_csv_with_header(path, dtype={"id": str})
    if "id" not in frame.columns or "score" not in frame.columns:
        raise FormatError("score file needs 'id' and 'score' columns", line=1)
    polarity = polarity or (header or {}).get("polarity", "anomaly")
    scores = pd.to_numeric(frame["score"], errors="coerce").to_numpy(dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        bad = int(np.flatnonzero(~np.isfinite(scores))[0])
        raise ValidationError(f"non-finite score for id {frame['id'].iloc[bad]!r}")
    return AnomalyRanking(tuple(frame["id"].astype(str)), scores, polarity)


@dataclass
class DetectorParams:
    """Detector kind and its level-2 parameters; None means derived from level 1."""

    detector: str = DETECTOR_CONFIG["detector"]
    psi2: Optional[int] = None
    t2: Optional[int] = None
    cells2: str = DETECTOR_CONFIG["cells2"]
    sigma2: Optional[float] = None
    n_components2: Optional[int] = None
    k: int = DETECTOR_CONFIG["lof_k"]

    def __post_init__(self):
        if self.detector not in DETECTORS:
            raise ParameterError(f"detector must be one of {DETECTORS}, got {self.detector!r}")
        if self.cells2 not in isolation_kernel.CELL_KINDS:
            raise ParameterError(f"cells2 must be one of {isolation_kernel.CELL_KINDS}, got {self.cells2!r}")


def default_psi2(psi: int, n: int) -> int:
    """min(psi, largest power of two <= n // 2), at least 2."""
    half = max(n // 2, 1)
    power = 1 << (half.bit_length() - 1)
    return max(2, min(psi, power))


@dataclass(frozen=True, eq=False)
class DetectorModel:
    """A detector fitted on a set of level-1 embeddings."""

    kind: str
    level2: Optional[KernelModel]
    center: Optional[np.ndarray]
    reference: np.ndarray
    params: Dict[str, Union[int, float, str]] = field(default_factory=dict)

    def score(self, matrix: np.ndarray) -> np.ndarray:
        """Similarity of each row to the fitted set (idk2, gdk only)."""
        if self.kind == "lof":
            raise ConfigurationError("LOF scores only the set it was fitted on")
        if matrix.shape[1] != self.reference.shape[1]:
            raise ValidationError(
                f"embedding dimension {matrix.shape[1]} does not match detector dimension {self.reference.shape[1]}")
        return np.asarray(point_features(self.level2, matrix) @ self.center).ravel()


def idk_point_scores(model: KernelModel, points, reference=None) -> np.ndarray:
    """<phi(x), mean map of reference> for every x in points; reference defaults to points."""
    features = point_features(model, points)
    mass = features if reference is None else point_features(model, reference)
    center = np.asarray(mass.mean(axis=0)).ravel()
    return np.asarray(features @ center).ravel()


def fit_detector(embedded: EmbeddedDataset, params: DetectorParams,
                 level1: Optional[SchemeParams] = None) -> DetectorModel:
    """Fit the detector named by params.detector on the embedded set."""
    level1 = level1 or SchemeParams()
    matrix = embedded.matrix
    n = len(embedded)
    if n < 2:
        raise ValidationError(f"detection needs at least 2 trajectories, got {n}")

    if params.detector == "idk2":
        psi2 = params.psi2 if params.psi2 is not None else default_psi2(level1.psi, n)
        t2 = params.t2 if params.t2 is not None else level1.t
        if psi2 > n:
            raise ParameterError(f"psi2={psi2} exceeds the {n} trajectories")
        level2 = isolation_kernel.fit_on_reference(matrix, psi2, t2, level1.seed + 1, params.cells2)
        center = np.asarray(isolation_kernel.embed_on_reference(level2, matrix).mean(axis=0)).ravel()
        settings = {"psi2": psi2, "t2": t2, "cells2": params.cells2}
    elif params.detector == "gdk":
        c2 = params.n_components2 if params.n_components2 is not None else min(level1.n_components, n)
        sigma2 = params.sigma2 if params.sigma2 is not None else level1.sigma
        level2 = nystrom.fit_nystrom(matrix, c2, sigma2, level1.seed + 1)
        center = nystrom.embed_points_g(level2, matrix).mean(axis=0)
        settings = {"n_components2": c2, "sigma2": sigma2}
    else:
        if not 1 <= params.k <= n - 1:
            raise ParameterError(f"LOF needs 1 <= k <= n - 1, got k={params.k} for n={n}")
        level2, center = None, None
        settings = {"k": params.k}

    logger.debug(f"Fitted {params.detector} detector on {n} embeddings: {settings}")
    return DetectorModel(params.detector, level2, center, matrix, settings)


def lof_scores(distances: Union[DistanceMatrix, EmbeddedDataset, np.ndarray], k: int = DETECTOR_CONFIG["lof_k"],
               ids: Optional[Sequence[str]] = None,
               lrd_ceiling: float = DETECTOR_CONFIG["lrd_ceiling"]) -> AnomalyRanking:
    """
    Local outlier factor of every item

    Accepts a DistanceMatrix, an EmbeddedDataset (Euclidean distance between
    mean maps) or a square distance array. Neighborhoods include every item
    tied with the k-th nearest; local reachability density is capped at
    lrd_ceiling so exact duplicates score about 1 instead of infinity.
    """
    if isinstance(distances, DistanceMatrix):
        ids = ids or distances.ids
        dist = np.array(distances.values, dtype=np.float64)
    elif isinstance(distances, EmbeddedDataset):
        ids = ids or distances.ids
        dist = cdist(distances.matrix, distances.matrix)
    else:
        dist = np.array(distances, dtype=np.float64)
        ids = ids or tuple(str(i) for i in range(dist.shape[0]))
    n = dist.shape[0]
    if not 1 <= k <= n - 1:
        raise ParameterError(f"LOF needs 1 <= k <= n - 1, got k={k} for n={n}")

    np.fill_diagonal(dist, np.inf)
    k_distance = np.sort(dist, axis=1)[:, k - 1]
    neighbors = dist <= k_distance[:, None]
    reach = np.where(neighbors, np.maximum(dist, k_distance[None, :]), 0.0)
    counts = neighbors.sum(axis=1)
    mean_reach = reach.sum(axis=1) / counts
    lrd = 1.0 / np.maximum(mean_reach, 1.0 / lrd_ceiling)
    lof = (neighbors @ lrd) / counts / lrd
    return AnomalyRanking(tuple(ids), lof, "anomaly")


@dataclass(frozen=True, eq=False)
class DetectionPipeline:
    """Level-1 feature map, fitted detector and the ranking of the fitting set."""

    level1: KernelModel
    detector: DetectorModel
    embedded: EmbeddedDataset
    ranking: AnomalyRanking

    def score_trajectories(self, trajectories: Sequence[Trajectory]) -> np.ndarray:
        """Similarity of new trajectories to the fitted set under the same models."""
        new = LabeledDataset(tuple(trajectories))
        return self.detector.score(embed_dataset(self.level1, new, workers=1).matrix)


def fit_pipeline(dataset: LabeledDataset, level1: Optional[SchemeParams] = None,
                 params: Optional[DetectorParams] = None, workers: Optional[int] = None) -> DetectionPipeline:
    level1 = level1 or SchemeParams()
    params = params or DetectorParams()
    if len(dataset) < 2:
        raise ValidationError(f"detection needs at least 2 trajectories, got {len(dataset)}")

    model = fit_scheme(concat_points(dataset), level1)
    embedded = embed_dataset(model, dataset, workers)
    detector = fit_detector(embedded, params, level1)
    if detector.kind == "lof":
        ranking = lof_scores(embedded, params.k)
    else:
        ranking = AnomalyRanking(embedded.ids, detector.score(embedded.matrix), "similarity")
    return DetectionPipeline(model, detector, embedded, ranking)


def detect(dataset: LabeledDataset, level1: Optional[SchemeParams] = None,
           params: Optional[DetectorParams] = None, workers: Optional[int] = None) -> AnomalyRanking:
    """Embed every trajectory, fit the detector on the embedded set and rank."""
    pipeline = fit_pipeline(dataset, level1, params, workers)
    logger.info(f"Ranked {len(dataset)} trajectories with {pipeline.detector.kind} over {pipeline.level1.scheme}")
    return pipeline.ranking


def distance_lof(dataset: LabeledDataset, measure: str = "dtw", k: int = DETECTOR_CONFIG["lof_k"],
                 workers: Optional[int] = None) -> AnomalyRanking:
    """LOF over a baseline distance matrix."""
    return lof_scores(pairwise_matrix(dataset, measure, workers), k)


@dataclass
class SearchResult:
    best_params: Dict[str, Union[int, float, str]]
    best_auc: float
    ranking: AnomalyRanking
    table: List[Dict[str, Union[int, float, str]]]


def search_grid(detector: str, n: int, n_points: int) -> List[Dict[str, Union[int, float]]]:
    """Parameter grid for a detector on a dataset of n trajectories and n_points points."""
    if detector == "idk2":
        return [{"psi": psi} for psi in SEARCH_GRIDS["psi"] if psi <= n_points]
    if detector == "gdk":
        return [{"sigma": sigma} for sigma in SEARCH_GRIDS["sigma"]]
    ks = [1] + [int(np.floor(f * n)) for f in SEARCH_GRIDS["lof_k_fractions"]]
    return [{"k": k} for k in sorted(set(ks)) if 1 <= k <= n - 1]


def _evaluate(overrides: Dict, dataset: LabeledDataset, level1: SchemeParams, params: DetectorParams):
    scheme_keys = {"psi", "t", "sigma", "n_components", "scheme", "cells", "seed"}
    l1 = replace(level1, **{k: v for k, v in overrides.items() if k in scheme_keys})
    p = replace(params, **{k: v for k, v in overrides.items() if k not in scheme_keys})
    ranking = detect(dataset, l1, p, workers=1)
    return roc_auc(ranking, dataset.labels), ranking


def auto_search(dataset: LabeledDataset, detector: str = DETECTOR_CONFIG["detector"],
                level1: Optional[SchemeParams] = None, grid: Optional[List[Dict]] = None,
                workers: Optional[int] = None) -> SearchResult:
    """
    Grid search by ROC-AUC

    Defaults to the search ranges in config.SEARCH_GRIDS; the first
    configuration in grid order wins ties.
    """
    if dataset.labels is None:
        raise ConfigurationError("parameter search needs labels")
    level1 = level1 or SchemeParams()
    params = DetectorParams(detector=detector)
    grid = grid if grid is not None else search_grid(detector, len(dataset), dataset.n_points)
    if not grid:
        raise ConfigurationError(f"empty search grid for {detector}")

    results = parallel_map(lambda overrides: _evaluate(overrides, dataset, level1, params), grid, workers,
                           min_items=2)
    table = [dict(overrides, auc=auc) for overrides, (auc, _) in zip(grid, results)]
    best = int(np.argmax([auc for auc, _ in results]))
    logger.info(f"Best {detector} configuration {grid[best]} with AUC {results[best][0]:.4f}")
    return SearchResult(dict(grid[best]), results[best][0], results[best][1], table)
