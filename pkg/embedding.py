"""
Kernel mean maps: trajectories to points of the feature space, means of maps,
and the distributional kernel as a dot product of stored vectors.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import sparse

import isolation_kernel
import nystrom
from config import APP_CONFIG, KERNEL_CONFIG, NYSTROM_CONFIG, PERFORMANCE_CONFIG
from isolation_kernel import Embedding, PartitioningModel, ReferencePartitioningModel, as_points
from nystrom import NystromModel
from trajectory import LabeledDataset, Trajectory, concat_points
from utils import (
    FormatError,
    ParameterError,
    ValidationError,
    export_results_to_json,
    import_results_from_json,
    parallel_map,
    write_csv_with_header,
)

logger = logging.getLogger(__name__)

KernelModel = Union[PartitioningModel, ReferencePartitioningModel, NystromModel]
SCHEMES = ("ik", "nystrom")


@dataclass
class SchemeParams:
    """Level-1 feature map choice and its parameters."""

    scheme: str = "ik"
    psi: int = KERNEL_CONFIG["psi"]
    t: int = KERNEL_CONFIG["t"]
    cells: str = KERNEL_CONFIG["cells"]
    n_components: int = NYSTROM_CONFIG["n_components"]
    sigma: float = NYSTROM_CONFIG["sigma"]
    seed: int = KERNEL_CONFIG["seed"]

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ParameterError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")


@dataclass(frozen=True, eq=False)
class EmbeddedDataset:
    """The set of mean maps of a dataset, one row per trajectory."""

    ids: tuple
    matrix: np.ndarray
    scheme: str
    _index: Dict[str, int] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        ids = tuple(str(i) for i in self.ids)
        matrix = np.array(self.matrix, dtype=np.float64, copy=True)
        if matrix.ndim != 2 or matrix.shape[0] != len(ids):
            raise ValidationError(f"{len(ids)} ids for an embedding matrix of shape {matrix.shape}")
        matrix.setflags(write=False)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "_index", {i: k for k, i in enumerate(ids)})

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __getitem__(self, k: int) -> Embedding:
        return Embedding(self.matrix[k], self.scheme)

    @property
    def embeddings(self) -> List[Embedding]:
        return [self[k] for k in range(len(self))]

    def index_of(self, trajectory_id: str) -> int:
        try:
            return self._index[str(trajectory_id)]
        except KeyError:
            raise ValidationError(f"unknown trajectory id {trajectory_id!r}") from None

    def subset(self, ids: Sequence[str]) -> "EmbeddedDataset":
        rows = [self.index_of(i) for i in ids]
        return EmbeddedDataset(tuple(ids), self.matrix[rows], self.scheme)


def fit_scheme(points, params: Optional[SchemeParams] = None) -> KernelModel:
    """Fit the level-1 feature map named by params.scheme on points."""
    params = params or SchemeParams()
    if params.scheme == "ik":
        return isolation_kernel.fit(points, params.psi, params.t, params.seed, params.cells)
    return nystrom.fit_nystrom(points, params.n_components, params.sigma, params.seed)


def point_features(model: KernelModel, points) -> Union[sparse.csr_matrix, np.ndarray]:
    """Point maps of every row of points: sparse for isolation, dense for Nystrom."""
    if isinstance(model, PartitioningModel):
        return isolation_kernel.embed_points(model, points)
    if isinstance(model, ReferencePartitioningModel):
        return isolation_kernel.embed_on_reference(model, points)
    return nystrom.embed_points_g(model, points)


def _mean_rows(model: KernelModel, trajectories: Sequence[Trajectory]) -> np.ndarray:
    lengths = np.array([len(traj) for traj in trajectories])
    features = point_features(model, np.concatenate([traj.points for traj in trajectories], axis=0))
    rows = np.repeat(np.arange(len(trajectories)), lengths)
    averaging = sparse.csr_matrix(
        (1.0 / np.repeat(lengths, lengths), (rows, np.arange(lengths.sum()))),
        shape=(len(trajectories), lengths.sum()),
    )
    means = averaging @ features
    return means.toarray() if sparse.issparse(means) else np.asarray(means)


def mean_map(model: KernelModel, X: Union[Trajectory, np.ndarray]) -> Embedding:
    """Average of the point maps of all points of X."""
    if not isinstance(X, Trajectory):
        pts = as_points(X)
        if pts.shape[0] == 0:
            raise ValidationError("cannot embed an empty trajectory")
        X = Trajectory("", pts)
    return Embedding(_mean_rows(model, [X])[0], model.scheme)


def distributional_kernel(a: Embedding, b: Embedding, normalized: bool = False) -> float:
    """<a, b>; with normalized the cosine form K(a,b)/sqrt(K(a,a)K(b,b)) (0 for a zero map)."""
    value = a.dot(b)
    if not normalized:
        return value
    denominator = a.norm * b.norm
    return value / denominator if denominator > 0 else 0.0


def embed_dataset(model: KernelModel, dataset: LabeledDataset, workers: Optional[int] = None) -> EmbeddedDataset:
    """Mean map of every trajectory, in dataset order."""
    trajectories = list(dataset.trajectories)
    if not trajectories:
        return EmbeddedDataset((), np.empty((0, model.n_features)), model.scheme)
    # block boundaries depend on n only, so results match at any worker count
    size = PERFORMANCE_CONFIG["embed_block"]
    ranges = [(a, min(a + size, len(trajectories))) for a in range(0, len(trajectories), size)]
    if len(ranges) == 1:
        blocks = [_mean_rows(model, trajectories)]
    else:
        blocks = parallel_map(lambda r: _mean_rows(model, trajectories[r[0]:r[1]]), ranges, workers, min_items=2)
    matrix = np.vstack(blocks)
    logger.debug(f"Embedded {len(trajectories)} trajectories into {matrix.shape[1]} dimensions")
    return EmbeddedDataset(tuple(dataset.ids), matrix, model.scheme)


def mean_of_maps(embeddings: Union[Sequence[Embedding], EmbeddedDataset]) -> Embedding:
    """Coordinate-wise mean of a non-empty set of embeddings of one scheme."""
    if isinstance(embeddings, EmbeddedDataset):
        if len(embeddings) == 0:
            raise ValidationError("cannot average an empty set of embeddings")
        return Embedding(embeddings.matrix.mean(axis=0), embeddings.scheme)
    embeddings = list(embeddings)
    if not embeddings:
        raise ValidationError("cannot average an empty set of embeddings")
    for other in embeddings[1:]:
        embeddings[0].check_compatible(other)
    return Embedding(np.mean([e.values for e in embeddings], axis=0), embeddings[0].scheme)


def kernel_matrix(embedded: EmbeddedDataset, normalized: bool = False) -> np.ndarray:
    """n x n Gram matrix of the distributional kernel."""
    gram = embedded.matrix @ embedded.matrix.T
    gram = (gram + gram.T) / 2.0
    if normalized:
        norms = np.sqrt(np.diag(gram))
        outer = np.outer(norms, norms)
        gram = np.divide(gram, outer, out=np.zeros_like(gram), where=outer > 0)
    return gram


def embed_trajectories(dataset: LabeledDataset, params: Optional[SchemeParams] = None,
                       workers: Optional[int] = None) -> tuple:
    """Fit the feature map on all points of dataset and embed every trajectory."""
    params = params or SchemeParams()
    model = fit_scheme(concat_points(dataset), params)
    return model, embed_dataset(model, dataset, workers)


def export_embeddings(embedded: EmbeddedDataset, path: str, header: Optional[dict] = None) -> None:
    """CSV (id, v_1..v_dim) or, for a .npz path, a numpy container."""
    if path.endswith(".npz"):
        np.savez(path, ids=np.array(embedded.ids), matrix=embedded.matrix, scheme=np.array(embedded.scheme))
        return
    frame = pd.DataFrame(embedded.matrix, columns=[f"v_{j + 1}" for j in range(embedded.dim)])
    frame.insert(0, "id", list(embedded.ids))
    write_csv_with_header(frame, path, header)


def _model_record(model: KernelModel) -> dict:
    version = APP_CONFIG["model_format_version"]
    if isinstance(model, ReferencePartitioningModel):
        raise ParameterError("reference partitionings are fitted per detection run and cannot be saved")
    if isinstance(model, PartitioningModel):
        return {"format_version": version, "scheme": "isolation", "psi": model.psi, "t": model.t,
                "seed": model.seed, "dim": model.dim, "cells": model.cells, "anchors": model.anchors}
    return {"format_version": version, "scheme": "nystrom", "n_components": model.n_components,
            "sigma": model.sigma, "seed": model.seed, "dim": model.dim,
            "landmarks": model.landmarks, "whitening": model.whitening}


def _model_from_record(record: dict) -> KernelModel:
    if record.get("format_version") != APP_CONFIG["model_format_version"]:
        raise FormatError(f"unsupported model format version {record.get('format_version')!r}")
    try:
        if record["scheme"] == "isolation":
            anchors = np.asarray(record["anchors"], dtype=np.float64).reshape(
                int(record["t"]), int(record["psi"]), int(record["dim"]))
            return PartitioningModel(psi=int(record["psi"]), t=int(record["t"]), seed=int(record["seed"]),
                                     anchors=anchors, cells=str(record["cells"]))
        if record["scheme"] == "nystrom":
            c, d = int(record["n_components"]), int(record["dim"])
            return NystromModel(
                landmarks=np.asarray(record["landmarks"], dtype=np.float64).reshape(c, d),
                sigma=float(record["sigma"]),
                whitening=np.asarray(record["whitening"], dtype=np.float64).reshape(c, c),
                seed=int(record["seed"]))
    except (KeyError, ValueError) as e:
        raise FormatError(f"malformed model file: {e}") from e
    raise FormatError(f"unknown model scheme {record.get('scheme')!r}")


def save_model(model: KernelModel, path: str) -> None:
    """Versioned JSON container, or numpy .npz when path ends with .npz."""
    record = _model_record(model)
    if path.endswith(".npz"):
        arrays = {k: v for k, v in record.items() if isinstance(v, np.ndarray)}
        meta = {k: v for k, v in record.items() if not isinstance(v, np.ndarray)}
        np.savez(path, meta=np.array(json.dumps(meta)), **arrays)
    else:
        export_results_to_json(record, path)
    logger.info(f"Saved {record['scheme']} model to {path}")


def load_model(path: str) -> KernelModel:
    if not os.path.exists(path):
        raise FileNotFoundError(f"model not found: {path}")
    if path.endswith(".npz"):
        with np.load(path, allow_pickle=False) as archive:
            record = json.loads(str(archive["meta"]))
            for key in archive.files:
                if key != "meta":
                    record[key] = archive[key]
    else:
        record = import_results_from_json(path)
    return _model_from_record(record)
