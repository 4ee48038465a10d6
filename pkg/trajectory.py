"""
Trajectory data model, dataset container, normalization and file ingestion.
"""

import dataclasses
import logging
import os
import re
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config import INGESTION_CONFIG
from utils import (
    FormatError,
    ValidationError,
    export_results_to_json,
    import_results_from_json,
    read_csv_with_header,
    write_csv_with_header,
)

logger = logging.getLogger(__name__)

_LINE_RE = re.compile(r"line (\d+)")


def _frozen_array(values, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise ValidationError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Ordered sequence of d-dimensional points recorded for one moving object."""

    id: str
    points: np.ndarray
    timestamps: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "id", str(self.id))
        points = _frozen_array(self.points, 2)
        if points.shape[0] < 1:
            raise ValidationError(f"trajectory {self.id!r} has no points")
        if not np.all(np.isfinite(points)):
            raise ValidationError(f"trajectory {self.id!r} has a non-finite coordinate")
        object.__setattr__(self, "points", points)

        if self.timestamps is not None:
            stamps = _frozen_array(self.timestamps, 1)
            if stamps.shape[0] != points.shape[0]:
                raise ValidationError(
                    f"trajectory {self.id!r}: {stamps.shape[0]} timestamps for {points.shape[0]} points")
            if not np.all(np.isfinite(stamps)):
                raise ValidationError(f"trajectory {self.id!r} has a non-finite timestamp")
            if np.any(np.diff(stamps) < 0):
                raise ValidationError(f"trajectory {self.id!r}: timestamps decrease")
            object.__setattr__(self, "timestamps", stamps)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def same_as(self, other: "Trajectory", atol: float = 0.0) -> bool:
        """Equal id, shape and coordinates (within atol)."""
        if self.id != other.id or self.points.shape != other.points.shape:
            return False
        return bool(np.allclose(self.points, other.points, rtol=0.0, atol=atol))


@dataclass(frozen=True)
class SubTrajectorySpan:
    """Contiguous run [start, end] (1-based, inclusive) of a trajectory's points."""

    trajectory_id: str
    start: int
    end: int

    def __post_init__(self):
        if not 1 <= self.start <= self.end:
            raise ValidationError(f"invalid span [{self.start}, {self.end}]")

    def __len__(self) -> int:
        return self.end - self.start + 1

    def indices(self) -> np.ndarray:
        """0-based point indices covered by the span."""
        return np.arange(self.start - 1, self.end)

    def check(self, length: int) -> None:
        if self.end > length:
            raise ValidationError(
                f"span [{self.start}, {self.end}] exceeds trajectory length {length}")

    def to_dict(self) -> Dict[str, int]:
        return {"a": self.start, "b": self.end}


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """
    Trajectories with optional anomaly labels and cluster assignments

    labels map id -> 1 (anomalous) or 0 (normal); clusters map id -> cluster
    index. normalization holds one (min, max) pair per dimension when the
    coordinates have been scaled.
    """

    trajectories: Tuple[Trajectory, ...] = ()
    labels: Optional[Dict[str, int]] = None
    clusters: Optional[Dict[str, int]] = None
    normalization: Optional[Tuple[Tuple[float, float], ...]] = None
    time_included: bool = False
    _index: Dict[str, int] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        trajectories = tuple(self.trajectories)
        object.__setattr__(self, "trajectories", trajectories)
        index = {}
        for i, traj in enumerate(trajectories):
            if traj.id in index:
                raise ValidationError(f"duplicate trajectory id {traj.id!r}")
            index[traj.id] = i
        object.__setattr__(self, "_index", index)

        dims = {traj.dim for traj in trajectories}
        if len(dims) > 1:
            raise ValidationError(f"inconsistent dimensionality: {sorted(dims)}")

        if self.labels is not None:
            labels = {str(k): int(v) for k, v in self.labels.items()}
            missing = [i for i in index if i not in labels]
            if missing:
                raise ValidationError(f"no label for trajectory {missing[0]!r}")
            bad = [v for v in labels.values() if v not in (0, 1)]
            if bad:
                raise ValidationError(f"label values must be 0 or 1, got {bad[0]}")
            object.__setattr__(self, "labels", {i: labels[i] for i in index})

        if self.clusters is not None:
            clusters = {str(k): int(v) for k, v in self.clusters.items()}
            missing = [i for i in index if i not in clusters]
            if missing:
                raise ValidationError(f"no cluster for trajectory {missing[0]!r}")
            object.__setattr__(self, "clusters", {i: clusters[i] for i in index})

        if self.normalization is not None:
            record = tuple((float(lo), float(hi)) for lo, hi in self.normalization)
            if trajectories and len(record) != self.dim:
                raise ValidationError(
                    f"normalization record has {len(record)} entries for {self.dim} dimensions")
            object.__setattr__(self, "normalization", record)

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self) -> Iterator[Trajectory]:
        return iter(self.trajectories)

    @property
    def ids(self) -> List[str]:
        return [traj.id for traj in self.trajectories]

    @property
    def dim(self) -> int:
        return self.trajectories[0].dim if self.trajectories else 0

    @property
    def n_points(self) -> int:
        return sum(len(traj) for traj in self.trajectories)

    def get(self, trajectory_id: str) -> Trajectory:
        try:
            return self.trajectories[self._index[str(trajectory_id)]]
        except KeyError:
            raise ValidationError(f"unknown trajectory id {trajectory_id!r}") from None

    def subset(self, ids: Sequence[str]) -> "LabeledDataset":
        """Dataset restricted to ids, in the given order."""
        chosen = tuple(self.get(i) for i in ids)
        keep = {t.id for t in chosen}
        labels = None if self.labels is None else {k: v for k, v in self.labels.items() if k in keep}
        clusters = None if self.clusters is None else {k: v for k, v in self.clusters.items() if k in keep}
        return LabeledDataset(chosen, labels, clusters, self.normalization, self.time_included)

    def normal_subset(self) -> "LabeledDataset":
        if self.labels is None:
            return self
        return self.subset([i for i in self.ids if self.labels[i] == 0])

    def label_vector(self, ids: Optional[Sequence[str]] = None) -> np.ndarray:
        if self.labels is None:
            raise ValidationError("dataset has no labels")
        ids = self.ids if ids is None else ids
        return np.array([self.labels[str(i)] for i in ids], dtype=int)

    def with_labels(self, labels: Dict[str, int]) -> "LabeledDataset":
        return dataclasses.replace(self, labels=labels)

    def with_clusters(self, clusters: Dict[str, int]) -> "LabeledDataset":
        return dataclasses.replace(self, clusters=clusters)

    def same_as(self, other: "LabeledDataset", atol: float = 0.0) -> bool:
        """Same ids, order and coordinates (within atol), labels and clusters."""
        if self.ids != other.ids or self.labels != other.labels or self.clusters != other.clusters:
            return False
        return all(a.same_as(b, atol) for a, b in zip(self.trajectories, other.trajectories))


@dataclass
class IngestionOptions:
    """Column mapping for CSV/JSON ingestion."""

    id_column: str = INGESTION_CONFIG["id_column"]
    time_column: str = INGESTION_CONFIG["time_column"]
    coord_columns: Tuple[str, ...] = tuple(INGESTION_CONFIG["coord_columns"])
    label_column: str = INGESTION_CONFIG["label_column"]
    cluster_column: str = INGESTION_CONFIG["cluster_column"]
    include_time: bool = INGESTION_CONFIG["include_time"]
    sidecars: bool = True


def concat_points(dataset: LabeledDataset) -> np.ndarray:
    """All N points of all trajectories, by trajectory order then point order."""
    if len(dataset) == 0:
        return np.empty((0, 0), dtype=np.float64)
    return np.concatenate([traj.points for traj in dataset.trajectories], axis=0)


def normalize(dataset: LabeledDataset, include_time: bool = False) -> LabeledDataset:
    """
    Min-max scale every dimension to [0, 1] over all points of all trajectories

    A dimension with max == min maps to the constant 0.5. With include_time the
    timestamps become the last coordinate before scaling (once).
    """
    if len(dataset) == 0:
        raise ValidationError("cannot normalize an empty dataset")

    trajectories = list(dataset.trajectories)
    time_included = dataset.time_included
    if include_time and not time_included:
        if any(traj.timestamps is None for traj in trajectories):
            raise ValidationError("include_time requires timestamps on every trajectory")
        trajectories = [
            Trajectory(traj.id, np.column_stack([traj.points, traj.timestamps]), traj.timestamps)
            for traj in trajectories
        ]
        time_included = True

    points = np.concatenate([traj.points for traj in trajectories], axis=0)
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    span = hi - lo
    degenerate = span == 0
    scale = np.where(degenerate, 1.0, span)

    def scaled(p: np.ndarray) -> np.ndarray:
        out = (p - lo) / scale
        out[:, degenerate] = INGESTION_CONFIG["degenerate_value"]
        return out

    # compose with an earlier record so denormalize still reaches raw units
    record = []
    previous = dataset.normalization if dataset.time_included == time_included else None
    for j in range(points.shape[1]):
        if previous is None:
            record.append((float(lo[j]), float(hi[j])))
            continue
        p_lo, p_hi = previous[j]
        if degenerate[j] or p_hi == p_lo:
            record.append((p_lo, p_hi))
        else:
            width = p_hi - p_lo
            record.append((p_lo + lo[j] * width, p_lo + hi[j] * width))

    normalized = tuple(Trajectory(t.id, scaled(t.points), t.timestamps) for t in trajectories)
    logger.debug(f"Normalized {len(normalized)} trajectories over {points.shape[1]} dimensions")
    return LabeledDataset(normalized, dataset.labels, dataset.clusters, tuple(record), time_included)


def denormalize(dataset: LabeledDataset) -> LabeledDataset:
    """Map normalized coordinates back to raw units; a time coordinate is dropped again."""
    if dataset.normalization is None:
        raise ValidationError("dataset carries no normalization record")
    lo = np.array([r[0] for r in dataset.normalization])
    hi = np.array([r[1] for r in dataset.normalization])
    degenerate = hi == lo

    restored = []
    for traj in dataset.trajectories:
        raw = traj.points * (hi - lo) + lo
        raw[:, degenerate] = lo[degenerate]
        if dataset.time_included:
            raw = raw[:, :-1]
        restored.append(Trajectory(traj.id, raw, traj.timestamps))
    return LabeledDataset(tuple(restored), dataset.labels, dataset.clusters, None, False)


def maximal_runs(mask: Sequence[bool], min_len: int = 1, trajectory_id: str = "") -> List[SubTrajectorySpan]:
    """Maximal runs of True in mask, as 1-based spans of length >= min_len."""
    if min_len < 1:
        raise ValidationError(f"min_len must be >= 1, got {min_len}")
    flags = np.asarray(mask, dtype=bool)
    if flags.size == 0:
        return []
    edges = np.diff(np.concatenate([[0], flags.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    return [
        SubTrajectorySpan(trajectory_id, int(a) + 1, int(b))
        for a, b in zip(starts, stops)
        if b - a >= min_len
    ]


def _sidecar(path: str, kind: str) -> str:
    stem, _ = os.path.splitext(path)
    return f"{stem}.{kind}.csv"


def _infer_format(path: str, fmt: Optional[str]) -> str:
    if fmt:
        fmt = fmt.lower()
    else:
        fmt = os.path.splitext(path)[1].lstrip(".").lower() or "csv"
    if fmt not in ("csv", "json"):
        raise FormatError(f"unsupported dataset format {fmt!r}")
    return fmt


def _parse_numeric(raw: pd.Series, column: str, line_offset: int) -> np.ndarray:
    values = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=np.float64)
    for pos in np.flatnonzero(~np.isfinite(values)):
        text = str(raw.iloc[pos]).strip()
        line = int(pos) + line_offset
        try:
            float(text)
        except ValueError:
            if text == "":
                raise ValidationError(f"line {line}: missing value in column {column!r}") from None
            raise FormatError(f"cannot parse {text!r} in column {column!r}", line=line) from None
        raise ValidationError(f"line {line}: non-finite value {text!r} in column {column!r}")
    return values


def _per_id_value(frame: pd.DataFrame, id_column: str, column: str, kind: str) -> Dict[str, int]:
    result: Dict[str, int] = {}
    for traj_id, raw in zip(frame[id_column], frame[column]):
        text = str(raw).strip()
        try:
            value = int(float(text))
        except ValueError:
            raise ValidationError(f"bad {kind} {text!r} for trajectory {traj_id!r}") from None
        if result.setdefault(traj_id, value) != value:
            raise ValidationError(f"conflicting {kind}s for trajectory {traj_id!r}")
    return result


def _load_csv(path: str, options: IngestionOptions) -> LabeledDataset:
    try:
        frame, header = read_csv_with_header(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except FormatError as e:
        match = _LINE_RE.search(str(e))
        raise FormatError(str(e), line=int(match.group(1)) if match else None) from e
    # data rows start after the column header (and the optional config line)
    line_offset = 2 + (1 if header is not None else 0)

    missing = [c for c in (options.id_column, *options.coord_columns) if c not in frame.columns]
    if missing:
        raise FormatError(f"missing required column(s) {missing}", line=line_offset - 1)

    ids = frame[options.id_column].astype(str).str.strip()
    coords = np.column_stack([
        _parse_numeric(frame[c], c, line_offset) for c in options.coord_columns
    ])
    has_time = options.time_column in frame.columns
    stamps = _parse_numeric(frame[options.time_column], options.time_column, line_offset) if has_time else None

    order: Dict[str, List[int]] = {}
    for row, traj_id in enumerate(ids):
        order.setdefault(traj_id, []).append(row)

    trajectories = []
    for traj_id, rows in order.items():
        rows = np.asarray(rows)
        if has_time:
            rows = rows[np.argsort(stamps[rows], kind="stable")]
            trajectories.append(Trajectory(traj_id, coords[rows], stamps[rows]))
        else:
            trajectories.append(Trajectory(traj_id, coords[rows]))

    frame = frame.assign(**{options.id_column: ids})
    labels = clusters = None
    if options.label_column in frame.columns:
        labels = _per_id_value(frame, options.id_column, options.label_column, "label")
    if options.cluster_column in frame.columns:
        clusters = _per_id_value(frame, options.id_column, options.cluster_column, "cluster")
    return LabeledDataset(tuple(trajectories), labels, clusters)


def _load_json(path: str) -> LabeledDataset:
    records = import_results_from_json(path)
    if not isinstance(records, list):
        raise FormatError("expected a JSON array of trajectories", line=1)
    trajectories = []
    labels: Dict[str, int] = {}
    clusters: Dict[str, int] = {}
    for k, record in enumerate(records):
        if not isinstance(record, dict) or "id" not in record or "points" not in record:
            raise FormatError(f"record {k} needs 'id' and 'points'")
        rows = record["points"]
        widths = {len(r) if isinstance(r, list) else -1 for r in rows}
        if -1 in widths or (rows and min(widths) < 2):
            raise FormatError(f"record {k}: points must be [t, x, ...] arrays")
        if len(widths) > 1:
            raise ValidationError(f"record {k}: inconsistent dimensionality")
        try:
            arr = np.array(rows, dtype=np.float64).reshape(len(rows), -1)
        except (TypeError, ValueError) as e:
            raise FormatError(f"record {k}: {e}") from e
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"record {k}: non-finite coordinate")
        stamps = arr[:, 0]
        order = np.argsort(stamps, kind="stable")
        trajectories.append(Trajectory(str(record["id"]), arr[order, 1:], stamps[order]))
        if "label" in record:
            labels[str(record["id"])] = int(record["label"])
        if "cluster" in record:
            clusters[str(record["id"])] = int(record["cluster"])
    return LabeledDataset(tuple(trajectories), labels or None, clusters or None)


def load_labels(path: str, id_column: str = "id", label_column: str = "label") -> Dict[str, int]:
    """Read a (id, label in {0, 1}) CSV."""
    frame, _ = read_csv_with_header(path, dtype=str, keep_default_na=False)
    if id_column not in frame.columns or label_column not in frame.columns:
        raise FormatError(f"label file needs columns {id_column!r} and {label_column!r}", line=1)
    labels = _per_id_value(frame, id_column, label_column, "label")
    bad = [v for v in labels.values() if v not in (0, 1)]
    if bad:
        raise ValidationError(f"label values must be 0 or 1, got {bad[0]}")
    return labels


def load_clusters(path: str, id_column: str = "id", cluster_column: str = "cluster") -> Dict[str, int]:
    """Read a (id, cluster) CSV."""
    frame, _ = read_csv_with_header(path, dtype=str, keep_default_na=False)
    if id_column not in frame.columns or cluster_column not in frame.columns:
        raise FormatError(f"cluster file needs columns {id_column!r} and {cluster_column!r}", line=1)
    return _per_id_value(frame, id_column, cluster_column, "cluster")


def load_dataset(path: str, fmt: Optional[str] = None,
                 options: Optional[IngestionOptions] = None) -> LabeledDataset:
    """
    Load trajectories from CSV or JSON

    Points are grouped by id (first-appearance order) and sorted by timestamp,
    equal timestamps keeping file order. `<stem>.labels.csv` and
    `<stem>.clusters.csv` next to the file are attached when present.
    """
    options = options or IngestionOptions()
    fmt = _infer_format(path, fmt)
    if not os.path.exists(path):
        raise FileNotFoundError(f"dataset not found: {path}")

    dataset = _load_csv(path, options) if fmt == "csv" else _load_json(path)

    if options.sidecars:
        labels_path = _sidecar(path, "labels")
        clusters_path = _sidecar(path, "clusters")
        if dataset.labels is None and os.path.exists(labels_path):
            dataset = dataset.with_labels(load_labels(labels_path))
        if dataset.clusters is None and os.path.exists(clusters_path):
            dataset = dataset.with_clusters(load_clusters(clusters_path))

    logger.info(f"Loaded {len(dataset)} trajectories ({dataset.n_points} points) from {path}")
    return dataset


def save_dataset(dataset: LabeledDataset, path: str, fmt: Optional[str] = None,
                 options: Optional[IngestionOptions] = None) -> None:
    """Write the format load_dataset reads; labels and clusters go to sidecar CSVs."""
    options = options or IngestionOptions()
    fmt = _infer_format(path, fmt)
    names = list(options.coord_columns)
    if len(names) != dataset.dim:
        names = [f"x{j + 1}" for j in range(dataset.dim)]

    if fmt == "csv":
        rows = []
        for traj in dataset.trajectories:
            stamps = traj.timestamps if traj.timestamps is not None else np.arange(len(traj), dtype=np.float64)
            part = pd.DataFrame(traj.points, columns=names)
            part.insert(0, options.time_column, stamps)
            part.insert(0, options.id_column, traj.id)
            rows.append(part)
        frame = pd.concat(rows, ignore_index=True) if rows else pd.DataFrame(
            columns=[options.id_column, options.time_column, *names])
        write_csv_with_header(frame, path)
    else:
        records = []
        for traj in dataset.trajectories:
            stamps = traj.timestamps if traj.timestamps is not None else np.arange(len(traj), dtype=np.float64)
            records.append({"id": traj.id, "points": np.column_stack([stamps, traj.points]).tolist()})
        export_results_to_json(records, path)

    if dataset.labels is not None:
        frame = pd.DataFrame({"id": list(dataset.labels), "label": list(dataset.labels.values())})
        write_csv_with_header(frame, _sidecar(path, "labels"))
    if dataset.clusters is not None:
        frame = pd.DataFrame({"id": list(dataset.clusters), "cluster": list(dataset.clusters.values())})
        write_csv_with_header(frame, _sidecar(path, "clusters"))
    logger.info(f"Saved {len(dataset)} trajectories to {path}")


def scale_like(trajectory: Trajectory, dataset: LabeledDataset) -> Trajectory:
    """Map a raw trajectory into the normalized frame of dataset."""
    if dataset.normalization is None:
        return trajectory
    lo = np.array([r[0] for r in dataset.normalization])
    hi = np.array([r[1] for r in dataset.normalization])
    points = trajectory.points
    if dataset.time_included:
        if trajectory.timestamps is None:
            raise ValidationError(f"trajectory {trajectory.id!r} has no timestamps but the data includes time")
        points = np.column_stack([points, trajectory.timestamps])
    if points.shape[1] != len(lo):
        raise ValidationError(f"trajectory dimensionality {points.shape[1]} does not match data dimensionality {len(lo)}")
    degenerate = hi == lo
    scaled = (points - lo) / np.where(degenerate, 1.0, hi - lo)
    scaled[:, degenerate] = INGESTION_CONFIG["degenerate_value"]
    return Trajectory(trajectory.id, scaled, trajectory.timestamps)
