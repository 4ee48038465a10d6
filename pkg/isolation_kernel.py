"""
Isolation Kernel feature map built from t random nearest-anchor partitionings
of psi sampled points each.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.spatial.distance import cdist

from config import KERNEL_CONFIG
from utils import ParameterError, ValidationError

logger = logging.getLogger(__name__)

CELL_KINDS = ("voronoi", "ball")
UNCOVERED = -1
REFERENCE_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class Embedding:
    """A point of the feature space: a point map phi(x) or a kernel mean map."""

    values: np.ndarray
    scheme: str

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True).ravel()
        if not np.all(np.isfinite(values)):
            raise ValidationError("embedding has non-finite entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]

    @cached_property
    def norm(self) -> float:
        return float(np.sqrt(self.values @ self.values))

    def check_compatible(self, other: "Embedding") -> None:
        if self.scheme != other.scheme or len(self) != len(other):
            raise ValidationError(
                f"embeddings not comparable: {self.scheme}[{len(self)}] vs {other.scheme}[{len(other)}]")

    def dot(self, other: "Embedding") -> float:
        self.check_compatible(other)
        return float(self.values @ other.values)


@dataclass(frozen=True, eq=False)
class PartitioningModel:
    """
    Fitted isolation partitionings

    anchors has shape (t, psi, d). With cells="ball" every anchor owns a ball
    reaching its nearest other anchor; a point joins the cell of its nearest
    anchor only when it lies inside that anchor's ball.
    """

    psi: int
    t: int
    seed: int
    anchors: np.ndarray
    cells: str = "voronoi"
    radii: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        anchors = np.array(self.anchors, dtype=np.float64, copy=True)
        if anchors.ndim != 3 or anchors.shape[:2] != (self.t, self.psi):
            raise ValidationError(f"anchors of shape {anchors.shape} do not match t={self.t}, psi={self.psi}")
        if self.cells not in CELL_KINDS:
            raise ParameterError(f"cells must be one of {CELL_KINDS}, got {self.cells!r}")
        anchors.setflags(write=False)
        object.__setattr__(self, "anchors", anchors)
        if self.cells == "ball" and self.radii is None:
            object.__setattr__(self, "radii", _ball_radii(anchors))

    @property
    def dim(self) -> int:
        return self.anchors.shape[2]

    @property
    def n_features(self) -> int:
        return self.psi * self.t

    @property
    def scheme(self) -> str:
        suffix = ",cells=ball" if self.cells == "ball" else ""
        return f"isolation(psi={self.psi},t={self.t}{suffix})"


def _ball_radii(anchors: np.ndarray) -> np.ndarray:
    t, psi, _ = anchors.shape
    if psi == 1:
        return np.full((t, 1), np.inf)
    radii = np.empty((t, psi))
    for j in range(t):
        d = cdist(anchors[j], anchors[j])
        np.fill_diagonal(d, np.inf)
        radii[j] = d.min(axis=1)
    return radii


def as_points(points, dim: Optional[int] = None) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValidationError(f"expected an (N, d) point array, got shape {arr.shape}")
    if dim is not None and arr.shape[0] and arr.shape[1] != dim:
        raise ValidationError(f"point dimensionality {arr.shape[1]} does not match model dimensionality {dim}")
    return arr


def sample_anchor_indices(n: int, psi: int, t: int, seed: int) -> np.ndarray:
    """(t, psi) row indices, drawn without replacement per partitioning from one seeded Generator."""
    rng = np.random.default_rng(seed)
    return np.stack([rng.choice(n, size=psi, replace=False) for _ in range(t)])


def fit(points, psi: int = KERNEL_CONFIG["psi"], t: int = KERNEL_CONFIG["t"],
        seed: int = KERNEL_CONFIG["seed"], cells: str = KERNEL_CONFIG["cells"]) -> PartitioningModel:
    """
    Sample psi anchors without replacement for each of t partitionings

    The draws come from one numpy Generator seeded with seed, so the model is a
    pure function of (points, psi, t, seed).
    """
    pts = as_points(points)
    if psi < 1 or t < 1:
        raise ParameterError(f"psi and t must be >= 1, got psi={psi}, t={t}")
    if pts.shape[0] < psi:
        raise ParameterError(f"psi={psi} exceeds the {pts.shape[0]} available points")

    index = sample_anchor_indices(pts.shape[0], psi, t, seed)
    model = PartitioningModel(psi=psi, t=t, seed=seed, anchors=pts[index], cells=cells)
    logger.debug(f"Fitted isolation partitionings psi={psi} t={t} cells={cells} on {pts.shape[0]} points")
    return model


def tie_break_nearest(distances: Sequence[float]) -> int:
    """Index of the minimum; the lowest index wins ties."""
    arr = np.asarray(distances, dtype=np.float64)
    if arr.size == 0:
        raise ValidationError("no distances to choose from")
    return int(np.argmin(arr))


def cell_assignments(model: PartitioningModel, points, chunk_size: int = KERNEL_CONFIG["chunk_size"]) -> np.ndarray:
    """(N, t) matrix of the cell index of every point in every partitioning, -1 when uncovered."""
    pts = as_points(points, model.dim)
    out = np.empty((pts.shape[0], model.t), dtype=np.int64)
    for start in range(0, pts.shape[0], chunk_size):
        block = pts[start:start + chunk_size]
        for j in range(model.t):
            d2 = cdist(block, model.anchors[j], "sqeuclidean")
            radii = model.radii[j] if model.cells == "ball" else None
            out[start:start + len(block), j] = _nearest_cells(d2, radii)
    return out


def _nearest_cells(d2: np.ndarray, radii: Optional[np.ndarray], slack: float = 0.0) -> np.ndarray:
    """Nearest-anchor cell per row of squared distances; outside the anchor's ball it is UNCOVERED."""
    # argmin returns the first minimum, i.e. tie_break_nearest per row
    cell = np.argmin(d2, axis=1)
    if radii is not None:
        nearest = d2[np.arange(d2.shape[0]), cell]
        reach = radii[cell] ** 2
        cell[nearest > reach + slack] = UNCOVERED
    return cell


def embed_points(model: PartitioningModel, points) -> sparse.csr_matrix:
    """Sparse (N, psi*t) matrix of point maps; each row holds t entries 1/sqrt(t) (fewer when uncovered)."""
    return _cells_to_features(cell_assignments(model, points), model.psi, model.t)


def _cells_to_features(cells: np.ndarray, psi: int, t: int) -> sparse.csr_matrix:
    n = cells.shape[0]
    offsets = np.arange(t) * psi
    rows = np.repeat(np.arange(n), t)
    cols = (cells + offsets).ravel()
    keep = cells.ravel() != UNCOVERED
    data = np.full(keep.sum(), 1.0 / np.sqrt(t))
    return sparse.csr_matrix((data, (rows[keep], cols[keep])), shape=(n, psi * t))


def embed_point(model: PartitioningModel, x) -> Embedding:
    """phi(x): 1/sqrt(t) at the nearest-anchor cell of each partitioning."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValidationError(f"expected a single point, got shape {x.shape}")
    return Embedding(embed_points(model, x).toarray().ravel(), model.scheme)


def point_kernel(model: PartitioningModel, x, y) -> float:
    """Fraction of partitionings in which x and y share a cell."""
    pair = np.vstack([as_points(x, model.dim), as_points(y, model.dim)])
    if pair.shape[0] != 2:
        raise ValidationError("point_kernel takes two single points")
    cells = cell_assignments(model, pair)
    shared = (cells[0] == cells[1]) & (cells[0] != UNCOVERED)
    return float(np.count_nonzero(shared)) / model.t


@dataclass(frozen=True, eq=False)
class ReferencePartitioningModel:
    """
    Isolation partitionings whose anchors are rows of a stored reference set

    Squared distances come from inner products with the reference rows, so
    high-dimensional inputs (mean maps) cost one matrix product instead of a
    distance computation per partitioning. cells="ball" follows the rule of
    PartitioningModel.
    """

    psi: int
    t: int
    seed: int
    reference: np.ndarray
    index: np.ndarray
    cells: str = "voronoi"
    radii: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        reference = np.array(self.reference, dtype=np.float64, copy=True)
        index = np.array(self.index, dtype=np.int64, copy=True)
        if index.shape != (self.t, self.psi):
            raise ValidationError(f"anchor index of shape {index.shape} does not match t={self.t}, psi={self.psi}")
        if self.cells not in CELL_KINDS:
            raise ParameterError(f"cells must be one of {CELL_KINDS}, got {self.cells!r}")
        reference.setflags(write=False)
        index.setflags(write=False)
        object.__setattr__(self, "reference", reference)
        object.__setattr__(self, "index", index)
        if self.cells == "ball" and self.radii is None:
            object.__setattr__(self, "radii", _reference_ball_radii(reference, index))

    @property
    def dim(self) -> int:
        return self.reference.shape[1]

    @property
    def n_features(self) -> int:
        return self.psi * self.t

    @property
    def scheme(self) -> str:
        suffix = ",cells=ball" if self.cells == "ball" else ""
        return f"isolation(psi={self.psi},t={self.t}{suffix})"

    @property
    def anchors(self) -> np.ndarray:
        return self.reference[self.index]

    @cached_property
    def squared_norms(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.reference, self.reference)


def _reference_ball_radii(reference: np.ndarray, index: np.ndarray) -> np.ndarray:
    t, psi = index.shape
    if psi == 1:
        return np.full((t, 1), np.inf)
    sq = np.einsum("ij,ij->i", reference, reference)
    radii = np.empty((t, psi))
    for j in range(t):
        rows = index[j]
        d2 = sq[rows][:, None] + sq[rows][None, :] - 2.0 * (reference[rows] @ reference[rows].T)
        np.fill_diagonal(d2, np.inf)
        radii[j] = np.sqrt(np.maximum(d2.min(axis=1), 0.0))
    return radii


def fit_on_reference(reference, psi: int, t: int, seed: int, cells: str = "voronoi") -> ReferencePartitioningModel:
    """Same anchor draws as fit(reference, psi, t, seed), kept as row indices."""
    ref = as_points(reference)
    if psi < 1 or t < 1:
        raise ParameterError(f"psi and t must be >= 1, got psi={psi}, t={t}")
    if ref.shape[0] < psi:
        raise ParameterError(f"psi={psi} exceeds the {ref.shape[0]} available points")
    index = sample_anchor_indices(ref.shape[0], psi, t, seed)
    model = ReferencePartitioningModel(psi=psi, t=t, seed=seed, reference=ref, index=index, cells=cells)
    logger.debug(f"Fitted reference partitionings psi={psi} t={t} cells={cells} on {ref.shape[0]} rows")
    return model


def reference_cell_assignments(model: ReferencePartitioningModel, points,
                               chunk_size: int = KERNEL_CONFIG["chunk_size"]) -> np.ndarray:
    """(N, t) nearest-anchor cells, -1 when uncovered; the lowest anchor index wins ties."""
    pts = as_points(points, model.dim)
    ref_sq = model.squared_norms
    # identical rows may differ by rounding in the inner-product form
    slack = REFERENCE_SLACK * (1.0 + float(ref_sq.max(initial=0.0)))
    out = np.empty((pts.shape[0], model.t), dtype=np.int64)
    for start in range(0, pts.shape[0], chunk_size):
        block = pts[start:start + chunk_size]
        block_sq = np.einsum("ij,ij->i", block, block)
        cross = block @ model.reference.T
        for j in range(model.t):
            rows = model.index[j]
            d2 = block_sq[:, None] + ref_sq[rows][None, :] - 2.0 * cross[:, rows]
            radii = model.radii[j] if model.cells == "ball" else None
            out[start:start + len(block), j] = _nearest_cells(d2, radii, slack)
    return out


def embed_on_reference(model: ReferencePartitioningModel, points,
                       chunk_size: int = KERNEL_CONFIG["chunk_size"]) -> sparse.csr_matrix:
    return _cells_to_features(reference_cell_assignments(model, points, chunk_size), model.psi, model.t)
