"""
Deterministic synthetic trajectory datasets.

All generators are pure functions of their arguments: one numpy Generator is
seeded per call and coordinates are produced in raw units (callers normalize).
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from trajectory import LabeledDataset, Trajectory
from utils import ParameterError

logger = logging.getLogger(__name__)

GENERATOR_KINDS = ("dense-sparse-103", "translated-triple", "separable-singleton", "cross-style")

# dense/sparse family geometry; ANOMALY_OFFSET exceeds WAVE_AMPLITUDE so #51 and #52 clear both ribbons
WAVE_POINTS = 50
WAVE_WIDTH = 150.0
WAVE_AMPLITUDE = 25.0
WAVE_PERIOD = 75.0
DENSE_SPACING = 1.0
SPARSE_SPACING = 3.0
ANOMALY_OFFSET = 60.0
JITTER = 0.05

CROSS_CORRIDORS = 19
CROSS_LENGTHS = (4, 30)


@dataclass
class GeneratorSpec:
    """Which dataset to build and its size parameters."""

    kind: str
    seed: int = 0
    n: Optional[int] = None
    separation: float = 5.0
    anomaly_fraction: float = 0.02

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ParameterError(f"kind must be one of {GENERATOR_KINDS}, got {self.kind!r}")


def _line(x: np.ndarray, y) -> np.ndarray:
    return np.column_stack([x, np.broadcast_to(y, x.shape)])


def gen_dense_sparse(seed: int = 0) -> LabeledDataset:
    """
    103 trajectories: a tightly spaced wavy family (#0-#50, straight #40 inside
    it), two straight lines (#51 below #50, #52 above #53) and a widely spaced
    wavy family (#53-#102). #40, #51 and #52 are the anomalies.
    """
    rng = np.random.default_rng(seed)
    x = np.linspace(0.0, WAVE_WIDTH, WAVE_POINTS)
    wave = WAVE_AMPLITUDE * np.sin(2.0 * np.pi * x / WAVE_PERIOD)
    stamps = np.arange(WAVE_POINTS, dtype=np.float64)

    dense_bottom = -DENSE_SPACING * 50
    below_dense = dense_bottom - ANOMALY_OFFSET
    sparse_top = below_dense - 2 * ANOMALY_OFFSET

    trajectories = []
    for i in range(103):
        if i <= 50:
            level = -DENSE_SPACING * i
        elif i == 51:
            level = below_dense
        elif i == 52:
            level = sparse_top + ANOMALY_OFFSET
        else:
            level = sparse_top - SPARSE_SPACING * (i - 53)

        if i in (40, 51, 52):
            points = _line(x, level)
        else:
            points = _line(x, level + wave + rng.normal(0.0, JITTER, size=x.shape))
        trajectories.append(Trajectory(str(i), points, stamps))

    labels = {str(i): int(i in (40, 51, 52)) for i in range(103)}
    return LabeledDataset(tuple(trajectories), labels)


def gen_translated_triple(seed: int = 0) -> Tuple[Trajectory, Trajectory, Trajectory]:
    """
    X a zig-zag over 20 points, X' = X shifted up by one zig-zag step, and Y a
    straight line between them whose points bunch up at the left end.
    """
    rng = np.random.default_rng(seed)
    step = 1.0 / 19.0
    i = np.arange(20)
    X = np.column_stack([i * step, (i % 2) * step])
    X_shifted = X + np.array([0.0, step])

    spread = np.arange(12) / 11.0
    bunched = rng.uniform(0.0, 2 * step, size=48)
    y_x = np.sort(np.concatenate([spread, bunched]), kind="stable")
    Y = _line(y_x, 0.5 * step)

    return (
        Trajectory("X", X, np.arange(20, dtype=np.float64)),
        Trajectory("X'", X_shifted, np.arange(20, dtype=np.float64)),
        Trajectory("Y", Y, np.arange(60, dtype=np.float64)),
    )


def gen_separable_singleton(n: int, seed: int = 0, separation: float = 5.0) -> LabeledDataset:
    """n - 1 near-identical horizontal trajectories on y = 0 and one straight line at y = separation."""
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    rng = np.random.default_rng(seed)
    x = np.linspace(0.0, 1.0, 20)
    stamps = np.arange(20, dtype=np.float64)
    trajectories = [
        Trajectory(str(k), _line(x + rng.normal(0.0, 0.01, size=x.shape), 0.0), stamps)
        for k in range(n - 1)
    ]
    trajectories.append(Trajectory(str(n - 1), _line(x, float(separation)), stamps))
    labels = {str(k): int(k == n - 1) for k in range(n)}
    return LabeledDataset(tuple(trajectories), labels)


def gen_cross_style(n_traj: int, seed: int = 0, anomaly_fraction: float = 0.02) -> LabeledDataset:
    """
    Short trajectories along 19 straight corridors crossing a central region

    Corridor c runs between two points of a circle of radius 0.5; a fraction of
    the trajectories instead follow an arc outside that circle and are labeled
    anomalous. Clusters are the corridor numbers 1..19.
    """
    if n_traj < CROSS_CORRIDORS:
        raise ParameterError(f"n_traj must be >= {CROSS_CORRIDORS}, got {n_traj}")
    if not 0.0 <= anomaly_fraction < 1.0:
        raise ParameterError(f"anomaly_fraction must be in [0, 1), got {anomaly_fraction}")
    rng = np.random.default_rng(seed)
    center = np.array([0.5, 0.5])
    starts = 2.0 * np.pi * np.arange(CROSS_CORRIDORS) / CROSS_CORRIDORS
    ends = starts + 2.5

    def on_circle(angle, radius=0.5):
        return center + radius * np.array([np.cos(angle), np.sin(angle)])

    n_anomalies = int(round(anomaly_fraction * n_traj))
    anomalous = set(rng.choice(n_traj, size=n_anomalies, replace=False).tolist())

    trajectories, labels, clusters = [], {}, {}
    normal_count = anomaly_count = 0
    for k in range(n_traj):
        m = int(rng.integers(CROSS_LENGTHS[0], CROSS_LENGTHS[1] + 1))
        s = np.linspace(0.0, 1.0, m)
        if k in anomalous:
            corridor = anomaly_count % CROSS_CORRIDORS
            anomaly_count += 1
            angles = starts[corridor] + rng.uniform(0.3, 0.6) + s * rng.uniform(1.0, 2.0)
            points = np.column_stack([center[0] + 0.6 * np.cos(angles), center[1] + 0.6 * np.sin(angles)])
        else:
            corridor = normal_count % CROSS_CORRIDORS
            normal_count += 1
            a = on_circle(starts[corridor]) + rng.normal(0.0, 0.01, size=2)
            b = on_circle(ends[corridor]) + rng.normal(0.0, 0.01, size=2)
            points = a + s[:, None] * (b - a) + rng.normal(0.0, 0.005, size=(m, 2))
        traj_id = str(k)
        trajectories.append(Trajectory(traj_id, points, np.arange(m, dtype=np.float64)))
        labels[traj_id] = int(k in anomalous)
        clusters[traj_id] = corridor + 1

    logger.debug(f"Generated {n_traj} cross-style trajectories, {n_anomalies} anomalous")
    return LabeledDataset(tuple(trajectories), labels, clusters)


def generate(spec: GeneratorSpec) -> LabeledDataset:
    """Build the dataset a GeneratorSpec describes."""
    if spec.kind == "dense-sparse-103":
        return gen_dense_sparse(spec.seed)
    if spec.kind == "translated-triple":
        return LabeledDataset(gen_translated_triple(spec.seed))
    if spec.kind == "separable-singleton":
        return gen_separable_singleton(spec.n if spec.n is not None else 10, spec.seed, spec.separation)
    return gen_cross_style(spec.n if spec.n is not None else 190, spec.seed, spec.anomaly_fraction)
