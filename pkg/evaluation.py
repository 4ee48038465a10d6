"""
Evaluation metrics (ROC-AUC, Jaccard index over point spans) and the scaleup
benchmark harness.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from config import DETECTOR_CONFIG, PERFORMANCE_CONFIG
from trajectory import LabeledDataset, SubTrajectorySpan
from utils import MetricError, ParameterError, write_csv_with_header

logger = logging.getLogger(__name__)


@dataclass
class EvalReport:
    """A metric value with its per-configuration table and timing rows."""

    metric: str
    value: float
    table: List[Dict[str, Any]] = field(default_factory=list)
    timings: List[Dict[str, Any]] = field(default_factory=list)
    ratios: Dict[str, Dict[str, float]] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        if self.timings:
            return pd.DataFrame(self.timings, columns=["method", "n", "prep", "detect"])
        return pd.DataFrame(self.table)

    def to_csv(self, path: str, header: Optional[dict] = None) -> None:
        write_csv_with_header(self.to_frame(), path, header)


def roc_auc(ranking, labels: Union[Mapping[str, int], Sequence[int]]) -> float:
    """
    Rank-sum ROC-AUC of a ranking against 0/1 labels (1 = anomalous)

    Scores are oriented by the ranking's polarity first; tied scores count
    one half.
    """
    if isinstance(labels, Mapping):
        try:
            y = np.array([int(labels[i]) for i in ranking.ids])
        except KeyError as e:
            raise MetricError(f"no label for id {e.args[0]!r}") from None
    else:
        y = np.asarray(labels, dtype=int)
        if y.shape[0] != len(ranking):
            raise MetricError(f"{y.shape[0]} labels for {len(ranking)} scores")
    positives = int(np.count_nonzero(y == 1))
    negatives = int(np.count_nonzero(y == 0))
    if positives == 0 or negatives == 0:
        raise MetricError("ROC-AUC needs at least one anomalous and one normal label")

    ranks = rankdata(ranking.anomaly_scores)
    rank_sum = ranks[y == 1].sum()
    return float((rank_sum - positives * (positives + 1) / 2.0) / (positives * negatives))


def span_indices(spans: Sequence[SubTrajectorySpan], length: Optional[int] = None) -> set:
    indices = set()
    for span in spans:
        if length is not None:
            span.check(length)
        indices.update(range(span.start, span.end + 1))
    return indices


def jaccard_spans(detected: Sequence[SubTrajectorySpan], truth: Sequence[SubTrajectorySpan],
                  length: Optional[int] = None) -> float:
    """|D n T| / |D u T| over covered point indices; 1.0 when both are empty."""
    a = span_indices(detected, length)
    b = span_indices(truth, length)
    union = a | b
    if not union:
        return 1.0
    return len(a & b) / len(union)


@dataclass
class BenchMethod:
    """A benchmarked method split into a prep phase and a detect phase."""

    name: str
    prep: Callable[[LabeledDataset], Any]
    detect: Callable[[LabeledDataset, Any], Any]


def _kernel_method(name: str, scheme: str, detector: str) -> BenchMethod:
    from anomaly import DetectorParams, fit_detector
    from embedding import SchemeParams, embed_trajectories

    level1 = SchemeParams(scheme=scheme)

    def prep(dataset):
        return embed_trajectories(dataset, level1, workers=1)[1]

    def detect(dataset, embedded):
        model = fit_detector(embedded, DetectorParams(detector=detector), level1)
        return model.score(embedded.matrix)

    return BenchMethod(name, prep, detect)


def _distance_method(measure: str) -> BenchMethod:
    from anomaly import lof_scores
    from distances import pairwise_matrix

    def prep(dataset):
        return pairwise_matrix(dataset, measure, workers=1)

    def detect(dataset, matrix):
        return lof_scores(matrix, min(DETECTOR_CONFIG["lof_k"], len(dataset) - 1))

    return BenchMethod(f"{measure}-lof", prep, detect)


def builtin_methods() -> Dict[str, BenchMethod]:
    methods = {
        "ik-idk2": _kernel_method("ik-idk2", "ik", "idk2"),
        "nystrom-gdk": _kernel_method("nystrom-gdk", "nystrom", "gdk"),
    }
    for measure in ("dtw", "hausdorff", "frechet"):
        method = _distance_method(measure)
        methods[method.name] = method
    return methods


def scaleup_bench(generator: Callable[[int, int], LabeledDataset], sizes: Sequence[int],
                  methods: Sequence[Union[str, BenchMethod]], repeats: int = PERFORMANCE_CONFIG["bench_repeats"],
                  seed: int = 0) -> EvalReport:
    """
    Time the prep and detect phases of each method at every size

    Methods run one after another; each cell is the median over repeats of
    the monotonic wall clock. Ratios compare the largest size to the smallest.
    """
    sizes = list(sizes)
    if not sizes or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ParameterError(f"sizes must be non-empty and strictly ascending, got {sizes}")
    if repeats < 1:
        raise ParameterError(f"repeats must be >= 1, got {repeats}")
    catalog = builtin_methods()
    resolved = []
    for method in methods:
        if isinstance(method, str):
            if method not in catalog:
                raise ParameterError(f"unknown benchmark method {method!r}; choose from {sorted(catalog)}")
            method = catalog[method]
        resolved.append(method)

    timings = []
    ratios = {}
    for method in resolved:
        per_size = []
        for n in sizes:
            dataset = generator(n, seed)
            prep_times, detect_times = [], []
            for _ in range(repeats):
                start = time.perf_counter()
                state = method.prep(dataset)
                middle = time.perf_counter()
                method.detect(dataset, state)
                prep_times.append(middle - start)
                detect_times.append(time.perf_counter() - middle)
            row = {"method": method.name, "n": n,
                   "prep": float(np.median(prep_times)), "detect": float(np.median(detect_times))}
            logger.info(f"{method.name} n={n}: prep {row['prep']:.4f}s detect {row['detect']:.4f}s")
            timings.append(row)
            per_size.append(row)
        first, last = per_size[0], per_size[-1]
        ratios[method.name] = {
            phase: (last[phase] / first[phase]) if first[phase] > 0 else float("inf")
            for phase in ("prep", "detect")
        }

    value = ratios[resolved[0].name]["prep"] if resolved else float("nan")
    return EvalReport("prep_ratio", value, timings=timings, ratios=ratios)
