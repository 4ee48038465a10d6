"""
Utility functions for TrajKernel toolkit
"""

import json
import logging
import os
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from config import PERFORMANCE_CONFIG


logger = logging.getLogger(__name__)

HEADER_PREFIX = "# "


class TrajKernelError(Exception):
    """Base class for every error raised by the toolkit."""


class FormatError(TrajKernelError):
    """Input file could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(TrajKernelError):
    """Data violates a model invariant."""


class ParameterError(TrajKernelError):
    """Parameter out of its admissible range."""


class ConfigurationError(TrajKernelError):
    """Requested run cannot be carried out with the given configuration."""


class MetricError(TrajKernelError):
    """A metric is undefined for its inputs."""


def _json_default(value: Any) -> Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


def export_results_to_json(results: Dict[str, Any], filename: str) -> str:
    """
    Export results to JSON file

    Args:
        results: Results dictionary (numpy values allowed)
        filename: Output filename

    Returns:
        The filename written
    """
    with open(filename, "w", encoding="utf-8") as f:
        json.dump(results, f, indent=2, default=_json_default)
        f.write("\n")
    logger.debug(f"Results exported to {filename}")
    return filename


def import_results_from_json(filename: str) -> Dict[str, Any]:
    """
    Import results from JSON file

    Args:
        filename: Input filename

    Returns:
        Results dictionary
    """
    with open(filename, "r", encoding="utf-8") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"invalid JSON: {e.msg}", line=e.lineno) from e


def write_csv_with_header(frame: pd.DataFrame, path: str,
                          header: Optional[Dict[str, Any]] = None) -> None:
    """Write a CSV, optionally prefixed by a `# {json}` line recording the run configuration."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        if header is not None:
            f.write(HEADER_PREFIX + json.dumps(header, sort_keys=True, default=_json_default) + "\n")
        frame.to_csv(f, index=False, lineterminator="\n")


def read_csv_with_header(path: str, **kwargs) -> Tuple[pd.DataFrame, Optional[Dict[str, Any]]]:
    """Read a CSV written by write_csv_with_header; returns (frame, header or None)."""
    with open(path, "r", encoding="utf-8") as f:
        first = f.readline()
    header = None
    skip = 0
    if first.startswith(HEADER_PREFIX.strip()):
        skip = 1
        try:
            header = json.loads(first[len(HEADER_PREFIX):])
        except json.JSONDecodeError:
            header = None
    try:
        frame = pd.read_csv(path, skiprows=skip, **kwargs)
    except pd.errors.ParserError as e:
        raise FormatError(str(e)) from e
    except pd.errors.EmptyDataError as e:
        raise FormatError("empty file", line=1) from e
    return frame, header


def resolve_workers(workers: Optional[int] = None) -> int:
    """Map a worker count (0 or None = all cores) to a positive process count."""
    if workers is None:
        workers = PERFORMANCE_CONFIG["workers"]
    if workers < 0:
        raise ParameterError(f"workers must be >= 0, got {workers}")
    if workers == 0:
        return max(1, os.cpu_count() or 1)
    return workers


def parallel_map(func: Callable, items: Sequence[Any], workers: Optional[int] = None,
                 min_items: Optional[int] = None) -> List[Any]:
    """
    Apply func to every item, preserving order

    Small inputs and a single worker run inline; otherwise joblib dispatches
    the calls. Results are identical whatever the worker count.
    """
    n_jobs = resolve_workers(workers)
    if min_items is None:
        min_items = PERFORMANCE_CONFIG["parallel_min_items"]
    if n_jobs == 1 or len(items) < min_items:
        return [func(item) for item in items]
    return Parallel(n_jobs=n_jobs)(delayed(func)(item) for item in items)
