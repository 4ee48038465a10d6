"""
Configuration file for TrajKernel toolkit
"""

import logging
import logging.handlers
import os
import sys
from typing import Dict, Any

# Application settings
APP_CONFIG = {
    "name": "TrajKernel",
    "version": "1.0.0",
    "description": "Distributional-kernel trajectory mining toolkit",
    "model_format_version": 1,
}

# Dataset ingestion
INGESTION_CONFIG = {
    "id_column": os.getenv("TRAJKERNEL_ID_COLUMN", "id"),
    "time_column": os.getenv("TRAJKERNEL_TIME_COLUMN", "t"),
    "coord_columns": os.getenv("TRAJKERNEL_COORD_COLUMNS", "x,y").split(","),
    "label_column": "label",
    "cluster_column": "cluster",
    "include_time": os.getenv("TRAJKERNEL_INCLUDE_TIME", "false").lower() == "true",
    "degenerate_value": 0.5,
}

# Isolation kernel
KERNEL_CONFIG = {
    "psi": int(os.getenv("TRAJKERNEL_PSI", 16)),
    "t": int(os.getenv("TRAJKERNEL_T", 100)),
    "cells": os.getenv("TRAJKERNEL_CELLS", "voronoi"),
    "seed": int(os.getenv("TRAJKERNEL_SEED", 0)),
    "chunk_size": 4096,
}

# Nystrom approximation of the Gaussian kernel
NYSTROM_CONFIG = {
    "n_components": int(os.getenv("TRAJKERNEL_COMPONENTS", 100)),
    "sigma": float(os.getenv("TRAJKERNEL_SIGMA", 0.25)),
    "eigen_floor": 1e-10,  # relative to the largest eigenvalue
}

# Trajectory anomaly detection
DETECTOR_CONFIG = {
    "scheme": "ik",
    "detector": "idk2",
    "cells2": "ball",
    "lof_k": 10,
    "lrd_ceiling": 1e12,
    "schemes": ["ik", "nystrom"],
    "detectors": ["idk2", "gdk", "lof"],
}

# Anomalous sub-trajectory detection
SUBTRAJ_CONFIG = {
    "tau": 0.0,
    "min_len": 3,
    "radius": 0.05,
    "cells": "ball",
}

# Frequent sub-trajectory pattern mining
MINING_CONFIG = {
    "gamma": 0.06,
    "min_len": 3,
}

# Parameter search ranges
SEARCH_GRIDS = {
    "psi": [2 ** q for q in range(1, 11)],
    "sigma": [2.0 ** q for q in range(-10, 6)],
    "lof_k_fractions": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
}

# Per-dataset settings, selected with --preset
DATASET_PRESETS = {
    "flyingfox": {"psi": 4096, "t": 100, "tau": 0.0},
    "curlews": {"psi": 2048, "t": 100, "tau": 0.0},
    "cross": {"psi": 1024, "t": 100, "gamma": 0.06},
    # theta lies in [0, 1], so this gamma selects nothing; pass --gamma in range
    "casia": {"psi": 16, "t": 100, "gamma": 3.0},
}

# Logging configuration
LOGGING_CONFIG = {
    "level": os.getenv("LOG_LEVEL", "INFO"),
    "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    "file": os.getenv("LOG_FILE", ""),
    "max_size": int(os.getenv("LOG_MAX_SIZE", 10485760)),  # 10MB
    "backup_count": int(os.getenv("LOG_BACKUP_COUNT", 5))
}

# Performance configuration
PERFORMANCE_CONFIG = {
    "workers": int(os.getenv("TRAJKERNEL_WORKERS", 0)),  # 0 = all cores
    "bench_repeats": int(os.getenv("TRAJKERNEL_BENCH_REPEATS", 3)),
    "parallel_min_items": 64,
    "embed_block": 256,
}


def get_config() -> Dict[str, Any]:
    """Get complete configuration dictionary"""
    return {
        "app": APP_CONFIG,
        "ingestion": INGESTION_CONFIG,
        "kernel": KERNEL_CONFIG,
        "nystrom": NYSTROM_CONFIG,
        "detector": DETECTOR_CONFIG,
        "subtraj": SUBTRAJ_CONFIG,
        "mining": MINING_CONFIG,
        "search": SEARCH_GRIDS,
        "presets": DATASET_PRESETS,
        "logging": LOGGING_CONFIG,
        "performance": PERFORMANCE_CONFIG
    }


def validate_config() -> bool:
    """Validate configuration settings"""
    logger = logging.getLogger(__name__)
    try:
        config = get_config()

        # Check required fields
        required_fields = [
            "app.name",
            "app.version",
            "ingestion.id_column",
            "ingestion.coord_columns",
            "kernel.psi",
            "kernel.t",
            "nystrom.n_components",
            "nystrom.sigma",
        ]

        for field in required_fields:
            keys = field.split(".")
            value = config
            for key in keys:
                value = value[key]
            if not value:
                raise ValueError(f"Missing required configuration: {field}")

        if config["kernel"]["psi"] < 1 or config["kernel"]["t"] < 1:
            raise ValueError("kernel.psi and kernel.t must be >= 1")
        if config["kernel"]["cells"] not in ("voronoi", "ball"):
            raise ValueError(f"Unknown cell construction: {config['kernel']['cells']}")
        if config["nystrom"]["sigma"] <= 0:
            raise ValueError("nystrom.sigma must be > 0")
        if config["detector"]["cells2"] not in ("voronoi", "ball"):
            raise ValueError("detector.cells2 must be voronoi or ball")
        if config["subtraj"]["min_len"] < 1 or config["mining"]["min_len"] < 1:
            raise ValueError("min_len must be >= 1")
        if config["performance"]["workers"] < 0:
            raise ValueError("performance.workers must be >= 0")

        return True
    except Exception as e:
        logger.error(f"Configuration validation failed: {e}")
        return False


class StderrHandler(logging.StreamHandler):
    """StreamHandler that writes to the sys.stderr current at emit time."""

    def __init__(self):
        logging.Handler.__init__(self)

    @property
    def stream(self):
        return sys.stderr


def setup_logging(level: str = None) -> None:
    """Configure root logging from LOGGING_CONFIG (diagnostics go to stderr)."""
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter(LOGGING_CONFIG["format"])
    stream = StderrHandler()
    stream.setFormatter(formatter)
    root.addHandler(stream)

    if LOGGING_CONFIG["file"]:
        rotating = logging.handlers.RotatingFileHandler(
            LOGGING_CONFIG["file"],
            maxBytes=LOGGING_CONFIG["max_size"],
            backupCount=LOGGING_CONFIG["backup_count"],
        )
        rotating.setFormatter(formatter)
        root.addHandler(rotating)

    root.setLevel((level or LOGGING_CONFIG["level"]).upper())


if __name__ == "__main__":
    # Test configuration
    setup_logging()
    if validate_config():
        print("✅ Configuration is valid")
    else:
        print("❌ Configuration validation failed")
