"""
Nystrom feature map for the Gaussian kernel exp(-||x - y||^2 / (2 sigma^2)).
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from config import KERNEL_CONFIG, NYSTROM_CONFIG
from isolation_kernel import Embedding, as_points
from utils import ParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class NystromModel:
    """c landmarks with the whitening matrix W^(-1/2) of their Gram matrix."""

    landmarks: np.ndarray
    sigma: float
    whitening: np.ndarray
    seed: int

    def __post_init__(self):
        for name in ("landmarks", "whitening"):
            arr = np.array(getattr(self, name), dtype=np.float64, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_components(self) -> int:
        return self.landmarks.shape[0]

    @property
    def dim(self) -> int:
        return self.landmarks.shape[1]

    @property
    def n_features(self) -> int:
        return self.n_components

    @property
    def scheme(self) -> str:
        return f"nystrom(c={self.n_components},sigma={self.sigma!r})"


def gaussian_gram(a, b, sigma: float) -> np.ndarray:
    """Gaussian kernel values between every row of a and every row of b."""
    return np.exp(-cdist(a, b, "sqeuclidean") / (2.0 * sigma ** 2))


def gaussian_kernel(x, y, sigma: float) -> float:
    """Exact Gaussian kernel between two points."""
    return float(gaussian_gram(np.atleast_2d(x), np.atleast_2d(y), sigma)[0, 0])


def whitening_matrix(gram: np.ndarray, eigen_floor: float = NYSTROM_CONFIG["eigen_floor"]) -> np.ndarray:
    """Symmetric W^(-1/2); eigen-directions below eigen_floor * lambda_max are projected out."""
    gram = (gram + gram.T) / 2.0
    eigenvalues, eigenvectors = linalg.eigh(gram)
    keep = eigenvalues > eigen_floor * eigenvalues.max()
    basis = eigenvectors[:, keep]
    whitening = (basis / np.sqrt(eigenvalues[keep])) @ basis.T
    dropped = int(np.count_nonzero(~keep))
    if dropped:
        logger.debug(f"Nystrom whitening dropped {dropped} of {len(eigenvalues)} eigen-directions")
    return (whitening + whitening.T) / 2.0


def fit_nystrom(points, c: int = NYSTROM_CONFIG["n_components"], sigma: float = NYSTROM_CONFIG["sigma"],
                seed: int = KERNEL_CONFIG["seed"],
                eigen_floor: float = NYSTROM_CONFIG["eigen_floor"]) -> NystromModel:
    """Sample c landmarks without replacement and whiten their Gram matrix."""
    pts = as_points(points)
    if c < 1:
        raise ParameterError(f"n_components must be >= 1, got {c}")
    if sigma <= 0:
        raise ParameterError(f"sigma must be > 0, got {sigma}")
    if pts.shape[0] < c:
        raise ParameterError(f"n_components={c} exceeds the {pts.shape[0]} available points")

    rng = np.random.default_rng(seed)
    landmarks = pts[rng.choice(pts.shape[0], size=c, replace=False)]
    whitening = whitening_matrix(gaussian_gram(landmarks, landmarks, sigma), eigen_floor)
    logger.debug(f"Fitted Nystrom map c={c} sigma={sigma} on {pts.shape[0]} points")
    return NystromModel(landmarks=landmarks, sigma=float(sigma), whitening=whitening, seed=seed)


def embed_points_g(model: NystromModel, points) -> np.ndarray:
    """Dense (N, c) matrix of approximate Gaussian feature maps."""
    pts = as_points(points, model.dim)
    return gaussian_gram(pts, model.landmarks, model.sigma) @ model.whitening


def embed_point_g(model: NystromModel, x) -> Embedding:
    return Embedding(embed_points_g(model, np.atleast_2d(np.asarray(x, dtype=np.float64))).ravel(), model.scheme)
