"""
PCA Reducer Module
Linear reduction of descriptors from D to d dimensions before ball division
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from exceptions import PreconditionError

logger = logging.getLogger(__name__)

DEFAULT_MAX_PCA_DIM = 32


@dataclass(frozen=True)
class PcaModel:
    """
    Fitted PCA map. components rows are unit-norm principal directions,
    explained_variance is non-increasing.
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    total_variance: float = 0.0
    rank_deficient: bool = False

    @property
    def D(self) -> int:
        return int(self.mean.shape[0])

    @property
    def d(self) -> int:
        return int(self.components.shape[0])

    def to_dict(self) -> dict:
        return {
            'mean': self.mean.tolist(),
            'components': self.components.tolist(),
            'explained_variance': self.explained_variance.tolist(),
            'total_variance': self.total_variance,
            'rank_deficient': self.rank_deficient,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "PcaModel":
        return cls(
            mean=np.asarray(payload['mean'], dtype=np.float64),
            components=np.asarray(payload['components'], dtype=np.float64),
            explained_variance=np.asarray(payload['explained_variance'], dtype=np.float64),
            total_variance=float(payload.get('total_variance', 0.0)),
            rank_deficient=bool(payload.get('rank_deficient', False)),
        )


def default_pca_dim(N: int, D: int) -> int:
    """min(32, D, N-1), never below 1"""
    return max(1, min(DEFAULT_MAX_PCA_DIM, D, N - 1))


def pca_fit(X: np.ndarray, d: int = None) -> PcaModel:
    """
    Fit PCA on the population (1/N) covariance of X

    Args:
        X: N x D descriptor matrix, N >= 2
        d: number of components, 1 <= d <= min(N, D); default_pca_dim when None

    Returns:
        PcaModel with the top-d eigenvectors. Each component's largest-magnitude
        entry is made nonnegative.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise PreconditionError(f"X must be 2-D, got shape {X.shape}", code="dimension_mismatch")
    N, D = X.shape
    if N < 2:
        raise PreconditionError(f"PCA needs at least 2 samples, got {N}", code="insufficient_points")
    if d is None:
        d = default_pca_dim(N, D)
    if not 1 <= d <= min(N, D):
        raise PreconditionError(f"PCA dimension d={d} out of range [1, {min(N, D)}]", code="pca_dim")

    mean = X.mean(axis=0)
    Xc = X - mean
    cov = (Xc.T @ Xc) / N
    cov = 0.5 * (cov + cov.T)

    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals, kind="stable")[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]

    components = eigvecs[:, :d].T.copy()
    for row in components:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    explained = eigvals[:d].copy()

    total_variance = float(np.trace(cov))
    tol = 1e-12 * max(total_variance, 1.0)
    rank = int(np.sum(eigvals > tol))
    rank_deficient = rank < d
    if rank_deficient:
        # directions beyond the rank carry no variance
        explained[rank:] = 0.0
        logger.debug("PCA rank %d below requested d=%d", rank, d)

    return PcaModel(mean=mean, components=components, explained_variance=explained,
                    total_variance=total_variance, rank_deficient=rank_deficient)


def pca_transform(model: PcaModel, X: np.ndarray) -> np.ndarray:
    """Rows of the result are components . (x - mean)"""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.D:
        raise PreconditionError(f"expected {model.D} columns, got {X.shape[1]}", code="dimension_mismatch")
    return (X - model.mean) @ model.components.T


def pca_inverse_transform(model: PcaModel, Y: np.ndarray) -> np.ndarray:
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[None, :]
    if Y.shape[1] != model.d:
        raise PreconditionError(f"expected {model.d} columns, got {Y.shape[1]}", code="dimension_mismatch")
    return Y @ model.components + model.mean


def save_pca_model(model: PcaModel, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model.to_dict(), indent=2))


def load_pca_model(path) -> PcaModel:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"PCA model file not found: {path}")
    return PcaModel.from_dict(json.loads(path.read_text()))
