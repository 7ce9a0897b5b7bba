"""
Ball Split Module
Weighted 2-means used to divide one granular ball into two children
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from exceptions import PreconditionError

logger = logging.getLogger(__name__)

DEFAULT_BETA = 2.0
DEFAULT_EPS = 1e-12
DEFAULT_MAX_ITER = 100
DEFAULT_TOL = 1e-8

# nonnegative, sums to 1
WeightVector = np.ndarray


def uniform_weights(d: int) -> WeightVector:
    return np.full(d, 1.0 / d)


def is_simplex(w: np.ndarray, atol: float = 1e-9) -> bool:
    w = np.asarray(w, dtype=np.float64)
    return bool(np.all(w >= 0) and abs(w.sum() - 1.0) <= atol)


@dataclass
class SeedPair:
    """Row indices of the two farthest-point seeds"""

    first: int
    second: int
    degenerate: bool


@dataclass
class SplitResult:
    """
    Outcome of one weighted 2-means split. Indices are row positions in the
    points passed in; left is the cluster grown from the first seed.
    """

    left_indices: np.ndarray
    right_indices: np.ndarray
    centroids: np.ndarray
    weight: WeightVector
    objective: float
    iterations: int
    objective_history: List[float] = field(default_factory=list)

    @property
    def labels(self) -> np.ndarray:
        n = len(self.left_indices) + len(self.right_indices)
        labels = np.zeros(n, dtype=np.int64)
        labels[self.right_indices] = 1
        return labels


def weighted_distance(z: np.ndarray, c: np.ndarray, w: WeightVector) -> float:
    """sqrt(sum_j w_j (z_j - c_j)^2)"""
    z = np.asarray(z, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if not (z.shape == c.shape == w.shape):
        raise PreconditionError(f"dimension mismatch: z{z.shape}, c{c.shape}, w{w.shape}",
                                code="dimension_mismatch")
    return float(np.sqrt(np.dot(w, (z - c) ** 2)))


def _weighted_sq_dists(X: np.ndarray, c: np.ndarray, w: np.ndarray) -> np.ndarray:
    return ((X - c) ** 2) @ w


def farthest_pair_seed(points: np.ndarray, w: WeightVector, rng_seed: Optional[int] = None) -> SeedPair:
    """
    First seed: farthest point from the ball mean. Second seed: farthest point
    from the first. Ties go to the lowest row index.

    rng_seed is accepted for interface stability; seeding is deterministic.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise PreconditionError("unsplittable: need at least 2 points", code="unsplittable")
    w = np.asarray(w, dtype=np.float64)

    first = int(np.argmax(_weighted_sq_dists(X, X.mean(axis=0), w)))
    dist_to_first = _weighted_sq_dists(X, X[first], w)
    second = int(np.argmax(dist_to_first))
    degenerate = bool(dist_to_first[second] <= 0.0)
    return SeedPair(first=first, second=second, degenerate=degenerate)


def update_weights(scatters: np.ndarray, beta: float = DEFAULT_BETA, eps: float = DEFAULT_EPS) -> WeightVector:
    """
    Inverse-scatter weight update

    w_j = 0 when D_j == 0, otherwise
    w_j = 1 / sum_{t: D_t > 0} ((D_j + eps) / (D_t + eps)) ** (1 / (beta - 1)).
    All-zero scatters give uniform weights.
    """
    D = np.asarray(scatters, dtype=np.float64)
    if not np.all(np.isfinite(D)) or np.any(D < 0):
        raise PreconditionError("scatters must be finite and nonnegative")
    if beta <= 1:
        raise PreconditionError(f"beta must be > 1, got {beta}")

    w = np.zeros_like(D)
    positive = D > 0
    if not positive.any():
        return uniform_weights(D.shape[0])

    Dp = D[positive] + eps
    exponent = 1.0 / (beta - 1.0)
    ratios = (Dp[:, None] / Dp[None, :]) ** exponent
    w[positive] = 1.0 / ratios.sum(axis=1)
    return w


def _scatters(X: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    D = np.zeros(X.shape[1])
    for ell in (0, 1):
        members = X[labels == ell]
        if len(members):
            D += ((members - centroids[ell]) ** 2).sum(axis=0)
    return D


def split_objective(points: np.ndarray, labels: np.ndarray, centroids: np.ndarray,
                    w: WeightVector, beta: float = DEFAULT_BETA) -> float:
    """sum_l sum_i sum_j u_il w_j^beta (z_ij - theta_lj)^2"""
    X = np.asarray(points, dtype=np.float64)
    D = _scatters(X, np.asarray(labels), np.asarray(centroids, dtype=np.float64))
    return float(np.dot(np.asarray(w, dtype=np.float64) ** beta, D))


def _assign(X: np.ndarray, centroids: np.ndarray, w: np.ndarray) -> np.ndarray:
    d0 = _weighted_sq_dists(X, centroids[0], w)
    d1 = _weighted_sq_dists(X, centroids[1], w)
    return (d1 < d0).astype(np.int64)


def _repair_empty(X: np.ndarray, labels: np.ndarray, centroids: np.ndarray, w: np.ndarray) -> np.ndarray:
    for empty in (0, 1):
        if not np.any(labels == empty):
            full = 1 - empty
            dist = _weighted_sq_dists(X, centroids[full], w)
            mover = int(np.argmax(dist))
            labels = labels.copy()
            labels[mover] = empty
            logger.debug("empty cluster %d repaired with row %d", empty, mover)
    return labels


def _centroids(X: np.ndarray, labels: np.ndarray) -> np.ndarray:
    return np.vstack([X[labels == 0].mean(axis=0), X[labels == 1].mean(axis=0)])


def _best_contiguous_cut(values: np.ndarray):
    """Exact 1-D 2-means: scan the n-1 cut points of the sorted values"""
    order = np.argsort(values, kind="stable")
    v = values[order]
    n = len(v)
    prefix = np.cumsum(v)
    prefix_sq = np.cumsum(v * v)
    sizes = np.arange(1, n)
    left_sum, left_sq = prefix[:-1], prefix_sq[:-1]
    right_sum, right_sq = prefix[-1] - left_sum, prefix_sq[-1] - left_sq
    sse = (left_sq - left_sum ** 2 / sizes) + (right_sq - right_sum ** 2 / (n - sizes))
    cut = int(np.argmin(sse)) + 1
    labels = np.ones(n, dtype=np.int64)
    labels[order[:cut]] = 0
    return labels


def weighted_2means(points: np.ndarray, beta: float = DEFAULT_BETA, eps: float = DEFAULT_EPS,
                    max_iter: int = DEFAULT_MAX_ITER, tol: float = DEFAULT_TOL,
                    rng_seed: Optional[int] = None) -> SplitResult:
    """
    Split points into two clusters with a shared learned feature weight

    Args:
        points: n x d member rows of the ball, n >= 2
        beta: weight sharpness, > 1
        eps: smoothing constant of the weight update
        max_iter: cap on alternation rounds
        tol: stop when the relative objective change falls below tol
        rng_seed: passed to the seeding step

    Returns:
        SplitResult with both children nonempty
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2:
        raise PreconditionError(f"points must be 2-D, got shape {X.shape}", code="dimension_mismatch")
    n, d = X.shape
    if beta <= 1:
        raise PreconditionError(f"beta must be > 1, got {beta}")
    if max_iter < 1:
        raise PreconditionError(f"max_iter must be >= 1, got {max_iter}")

    w = uniform_weights(d)
    seeds = farthest_pair_seed(X, w, rng_seed)
    if seeds.degenerate:
        raise PreconditionError("unsplittable: zero-diameter ball", code="unsplittable")

    centroids = X[[seeds.first, seeds.second]].copy()
    labels = None
    history = []
    objective = np.inf
    iterations = 0

    for iterations in range(1, max_iter + 1):
        # assignment under the current weighted distance
        new_labels = _assign(X, centroids, w)
        new_labels = _repair_empty(X, new_labels, centroids, w)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        new_centroids = _centroids(X, new_labels)
        scatter = _scatters(X, new_labels, new_centroids)
        new_w = update_weights(scatter, beta, eps)
        new_objective = float(np.dot(new_w ** beta, scatter))

        if new_objective > objective:
            logger.debug("round %d would raise the objective, keeping previous state", iterations)
            break
        converged = (np.isfinite(objective) and
                     abs(objective - new_objective) <= tol * abs(objective))
        labels, centroids, w, objective = new_labels, new_centroids, new_w, new_objective
        history.append(objective)
        if converged or objective == 0.0:
            break

    if d == 1 and n > 2:
        cut_labels = _best_contiguous_cut(X[:, 0])
        cut_centroids = _centroids(X, cut_labels)
        cut_scatter = _scatters(X, cut_labels, cut_centroids)
        cut_w = update_weights(cut_scatter, beta, eps)
        cut_objective = float(np.dot(cut_w ** beta, cut_scatter))
        if cut_objective < objective:
            # keep the first seed's side as the left child
            if cut_labels[seeds.first] == 1:
                cut_labels = 1 - cut_labels
                cut_centroids = cut_centroids[::-1].copy()
            labels, centroids, w, objective = cut_labels, cut_centroids, cut_w, cut_objective
            history.append(objective)

    return SplitResult(
        left_indices=np.flatnonzero(labels == 0),
        right_indices=np.flatnonzero(labels == 1),
        centroids=centroids,
        weight=w,
        objective=objective,
        iterations=iterations,
        objective_history=history,
    )
