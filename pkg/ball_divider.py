"""
Ball Divider Module
Coarse-to-fine granular-ball division with compactness-gated split acceptance
"""

import json
import logging
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import List, Optional

import numpy as np
from joblib import Parallel, delayed

from ball_split import (DEFAULT_BETA, DEFAULT_EPS, DEFAULT_MAX_ITER, DEFAULT_TOL,
                        uniform_weights, weighted_2means)
from exceptions import ConfigError, PreconditionError

logger = logging.getLogger(__name__)

LEAF_REJECTED = "rejected"
LEAF_DEPTH_CAP = "depth_cap"
LEAF_MIN_BALL = "min_ball"
LEAF_UNSPLITTABLE = "unsplittable"


@dataclass
class DivisionParams:
    """
    Knobs of the division. d_max=None removes the depth cap.
    """

    tau: float = 1.05
    beta: float = DEFAULT_BETA
    eps: float = DEFAULT_EPS
    d_max: Optional[int] = 12
    min_ball: int = 4
    rng_seed: int = 0
    max_iter: int = DEFAULT_MAX_ITER
    tol: float = DEFAULT_TOL

    def validate(self) -> "DivisionParams":
        if math.isnan(self.tau) or self.tau < 0:
            raise ConfigError(f"tau must be a nonnegative number, got {self.tau}")
        if not self.beta > 1:
            raise ConfigError(f"beta must be > 1, got {self.beta}")
        if not self.eps > 0:
            raise ConfigError(f"eps must be > 0, got {self.eps}")
        if self.d_max is not None and self.d_max < 0:
            raise ConfigError(f"d_max must be >= 0, got {self.d_max}")
        if self.min_ball < 2:
            raise ConfigError(f"min_ball must be >= 2, got {self.min_ball}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class GranularBall:
    """One node of the division tree: members, center, weight and compactness Dm"""

    ball_id: int
    indices: np.ndarray
    center: np.ndarray
    weight: np.ndarray
    depth: int
    compactness: float
    leaf_reason: Optional[str] = None

    @property
    def size(self) -> int:
        return int(len(self.indices))

    def to_dict(self) -> dict:
        return {
            'ball_id': self.ball_id,
            'depth': self.depth,
            'center': self.center.tolist(),
            'weight': self.weight.tolist(),
            'compactness': self.compactness,
            'indices': self.indices.tolist(),
            'leaf_reason': self.leaf_reason,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "GranularBall":
        return cls(
            ball_id=int(payload['ball_id']),
            indices=np.asarray(payload['indices'], dtype=np.int64),
            center=np.asarray(payload['center'], dtype=np.float64),
            weight=np.asarray(payload['weight'], dtype=np.float64),
            depth=int(payload['depth']),
            compactness=float(payload['compactness']),
            leaf_reason=payload.get('leaf_reason'),
        )


@dataclass
class SplitRecord:
    """
    An accepted split with the members and weights needed to recheck the
    acceptance rule: the parent is left_indices + right_indices measured with
    parent_weight, the children are measured with the learned child_weight.
    """

    parent_id: int
    left_id: int
    right_id: int
    depth: int
    parent_dm: float
    child_dm: float
    left_indices: np.ndarray
    right_indices: np.ndarray
    parent_weight: np.ndarray
    child_weight: np.ndarray

    @property
    def parent_indices(self) -> np.ndarray:
        return np.sort(np.concatenate([self.left_indices, self.right_indices]))

    def to_dict(self) -> dict:
        return {
            'parent_id': self.parent_id,
            'left_id': self.left_id,
            'right_id': self.right_id,
            'depth': self.depth,
            'parent_dm': self.parent_dm,
            'child_dm': self.child_dm,
            'left_indices': self.left_indices.tolist(),
            'right_indices': self.right_indices.tolist(),
            'parent_weight': self.parent_weight.tolist(),
            'child_weight': self.child_weight.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SplitRecord":
        return cls(
            parent_id=int(payload['parent_id']),
            left_id=int(payload['left_id']),
            right_id=int(payload['right_id']),
            depth=int(payload['depth']),
            parent_dm=float(payload['parent_dm']),
            child_dm=float(payload['child_dm']),
            left_indices=np.asarray(payload['left_indices'], dtype=np.int64),
            right_indices=np.asarray(payload['right_indices'], dtype=np.int64),
            parent_weight=np.asarray(payload['parent_weight'], dtype=np.float64),
            child_weight=np.asarray(payload['child_weight'], dtype=np.float64),
        )


@dataclass
class BallSet:
    """Leaf partition of {0..n-1}, leaves ordered by ball_id"""

    balls: List[GranularBall]
    n: int
    params_echo: DivisionParams
    splits: List[SplitRecord] = field(default_factory=list)
    rejected: int = 0

    def __len__(self) -> int:
        return len(self.balls)

    def ball_of_sample(self) -> np.ndarray:
        owner = np.full(self.n, -1, dtype=np.int64)
        for ball in self.balls:
            owner[ball.indices] = ball.ball_id
        return owner

    def to_dict(self) -> dict:
        return {
            'n': self.n,
            'params': self.params_echo.to_dict(),
            'balls': [b.to_dict() for b in self.balls],
            'splits': [s.to_dict() for s in self.splits],
            'rejected': self.rejected,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "BallSet":
        return cls(
            balls=[GranularBall.from_dict(b) for b in payload['balls']],
            n=int(payload['n']),
            params_echo=DivisionParams(**payload['params']),
            splits=[SplitRecord.from_dict(s) for s in payload.get('splits', [])],
            rejected=int(payload.get('rejected', 0)),
        )


def ballset_to_json(ballset: BallSet, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(ballset.to_dict()))


def ballset_from_json(path) -> BallSet:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Ball set file not found: {path}")
    return BallSet.from_dict(json.loads(path.read_text()))


def dm(members: np.ndarray, w: np.ndarray) -> float:
    """
    Mean weighted deviation of the members from their mean

    Args:
        members: m x d rows, m >= 1
        w: feature weights of length d
    """
    X = np.asarray(members, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise PreconditionError("compactness of an empty ball is undefined", code="empty_ball")
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (X.shape[1],):
        raise PreconditionError(f"weight length {w.shape} does not match d={X.shape[1]}",
                                code="dimension_mismatch")
    deviations = np.sqrt(((X - X.mean(axis=0)) ** 2) @ w)
    return float(deviations.mean())


def child_dm(b1: np.ndarray, b2: np.ndarray, w: np.ndarray) -> float:
    """(|B1| Dm(B1;w) + |B2| Dm(B2;w)) / (|B1| + |B2|)"""
    n1, n2 = len(b1), len(b2)
    if n1 == 0 or n2 == 0:
        raise PreconditionError("child ball is empty", code="empty_ball")
    return (n1 * dm(b1, w) + n2 * dm(b2, w)) / (n1 + n2)


def _accepts(tau: float, children_dm: float, parent_dm: float) -> bool:
    if math.isinf(tau):
        return True
    return children_dm < tau * parent_dm


@dataclass
class _Attempt:
    reason: Optional[str]
    left: Optional[np.ndarray] = None
    right: Optional[np.ndarray] = None
    weight: Optional[np.ndarray] = None
    child_dm: float = 0.0


def _attempt_split(Z: np.ndarray, ball: GranularBall, params: DivisionParams) -> _Attempt:
    if ball.size < max(2, params.min_ball):
        return _Attempt(LEAF_MIN_BALL)
    if params.d_max is not None and ball.depth >= params.d_max:
        return _Attempt(LEAF_DEPTH_CAP)
    points = Z[ball.indices]
    try:
        split = weighted_2means(points, beta=params.beta, eps=params.eps,
                                max_iter=params.max_iter, tol=params.tol,
                                rng_seed=params.rng_seed)
    except PreconditionError as e:
        if e.code != "unsplittable":
            raise
        return _Attempt(LEAF_UNSPLITTABLE)

    left, right = ball.indices[split.left_indices], ball.indices[split.right_indices]
    children = child_dm(points[split.left_indices], points[split.right_indices], split.weight)
    if not _accepts(params.tau, children, ball.compactness):
        return _Attempt(LEAF_REJECTED, child_dm=children)
    return _Attempt(None, left=left, right=right, weight=split.weight, child_dm=children)


def _make_ball(Z: np.ndarray, ball_id: int, indices: np.ndarray, weight: np.ndarray, depth: int) -> GranularBall:
    members = Z[indices]
    return GranularBall(ball_id=ball_id, indices=indices, center=members.mean(axis=0),
                        weight=weight, depth=depth, compactness=dm(members, weight))


def divide(Z_reduced: np.ndarray, params: DivisionParams = None, threads: int = 1) -> BallSet:
    """
    Hierarchical division of the reduced descriptors

    Balls are processed breadth-first. Siblings of one level may be split in
    parallel; ids are assigned afterwards in queue order, so the result is the
    same for every thread count.

    Args:
        Z_reduced: N x d reduced descriptors
        params: DivisionParams, defaults when None
        threads: worker threads for sibling splits

    Returns:
        BallSet whose leaves partition {0..N-1}
    """
    params = (params or DivisionParams()).validate()
    Z = np.asarray(Z_reduced, dtype=np.float64)
    if Z.ndim != 2:
        raise PreconditionError(f"Z_reduced must be 2-D, got shape {Z.shape}", code="dimension_mismatch")
    N, d = Z.shape
    if N == 0:
        raise PreconditionError("empty dataset", code="empty_dataset")

    root = _make_ball(Z, 0, np.arange(N, dtype=np.int64), uniform_weights(d), 0)
    next_id = 1
    queue = [root]
    leaves, splits = [], []
    rejected = 0

    with Parallel(n_jobs=max(1, threads), prefer="threads") as pool:
        while queue:
            if threads > 1 and len(queue) > 1:
                attempts = pool(delayed(_attempt_split)(Z, ball, params) for ball in queue)
            else:
                attempts = [_attempt_split(Z, ball, params) for ball in queue]

            next_queue = []
            for ball, attempt in zip(queue, attempts):
                if attempt.reason is not None:
                    ball.leaf_reason = attempt.reason
                    rejected += attempt.reason == LEAF_REJECTED
                    leaves.append(ball)
                    continue
                left = _make_ball(Z, next_id, attempt.left, attempt.weight, ball.depth + 1)
                right = _make_ball(Z, next_id + 1, attempt.right, attempt.weight, ball.depth + 1)
                splits.append(SplitRecord(parent_id=ball.ball_id, left_id=left.ball_id,
                                          right_id=right.ball_id, depth=ball.depth,
                                          parent_dm=ball.compactness, child_dm=attempt.child_dm,
                                          left_indices=attempt.left, right_indices=attempt.right,
                                          parent_weight=ball.weight, child_weight=attempt.weight))
                next_id += 2
                next_queue.extend([left, right])
            queue = next_queue

    leaves.sort(key=lambda b: b.ball_id)
    logger.debug("division produced %d leaves from %d accepted splits", len(leaves), len(splits))
    return BallSet(balls=leaves, n=N, params_echo=params, splits=splits, rejected=rejected)


def division_report(ballset: BallSet) -> dict:
    """Leaf count, split counts, depth histogram, size range and leaf reasons"""
    depths = [b.depth for b in ballset.balls]
    sizes = [b.size for b in ballset.balls]
    reasons = {}
    for ball in ballset.balls:
        reasons[ball.leaf_reason] = reasons.get(ball.leaf_reason, 0) + 1
    return {
        'num_balls': len(ballset.balls),
        'accepted_splits': len(ballset.splits),
        'rejected_splits': ballset.rejected,
        'max_depth': max(depths),
        'depth_histogram': {int(k): int(v) for k, v in zip(*np.unique(depths, return_counts=True))},
        'size_min': int(min(sizes)),
        'size_median': float(np.median(sizes)),
        'size_max': int(max(sizes)),
        'leaf_reasons': reasons,
    }


class GranularBallDivider:
    """
    Division runner that keeps a report of the last division
    """

    def __init__(self, params: DivisionParams = None, threads: int = 1):
        self.params = (params or DivisionParams()).validate()
        self.threads = threads
        self.report = {}

    def divide(self, Z_reduced: np.ndarray) -> BallSet:
        ballset = divide(Z_reduced, self.params, threads=self.threads)
        self.report = division_report(ballset)
        return ballset

    def get_division_report(self) -> dict:
        return self.report
