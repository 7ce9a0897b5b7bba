"""
Domain Discovery Module
PCA -> granular-ball division -> K-means on ball centers -> label inheritance,
with sample-level fallback and cross-epoch Hungarian alignment
"""

import json
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.optimize import linear_sum_assignment
from sklearn.cluster import KMeans

from ball_divider import BallSet, DivisionParams, divide
from exceptions import DescriptorFormatError, PreconditionError
from feature_stats import DescriptorSet
from pca_reducer import PcaModel, pca_fit, pca_transform

logger = logging.getLogger(__name__)

# pseudo-domain counts used for the crowd-counting source sets
DATASET_K_PRESETS = {
    'SHA': 4,
    'SHB': 3,
    'QNRF': 6,
    'SHA+SHB': 5,
}


class DomainSource(str, Enum):
    GB_REPRESENTATIVE = "GB_REPRESENTATIVE"
    FALLBACK_SAMPLE_KMEANS = "FALLBACK_SAMPLE_KMEANS"
    RANDOM_BASELINE = "RANDOM_BASELINE"
    FLAT_KMEANS_BASELINE = "FLAT_KMEANS_BASELINE"


@dataclass
class PseudoDomainAssignment:
    """Per-sample pseudo-domain labels of one epoch plus provenance"""

    labels: np.ndarray
    K: int
    epoch: int
    source: DomainSource
    ball_of_sample: Optional[np.ndarray] = None
    permutation_applied: Optional[np.ndarray] = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.K < 1:
            raise PreconditionError(f"K must be >= 1, got {self.K}")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.K):
            raise PreconditionError(f"labels must lie in [0, {self.K})", code="label_range")
        self.source = DomainSource(self.source)

    @property
    def N(self) -> int:
        return int(len(self.labels))

    def to_meta(self) -> dict:
        return {
            'K': self.K,
            'epoch': self.epoch,
            'source': self.source.value,
            'permutation': None if self.permutation_applied is None else self.permutation_applied.tolist(),
        }


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    iterations: int


@dataclass
class DiscoveryRun:
    """Everything one discovery pass produced"""

    assignment: PseudoDomainAssignment
    ballset: BallSet
    pca_model: Optional[PcaModel]
    reduced: np.ndarray
    center_kmeans: Optional[KMeansResult] = None


def _member_means(X: np.ndarray, labels: np.ndarray, weights: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    centers = fallback.copy()
    for k in range(centers.shape[0]):
        members = labels == k
        if members.any():
            centers[k] = np.average(X[members], axis=0, weights=weights[members])
    return centers


def kmeans(points: np.ndarray, K: int, rng_seed: int = 0, max_iter: int = 300, tol: float = 1e-4,
           n_init: int = 10, sample_weight: Optional[np.ndarray] = None) -> KMeansResult:
    """
    Seeded k-means++ initialisation followed by Lloyd iterations

    Args:
        points: M x d matrix, M >= K
        K: number of clusters
        rng_seed: random_state of the k-means++ draws; fixed seed gives identical output
        max_iter: Lloyd iteration cap per initialisation
        tol: center-shift tolerance, as in sklearn
        n_init: initialisations tried, lowest inertia wins
        sample_weight: optional per-point weights (weighted means, weighted inertia)

    Returns:
        KMeansResult whose centers are the (weighted) means of their members
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2:
        raise PreconditionError(f"points must be 2-D, got shape {X.shape}", code="dimension_mismatch")
    M = X.shape[0]
    if K < 1:
        raise PreconditionError(f"K must be >= 1, got {K}")
    if M < K:
        raise PreconditionError(f"insufficient points: {M} points for K={K}", code="insufficient_points")
    weights = np.ones(M) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)

    if K == 1:
        center = np.average(X, axis=0, weights=weights)[None, :]
        inertia = float((weights * ((X - center) ** 2).sum(axis=1)).sum())
        return KMeansResult(labels=np.zeros(M, dtype=np.int64), centers=center, inertia=inertia, iterations=0)

    model = KMeans(n_clusters=K, init="k-means++", n_init=max(1, n_init), max_iter=max_iter, tol=tol,
                   random_state=rng_seed, algorithm="lloyd")
    model.fit(X, sample_weight=weights)
    labels = model.labels_.astype(np.int64)
    centers = _member_means(X, labels, weights, model.cluster_centers_)
    inertia = float((weights * ((X - centers[labels]) ** 2).sum(axis=1)).sum())
    logger.debug("k-means K=%d on %d points: inertia %.6g after %d iterations", K, M, inertia, model.n_iter_)
    return KMeansResult(labels=labels, centers=centers, inertia=inertia, iterations=int(model.n_iter_))


def ball_centers(ballset: BallSet, Z_reduced: np.ndarray) -> np.ndarray:
    """Row m is the mean of the members of the m-th ball in ball_id order"""
    Z = np.asarray(Z_reduced, dtype=np.float64)
    ordered = sorted(ballset.balls, key=lambda b: b.ball_id)
    return np.vstack([Z[b.indices].mean(axis=0) for b in ordered])


def descriptor_matrix(descriptors: Union[DescriptorSet, np.ndarray]) -> np.ndarray:
    if isinstance(descriptors, DescriptorSet):
        return descriptors.matrix
    return np.asarray(descriptors, dtype=np.float64)


def reduce_descriptors(X: np.ndarray, pca_d: Optional[int] = None):
    """Refit PCA and project. A single sample maps to the 1-D origin."""
    if X.shape[0] < 2:
        return None, np.zeros((X.shape[0], 1))
    model = pca_fit(X, pca_d)
    return model, pca_transform(model, X)


def sample_level_kmeans(reduced: np.ndarray, K: int, rng_seed: int = 0) -> KMeansResult:
    """Flat K-means over all reduced descriptors (fallback and baseline share it)"""
    return kmeans(reduced, K, rng_seed=rng_seed)


def align_labels(current: PseudoDomainAssignment, previous: PseudoDomainAssignment) -> PseudoDomainAssignment:
    """
    Relabel `current` by the permutation that maximises label overlap with `previous`

    Among maximum-overlap permutations the one fixing most labels wins, so aligning
    an already aligned assignment returns the identity.
    """
    if current.N != previous.N:
        raise PreconditionError(f"length mismatch: {current.N} vs {previous.N} samples",
                                code="length_mismatch")
    if current.K != previous.K:
        raise PreconditionError(f"cluster count changed: K={current.K} vs previous K={previous.K}",
                                code="cluster_count_changed")
    K = current.K
    overlap = np.zeros((K, K), dtype=np.float64)
    np.add.at(overlap, (current.labels, previous.labels), 1.0)
    score = overlap * (K + 1) + np.eye(K)
    rows, cols = linear_sum_assignment(score, maximize=True)
    permutation = np.empty(K, dtype=np.int64)
    permutation[rows] = cols
    return replace(current, labels=permutation[current.labels], permutation_applied=permutation)


def discover_run(descriptors: Union[DescriptorSet, np.ndarray], K: int, pca_d: Optional[int] = None,
                 div_params: Optional[DivisionParams] = None, rng_seed: int = 0,
                 prev: Optional[PseudoDomainAssignment] = None, epoch: int = 0,
                 threads: int = 1, center_weighting: str = "uniform") -> DiscoveryRun:
    """
    Full discovery pass keeping the intermediate artefacts (PCA model, ball set)
    """
    X = descriptor_matrix(descriptors)
    N = X.shape[0]
    if K < 1:
        raise PreconditionError(f"K must be >= 1, got {K}")
    if N < K:
        raise PreconditionError(f"insufficient points: N={N} < K={K}", code="insufficient_points")
    if center_weighting not in ("uniform", "size"):
        raise PreconditionError(f"unknown center weighting {center_weighting!r}")

    pca_model, reduced = reduce_descriptors(X, pca_d)
    ballset = divide(reduced, div_params, threads=threads)
    owner = ballset.ball_of_sample()
    center_km = None

    if len(ballset) < K:
        logger.debug("only %d balls for K=%d, falling back to sample-level k-means", len(ballset), K)
        km = sample_level_kmeans(reduced, K, rng_seed)
        labels, source = km.labels, DomainSource.FALLBACK_SAMPLE_KMEANS
    else:
        centers = ball_centers(ballset, reduced)
        sizes = np.array([b.size for b in ballset.balls], dtype=np.float64)
        center_km = kmeans(centers, K, rng_seed=rng_seed,
                           sample_weight=sizes if center_weighting == "size" else None)
        row_of_ball = {b.ball_id: row for row, b in enumerate(ballset.balls)}
        ball_rows = np.array([row_of_ball[b] for b in owner], dtype=np.int64)
        labels, source = center_km.labels[ball_rows], DomainSource.GB_REPRESENTATIVE

    assignment = PseudoDomainAssignment(labels=labels, K=K, epoch=epoch, source=source,
                                        ball_of_sample=owner)
    if prev is not None:
        assignment = align_labels(assignment, prev)
    return DiscoveryRun(assignment=assignment, ballset=ballset, pca_model=pca_model,
                        reduced=reduced, center_kmeans=center_km)


def discover(descriptors: Union[DescriptorSet, np.ndarray], K: int, pca_d: Optional[int] = None,
             div_params: Optional[DivisionParams] = None, rng_seed: int = 0,
             prev: Optional[PseudoDomainAssignment] = None, epoch: int = 0,
             threads: int = 1, center_weighting: str = "uniform") -> PseudoDomainAssignment:
    """
    Granular-ball guided pseudo-domain discovery

    Args:
        descriptors: DescriptorSet or N x D matrix
        K: number of pseudo-domains, 1 <= K <= N
        pca_d: reduced dimension (default min(32, D, N-1))
        div_params: DivisionParams for the ball division
        rng_seed: seed of the K-means initialisation
        prev: previous epoch's assignment; labels are aligned to it when given
        epoch: epoch number recorded in the assignment
        threads: worker threads for the division
        center_weighting: 'uniform' (one vote per ball) or 'size'

    Returns:
        PseudoDomainAssignment with provenance
    """
    return discover_run(descriptors, K, pca_d=pca_d, div_params=div_params, rng_seed=rng_seed,
                        prev=prev, epoch=epoch, threads=threads,
                        center_weighting=center_weighting).assignment


def suggest_k(N: int):
    """
    K0 = N ** (1/4) and the integer candidates round(K0) - 1 .. round(K0) + 1, clipped to >= 1
    """
    if N < 1:
        raise PreconditionError(f"N must be >= 1, got {N}")
    k0 = N ** 0.25
    centre = int(math.floor(k0 + 0.5))
    candidates = sorted({max(1, centre + delta) for delta in (-1, 0, 1)})
    return k0, candidates


def resolve_k(K: Optional[int] = None, dataset_tag: Optional[str] = None,
              N: Optional[int] = None, k_auto: bool = False) -> int:
    """Explicit K, then dataset preset, then the centre candidate of suggest_k"""
    if K is not None:
        return int(K)
    if dataset_tag is not None:
        if dataset_tag not in DATASET_K_PRESETS:
            raise PreconditionError(f"unknown dataset tag {dataset_tag!r}; known: {sorted(DATASET_K_PRESETS)}")
        return DATASET_K_PRESETS[dataset_tag]
    if k_auto and N is not None:
        k0, _ = suggest_k(N)
        return max(1, int(math.floor(k0 + 0.5)))
    raise PreconditionError("K is not set: pass K, a dataset tag or enable k_auto")


def save_assignment(assignment: PseudoDomainAssignment, sample_ids: Sequence[str], out_dir,
                    extra_meta: Optional[dict] = None, prefix: str = "labels"):
    """
    Write <prefix>.csv (sample_id,label,ball_id) and meta.json next to it
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if len(sample_ids) != assignment.N:
        raise PreconditionError("sample id count does not match the assignment", code="length_mismatch")
    ball_ids = (pd.array([None] * assignment.N, dtype="Int64") if assignment.ball_of_sample is None
                else pd.array(assignment.ball_of_sample, dtype="Int64"))
    df = pd.DataFrame({'sample_id': list(sample_ids), 'label': assignment.labels, 'ball_id': ball_ids})
    labels_path = out_dir / f"{prefix}.csv"
    df.to_csv(labels_path, index=False, lineterminator="\n")

    meta = assignment.to_meta()
    if extra_meta:
        meta.update(extra_meta)
    meta_path = out_dir / ("meta.json" if prefix == "labels" else f"{prefix}_meta.json")
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return labels_path, meta_path


def load_assignment(path):
    """
    Read a label CSV (and its meta JSON when present)

    Returns:
        (PseudoDomainAssignment, sample_ids)
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Assignment file not found: {path}")
    df = pd.read_csv(path, dtype={'sample_id': str})
    for column in ('sample_id', 'label'):
        if column not in df.columns:
            raise DescriptorFormatError(f"assignment file lacks column {column!r}", code="header_mismatch")
    try:
        labels = df['label'].to_numpy(dtype=np.int64)
    except (TypeError, ValueError) as e:
        raise DescriptorFormatError(f"unparseable label: {e}", code="non_finite")
    has_balls = 'ball_id' in df.columns and df['ball_id'].notna().all() and len(df)
    ball_of_sample = df['ball_id'].to_numpy(dtype=np.int64) if has_balls else None

    meta_path = path.parent / ("meta.json" if path.stem == "labels" else f"{path.stem}_meta.json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    K = int(meta.get('K', labels.max() + 1 if len(labels) else 1))
    # without metadata, ball ids are the only provenance hint
    default_source = (DomainSource.GB_REPRESENTATIVE if has_balls
                      else DomainSource.FALLBACK_SAMPLE_KMEANS)
    permutation = meta.get('permutation')
    assignment = PseudoDomainAssignment(
        labels=labels, K=K, epoch=int(meta.get('epoch', 0)),
        source=meta.get('source', default_source),
        ball_of_sample=ball_of_sample,
        permutation_applied=None if permutation is None else np.asarray(permutation, dtype=np.int64),
    )
    return assignment, df['sample_id'].tolist()


class LatentDomainDiscoverer:
    """
    Online discoverer: call update() once per epoch, each new assignment is
    aligned to the previous one
    """

    def __init__(self, K: int, pca_d: Optional[int] = None, div_params: Optional[DivisionParams] = None,
                 rng_seed: int = 0, threads: int = 1, center_weighting: str = "uniform"):
        self.K = K
        self.pca_d = pca_d
        self.div_params = div_params or DivisionParams()
        self.rng_seed = rng_seed
        self.threads = threads
        self.center_weighting = center_weighting
        self.previous: Optional[PseudoDomainAssignment] = None
        self.history: List[PseudoDomainAssignment] = []
        self.last_run: Optional[DiscoveryRun] = None

    def update(self, descriptors: Union[DescriptorSet, np.ndarray], epoch: Optional[int] = None) -> PseudoDomainAssignment:
        epoch = len(self.history) if epoch is None else epoch
        run = discover_run(descriptors, self.K, pca_d=self.pca_d, div_params=self.div_params,
                           rng_seed=self.rng_seed, prev=self.previous, epoch=epoch,
                           threads=self.threads, center_weighting=self.center_weighting)
        self.last_run = run
        self.previous = run.assignment
        self.history.append(run.assignment)
        return run.assignment
