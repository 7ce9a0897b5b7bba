"""
Evaluation Module
Count stratification, adjusted Rand index, post-alignment label churn and the
random / flat K-means baseline partitions
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np
from sklearn.metrics import adjusted_rand_score

from domain_discovery import (DomainSource, PseudoDomainAssignment, reduce_descriptors,
                              sample_level_kmeans, descriptor_matrix)
from exceptions import PreconditionError
from feature_stats import DescriptorSet

logger = logging.getLogger(__name__)


@dataclass
class StratificationReport:
    """Per-domain median GT counts with their range and population spread"""

    medians: np.ndarray
    delta_med: float
    sigma_med: float

    def to_dict(self) -> dict:
        return {
            'medians': self.medians.tolist(),
            'delta_med': self.delta_med,
            'sigma_med': self.sigma_med,
        }


def lower_median(values: np.ndarray) -> float:
    ordered = np.sort(np.asarray(values, dtype=np.float64))
    return float(ordered[(len(ordered) - 1) // 2])


def count_stratification(labels: Sequence[int], gt_counts: Sequence[float], K: int) -> StratificationReport:
    """
    Median ground-truth count per pseudo-domain, then max - min and the
    population std of those medians. Even-sized groups use the lower median.
    """
    labels = np.asarray(labels, dtype=np.int64)
    counts = np.asarray(gt_counts, dtype=np.float64)
    if len(labels) != len(counts):
        raise PreconditionError(f"length mismatch: {len(labels)} labels vs {len(counts)} counts",
                                code="length_mismatch")
    empty = [k for k in range(K) if not np.any(labels == k)]
    if empty:
        raise PreconditionError(f"empty pseudo-domains: {empty}", code="empty_domain")
    medians = np.array([lower_median(counts[labels == k]) for k in range(K)])
    return StratificationReport(medians=medians,
                                delta_med=float(medians.max() - medians.min()),
                                sigma_med=float(medians.std()))


def adjusted_rand_index(a: Sequence[int], b: Sequence[int]) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise PreconditionError(f"length mismatch: {len(a)} vs {len(b)} labels", code="length_mismatch")
    return float(adjusted_rand_score(a, b))


def label_churn(aligned_epochs: List[PseudoDomainAssignment]) -> float:
    """
    Mean over consecutive epochs of the fraction of samples whose label changed.
    Every epoch after the first must carry its alignment permutation.
    """
    if len(aligned_epochs) < 2:
        raise PreconditionError("label churn needs at least 2 epochs")
    N = aligned_epochs[0].N
    for position, assignment in enumerate(aligned_epochs):
        if assignment.N != N:
            raise PreconditionError(f"length mismatch at epoch position {position}", code="length_mismatch")
        if position > 0 and assignment.permutation_applied is None:
            raise PreconditionError(
                f"unaligned inputs (missing permutation metadata) at epoch position {position}",
                code="unaligned")
    changes = [float(np.mean(prev.labels != cur.labels))
               for prev, cur in zip(aligned_epochs[:-1], aligned_epochs[1:])]
    return float(np.mean(changes))


def random_partition(N: int, K: int, rng_seed: int = 0, epoch: int = 0) -> PseudoDomainAssignment:
    """Uniform shuffle split into K groups whose sizes differ by at most one"""
    if K < 1:
        raise PreconditionError(f"K must be >= 1, got {K}")
    if N < K:
        raise PreconditionError(f"insufficient points: N={N} < K={K}", code="insufficient_points")
    rng = np.random.default_rng(rng_seed)
    labels = rng.permutation(np.arange(N) % K)
    return PseudoDomainAssignment(labels=labels, K=K, epoch=epoch, source=DomainSource.RANDOM_BASELINE)


def flat_kmeans_partition(descriptors: Union[DescriptorSet, np.ndarray], K: int, pca_d: Optional[int] = None,
                          rng_seed: int = 0, epoch: int = 0) -> PseudoDomainAssignment:
    """PCA refit and K-means over all samples (the clustering baseline)"""
    X = descriptor_matrix(descriptors)
    if K < 1:
        raise PreconditionError(f"K must be >= 1, got {K}")
    if X.shape[0] < K:
        raise PreconditionError(f"insufficient points: N={X.shape[0]} < K={K}", code="insufficient_points")
    _, reduced = reduce_descriptors(X, pca_d)
    km = sample_level_kmeans(reduced, K, rng_seed)
    return PseudoDomainAssignment(labels=km.labels, K=K, epoch=epoch, source=DomainSource.FLAT_KMEANS_BASELINE)


def evaluate_assignment(assignment: PseudoDomainAssignment, gt_counts: Optional[Sequence[float]] = None,
                        true_domains: Optional[Sequence[int]] = None, mask_outliers: bool = True) -> dict:
    """
    Summary of one assignment: group sizes, count stratification when counts
    are known, ARI against true domains when they are known. Samples whose
    true domain is negative (outliers) are left out of the ARI when
    mask_outliers is set.
    """
    sizes = np.bincount(assignment.labels, minlength=assignment.K)
    summary = {
        'N': assignment.N,
        'K': assignment.K,
        'epoch': assignment.epoch,
        'source': assignment.source.value,
        'group_sizes': sizes.tolist(),
        'empty_domains': [int(k) for k in np.flatnonzero(sizes == 0)],
        'stratification': None,
        'ari': None,
    }
    if gt_counts is not None and not summary['empty_domains']:
        summary['stratification'] = count_stratification(assignment.labels, gt_counts, assignment.K).to_dict()
    if true_domains is not None:
        truth = np.asarray(true_domains, dtype=np.int64)
        if len(truth) != assignment.N:
            raise PreconditionError(f"length mismatch: {assignment.N} labels vs {len(truth)} true domains",
                                    code="length_mismatch")
        keep = truth >= 0 if mask_outliers else np.ones(len(truth), dtype=bool)
        if keep.any():
            summary['ari'] = adjusted_rand_index(assignment.labels[keep], truth[keep])
    return summary
