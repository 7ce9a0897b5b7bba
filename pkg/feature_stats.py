"""
Feature Statistics Module
Builds domain-sensitive instance descriptors from multi-level feature statistics
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from exceptions import PreconditionError


@dataclass(frozen=True)
class FeatureLevelStats:
    """Channel means and population standard deviations of one feature level"""

    level_index: int
    mean_vec: np.ndarray
    std_vec: np.ndarray

    def __post_init__(self):
        if self.level_index < 1:
            raise PreconditionError(f"level_index must be >= 1, got {self.level_index}")
        if self.mean_vec.shape != self.std_vec.shape or self.mean_vec.ndim != 1:
            raise PreconditionError("mean_vec and std_vec must be 1-D vectors of equal length",
                                    code="dimension_mismatch")
        if not (np.all(np.isfinite(self.mean_vec)) and np.all(np.isfinite(self.std_vec))):
            raise PreconditionError("non-finite activations", code="non_finite_activations")
        if np.any(self.std_vec < 0):
            raise PreconditionError("std entries must be >= 0")

    @property
    def channels(self) -> int:
        return int(self.mean_vec.shape[0])


@dataclass(frozen=True)
class Descriptor:
    """One sample's concatenated statistics z plus optional sidecar metadata"""

    sample_id: str
    z: np.ndarray
    gt_count: Optional[float] = None
    true_domain: Optional[int] = None


@dataclass
class DescriptorSet:
    """
    Ordered descriptors sharing one dimension D. Index i is the sample identity
    used by every downstream module.
    """

    descriptors: List[Descriptor]
    D: int
    _matrix: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        seen = set()
        for desc in self.descriptors:
            if desc.z.shape != (self.D,):
                raise PreconditionError(
                    f"descriptor {desc.sample_id!r} has dimension {desc.z.shape}, expected {self.D}",
                    code="dimension_mismatch")
            if desc.sample_id in seen:
                raise PreconditionError(f"duplicate sample id {desc.sample_id!r}", code="duplicate_id")
            seen.add(desc.sample_id)

    def __len__(self) -> int:
        return len(self.descriptors)

    @property
    def N(self) -> int:
        return len(self.descriptors)

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            if self.descriptors:
                self._matrix = np.vstack([d.z for d in self.descriptors]).astype(np.float64)
            else:
                self._matrix = np.zeros((0, self.D))
        return self._matrix

    @property
    def sample_ids(self) -> List[str]:
        return [d.sample_id for d in self.descriptors]

    @property
    def has_count(self) -> bool:
        return bool(self.descriptors) and all(d.gt_count is not None for d in self.descriptors)

    @property
    def has_domain(self) -> bool:
        return bool(self.descriptors) and all(d.true_domain is not None for d in self.descriptors)

    @property
    def gt_counts(self) -> Optional[np.ndarray]:
        if not self.has_count:
            return None
        return np.array([d.gt_count for d in self.descriptors], dtype=np.float64)

    @property
    def true_domains(self) -> Optional[np.ndarray]:
        if not self.has_domain:
            return None
        return np.array([d.true_domain for d in self.descriptors], dtype=np.int64)

    def subset(self, indices: Sequence[int]) -> "DescriptorSet":
        return DescriptorSet([self.descriptors[i] for i in indices], self.D)


def channel_stats(feature_map: np.ndarray, level_index: int = 1) -> FeatureLevelStats:
    """
    Channel-wise mean and population std of a C x H x W feature map

    Args:
        feature_map: activations of one backbone level
        level_index: 1-based level number stored with the stats

    Returns:
        FeatureLevelStats for the level
    """
    fmap = np.asarray(feature_map, dtype=np.float64)
    if fmap.ndim != 3:
        raise PreconditionError(f"feature map must be C x H x W, got shape {fmap.shape}",
                                code="dimension_mismatch")
    C, H, W = fmap.shape
    if C < 1 or H * W < 1:
        raise PreconditionError("empty feature map", code="empty_feature_map")
    if not np.all(np.isfinite(fmap)):
        raise PreconditionError("non-finite activations", code="non_finite_activations")

    flat = fmap.reshape(C, H * W)
    mean_vec = flat.mean(axis=1)
    # ddof=0: divide by H*W
    std_vec = flat.std(axis=1)
    return FeatureLevelStats(level_index=level_index, mean_vec=mean_vec, std_vec=std_vec)


def build_descriptor(stats: Sequence[FeatureLevelStats], sample_id: str,
                     gt_count: Optional[float] = None,
                     true_domain: Optional[int] = None) -> Descriptor:
    """
    Concatenate per-level stats as [mu1, sigma1, ..., muL, sigmaL]

    Levels are ordered by ascending level_index regardless of input order.
    """
    if not stats:
        raise PreconditionError("at least one feature level is required")
    levels = [s.level_index for s in stats]
    if len(set(levels)) != len(levels):
        raise PreconditionError(f"duplicate level indices: {sorted(levels)}", code="duplicate_level")

    parts = []
    for s in sorted(stats, key=lambda s: s.level_index):
        parts.append(s.mean_vec)
        parts.append(s.std_vec)
    z = np.concatenate(parts).astype(np.float64)

    if gt_count is not None and (not np.isfinite(gt_count) or gt_count < 0):
        raise PreconditionError(f"gt_count must be a nonnegative finite number, got {gt_count}")
    return Descriptor(sample_id=str(sample_id), z=z,
                      gt_count=None if gt_count is None else float(gt_count),
                      true_domain=None if true_domain is None else int(true_domain))


def descriptor_from_feature_maps(feature_maps: Sequence[np.ndarray], sample_id: str,
                                 gt_count: Optional[float] = None,
                                 true_domain: Optional[int] = None) -> Descriptor:
    """Stats for every level (numbered 1..L in the given order), then concatenation"""
    stats = [channel_stats(fmap, level_index=i + 1) for i, fmap in enumerate(feature_maps)]
    return build_descriptor(stats, sample_id, gt_count=gt_count, true_domain=true_domain)


def descriptor_set_from_matrix(Z: np.ndarray, sample_ids: Optional[Sequence[str]] = None,
                               gt_counts: Optional[Sequence[float]] = None,
                               true_domains: Optional[Sequence[int]] = None) -> DescriptorSet:
    """
    Wrap an N x D matrix of precomputed descriptors. Ids default to s000000, s000001, ...
    """
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2:
        raise PreconditionError(f"descriptor matrix must be 2-D, got shape {Z.shape}",
                                code="dimension_mismatch")
    if not np.all(np.isfinite(Z)):
        raise PreconditionError("descriptor matrix contains non-finite values", code="non_finite")
    N, D = Z.shape
    if sample_ids is None:
        sample_ids = [f"s{i:06d}" for i in range(N)]
    for name, values in (("sample_ids", sample_ids), ("gt_counts", gt_counts),
                         ("true_domains", true_domains)):
        if values is not None and len(values) != N:
            raise PreconditionError(f"{name} has length {len(values)}, expected {N}",
                                    code="length_mismatch")

    descriptors = []
    for i in range(N):
        descriptors.append(Descriptor(
            sample_id=str(sample_ids[i]),
            z=Z[i].copy(),
            gt_count=None if gt_counts is None else float(gt_counts[i]),
            true_domain=None if true_domains is None else int(true_domains[i]),
        ))
    dset = DescriptorSet(descriptors, D)
    dset._matrix = Z.copy()
    return dset


def describe(dset: DescriptorSet) -> dict:
    """
    Summary of a descriptor set for progress output and reports
    """
    info = {
        'N': dset.N,
        'D': dset.D,
        'has_count': dset.has_count,
        'has_domain': dset.has_domain,
    }
    if dset.has_count:
        counts = dset.gt_counts
        info['count_quantiles'] = {
            q: float(np.quantile(counts, q)) for q in (0.0, 0.25, 0.5, 0.75, 1.0)
        }
    if dset.has_domain:
        domains, sizes = np.unique(dset.true_domains, return_counts=True)
        info['domain_sizes'] = {int(k): int(v) for k, v in zip(domains, sizes)}
    return info
