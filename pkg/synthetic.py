"""
Synthetic latent-domain mixtures for desk-scale validation
Gaussian domains with their own count regimes, uniform outliers and
per-epoch representation drift
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from exceptions import PreconditionError
from feature_stats import DescriptorSet, descriptor_set_from_matrix

OUTLIER_DOMAIN = -1


@dataclass
class DomainSpec:
    center: np.ndarray
    scale: float = 1.0
    n: int = 100
    count_mean: float = 100.0
    count_sigma: float = 0.5

    def to_dict(self) -> dict:
        return {
            'center': np.asarray(self.center, dtype=np.float64).tolist(),
            'scale': self.scale,
            'n': self.n,
            'count_mean': self.count_mean,
            'count_sigma': self.count_sigma,
        }


@dataclass
class SynthSpec:
    """
    A latent-domain mixture. outlier_fraction is the share of the final set
    drawn uniformly over the inlier bounding box inflated by outlier_inflation.
    """

    domains: List[DomainSpec] = field(default_factory=list)
    outlier_fraction: float = 0.0
    drift_sigma: float = 0.0
    rng_seed: int = 0
    outlier_inflation: float = 1.5

    @property
    def K_true(self) -> int:
        return len(self.domains)

    @property
    def dim(self) -> int:
        return int(np.asarray(self.domains[0].center).shape[0])

    def validate(self) -> "SynthSpec":
        if not self.domains:
            raise PreconditionError("a mixture needs at least one domain")
        for k, domain in enumerate(self.domains):
            if domain.n < 1:
                raise PreconditionError(f"domain {k} has sample count {domain.n} < 1")
            if np.asarray(domain.center).shape != (self.dim,):
                raise PreconditionError(f"domain {k} center has the wrong dimension", code="dimension_mismatch")
            if domain.scale < 0 or domain.count_mean <= 0 or domain.count_sigma < 0:
                raise PreconditionError(f"domain {k} has invalid scale or count regime")
        if not 0.0 <= self.outlier_fraction < 1.0:
            raise PreconditionError(f"outlier_fraction must lie in [0, 1), got {self.outlier_fraction}")
        if self.drift_sigma < 0:
            raise PreconditionError(f"drift_sigma must be >= 0, got {self.drift_sigma}")
        return self

    def to_dict(self) -> dict:
        return {
            'domains': [d.to_dict() for d in self.domains],
            'outlier_fraction': self.outlier_fraction,
            'drift_sigma': self.drift_sigma,
            'rng_seed': self.rng_seed,
            'outlier_inflation': self.outlier_inflation,
        }


def generate_mixture(spec: SynthSpec) -> DescriptorSet:
    """
    Draw the mixture. Ground-truth counts are lognormal around each domain's
    count regime; outliers carry true domain -1 and follow the pooled regime.

    Returns:
        DescriptorSet with gt_counts and true_domains filled
    """
    spec.validate()
    rng = np.random.default_rng(spec.rng_seed)
    blocks, counts, domains = [], [], []
    for k, domain in enumerate(spec.domains):
        center = np.asarray(domain.center, dtype=np.float64)
        blocks.append(center + domain.scale * rng.standard_normal((domain.n, spec.dim)))
        counts.append(rng.lognormal(math.log(domain.count_mean), domain.count_sigma, domain.n))
        domains.append(np.full(domain.n, k, dtype=np.int64))

    n_inliers = sum(d.n for d in spec.domains)
    n_outliers = int(round(spec.outlier_fraction * n_inliers / (1.0 - spec.outlier_fraction)))
    if n_outliers:
        inliers = np.vstack(blocks)
        low, high = inliers.min(axis=0), inliers.max(axis=0)
        middle, half = (low + high) / 2, (high - low) / 2 * spec.outlier_inflation
        blocks.append(rng.uniform(middle - half, middle + half, size=(n_outliers, spec.dim)))
        pooled = float(np.median([d.count_mean for d in spec.domains]))
        counts.append(rng.lognormal(math.log(pooled), 1.0, n_outliers))
        domains.append(np.full(n_outliers, OUTLIER_DOMAIN, dtype=np.int64))

    return descriptor_set_from_matrix(np.vstack(blocks), gt_counts=np.concatenate(counts),
                                      true_domains=np.concatenate(domains))


def _random_plane_rotation(rng: np.random.Generator, d: int, angle: float) -> np.ndarray:
    basis, _ = np.linalg.qr(rng.standard_normal((d, 2)))
    u, v = basis[:, 0], basis[:, 1]
    plane = np.outer(u, u) + np.outer(v, v)
    return np.eye(d) + (math.cos(angle) - 1.0) * plane + math.sin(angle) * (np.outer(v, u) - np.outer(u, v))


def apply_drift(X: np.ndarray, epoch: int, drift_sigma: float, rng_seed: int = 0) -> np.ndarray:
    """
    One epoch of simulated representation drift

    A shared rotation about the data mean in a random 2-D plane (angle drawn
    with std drift_sigma), a shared translation with std drift_sigma * sigma_data
    and i.i.d. noise with std drift_sigma * sigma_data / 2. sigma_data is the
    pooled std of X. The random stream is keyed on (rng_seed, epoch) and all
    draws scale linearly with drift_sigma.
    """
    X = np.asarray(X, dtype=np.float64)
    if drift_sigma < 0:
        raise PreconditionError(f"drift_sigma must be >= 0, got {drift_sigma}")
    if drift_sigma == 0:
        return X.copy()
    N, d = X.shape
    rng = np.random.default_rng([rng_seed, epoch])
    sigma_data = float(np.sqrt(X.var(axis=0).mean()))
    mean = X.mean(axis=0)

    angle = drift_sigma * rng.standard_normal()
    rotation = _random_plane_rotation(rng, d, angle) if d >= 2 else np.eye(d)
    translation = drift_sigma * sigma_data * rng.standard_normal(d)
    noise = (drift_sigma * sigma_data / 2.0) * rng.standard_normal((N, d))
    return mean + (X - mean) @ rotation.T + translation + noise


def table4_style_spec(K: int = 4, dim: int = 16, n_per_domain: int = 100, seed: int = 0,
                      separation: float = 4.0, count_base: float = 50.0, count_ratio: float = 2.5,
                      count_sigma: float = 0.6, outlier_fraction: float = 0.0,
                      drift_sigma: float = 0.0) -> SynthSpec:
    """
    Domains whose appearance clusters carry distinct long-tailed count regimes
    (count_base * count_ratio ** k)
    """
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((K, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    domains = [DomainSpec(center=separation * directions[k], scale=1.0, n=n_per_domain,
                          count_mean=count_base * count_ratio ** k, count_sigma=count_sigma)
               for k in range(K)]
    return SynthSpec(domains=domains, outlier_fraction=outlier_fraction, drift_sigma=drift_sigma,
                     rng_seed=seed)


def well_separated_spec(K: int = 4, dim: int = 8, n_total: int = 400, seed: int = 0,
                        separation: float = 10.0, outlier_fraction: float = 0.0) -> SynthSpec:
    """
    K unit-scale Gaussian domains on orthogonal axes, separation apart from the origin
    """
    dim = max(dim, K)
    sizes = [n_total // K + (1 if k < n_total % K else 0) for k in range(K)]
    domains = [DomainSpec(center=separation * np.eye(dim)[k], scale=1.0, n=sizes[k],
                          count_mean=100.0 * (k + 1), count_sigma=0.3)
               for k in range(K)]
    return SynthSpec(domains=domains, outlier_fraction=outlier_fraction, rng_seed=seed)


def spec_from_dict(payload: dict) -> SynthSpec:
    domains = [DomainSpec(center=np.asarray(d['center'], dtype=np.float64), scale=d.get('scale', 1.0),
                          n=int(d.get('n', 100)), count_mean=d.get('count_mean', 100.0),
                          count_sigma=d.get('count_sigma', 0.5))
               for d in payload['domains']]
    return SynthSpec(domains=domains, outlier_fraction=payload.get('outlier_fraction', 0.0),
                     drift_sigma=payload.get('drift_sigma', 0.0), rng_seed=payload.get('rng_seed', 0),
                     outlier_inflation=payload.get('outlier_inflation', 1.5))
