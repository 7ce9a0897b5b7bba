"""
Benchmark Module
N-scaling sweep of the ball division and multi-seed stability sweep of the
discovery methods under simulated drift
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.stats import linregress

from ball_divider import DivisionParams, divide
from domain_discovery import LatentDomainDiscoverer, PseudoDomainAssignment, align_labels
from evaluation import (adjusted_rand_index, count_stratification, flat_kmeans_partition,
                        label_churn, random_partition)
from exceptions import PreconditionError
from synthetic import apply_drift, generate_mixture, table4_style_spec, well_separated_spec

logger = logging.getLogger(__name__)

DEFAULT_SCALING_NS = (1000, 2000, 4000, 8000)
STABILITY_METHODS = ("gb", "flat_kmeans", "random")

# coarse balls absorb outliers before the centers are clustered
STABILITY_MIN_BALL = 32
STABILITY_CENTER_WEIGHTING = "size"


@dataclass
class ScalingBenchResult:
    rows: pd.DataFrame
    slope: float
    intercept: float
    r_value: float

    def summary(self) -> dict:
        return {'slope': self.slope, 'intercept': self.intercept, 'r_value': self.r_value,
                'Ns': sorted(int(n) for n in self.rows['N'].unique())}


@dataclass
class StabilityBenchResult:
    rows: pd.DataFrame
    summary: Dict[str, dict] = field(default_factory=dict)


def run_scaling_bench(Ns: Sequence[int] = DEFAULT_SCALING_NS, d: int = 16,
                      params: Optional[DivisionParams] = None, seed: int = 0,
                      repeats: int = 3, threads: int = 1, K: int = 4) -> ScalingBenchResult:
    """
    Time divide() over growing N at fixed d and fixed caps

    The slope is the least-squares fit of log(seconds) on log(N), using the
    fastest repeat per N.
    """
    if len(Ns) < 2:
        raise PreconditionError("a scaling fit needs at least 2 sizes")
    params = params or DivisionParams()
    records = []
    for N in Ns:
        X = generate_mixture(well_separated_spec(K=K, dim=d, n_total=int(N), seed=seed)).matrix
        for repeat in range(repeats):
            start = time.perf_counter()
            ballset = divide(X, params, threads=threads)
            elapsed = time.perf_counter() - start
            records.append({'N': int(N), 'repeat': repeat, 'seconds': elapsed, 'num_balls': len(ballset)})
            logger.info("N=%d repeat=%d: %.4fs, %d balls", N, repeat, elapsed, len(ballset))

    rows = pd.DataFrame.from_records(records)
    fastest = rows.groupby('N')['seconds'].min()
    fit = linregress(np.log(fastest.index.to_numpy(dtype=np.float64)), np.log(fastest.to_numpy()))
    return ScalingBenchResult(rows=rows, slope=float(fit.slope), intercept=float(fit.intercept),
                              r_value=float(fit.rvalue))


def _method_epochs(method: str, X_epochs, K: int, seed: int, params: DivisionParams,
                   pca_d: Optional[int], threads: int, center_weighting: str):
    if method == "gb":
        discoverer = LatentDomainDiscoverer(K, pca_d=pca_d, div_params=params, rng_seed=seed, threads=threads,
                                            center_weighting=center_weighting)
        return [discoverer.update(X, epoch=epoch) for epoch, X in enumerate(X_epochs)]

    epochs = []
    previous: Optional[PseudoDomainAssignment] = None
    for epoch, X in enumerate(X_epochs):
        if method == "flat_kmeans":
            current = flat_kmeans_partition(X, K, pca_d=pca_d, rng_seed=seed, epoch=epoch)
        elif method == "random":
            # a fresh shuffle per epoch, keyed on (seed, epoch)
            stream = int(np.random.SeedSequence([seed, epoch]).generate_state(1)[0])
            current = random_partition(len(X), K, rng_seed=stream, epoch=epoch)
        else:
            raise PreconditionError(f"unknown method {method!r}; known: {STABILITY_METHODS}")
        if previous is not None:
            current = align_labels(current, previous)
        epochs.append(current)
        previous = current
    return epochs


def run_stability_bench(seeds: Sequence[int] = tuple(range(20)), epochs: int = 10, K: int = 4,
                        outlier_fraction: float = 0.1, drift_sigma: float = 0.1, dim: int = 16,
                        n_per_domain: int = 100, params: Optional[DivisionParams] = None,
                        pca_d: Optional[int] = None, methods: Sequence[str] = STABILITY_METHODS,
                        threads: int = 1,
                        center_weighting: str = STABILITY_CENTER_WEIGHTING) -> StabilityBenchResult:
    """
    Multi-seed, multi-epoch stability comparison

    Each seed draws one count-stratified mixture and drifts it cumulatively
    epoch after epoch. Every method labels every epoch; labels are aligned to
    the previous epoch before churn is measured. Without params the division
    stops at balls below STABILITY_MIN_BALL members, and ball centers are
    weighted by member count.

    Returns:
        rows: one per (method, seed, epoch) with step churn, ARI, delta_med, sigma_med
        summary: per method, medians across seeds of churn, ARI and delta_med
    """
    if epochs < 2:
        raise PreconditionError("stability needs at least 2 epochs")
    params = params or DivisionParams(min_ball=STABILITY_MIN_BALL)
    records = []
    per_seed = {m: {'churn': [], 'ari': [], 'delta_med': []} for m in methods}

    for seed in seeds:
        spec = table4_style_spec(K=K, dim=dim, n_per_domain=n_per_domain, seed=seed,
                                 outlier_fraction=outlier_fraction, drift_sigma=drift_sigma)
        dset = generate_mixture(spec)
        counts, truth = dset.gt_counts, dset.true_domains
        inliers = truth >= 0

        X_epochs = [dset.matrix]
        for epoch in range(1, epochs):
            X_epochs.append(apply_drift(X_epochs[-1], epoch, drift_sigma, seed))

        for method in methods:
            assignments = _method_epochs(method, X_epochs, K, seed, params, pca_d, threads, center_weighting)
            deltas, aris = [], []
            for epoch, assignment in enumerate(assignments):
                strat = count_stratification(assignment.labels, counts, K)
                ari = adjusted_rand_index(assignment.labels[inliers], truth[inliers])
                step = (float(np.mean(assignment.labels != assignments[epoch - 1].labels))
                        if epoch else float('nan'))
                records.append({'method': method, 'seed': int(seed), 'epoch': epoch,
                                'source': assignment.source.value, 'churn_step': step, 'ari': ari,
                                'delta_med': strat.delta_med, 'sigma_med': strat.sigma_med})
                deltas.append(strat.delta_med)
                aris.append(ari)
            per_seed[method]['churn'].append(label_churn(assignments))
            per_seed[method]['ari'].append(float(np.mean(aris)))
            per_seed[method]['delta_med'].append(float(np.mean(deltas)))
        logger.info("stability seed %s done", seed)

    summary = {
        method: {
            'median_churn': float(np.median(values['churn'])),
            'median_ari': float(np.median(values['ari'])),
            'median_delta_med': float(np.median(values['delta_med'])),
            'seeds': len(values['churn']),
        }
        for method, values in per_seed.items()
    }
    return StabilityBenchResult(rows=pd.DataFrame.from_records(records), summary=summary)
