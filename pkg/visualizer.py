"""
Visualizer Module
Figures of a discovery run and of the benchmark sweeps
"""

from pathlib import Path
from typing import Optional

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import seaborn as sns

from ball_divider import BallSet
from domain_discovery import PseudoDomainAssignment

sns.set_style("whitegrid")
plt.rcParams['figure.figsize'] = (12, 8)


class Visualizer:
    """
    Writes numbered PNG figures into output_dir and remembers their paths
    """

    def __init__(self, output_dir: str = "visualizations", dpi: int = 150):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(exist_ok=True, parents=True)
        self.dpi = dpi
        self.plots = []

    def generate_all_plots(self, ballset: BallSet, assignment: PseudoDomainAssignment,
                           reduced: Optional[np.ndarray] = None,
                           gt_counts: Optional[np.ndarray] = None):
        """
        Figures of one discovery run
        """
        self._plot_ball_sizes(ballset)
        self._plot_ball_depths(ballset)
        self._plot_domain_sizes(assignment)
        if gt_counts is not None:
            self._plot_domain_counts(assignment, gt_counts)
        if reduced is not None and reduced.shape[1] >= 2:
            self._plot_reduced_scatter(reduced, assignment)
        return self.plots

    def _save(self, name: str):
        filepath = self.output_dir / name
        plt.tight_layout()
        plt.savefig(filepath, dpi=self.dpi, bbox_inches='tight')
        plt.close()
        self.plots.append(str(filepath))

    def _plot_ball_sizes(self, ballset: BallSet):
        """Histogram of leaf ball sizes"""
        plt.figure(figsize=(10, 6))
        sizes = [b.size for b in ballset.balls]
        plt.hist(sizes, bins=min(50, max(1, len(set(sizes)))), edgecolor='black', alpha=0.7)
        plt.xlabel('Ball size (samples)')
        plt.ylabel('Number of balls')
        plt.title(f'Granular ball sizes ({len(sizes)} balls)')
        self._save("01_ball_sizes.png")

    def _plot_ball_depths(self, ballset: BallSet):
        plt.figure(figsize=(10, 6))
        depths, counts = np.unique([b.depth for b in ballset.balls], return_counts=True)
        plt.bar(depths, counts, color=sns.color_palette("husl", 1)[0])
        plt.xlabel('Depth')
        plt.ylabel('Number of leaves')
        plt.title('Leaf depth distribution')
        self._save("02_ball_depths.png")

    def _plot_domain_sizes(self, assignment: PseudoDomainAssignment):
        plt.figure(figsize=(10, 6))
        sizes = np.bincount(assignment.labels, minlength=assignment.K)
        colors = sns.color_palette("husl", assignment.K)
        plt.bar(range(assignment.K), sizes, color=colors)
        plt.xticks(range(assignment.K))
        plt.xlabel('Pseudo-domain')
        plt.ylabel('Samples')
        plt.title(f'Pseudo-domain sizes ({assignment.source.value})')
        self._save("03_domain_sizes.png")

    def _plot_domain_counts(self, assignment: PseudoDomainAssignment, gt_counts: np.ndarray):
        """Ground-truth count distribution per pseudo-domain"""
        plt.figure(figsize=(10, 6))
        df = pd.DataFrame({'pseudo_domain': assignment.labels, 'count': gt_counts})
        sns.boxplot(data=df, x='pseudo_domain', y='count', palette="husl")
        plt.yscale('log')
        plt.xlabel('Pseudo-domain')
        plt.ylabel('Ground-truth count')
        plt.title('Count stratification by pseudo-domain')
        self._save("04_domain_counts.png")

    def _plot_reduced_scatter(self, reduced: np.ndarray, assignment: PseudoDomainAssignment):
        plt.figure(figsize=(10, 8))
        sns.scatterplot(x=reduced[:, 0], y=reduced[:, 1], hue=assignment.labels,
                        palette="husl", s=12, linewidth=0)
        plt.xlabel('PC 1')
        plt.ylabel('PC 2')
        plt.title('Reduced descriptors by pseudo-domain')
        plt.legend(title='Pseudo-domain')
        self._save("05_reduced_scatter.png")

    def plot_scaling(self, rows: pd.DataFrame, slope: float):
        """Log-log division time against N"""
        plt.figure(figsize=(10, 6))
        fastest = rows.groupby('N')['seconds'].min()
        plt.loglog(fastest.index, fastest.values, 'o-', label=f'fitted slope {slope:.3f}')
        plt.xlabel('N (descriptors)')
        plt.ylabel('Division time (s)')
        plt.title('Division scaling')
        plt.legend()
        self._save("06_scaling.png")
        return self.plots[-1]

    def plot_churn(self, rows: pd.DataFrame):
        """Per-seed churn of each method"""
        per_seed = rows.dropna(subset=['churn_step']).groupby(['method', 'seed'])['churn_step'].mean().reset_index()
        plt.figure(figsize=(10, 6))
        sns.boxplot(data=per_seed, x='method', y='churn_step', palette="husl")
        plt.xlabel('Method')
        plt.ylabel('Post-alignment label churn')
        plt.title('Label churn across seeds')
        self._save("07_churn.png")
        return self.plots[-1]
