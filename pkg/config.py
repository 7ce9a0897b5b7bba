"""
Run configuration shared by every command
"""

import math
import os
from dataclasses import dataclass, asdict, fields
from typing import List, Optional

from ball_divider import DivisionParams
from exceptions import ConfigError
from losses import DEFAULT_CODEBOOK_SIZE, DEFAULT_LOSS_WEIGHT, DEFAULT_ORTH_EPS, LossWeights

THREADS_ENV = "GBDOMAIN_THREADS"

# runtime knobs that never change an output byte, kept out of the echo
_NOT_ECHOED = ("threads", "quiet", "report", "no_timestamp")


def env_threads(default: int = 1) -> int:
    raw = os.environ.get(THREADS_ENV, str(default))
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}")


@dataclass
class RunConfig:
    command: str = "discover"
    input: Optional[str] = None
    inputs: Optional[List[str]] = None
    out: str = "output"
    prev: Optional[str] = None
    counts: Optional[str] = None
    format: Optional[str] = None

    K: Optional[int] = None
    k_auto: bool = False
    dataset: Optional[str] = None
    center_weighting: str = "uniform"

    tau: float = 1.05
    beta: float = 2.0
    eps: float = 1e-12
    d_max: Optional[int] = 12
    min_ball: int = 4
    pca_d: Optional[int] = None
    seed: int = 0
    threads: Optional[int] = None

    lambda_sem: float = DEFAULT_LOSS_WEIGHT
    lambda_sty: float = DEFAULT_LOSS_WEIGHT
    lambda_orth: float = DEFAULT_LOSS_WEIGHT
    orth_eps: float = DEFAULT_ORTH_EPS
    codebook_size: int = DEFAULT_CODEBOOK_SIZE
    check_grads: bool = False

    mode: str = "scaling"
    ns: Optional[List[int]] = None
    dim: int = 16
    repeats: int = 3
    seeds: int = 20
    epochs: int = 10
    drift: float = 0.1
    outliers: float = 0.1
    n_per_domain: int = 100
    layout: str = "table4"

    save_balls: bool = False
    report: bool = False
    no_timestamp: bool = False
    quiet: bool = False

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        values = {k: v for k, v in vars(args).items() if k in known}
        config = cls(**values)
        if config.threads is None:
            config.threads = env_threads()
        return config

    def validate(self) -> "RunConfig":
        if self.K is not None and self.K < 1:
            raise ConfigError(f"--k must be >= 1, got {self.K}")
        if math.isnan(self.tau) or self.tau < 0:
            raise ConfigError(f"--tau must be >= 0, got {self.tau}")
        if not self.beta > 1:
            raise ConfigError(f"--beta must be > 1, got {self.beta}")
        if not self.eps > 0:
            raise ConfigError(f"--eps must be > 0, got {self.eps}")
        if self.d_max is not None and self.d_max < 0:
            raise ConfigError(f"--dmax must be >= 0, got {self.d_max}")
        if self.min_ball < 2:
            raise ConfigError(f"--min-ball must be >= 2, got {self.min_ball}")
        if self.pca_d is not None and self.pca_d < 1:
            raise ConfigError(f"--pca-d must be >= 1, got {self.pca_d}")
        if self.threads is not None and self.threads < 1:
            raise ConfigError(f"--threads must be >= 1, got {self.threads}")
        if self.format not in (None, "bin", "csv"):
            raise ConfigError(f"--format must be bin or csv, got {self.format!r}")
        if self.center_weighting not in ("uniform", "size"):
            raise ConfigError(f"--center-weighting must be uniform or size, got {self.center_weighting!r}")
        for name in ("lambda_sem", "lambda_sty", "lambda_orth"):
            if getattr(self, name) < 0:
                raise ConfigError(f"--{name.replace('_', '-')} must be >= 0")
        if not self.orth_eps > 0 or self.codebook_size < 1:
            raise ConfigError("--orth-eps must be > 0 and --codebook-size >= 1")
        if self.repeats < 1 or self.seeds < 1 or self.epochs < 2:
            raise ConfigError("--repeats and --seeds must be >= 1, --epochs >= 2")
        if self.drift < 0 or not 0 <= self.outliers < 1:
            raise ConfigError("--drift must be >= 0 and --outliers in [0, 1)")
        if self.dim < 1 or self.n_per_domain < 1:
            raise ConfigError("--dim and --n-per-domain must be >= 1")
        return self

    def division_params(self) -> DivisionParams:
        return DivisionParams(tau=self.tau, beta=self.beta, eps=self.eps, d_max=self.d_max,
                              min_ball=self.min_ball, rng_seed=self.seed)

    def loss_weights(self) -> LossWeights:
        return LossWeights(sem=self.lambda_sem, sty=self.lambda_sty, orth=self.lambda_orth)

    def to_dict(self) -> dict:
        echo = asdict(self)
        for name in _NOT_ECHOED:
            echo.pop(name)
        return echo
