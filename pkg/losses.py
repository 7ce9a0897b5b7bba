"""
Losses Module
Semantic codebook re-encoding and the density, semantic, style and
orthogonality losses with analytic gradients (no autodiff framework)
"""

import logging
from dataclasses import dataclass, field, asdict
from typing import Dict, Optional, Union

import numpy as np
from scipy.special import softmax

from exceptions import PreconditionError

logger = logging.getLogger(__name__)

DEFAULT_CODEBOOK_SIZE = 64
DEFAULT_ORTH_EPS = 1e-8
DEFAULT_LOSS_WEIGHT = 0.1


@dataclass
class CodebookState:
    """Codebook E with one code vector per column (dim x M_c)"""

    E: np.ndarray

    def __post_init__(self):
        self.E = np.asarray(self.E, dtype=np.float64)
        if self.E.ndim != 2 or self.E.shape[1] < 1:
            raise PreconditionError(f"codebook must be dim x M_c with M_c >= 1, got {self.E.shape}",
                                    code="dimension_mismatch")
        if not np.all(np.isfinite(self.E)):
            raise PreconditionError("codebook has non-finite entries", code="non_finite")

    @property
    def dim(self) -> int:
        return int(self.E.shape[0])

    @property
    def M_c(self) -> int:
        return int(self.E.shape[1])

    @classmethod
    def random(cls, dim: int, M_c: int = DEFAULT_CODEBOOK_SIZE, rng_seed: int = 0) -> "CodebookState":
        rng = np.random.default_rng(rng_seed)
        return cls(rng.standard_normal((dim, M_c)) / np.sqrt(dim))


@dataclass
class BranchBatch:
    """
    Inputs of the regularisers for one batch. S_flat / T_flat are the
    per-location semantic and style features of one image (dim x P),
    p / t the image-level descriptors of the batch (B x dim).
    """

    S_flat: np.ndarray
    T_flat: np.ndarray
    p: np.ndarray
    t: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.S_flat = np.asarray(self.S_flat, dtype=np.float64)
        self.T_flat = np.asarray(self.T_flat, dtype=np.float64)
        self.p = np.asarray(self.p, dtype=np.float64)
        self.t = np.asarray(self.t, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.S_flat.shape != self.T_flat.shape:
            raise PreconditionError(f"S_flat {self.S_flat.shape} and T_flat {self.T_flat.shape} differ",
                                    code="dimension_mismatch")
        if self.p.shape != self.t.shape or self.p.shape[0] != len(self.labels):
            raise PreconditionError("p, t and labels disagree on the batch shape", code="dimension_mismatch")
        if self.p.shape[1] != self.S_flat.shape[0]:
            raise PreconditionError("descriptor dim does not match feature dim", code="dimension_mismatch")
        if len(self.labels) and self.labels.min() < 0:
            raise PreconditionError("labels must be nonnegative", code="label_range")


@dataclass
class LossTerm:
    """A loss value and its gradients keyed by input name"""

    value: float
    grads: Dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class LossWeights:
    sem: float = DEFAULT_LOSS_WEIGHT
    sty: float = DEFAULT_LOSS_WEIGHT
    orth: float = DEFAULT_LOSS_WEIGHT

    def validate(self) -> "LossWeights":
        for name, value in asdict(self).items():
            if not np.isfinite(value) or value < 0:
                raise PreconditionError(f"loss weight lambda_{name} must be finite and >= 0, got {value}",
                                        code="negative_weight")
        return self


@dataclass
class LossReport:
    den: float
    sem: float
    sty: float
    orth: float
    total: float
    weights: LossWeights
    grads: Dict[str, np.ndarray] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            'den': self.den,
            'sem': self.sem,
            'sty': self.sty,
            'orth': self.orth,
            'total': self.total,
            'weights': asdict(self.weights),
            'grad_norms': {name: float(np.linalg.norm(g)) for name, g in sorted(self.grads.items())},
            'grad_shapes': {name: list(g.shape) for name, g in sorted(self.grads.items())},
        }


def codebook_assign(S: np.ndarray, cb: CodebookState) -> np.ndarray:
    """
    Soft assignment of every location to the codes

    Column j of the result is softmax(E^T s_j / sqrt(dim)).
    """
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != cb.dim:
        raise PreconditionError(f"features of shape {S.shape} do not match codebook dim {cb.dim}",
                                code="dimension_mismatch")
    logits = cb.E.T @ S / np.sqrt(cb.dim)
    return softmax(logits, axis=0)


def reencode(cb: CodebookState, A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != cb.M_c:
        raise PreconditionError(f"assignment of shape {A.shape} does not match M_c={cb.M_c}",
                                code="dimension_mismatch")
    return cb.E @ A


def gap(X_flat: np.ndarray) -> np.ndarray:
    """Global average pooling over the location axis"""
    X = np.asarray(X_flat, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] == 0:
        raise PreconditionError("global average pooling needs at least one location", code="empty_map")
    return X.mean(axis=1)


def semantic_descriptors(S_batch: np.ndarray, cb: CodebookState) -> np.ndarray:
    """
    p_i = GAP(E softmax(E^T S_i / sqrt(dim))) for every image of a B x dim x P stack
    """
    S_batch = np.asarray(S_batch, dtype=np.float64)
    if S_batch.ndim != 3:
        raise PreconditionError(f"expected a B x dim x P stack, got shape {S_batch.shape}",
                                code="dimension_mismatch")
    return np.vstack([gap(reencode(cb, codebook_assign(S, cb))) for S in S_batch])


def _groups(labels: np.ndarray):
    present = np.unique(labels)
    return present, [np.flatnonzero(labels == k) for k in present]


def _check_batch(X: np.ndarray, labels: np.ndarray, name: str):
    if X.ndim != 2 or X.shape[0] < 1:
        raise PreconditionError(f"{name} must be a nonempty B x dim matrix", code="dimension_mismatch")
    if len(labels) != X.shape[0]:
        raise PreconditionError(f"{name} has {X.shape[0]} rows but {len(labels)} labels",
                                code="length_mismatch")


def loss_sem(p: np.ndarray, labels: np.ndarray) -> LossTerm:
    """
    Mean squared distance of the per-domain semantic centers to the batch center.
    Domains absent from the batch are skipped.
    """
    p = np.asarray(p, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    _check_batch(p, labels, "p")
    B = p.shape[0]
    nu = p.mean(axis=0)
    _, members = _groups(labels)
    n_domains = len(members)

    offsets = np.vstack([p[idx].mean(axis=0) - nu for idx in members])
    value = float((offsets ** 2).sum() / n_domains)

    grad = np.empty_like(p)
    shared = offsets.sum(axis=0) / B
    for offset, idx in zip(offsets, members):
        grad[idx] = offset / len(idx) - shared
    grad *= 2.0 / n_domains
    return LossTerm(value, {'p': grad})


def loss_sty(t: np.ndarray, labels: np.ndarray) -> LossTerm:
    """Mean over present domains of the mean squared deviation from the domain center"""
    t = np.asarray(t, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    _check_batch(t, labels, "t")
    _, members = _groups(labels)
    n_domains = len(members)

    value = 0.0
    grad = np.empty_like(t)
    for idx in members:
        deviation = t[idx] - t[idx].mean(axis=0)
        value += float((deviation ** 2).sum()) / len(idx)
        grad[idx] = 2.0 * deviation / (n_domains * len(idx))
    return LossTerm(value / n_domains, {'t': grad})


def loss_orth(S_flat: np.ndarray, T_flat: np.ndarray, eps: float = DEFAULT_ORTH_EPS) -> LossTerm:
    """
    Mean squared cosine similarity between semantic and style columns

    The semantic input is treated as a constant: its gradient is all zeros.
    A zero-norm column contributes about 0 through eps.
    """
    S = np.asarray(S_flat, dtype=np.float64)
    T = np.asarray(T_flat, dtype=np.float64)
    if S.shape != T.shape or S.ndim != 2:
        raise PreconditionError(f"S_flat {S.shape} and T_flat {T.shape} must be equal dim x P",
                                code="dimension_mismatch")
    P = S.shape[1]
    if P == 0:
        raise PreconditionError("orthogonality loss needs at least one location", code="empty_map")

    dots = np.einsum("dp,dp->p", T, S)
    s_norm = np.linalg.norm(S, axis=0)
    t_norm = np.linalg.norm(T, axis=0)
    den = t_norm * s_norm + eps
    cos = dots / den
    value = float(np.mean(cos ** 2))

    t_unit = np.divide(T, t_norm, out=np.zeros_like(T), where=t_norm > 0)
    dcos = S / den - (dots * s_norm / den ** 2) * t_unit
    grad_T = (2.0 / P) * cos * dcos
    return LossTerm(value, {'T_flat': grad_T, 'S_flat': np.zeros_like(S)})


def loss_den(pred: np.ndarray, gt: np.ndarray) -> LossTerm:
    """(1/B) sum_i ||pred_i - gt_i||^2 over stacked density maps"""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise PreconditionError(f"prediction {pred.shape} and ground truth {gt.shape} differ",
                                code="dimension_mismatch")
    if pred.ndim == 0 or pred.shape[0] == 0:
        raise PreconditionError("density loss needs a nonempty batch", code="empty_batch")
    B = pred.shape[0]
    residual = pred - gt
    return LossTerm(float((residual ** 2).sum() / B), {'pred': 2.0 * residual / B})


def total_loss(parts: Dict[str, Union[LossTerm, float]],
               weights: Optional[Union[LossWeights, dict]] = None) -> LossReport:
    """
    L = den + lambda_sem sem + lambda_sty sty + lambda_orth orth

    Args:
        parts: mapping with any of 'den', 'sem', 'sty', 'orth' to a LossTerm
            (or a bare float); missing parts count as 0
        weights: LossWeights or a dict of lambda values

    Returns:
        LossReport with gradients combined by the same weights
    """
    if weights is None:
        weights = LossWeights()
    elif isinstance(weights, dict):
        weights = LossWeights(**weights)
    weights.validate()

    unknown = set(parts) - {'den', 'sem', 'sty', 'orth'}
    if unknown:
        raise PreconditionError(f"unknown loss parts {sorted(unknown)}")
    scale = {'den': 1.0, 'sem': weights.sem, 'sty': weights.sty, 'orth': weights.orth}

    values = {}
    grads: Dict[str, np.ndarray] = {}
    for name in ('den', 'sem', 'sty', 'orth'):
        term = parts.get(name, 0.0)
        if not isinstance(term, LossTerm):
            term = LossTerm(float(term))
        if not np.isfinite(term.value):
            raise PreconditionError(f"loss part {name} is not finite", code="non_finite")
        values[name] = term.value
        for key, g in term.grads.items():
            contribution = scale[name] * g
            grads[key] = grads[key] + contribution if key in grads else contribution

    total = values['den'] + weights.sem * values['sem'] + weights.sty * values['sty'] + weights.orth * values['orth']
    return LossReport(den=values['den'], sem=values['sem'], sty=values['sty'], orth=values['orth'],
                      total=float(total), weights=weights, grads=grads)


def evaluate_batch(batch: Optional[BranchBatch] = None, pred: Optional[np.ndarray] = None,
                   gt: Optional[np.ndarray] = None, weights: Optional[LossWeights] = None,
                   eps: float = DEFAULT_ORTH_EPS) -> LossReport:
    """All losses whose inputs are available, combined into one report"""
    parts = {}
    if pred is not None and gt is not None:
        parts['den'] = loss_den(pred, gt)
    if batch is not None:
        parts['sem'] = loss_sem(batch.p, batch.labels)
        parts['sty'] = loss_sty(batch.t, batch.labels)
        parts['orth'] = loss_orth(batch.S_flat, batch.T_flat, eps)
    logger.debug("evaluating loss parts %s", sorted(parts))
    return total_loss(parts, weights)
