"""Self-supervision objectives: InfoNCE, masked reconstruction, and their
hybrid ``(1 - lambda) * L_MIM + lambda * L_CL``.

These score given embeddings only; there is no encoder, momentum queue, or
gradient machinery here.  Defaults (temperature 0.2, mask ratio 0.6, L1
reconstruction) follow the MoCo-v3 / SimMIM lineage and are configurable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import (
    DegenerateEmbedding,
    DegenerateRatio,
    EmptyMask,
    InvalidLambda,
    ShapeError,
)


@dataclass(frozen=True)
class HybridConfig:
    lam: float = 0.2
    temperature: float = 0.2
    mask_ratio: float = 0.6
    reconstruction_norm: Literal["l1", "l2"] = "l1"

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise InvalidLambda(f"lambda must be in [0, 1], got {self.lam}")
        if self.temperature <= 0:
            raise ShapeError("temperature must be positive")
        if not 0.0 < self.mask_ratio < 1.0:
            raise DegenerateRatio("mask_ratio must be in (0, 1)")


def _unit(v: np.ndarray, what: str) -> np.ndarray:
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm <= 0):
        raise DegenerateEmbedding(f"zero-norm {what} embedding")
    return v / norm


def infonce(
    query: np.ndarray,
    positive: np.ndarray,
    negatives: np.ndarray,
    temperature: float = 0.2,
) -> float:
    """InfoNCE with cosine logits, computed via max-subtracted log-sum-exp."""
    query = np.asarray(query, dtype=np.float64)
    positive = np.asarray(positive, dtype=np.float64)
    negatives = np.atleast_2d(np.asarray(negatives, dtype=np.float64))
    if negatives.shape[0] < 1:
        raise ShapeError("need at least one negative")
    q = _unit(query, "query")
    p = _unit(positive, "positive")
    negs = _unit(negatives, "negative")
    logits = np.concatenate([[q @ p], negs @ q]) / temperature
    m = logits.max()
    lse = m + np.log(np.sum(np.exp(logits - m)))
    return float(lse - logits[0])


def mim_loss(
    predicted: np.ndarray,
    target: np.ndarray,
    mask: np.ndarray,
    norm: Literal["l1", "l2"] = "l1",
) -> float:
    """Mean reconstruction error over masked positions and channels only."""
    predicted = np.asarray(predicted, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if predicted.shape != target.shape:
        raise ShapeError(f"shape mismatch {predicted.shape} vs {target.shape}")
    if mask.shape != (predicted.shape[0],):
        raise ShapeError("mask must be one flag per position")
    if not np.any(mask):
        raise EmptyMask("no masked positions")
    diff = predicted[mask] - target[mask]
    if norm == "l1":
        return float(np.mean(np.abs(diff)))
    return float(np.mean(diff * diff))


def random_mask(grid_h: int, grid_w: int, ratio: float, seed) -> np.ndarray:
    """Uniform without-replacement mask with exactly round(ratio * N) trues."""
    n = grid_h * grid_w
    k = int(round(ratio * n))
    if k == 0 or k == n:
        raise DegenerateRatio(f"ratio {ratio} rounds to {k}/{n} masked positions")
    rng = np.random.default_rng(seed)
    mask = np.zeros(n, dtype=bool)
    mask[rng.choice(n, size=k, replace=False)] = True
    return mask


def hybrid_loss(l_mim: float, l_cl: float, lam: float) -> float:
    """Exact affine combination of the two losses."""
    if not 0.0 <= lam <= 1.0:
        raise InvalidLambda(f"lambda must be in [0, 1], got {lam}")
    if not (np.isfinite(l_mim) and np.isfinite(l_cl)):
        raise ShapeError("loss inputs must be finite")
    return (1.0 - lam) * l_mim + lam * l_cl
