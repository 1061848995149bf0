"""Multinomial logistic-regression linear probe on frozen representations.

Plain mini-batch gradient descent with analytic gradients and a seeded
shuffle schedule: identical inputs give bit-identical models, and the
gradient is simple enough to check against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .errors import DegenerateLabels, MixedBundles, NoClsToken, ShapeError


@dataclass(frozen=True)
class ProbeConfig:
    learning_rate: float = 0.1
    epochs: int = 100
    batch_size: int = 32
    weight_decay: float = 0.0
    pooling: Literal["mean_tokens", "cls"] = "mean_tokens"
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ShapeError("learning_rate, epochs, batch_size must be positive")


@dataclass
class ProbeModel:
    weights: np.ndarray              # [D, num_classes]
    bias: np.ndarray                 # [num_classes]
    training_log: list[float] = field(default_factory=list)


def pool(reprs: np.ndarray, pooling: str = "mean_tokens", use_cls: bool = False) -> np.ndarray:
    """Collapse [N, D] tokens to a single [D] feature vector."""
    z = np.asarray(reprs, dtype=np.float64)
    if pooling == "cls":
        if not use_cls:
            raise NoClsToken("cls pooling requested but the model has no CLS token")
        return z[0].copy()
    if use_cls:
        z = z[1:]
    return z.mean(axis=0)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def cross_entropy_and_grad(
    w: np.ndarray,
    b: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    weight_decay: float = 0.0,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean CE of softmax(x @ w + b) with analytic gradients."""
    m = x.shape[0]
    p = _softmax(x @ w + b)
    loss = float(-np.mean(np.log(np.maximum(p[np.arange(m), y], 1e-300))))
    p[np.arange(m), y] -= 1.0
    gw = x.T @ p / m + weight_decay * w
    gb = p.sum(axis=0) / m
    if weight_decay:
        loss += 0.5 * weight_decay * float(np.sum(w * w))
    return loss, gw, gb


def train_probe(features: np.ndarray, labels: np.ndarray, config: ProbeConfig) -> ProbeModel:
    """Deterministic mini-batch gradient descent from a zero initialization."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=int)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise ShapeError(f"features {x.shape} and labels {y.shape} mismatch")
    classes = int(y.max()) + 1
    if len(np.unique(y)) < 2:
        raise DegenerateLabels("training labels contain a single class")
    w = np.zeros((x.shape[1], classes))
    b = np.zeros(classes)
    rng = np.random.default_rng(config.seed)
    log = []
    m = x.shape[0]
    for _ in range(config.epochs):
        order = rng.permutation(m)
        losses = []
        for start in range(0, m, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, gw, gb = cross_entropy_and_grad(w, b, x[idx], y[idx], config.weight_decay)
            w -= config.learning_rate * gw
            b -= config.learning_rate * gb
            losses.append(loss)
        log.append(float(np.mean(losses)))
    return ProbeModel(w, b, log)


def evaluate_probe(model: ProbeModel, features: np.ndarray, labels: np.ndarray) -> float:
    """Argmax accuracy; ties resolve to the lowest class index."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=int)
    pred = np.argmax(x @ model.weights + model.bias, axis=-1)
    return float(np.mean(pred == y))


@dataclass
class LayerwiseResult:
    depth: int
    train_accuracy: float
    test_accuracy: float


def train_test_split(m: int, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    order = rng.permutation(m)
    n_test = max(1, int(round(test_fraction * m)))
    return order[n_test:], order[:n_test]


def layerwise_probe(
    bundles: Sequence,
    labels: Sequence[int],
    config: ProbeConfig,
    test_fraction: float = 0.2,
) -> list[LayerwiseResult]:
    """One probe per representation depth over a labeled bundle dataset."""
    if not bundles:
        raise ShapeError("no bundles supplied")
    model_cfg = bundles[0].config
    for b in bundles:
        if b.config != model_cfg:
            raise MixedBundles("bundles disagree on model configuration")
    y = np.asarray(labels, dtype=int)
    if y.shape != (len(bundles),):
        raise ShapeError("one label per bundle required")
    train_idx, test_idx = train_test_split(len(bundles), test_fraction, config.seed)
    depths = model_cfg.depth + 1
    results = []
    for depth in range(depths):
        feats = np.stack([
            pool(b.representations[depth], config.pooling, model_cfg.use_cls)
            for b in bundles
        ])
        model = train_probe(feats[train_idx], y[train_idx], config)
        results.append(LayerwiseResult(
            depth,
            evaluate_probe(model, feats[train_idx], y[train_idx]),
            evaluate_probe(model, feats[test_idx], y[test_idx]),
        ))
    return results
