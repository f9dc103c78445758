"""Multinomial logistic regression over pooled video embeddings.

Serves as both the base learner of the active-learning loop and the model
behind the simulated labeling oracle. Trained by full-batch gradient descent
from zero-initialized parameters, so identical inputs always give identical
parameters.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dataset import VideoSample, pool_video

MODEL_FORMAT_VERSION = 1


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training (learning rate too high)."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.5
    epochs: int = 200
    l2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")


@dataclass(frozen=True, eq=False)
class Model:
    """Softmax classifier parameters: weights (C, dim) and biases (C,)."""

    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        biases = np.asarray(self.biases, dtype=np.float64)
        if weights.ndim != 2 or biases.shape != (weights.shape[0],):
            raise ValueError("weights must be (C, dim) and biases (C,)")
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(biases))):
            raise ValueError("model parameters must be finite")
        weights = weights.copy()
        biases = biases.copy()
        weights.flags.writeable = False
        biases.flags.writeable = False
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


def model_to_dict(m: Model) -> dict:
    """Versioned flat record used in experiment checkpoints."""
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "num_classes": m.num_classes,
        "dim": m.dim,
        "weights": [float(x) for x in m.weights.ravel()],  # row-major
        "biases": [float(x) for x in m.biases],
    }


def model_from_dict(d: dict) -> Model:
    if d.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version: {d.get('format_version')!r}")
    num_classes, dim = int(d["num_classes"]), int(d["dim"])
    weights = np.array(d["weights"], dtype=np.float64).reshape(num_classes, dim)
    return Model(weights=weights, biases=np.array(d["biases"], dtype=np.float64))


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, stabilized by subtracting the max logit."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def predict_proba(m: Model, x: np.ndarray) -> np.ndarray:
    """Class probabilities for one feature vector of length ``m.dim``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (m.dim,):
        raise ValueError(f"feature dimension mismatch: expected ({m.dim},), got {x.shape}")
    return softmax(m.weights @ x + m.biases)


def predict_proba_batch(m: Model, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != m.dim:
        raise ValueError(f"feature dimension mismatch: expected (N, {m.dim}), got {features.shape}")
    return softmax(features @ m.weights.T + m.biases)


def entropy(p: np.ndarray) -> float:
    """Shannon entropy in nats, with the convention 0*ln(0) = 0."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-6:
        raise ValueError("entropy requires a probability vector (entries >= 0, sum 1)")
    nonzero = p[p > 0]
    return float(-(nonzero * np.log(nonzero)).sum())


def cross_entropy_loss(
    weights: np.ndarray,
    biases: np.ndarray,
    features: np.ndarray,
    labels: np.ndarray,
    l2: float,
) -> float:
    """Mean cross-entropy plus l2 * ||weights||^2 (biases unpenalized)."""
    probs = softmax(features @ weights.T + biases)
    picked = probs[np.arange(len(labels)), labels]
    # clip only guards log(0) from total underflow; gradients are exact
    nll = -np.log(np.clip(picked, 1e-300, None)).mean()
    return float(nll + l2 * np.sum(weights**2))


def loss_gradient(
    weights: np.ndarray,
    biases: np.ndarray,
    features: np.ndarray,
    labels: np.ndarray,
    l2: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of ``cross_entropy_loss`` wrt weights and biases."""
    n = len(labels)
    probs = softmax(features @ weights.T + biases)
    probs[np.arange(n), labels] -= 1.0
    grad_w = probs.T @ features / n + 2.0 * l2 * weights
    grad_b = probs.sum(axis=0) / n
    return grad_w, grad_b


def train(
    features: np.ndarray,
    labels: np.ndarray | list[int],
    cfg: TrainConfig,
    num_classes: int | None = None,
) -> Model:
    """Train a softmax classifier by full-batch gradient descent."""
    model, _ = train_with_history(features, labels, cfg, num_classes)
    return model


def train_with_history(
    features: np.ndarray,
    labels: np.ndarray | list[int],
    cfg: TrainConfig,
    num_classes: int | None = None,
) -> tuple[Model, np.ndarray]:
    """Like ``train`` but also returns the per-epoch loss trace.

    The trace has ``epochs + 1`` entries: the loss before the first update
    and after each epoch. Raises TrainingDivergedError, naming the epoch,
    if the loss leaves the finite range.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.ndim != 2 or features.shape[0] != labels.shape[0] or features.shape[0] < 1:
        raise ValueError("features must be (N, dim) with one label per row, N >= 1")
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    if labels.min() < 0 or labels.max() >= num_classes:
        raise ValueError(f"labels must lie in [0, {num_classes})")
    missing = sorted(set(range(num_classes)) - set(labels.tolist()))
    if missing:
        warnings.warn(f"training set has no examples for classes {missing}", stacklevel=2)

    dim = features.shape[1]
    weights = np.zeros((num_classes, dim))
    biases = np.zeros(num_classes)
    losses = np.empty(cfg.epochs + 1)
    losses[0] = cross_entropy_loss(weights, biases, features, labels, cfg.l2)
    for epoch in range(cfg.epochs):
        grad_w, grad_b = loss_gradient(weights, biases, features, labels, cfg.l2)
        weights -= cfg.learning_rate * grad_w
        biases -= cfg.learning_rate * grad_b
        losses[epoch + 1] = cross_entropy_loss(weights, biases, features, labels, cfg.l2)
        if not np.isfinite(losses[epoch + 1]):
            raise TrainingDivergedError(
                f"loss became non-finite at epoch {epoch + 1}; lower the learning rate"
            )
    return Model(weights=weights, biases=biases), losses


def evaluate_accuracy(m: Model, test: list[VideoSample] | tuple[VideoSample, ...]) -> float:
    """Fraction of argmax predictions matching the pool's labels.

    Argmax ties resolve to the lowest class index.
    """
    if not test:
        raise ValueError("cannot evaluate on an empty pool")
    features = np.stack([pool_video(v) for v in test])
    probs = predict_proba_batch(m, features)
    predictions = probs.argmax(axis=1)  # first occurrence wins ties
    truth = np.array([v.label for v in test])
    return float((predictions == truth).mean())
