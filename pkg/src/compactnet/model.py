"""One-hidden-layer network y = o^T sigma(W x): forward pass, loss, gradient.

Weights are plain float ndarrays: ``W`` is h x p (rows are hidden units),
``o`` is the known length-h output layer.  The loss is the half mean squared
residual, L(W) = (1/2n) sum_i (y_i - o^T sigma(W x_i))^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activations import ActivationKind, act_deriv, act_value
from .errors import DomainError, ShapeError


@dataclass
class Dataset:
    """Row-major inputs (n x p) with matching labels (n,)."""

    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float)
        if self.inputs.ndim != 2 or self.labels.ndim != 1:
            raise ShapeError("inputs must be n x p, labels length n")
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ShapeError(
                f"{self.inputs.shape[0]} inputs vs {self.labels.shape[0]} labels"
            )
        if self.inputs.shape[0] == 0:
            raise DomainError("dataset is empty")

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def p(self) -> int:
        return self.inputs.shape[1]

    def subset(self, n: int) -> "Dataset":
        return Dataset(self.inputs[:n], self.labels[:n])


def _check_ow(o, W):
    o = np.asarray(o, dtype=float)
    W = np.asarray(W, dtype=float)
    if o.ndim != 1 or W.ndim != 2 or o.shape[0] != W.shape[0]:
        raise ShapeError(f"o has shape {o.shape}, W has shape {W.shape}")
    return o, W


def forward(o, W, x, kind: ActivationKind) -> float:
    """Network output o^T sigma(W x) for a single input vector."""
    o, W = _check_ow(o, W)
    x = np.asarray(x, dtype=float)
    if x.shape != (W.shape[1],):
        raise ShapeError(f"x has shape {x.shape}, expected ({W.shape[1]},)")
    return float(o @ act_value(kind, W @ x))


def predictions(o, W, X, kind: ActivationKind) -> np.ndarray:
    """Batch forward pass; X is n x p."""
    o, W = _check_ow(o, W)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != W.shape[1]:
        raise ShapeError(f"X has shape {X.shape}, expected (n, {W.shape[1]})")
    return act_value(kind, X @ W.T) @ o


def loss(o, W, data: Dataset, kind: ActivationKind) -> float:
    """Half mean squared residual on the dataset."""
    r = predictions(o, W, data.inputs, kind) - data.labels
    return 0.5 * float(np.mean(r * r))


def gradient(o, W, data: Dataset, kind: ActivationKind) -> np.ndarray:
    """d loss / d W, an h x p matrix."""
    return loss_and_gradient(o, W, data, kind)[1]


def loss_and_gradient(o, W, data: Dataset, kind: ActivationKind):
    """Loss and gradient from one shared forward pass.

    The returned loss is bitwise identical to ``loss`` at the same point.
    Sample terms are accumulated in ascending index order through dense
    matmuls, so repeated evaluation is deterministic.
    """
    o, W = _check_ow(o, W)
    X = data.inputs
    if X.shape[1] != W.shape[1]:
        raise ShapeError(f"data dim {X.shape[1]} vs W dim {W.shape[1]}")
    Z = X @ W.T
    r = act_value(kind, Z) @ o - data.labels
    value = 0.5 * float(np.mean(r * r))
    D = act_deriv(kind, Z) * o  # n x h, entries o_j sigma'(z_ij)
    grad = (D * r[:, None]).T @ X / data.n
    return value, grad
