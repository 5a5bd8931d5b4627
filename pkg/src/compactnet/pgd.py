"""Projected gradient descent drivers.

``pgd_run`` iterates W <- P_C(W - mu * grad L(W)) on a fixed dataset;
``pgd_run_batched`` consumes a fresh batch per step for the first K - 1
steps and then reuses the last batch forever.  Both emit a per-iteration
trace (loss, gradient norm, optional distance to a known ground truth).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import constraints, model
from .activations import ActivationKind
from .errors import DivergenceError, DomainError
from .model import Dataset

DIVERGENCE_GUARD = 1e12


@dataclass(frozen=True)
class PgdConfig:
    """Learning rate, iteration budget, constraint, and batching schedule.

    ``fresh_batches=None`` runs on the single fixed dataset; an integer K
    splits the dataset into K equal batches consumed as described above.
    ``stop_tol`` (gradient Frobenius norm) enables early exit; disabled by
    default.
    """

    mu: float
    max_iters: int
    constraint: constraints.ConstraintSpec = field(
        default_factory=constraints.ConstraintSpec.none
    )
    stop_tol: float | None = None
    fresh_batches: int | None = None

    def __post_init__(self):
        if not self.mu > 0:
            raise DomainError(f"learning rate must be positive, got {self.mu}")
        if self.max_iters < 1:
            raise DomainError("max_iters must be >= 1")
        if self.fresh_batches is not None and self.fresh_batches < 1:
            raise DomainError("fresh_batches must be >= 1")


@dataclass
class PgdTrace:
    """Per-iteration records plus the final iterate."""

    iters: np.ndarray
    loss: np.ndarray
    grad_norm: np.ndarray
    dist_to_truth: np.ndarray | None
    W: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["iter", "loss", "grad_norm", "dist_to_truth"])
            for i in range(len(self.iters)):
                dist = "" if self.dist_to_truth is None else repr(float(self.dist_to_truth[i]))
                out.writerow(
                    [int(self.iters[i]), repr(float(self.loss[i])), repr(float(self.grad_norm[i])), dist]
                )


def pgd_step(W, grad, mu: float, spec: constraints.ConstraintSpec) -> np.ndarray:
    """One update: project(W - mu * grad)."""
    W = np.asarray(W, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if W.shape != grad.shape:
        raise DomainError(f"W shape {W.shape} vs grad shape {grad.shape}")
    if not np.all(np.isfinite(grad)):
        raise DivergenceError("non-finite gradient in pgd_step")
    return constraints.project(spec, W - mu * grad)


def descend(loss_and_grad, w0, cfg: PgdConfig, w_star=None) -> PgdTrace:
    """Generic projected-descent loop.

    ``loss_and_grad(step, W) -> (loss, grad)`` supplies the objective; the
    step index lets batched schedules pick their batch.  Records one row per
    visited iterate (at most max_iters + 1 rows).
    """
    W = np.asarray(w0, dtype=float).copy()
    iters, losses, gnorms, dists = [], [], [], []

    def record(j, val, gnorm):
        iters.append(j)
        losses.append(val)
        gnorms.append(gnorm)
        if w_star is not None:
            dists.append(float(np.linalg.norm(W - w_star)))

    for j in range(cfg.max_iters):
        val, grad = loss_and_grad(j, W)
        if not np.isfinite(val) or val > DIVERGENCE_GUARD:
            raise DivergenceError(f"loss {val} at iteration {j}", iteration=j)
        gnorm = float(np.linalg.norm(grad))
        record(j, val, gnorm)
        if cfg.stop_tol is not None and gnorm <= cfg.stop_tol:
            break
        if not np.all(np.isfinite(grad)):
            raise DivergenceError(f"non-finite gradient at iteration {j}", iteration=j)
        W = constraints.project(cfg.constraint, W - cfg.mu * grad)
    else:
        val, grad = loss_and_grad(cfg.max_iters, W)
        if not np.isfinite(val) or val > DIVERGENCE_GUARD:
            raise DivergenceError(
                f"loss {val} at iteration {cfg.max_iters}", iteration=cfg.max_iters
            )
        record(cfg.max_iters, val, float(np.linalg.norm(grad)))

    return PgdTrace(
        iters=np.array(iters, dtype=int),
        loss=np.array(losses),
        grad_norm=np.array(gnorms),
        dist_to_truth=np.array(dists) if w_star is not None else None,
        W=W,
    )


def pgd_run(
    cfg: PgdConfig, o, w0, data: Dataset, kind: ActivationKind, w_star=None
) -> PgdTrace:
    """PGD on a fixed dataset (single-batch schedule)."""
    if cfg.fresh_batches is not None:
        raise DomainError("pgd_run requires the single-batch schedule")
    return descend(
        lambda _j, W: model.loss_and_gradient(o, W, data, kind), w0, cfg, w_star
    )


def pgd_run_batched(
    cfg: PgdConfig, o, w0, data: Dataset, kind: ActivationKind, w_star=None
) -> PgdTrace:
    """PGD with the fresh-batch schedule.

    The dataset is split into K equal contiguous batches; step j uses batch
    min(j, K - 1), so each of the first K - 1 steps sees a fresh batch and
    all later steps reuse the last one.  Recorded losses refer to the batch
    in use at that step.
    """
    K = cfg.fresh_batches
    if K is None:
        raise DomainError("pgd_run_batched requires fresh_batches=K")
    if data.n % K != 0:
        raise DomainError(f"dataset size {data.n} not divisible by K={K}")
    size = data.n // K
    batches = [
        Dataset(data.inputs[i * size : (i + 1) * size], data.labels[i * size : (i + 1) * size])
        for i in range(K)
    ]
    return descend(
        lambda j, W: model.loss_and_gradient(o, W, batches[min(j, K - 1)], kind),
        w0,
        cfg,
        w_star,
    )
