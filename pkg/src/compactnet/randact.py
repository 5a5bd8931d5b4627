"""Deep network with frozen random sign activations, learned one layer at a time.

Every "activation" multiplies its input entrywise by a per-sample vector of
independent +-1 signs, sampled once and frozen.  For fixed signs the network
is linear in each layer, so learning layer ell given all others collapses to
a linear regression whose inputs/outputs fold in the layers below and above.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import constraints, pgd
from .errors import ShapeError


@dataclass
class RandActNetwork:
    """Layer matrices, output vector, and frozen per-sample sign masks.

    ``layers[i]`` has shape h_{i+1} x h_i (h_0 = input dimension);
    ``masks[i]`` has shape n x h_{i+1} with entries exactly +-1 and applies
    after ``layers[i]``; ``o`` has length h_D.
    """

    layers: list[np.ndarray]
    o: np.ndarray
    masks: list[np.ndarray]

    def __post_init__(self):
        self.layers = [np.asarray(W, dtype=float) for W in self.layers]
        self.o = np.asarray(self.o, dtype=float)
        self.masks = [np.asarray(m, dtype=float) for m in self.masks]
        if len(self.masks) != len(self.layers):
            raise ShapeError("need one mask per layer")
        n = self.masks[0].shape[0]
        for W, m in zip(self.layers, self.masks):
            if m.shape != (n, W.shape[0]):
                raise ShapeError(f"mask shape {m.shape} vs layer output {W.shape[0]}")
            if not np.all(np.abs(m) == 1.0):
                raise ShapeError("mask entries must be exactly +-1")
        for Wa, Wb in zip(self.layers[:-1], self.layers[1:]):
            if Wb.shape[1] != Wa.shape[0]:
                raise ShapeError("layer dimensions do not compose")
        if self.o.shape != (self.layers[-1].shape[0],):
            raise ShapeError("output vector length must match the last layer")

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def n_samples(self) -> int:
        return self.masks[0].shape[0]

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.layers[0].shape[1],) + tuple(W.shape[0] for W in self.layers)


def sample_masks(dims, n: int, rng: np.random.Generator) -> list[np.ndarray]:
    """One n x h_{l+1} sign matrix per layer, entries independent +-1."""
    return [rng.choice([-1.0, 1.0], size=(n, h)) for h in dims[1:]]


def randact_forward(net: RandActNetwork, i: int, x) -> float:
    """Output for sample index i (whose masks are frozen in the network)."""
    v = np.asarray(x, dtype=float)
    if v.shape != (net.layers[0].shape[1],):
        raise ShapeError(f"x has shape {v.shape}, expected ({net.layers[0].shape[1]},)")
    for W, m in zip(net.layers, net.masks):
        v = m[i] * (W @ v)
    return float(net.o @ v)


def randact_predictions(net: RandActNetwork, X) -> np.ndarray:
    """Vectorized forward pass; row i of X uses sample i's masks."""
    V = np.asarray(X, dtype=float)
    if V.shape != (net.n_samples, net.layers[0].shape[1]):
        raise ShapeError(
            f"X has shape {V.shape}, expected ({net.n_samples}, {net.layers[0].shape[1]})"
        )
    for W, m in zip(net.layers, net.masks):
        V = m * (V @ W.T)
    return V @ net.o


@dataclass
class LayerProblem:
    """Linear regression for one layer: labels[i] = outputs[i]^T W inputs[i]."""

    layer_index: int
    inputs: np.ndarray  # n x h_ell, layers below folded in
    outputs: np.ndarray  # n x h_{ell+1}, layers above folded in
    labels: np.ndarray

    def __post_init__(self):
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.outputs))):
            raise ShapeError("collapsed inputs/outputs must be finite")

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.outputs.shape[1], self.inputs.shape[1])


def collapse_layer(net: RandActNetwork, ell: int, X) -> LayerProblem:
    """Fold all layers except ``ell`` into per-sample input/output vectors.

    inputs[i] applies the masked layers below ell to x_i; outputs[i] pulls o
    back through the masked transposes of the layers above ell, so that the
    full forward output equals outputs[i]^T layers[ell] inputs[i].
    """
    D = net.depth
    if not 0 <= ell < D:
        raise ShapeError(f"layer index {ell} out of range for depth {D}")
    X = np.asarray(X, dtype=float)
    V = X
    for l in range(ell):
        V = net.masks[l] * (V @ net.layers[l].T)
    U = net.masks[D - 1] * net.o[None, :]
    for l in range(D - 2, ell - 1, -1):
        U = net.masks[l] * (U @ net.layers[l + 1])
    labels = np.einsum("ni,ij,nj->n", U, net.layers[ell], V)
    return LayerProblem(layer_index=ell, inputs=V, outputs=U, labels=labels)


def randact_loss_and_gradient(problem: LayerProblem, U: np.ndarray):
    """Half-MSE loss of the collapsed regression and its gradient at U."""
    U = np.asarray(U, dtype=float)
    if U.shape != problem.shape:
        raise ShapeError(f"U has shape {U.shape}, expected {problem.shape}")
    r = np.einsum("ni,ij,nj->n", problem.outputs, U, problem.inputs) - problem.labels
    value = 0.5 * float(np.mean(r * r))
    grad = (problem.outputs * r[:, None]).T @ problem.inputs / problem.n
    return value, grad


def randact_gradient(problem: LayerProblem, U: np.ndarray) -> np.ndarray:
    return randact_loss_and_gradient(problem, U)[1]


def randact_pgd(
    problem: LayerProblem,
    spec: constraints.ConstraintSpec,
    mu: float,
    iters: int,
    w0: np.ndarray,
    w_star=None,
) -> pgd.PgdTrace:
    """Projected gradient descent on the collapsed layer regression."""
    cfg = pgd.PgdConfig(mu=mu, max_iters=iters, constraint=spec)
    return pgd.descend(
        lambda _j, W: randact_loss_and_gradient(problem, W), w0, cfg, w_star
    )


def gamma_bar(net: RandActNetwork, ell: int) -> float:
    """Product of squared spectral norms over all layers except ell.

    The output vector counts as a final diagonal layer, contributing
    max|o_i|^2.
    """
    if not 0 <= ell < net.depth:
        raise ShapeError(f"layer index {ell} out of range")
    prod = float(np.max(np.abs(net.o))) ** 2
    for j, W in enumerate(net.layers):
        if j != ell:
            prod *= float(np.linalg.norm(W, 2)) ** 2
    return prod


def default_learning_rate(net: RandActNetwork, ell: int, n: int) -> float:
    """Conservative theory rate 1/(6 q gamma_bar) for learning layer ell."""
    d_in = net.layers[ell].shape[1]
    d_out = net.layers[ell].shape[0]
    q = max(1.0, d_in * d_out * np.log(d_in * d_out) / n)
    return 1.0 / (6.0 * q * gamma_bar(net, ell))
