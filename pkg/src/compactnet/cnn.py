"""One-dimensional convolutional model and its fully-connected embedding.

A bank of k kernels of width b, slid along a length-p input with a fixed
stride, is equivalent to an h x p fully-connected weight matrix (h = k * r,
r = number of patch positions) whose rows are shifted copies of the kernels.
This module provides that embedding, the CNN forward/gradient, the orthogonal
projection onto the space of such matrices, and DFT-based singular value
bounds for the single-kernel case.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .activations import ActivationKind, act_deriv, act_value
from .errors import GeometryError, ShapeError
from .model import Dataset


def default_patch_count(p: int, b: int, stride: int) -> int:
    """Number of valid (un-padded) windows: floor((p - b)/stride) + 1."""
    return (p - b) // stride + 1


@dataclass(frozen=True)
class ConvGeometry:
    """Window layout: k kernels of width b over a length-p input."""

    k: int
    b: int
    stride: int
    p: int
    r: int

    def __post_init__(self):
        if min(self.k, self.b, self.stride, self.p, self.r) < 1:
            raise GeometryError(f"all geometry fields must be >= 1: {self}")
        if self.b > self.p:
            raise GeometryError(f"kernel width {self.b} exceeds input length {self.p}")
        if (self.r - 1) * self.stride + self.b > self.p:
            raise GeometryError(
                f"window {self.r - 1} spans past the input: "
                f"{(self.r - 1) * self.stride + self.b} > {self.p}"
            )

    @property
    def h(self) -> int:
        return self.k * self.r

    def window_columns(self) -> np.ndarray:
        """r x b column indices, row l being the l-th window."""
        offs = np.arange(self.r) * self.stride
        return offs[:, None] + np.arange(self.b)[None, :]


def make_geometry(k: int, b: int, stride: int, p: int, r: int | None = None) -> ConvGeometry:
    return ConvGeometry(k, b, stride, p, default_patch_count(p, b, stride) if r is None else r)


@dataclass
class KernelBank:
    """Kernel matrix K (k x b, rows are kernels) plus window geometry."""

    K: np.ndarray
    p: int
    stride: int
    r: int | None = None
    geometry: ConvGeometry = field(init=False)

    def __post_init__(self):
        self.K = np.asarray(self.K, dtype=float)
        if self.K.ndim != 2:
            raise ShapeError("K must be a k x b matrix")
        k, b = self.K.shape
        self.geometry = make_geometry(k, b, self.stride, self.p, self.r)
        self.r = self.geometry.r

    @property
    def h(self) -> int:
        return self.geometry.h


def fc_from_kernels(bank: KernelBank) -> np.ndarray:
    """Embed the bank as a (k*r) x p weight matrix.

    Row i*r + l carries kernel i at column offset l*stride, zeros elsewhere
    (kernel-major row ordering).
    """
    g = bank.geometry
    W = np.zeros((g.h, g.p))
    cols = g.window_columns()
    rows = (np.arange(g.k)[:, None] * g.r + np.arange(g.r)[None, :]).reshape(-1)
    W[rows[:, None], np.tile(cols, (g.k, 1))] = np.repeat(bank.K, g.r, axis=0)
    return W


def patches(X: np.ndarray, geometry: ConvGeometry) -> np.ndarray:
    """Extract the r windows of each row of X; returns n x r x b."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != geometry.p:
        raise ShapeError(f"X has shape {X.shape}, expected (n, {geometry.p})")
    return X[:, geometry.window_columns()]


def _check_out_weights(o, geometry: ConvGeometry) -> np.ndarray:
    o = np.asarray(o, dtype=float)
    if o.shape != (geometry.k, geometry.r):
        raise ShapeError(f"output weights have shape {o.shape}, expected {(geometry.k, geometry.r)}")
    return o


def cnn_forward(bank: KernelBank, o, x, kind: ActivationKind) -> float:
    """sum_{i,l} o[i,l] * sigma(k_i . x_l) over kernels i and windows l."""
    return float(cnn_predictions(bank, o, np.asarray(x, dtype=float)[None, :], kind)[0])


def cnn_predictions(bank: KernelBank, o, X, kind: ActivationKind) -> np.ndarray:
    g = bank.geometry
    o = _check_out_weights(o, g)
    P = patches(X, g)
    Z = np.einsum("nrb,kb->nkr", P, bank.K)
    return np.einsum("kr,nkr->n", o, act_value(kind, Z))


def cnn_loss_and_gradient(bank: KernelBank, o, data: Dataset, kind: ActivationKind):
    """Half-MSE loss and its k x b gradient with respect to the kernels."""
    g = bank.geometry
    o = _check_out_weights(o, g)
    P = patches(data.inputs, g)
    Z = np.einsum("nrb,kb->nkr", P, bank.K)
    r = np.einsum("kr,nkr->n", o, act_value(kind, Z)) - data.labels
    value = 0.5 * float(np.mean(r * r))
    grad = np.einsum("n,kr,nkr,nrb->kb", r, o, act_deriv(kind, Z), P) / data.n
    return value, grad


def cnn_gradient(bank: KernelBank, o, data: Dataset, kind: ActivationKind) -> np.ndarray:
    return cnn_loss_and_gradient(bank, o, data, kind)[1]


def project_conv(W: np.ndarray, geometry: ConvGeometry) -> np.ndarray:
    """Orthogonal projection onto the space of convolutional weight matrices.

    For each kernel slot, the r shared positions of W are replaced by their
    average; entries outside every window are zeroed.
    """
    W = np.asarray(W, dtype=float)
    g = geometry
    if W.shape != (g.h, g.p):
        raise ShapeError(f"W has shape {W.shape}, expected {(g.h, g.p)}")
    cols = g.window_columns()  # r x b
    Wk = W.reshape(g.k, g.r, g.p)
    windows = Wk[:, np.arange(g.r)[:, None], cols]  # k x r x b
    avg = windows.mean(axis=1)
    out = np.zeros_like(Wk)
    out[:, np.arange(g.r)[:, None], cols] = np.broadcast_to(
        avg[:, None, :], (g.k, g.r, g.b)
    )
    return out.reshape(g.h, g.p)


def kernels_from_fc(W: np.ndarray, geometry: ConvGeometry) -> np.ndarray:
    """Average the shared entries of W back into a k x b kernel matrix."""
    W = np.asarray(W, dtype=float)
    g = geometry
    if W.shape != (g.h, g.p):
        raise ShapeError(f"W has shape {W.shape}, expected {(g.h, g.p)}")
    cols = g.window_columns()
    Wk = W.reshape(g.k, g.r, g.p)
    return Wk[:, np.arange(g.r)[:, None], cols].mean(axis=1)


def circulant_matrix(kernel, p: int) -> np.ndarray:
    """Full p x p circulant built from the zero-padded kernel (wrap-around rows)."""
    kernel = np.asarray(kernel, dtype=float)
    if kernel.ndim != 1 or kernel.size > p:
        raise GeometryError(f"kernel of length {kernel.size} does not fit p={p}")
    row = np.zeros(p)
    row[: kernel.size] = kernel
    idx = (np.arange(p)[None, :] - np.arange(p)[:, None]) % p
    return row[idx]


def circulant_singular_bounds(kernel, p: int) -> tuple[float, float]:
    """(min |DFT|, max |DFT|) of the zero-padded kernel.

    These sandwich the extreme singular values of the single-kernel
    convolutional weight matrix for any stride: the matrix is a row
    subsample of the full circulant, whose singular values are exactly the
    DFT magnitudes.
    """
    kernel = np.asarray(kernel, dtype=float)
    if kernel.ndim != 1 or kernel.size > p:
        raise GeometryError(f"kernel of length {kernel.size} does not fit p={p}")
    padded = np.zeros(p)
    padded[: kernel.size] = kernel
    f = np.abs(np.fft.fft(padded))
    return float(f.min()), float(f.max())
