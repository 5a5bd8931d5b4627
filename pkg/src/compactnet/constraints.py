"""Constraint-set descriptors, Euclidean projections, covering dimensions.

``ConstraintSpec`` is a tagged descriptor for the feasible set; ``project``
maps a weight matrix to its closest feasible point in Frobenius norm.
``covering_dimension`` evaluates the complexity formula associated with each
constraint family (proportional to its degrees of freedom).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import cnn
from .errors import DomainError, ShapeError

VALID_TAGS = ("none", "sparsity", "l1_ball", "rank", "nuclear_ball", "subspace", "conv")


@dataclass(frozen=True, eq=False)
class ConstraintSpec:
    """Tagged constraint descriptor; build via the classmethod constructors."""

    tag: str
    s: int | None = None
    tau: float | None = None
    r: int | None = None
    basis: np.ndarray | None = None
    geometry: cnn.ConvGeometry | None = None

    def __post_init__(self):
        if self.tag not in VALID_TAGS:
            raise DomainError(f"unknown constraint tag {self.tag!r}")

    @classmethod
    def none(cls) -> "ConstraintSpec":
        return cls("none")

    @classmethod
    def sparsity(cls, s: int) -> "ConstraintSpec":
        if s < 1:
            raise DomainError(f"nonzero budget must be >= 1, got {s}")
        return cls("sparsity", s=int(s))

    @classmethod
    def l1_ball(cls, tau: float) -> "ConstraintSpec":
        if not tau > 0:
            raise DomainError(f"l1 radius must be positive, got {tau}")
        return cls("l1_ball", tau=float(tau))

    @classmethod
    def rank(cls, r: int) -> "ConstraintSpec":
        if r < 1:
            raise DomainError(f"rank bound must be >= 1, got {r}")
        return cls("rank", r=int(r))

    @classmethod
    def nuclear_ball(cls, tau: float) -> "ConstraintSpec":
        if not tau > 0:
            raise DomainError(f"nuclear radius must be positive, got {tau}")
        return cls("nuclear_ball", tau=float(tau))

    @classmethod
    def subspace(cls, basis: np.ndarray) -> "ConstraintSpec":
        basis = np.asarray(basis, dtype=float)
        if basis.ndim != 2 or basis.shape[1] > basis.shape[0]:
            raise ShapeError("basis must be (hp, d) with d <= hp")
        gram = basis.T @ basis
        if np.abs(gram - np.eye(basis.shape[1])).max() > 1e-10:
            raise DomainError("basis columns must be orthonormal within 1e-10")
        return cls("subspace", basis=basis)

    @classmethod
    def conv(cls, k: int, b: int, stride: int, p: int, r: int | None = None) -> "ConstraintSpec":
        return cls("conv", geometry=cnn.make_geometry(k, b, stride, p, r))


@dataclass(frozen=True)
class CovDimResult:
    """Covering-dimension estimate and the formula that produced it.

    Logarithms are natural; the formulas hold up to a constant factor.
    """

    value: float
    formula_tag: str


def _project_l1_vector(v: np.ndarray, tau: float) -> np.ndarray:
    """Euclidean projection of a vector onto the l1 ball of radius tau.

    Sort-based soft threshold: the threshold is read off the sorted
    cumulative sums of |v| (Duchi et al. style), O(m log m).
    """
    a = np.abs(v)
    if a.sum() <= tau:
        return v.copy()
    u = np.sort(a)[::-1]
    cumsum = np.cumsum(u)
    j = np.arange(1, u.size + 1)
    rho = np.nonzero(u - (cumsum - tau) / j > 0)[0].max() + 1
    theta = (cumsum[rho - 1] - tau) / rho
    return np.sign(v) * np.maximum(a - theta, 0.0)


def project(spec: ConstraintSpec, W: np.ndarray) -> np.ndarray:
    """Euclidean (Frobenius) projection of W onto the constraint set."""
    W = np.asarray(W, dtype=float)
    if not np.all(np.isfinite(W)):
        raise DomainError("cannot project a non-finite matrix")
    if spec.tag == "none":
        return W.copy()
    if spec.tag == "sparsity":
        if spec.s > W.size:
            raise DomainError(f"sparsity budget {spec.s} exceeds {W.size} entries")
        flat = W.ravel()
        # stable sort on -|w|: ties broken by lowest flattened index
        keep = np.argsort(-np.abs(flat), kind="stable")[: spec.s]
        out = np.zeros_like(flat)
        out[keep] = flat[keep]
        return out.reshape(W.shape)
    if spec.tag == "l1_ball":
        return _project_l1_vector(W.ravel(), spec.tau).reshape(W.shape)
    if spec.tag == "rank":
        U, s, Vt = np.linalg.svd(W, full_matrices=False)
        s[spec.r :] = 0.0
        return (U * s) @ Vt
    if spec.tag == "nuclear_ball":
        U, s, Vt = np.linalg.svd(W, full_matrices=False)
        return (U * _project_l1_vector(s, spec.tau)) @ Vt
    if spec.tag == "subspace":
        v = W.reshape(-1)
        if v.size != spec.basis.shape[0]:
            raise ShapeError(
                f"W has {v.size} entries, basis expects {spec.basis.shape[0]}"
            )
        return (spec.basis @ (spec.basis.T @ v)).reshape(W.shape)
    return cnn.project_conv(W, spec.geometry)


def covering_dimension(
    spec: ConstraintSpec, h: int, p: int, nnz: int | None = None
) -> CovDimResult:
    """Evaluate the covering-dimension formula for the constraint family.

    ``nnz`` supplies the ground-truth nonzero count needed by the l1 family
    (the ball radius alone does not determine it).
    """
    if h < 1 or p < 1:
        raise DomainError("dimensions must be positive")
    if spec.tag == "none":
        return CovDimResult(float(h * p), "none: h*p")
    if spec.tag == "conv":
        g = spec.geometry
        return CovDimResult(float(g.k * g.b), "conv: k*b")
    if spec.tag in ("sparsity", "l1_ball"):
        s = spec.s if spec.tag == "sparsity" else nnz
        if s is None:
            raise DomainError("l1_ball covering dimension needs nnz (ground-truth nonzeros)")
        if s > h * p:
            raise DomainError(f"s={s} exceeds h*p={h * p}")
        return CovDimResult(s * math.log(6.0 * h * p / s), f"{spec.tag}: s*log(6hp/s)")
    if spec.tag == "subspace":
        return CovDimResult(float(spec.basis.shape[1]), "subspace: dim")
    if spec.tag == "rank":
        return CovDimResult(float(spec.r * h), "rank: r*h")
    raise DomainError(f"no covering-dimension formula for {spec.tag!r}")
