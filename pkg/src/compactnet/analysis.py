"""Diagnostics for the local optimization landscape.

Builds the Gauss-Newton matrix at the planted weights from its rank-one
feature vectors, splits the gradient map into the ground-truth part plus two
perturbations that vanish at the truth, computes restricted eigenvalues over
full/subspace/sparse direction sets, and evaluates the closed-form condition
and complexity quantities used to size learning rates and sample budgets.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, asdict

import numpy as np

from .activations import ActivationKind, act_deriv, act_value, lipschitz_constants, zeta
from .errors import CapacityError, ConditionError, DomainError, ShapeError

HESSIAN_SIZE_GUARD = 4096
SECANT_EPS = 1e-12


def rho_features(o, w_star, x, kind: ActivationKind) -> np.ndarray:
    """Feature vector (o * sigma'(W x)) kron x, flattened to match vec(W)."""
    o = np.asarray(o, dtype=float)
    W = np.asarray(w_star, dtype=float)
    x = np.asarray(x, dtype=float)
    if o.shape != (W.shape[0],) or x.shape != (W.shape[1],):
        raise ShapeError(f"shapes do not agree: o {o.shape}, W {W.shape}, x {x.shape}")
    d = o * act_deriv(kind, W @ x)
    return np.kron(d, x)


def rho_feature_matrix(o, W, X, kind: ActivationKind) -> np.ndarray:
    """Stack rho features for each row of X; returns n x (h*p)."""
    o = np.asarray(o, dtype=float)
    W = np.asarray(W, dtype=float)
    X = np.asarray(X, dtype=float)
    D = act_deriv(kind, X @ W.T) * o
    n = X.shape[0]
    return np.einsum("nh,np->nhp", D, X).reshape(n, -1)


def _guard_size(h: int, p: int):
    if h * p > HESSIAN_SIZE_GUARD:
        raise CapacityError(f"dense {h * p} x {h * p} matrix exceeds the size guard")


def hessian_ground_truth(o, w_star, data, kind: ActivationKind) -> np.ndarray:
    """Empirical second moment of the rho features at the planted weights.

    Symmetric PSD by construction; equals the loss Hessian at the truth for
    smooth activations because the residuals vanish there.
    """
    W = np.asarray(w_star, dtype=float)
    _guard_size(*W.shape)
    R = rho_feature_matrix(o, W, data.inputs, kind)
    return R.T @ R / data.n


@dataclass
class HessianDecomposition:
    """Three matrices with grad L(U) = (H1 + H2 + H3) vec(U - W*).

    H1 is the second-moment matrix at the planted weights; H2 and H3 vanish
    as U approaches them.
    """

    H1: np.ndarray
    H2: np.ndarray
    H3: np.ndarray
    U: np.ndarray
    w_star: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.H1 + self.H2 + self.H3


def _secant_features(o, U, w_star, X, kind: ActivationKind) -> np.ndarray:
    """Rows d(U, W*; x_i) kron x_i with the divided difference of sigma.

    Where a row of U and W* produce (near-)equal inner products the 0/0
    ratio is replaced by its limit, the derivative at that common point.
    """
    o = np.asarray(o, dtype=float)
    ZU = X @ np.asarray(U, dtype=float).T
    ZW = X @ np.asarray(w_star, dtype=float).T
    den = ZU - ZW
    small = np.abs(den) < SECANT_EPS
    ratio = np.divide(
        act_value(kind, ZU) - act_value(kind, ZW),
        np.where(small, 1.0, den),
        where=~small,
        out=np.zeros_like(den),
    )
    ratio = np.where(small, act_deriv(kind, ZU), ratio)
    n = X.shape[0]
    return np.einsum("nh,np->nhp", ratio * o, X).reshape(n, -1)


def hessian_decomposition(o, w_star, U, data, kind: ActivationKind) -> HessianDecomposition:
    W = np.asarray(w_star, dtype=float)
    U = np.asarray(U, dtype=float)
    if U.shape != W.shape:
        raise ShapeError(f"U shape {U.shape} vs W* shape {W.shape}")
    _guard_size(*W.shape)
    X = data.inputs
    n = data.n
    Rw = rho_feature_matrix(o, W, X, kind)
    Ru = rho_feature_matrix(o, U, X, kind)
    Rsec = _secant_features(o, U, W, X, kind)
    H1 = Rw.T @ Rw / n
    H2 = Rw.T @ (Rsec - Rw) / n
    H3 = (Ru - Rw).T @ Rsec / n
    return HessianDecomposition(H1=H1, H2=H2, H3=H3, U=U, w_star=W)


@dataclass(frozen=True, eq=False)
class SubspaceDirections:
    """Restrict to the span of an orthonormal basis (m x d)."""

    basis: np.ndarray


@dataclass(frozen=True)
class SparseCone:
    """Restrict to vectors supported on at most s coordinates."""

    s: int
    max_supports: int = 100_000
    seed: int = 0


@dataclass(frozen=True)
class SparseConeEig:
    value: float
    supports_checked: int
    exhaustive: bool


def sparse_cone_min_eigenvalue(
    H: np.ndarray, s: int, max_supports: int = 100_000, seed: int = 0
) -> SparseConeEig:
    """Min over size-s supports of the smallest principal-submatrix eigenvalue.

    Exhaustive when C(m, s) <= max_supports, otherwise that many random
    supports are sampled; the result records which happened.
    """
    m = H.shape[0]
    if not 1 <= s <= m:
        raise DomainError(f"support size {s} out of range for m={m}")
    total = math.comb(m, s)
    exhaustive = total <= max_supports
    if exhaustive:
        supports = itertools.combinations(range(m), s)
        count = total
    else:
        rng = np.random.default_rng(seed)
        supports = (
            tuple(rng.choice(m, size=s, replace=False)) for _ in range(max_supports)
        )
        count = max_supports
    best = np.inf
    for sup in supports:
        idx = np.asarray(sup)
        sub = H[np.ix_(idx, idx)]
        best = min(best, float(np.linalg.eigvalsh(sub)[0]))
    return SparseConeEig(value=best, supports_checked=count, exhaustive=exhaustive)


def restricted_eigenvalue(H: np.ndarray, directions="full") -> float:
    """Smallest quadratic-form value of H over the given direction set.

    ``directions`` is "full", a ``SubspaceDirections``, or a ``SparseCone``.
    """
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ShapeError("H must be square")
    if np.abs(H - H.T).max() > 1e-8:
        raise DomainError("H is asymmetric beyond 1e-8")
    Hs = 0.5 * (H + H.T)
    if isinstance(directions, str):
        if directions != "full":
            raise DomainError(f"unknown direction set {directions!r}")
        return float(np.linalg.eigvalsh(Hs)[0])
    if isinstance(directions, SubspaceDirections):
        B = directions.basis
        if B.shape[0] != Hs.shape[0]:
            raise ShapeError(f"basis rows {B.shape[0]} vs H size {Hs.shape[0]}")
        return float(np.linalg.eigvalsh(B.T @ Hs @ B)[0])
    if isinstance(directions, SparseCone):
        return sparse_cone_min_eigenvalue(
            Hs, directions.s, directions.max_supports, directions.seed
        ).value
    raise DomainError(f"unsupported directions {directions!r}")


@dataclass
class CriticalQuantities:
    """Closed-form conditioning/complexity quantities for a planted model.

    All values carry the convention that the analysis' unspecified absolute
    constants are set to 1, so only their scaling is meaningful.
    """

    theta: float
    omega: float
    q: float
    mu_theory: float
    rho_theory: float
    upsilon_bar: float
    s_min: float
    s_max: float
    kappa_o: float
    kappa_w: float
    zeta_s_min: float
    L: float
    L0: float
    sv_ratio_product: float
    h: int
    p: int
    n: int

    def to_dict(self) -> dict:
        return asdict(self)


def critical_quantities(
    o, w_star, kind: ActivationKind, n: int, p: int | None = None
) -> CriticalQuantities:
    """Evaluate the conditioning quantities of a planted one-layer model.

    theta  = L^2 s_max^2 kappa(o)^2 kappa(W*)^(h+2) / zeta(s_min)
    omega  = h (log p + L0^2 / (L^2 s_max^2))
    q      = max(1, 8 p log(p) / n)
    mu_theory  = 1 / (6 q o_max^2 L^2 omega)
    rho_theory = 1 - 1 / (12 q upsilon_bar^4 omega)

    with upsilon_bar = theta log^2(theta).
    """
    o = np.asarray(o, dtype=float)
    W = np.asarray(w_star, dtype=float)
    h, p_w = W.shape
    if p is None:
        p = p_w
    elif p != p_w:
        raise ShapeError(f"declared p={p} vs W* columns {p_w}")
    if np.any(o == 0):
        raise DomainError("output vector has a zero entry; kappa(o) undefined")
    sv = np.linalg.svd(W, compute_uv=False)
    s_max, s_min = float(sv[0]), float(sv[-1])
    if s_min <= 1e-12 * s_max:
        raise ConditionError("W* is rank deficient; condition number is unbounded")
    consts = lipschitz_constants(kind)
    if consts.L == 0:
        raise DomainError(f"{ActivationKind(kind).value} has L = 0; theta undefined")
    z = zeta(kind, s_min)
    if z <= 0:
        raise DomainError(
            f"activation {ActivationKind(kind).value} is degenerate: zeta(s_min) <= 0"
        )
    kappa_o = float(np.max(np.abs(o)) / np.min(np.abs(o)))
    kappa_w = s_max / s_min
    theta = consts.L**2 * s_max**2 * kappa_o**2 * kappa_w ** (h + 2) / z
    omega = h * (math.log(p) + consts.L0**2 / (consts.L**2 * s_max**2))
    q = max(1.0, 8.0 * p * math.log(p) / n)
    o_max = float(np.max(np.abs(o)))
    upsilon = theta * math.log(theta) ** 2
    mu_theory = 1.0 / (6.0 * q * o_max**2 * consts.L**2 * omega)
    rho_theory = 1.0 - 1.0 / (12.0 * q * upsilon**4 * omega) if upsilon > 0 else -np.inf
    return CriticalQuantities(
        theta=theta,
        omega=omega,
        q=q,
        mu_theory=mu_theory,
        rho_theory=rho_theory,
        upsilon_bar=upsilon,
        s_min=s_min,
        s_max=s_max,
        kappa_o=kappa_o,
        kappa_w=kappa_w,
        zeta_s_min=z,
        L=consts.L,
        L0=consts.L0,
        sv_ratio_product=float(np.prod(sv / s_min)),
        h=h,
        p=p,
        n=n,
    )


def rademacher_bound(
    L: float, R_o: float, R_W: float, h: int, s: float, B: float, n: int, p: int
) -> float:
    """Complexity bound L R_o R_W sqrt(((h+s) log(n+p) + s log(1+B/R_W)) / n).

    The absolute constant of the bound is set to 1; only scaling relations
    across inputs are meaningful.
    """
    if min(L, R_o, R_W) <= 0 or min(h, n, p) < 1 or s < 0:
        raise DomainError("arguments must be positive (s may be zero)")
    cover = s * math.log(1.0 + B / R_W) if s > 0 else 0.0
    inner = ((h + s) * math.log(n + p) + cover) / n
    return L * R_o * R_W * math.sqrt(inner)


def _kappa_row(V: np.ndarray) -> float:
    norms = np.linalg.norm(V, axis=1)
    if np.any(norms == 0):
        raise ConditionError("matrix has a zero row; row condition undefined")
    return float(np.linalg.norm(V, 2) / norms.min())


def network_condition_number(layers, o, ell: int) -> float:
    """kappa(o) times the row condition numbers of every layer except ell.

    Layers below ell contribute kappa_row(W); layers above contribute
    kappa_row(W^T).  Scale-invariant in each layer.
    """
    o = np.asarray(o, dtype=float)
    if np.any(o == 0):
        raise ConditionError("output vector has a zero entry")
    if not 0 <= ell < len(layers):
        raise DomainError(f"layer index {ell} out of range")
    value = float(np.max(np.abs(o)) / np.min(np.abs(o)))
    for j, W in enumerate(layers):
        W = np.asarray(W, dtype=float)
        if j < ell:
            value *= _kappa_row(W)
        elif j > ell:
            value *= _kappa_row(W.T)
    return value


def covariance_min_eig_check(
    w_star, o, kind: ActivationKind, n_mc: int, rng: np.random.Generator | None = None
) -> float:
    """Smallest eigenvalue of the Monte-Carlo covariance of the rho features.

    Draws n_mc standard Gaussian inputs, forms the mean-subtracted feature
    covariance, and returns its minimum eigenvalue.  For (near-)orthogonal
    planted rows this estimates a quantity lower bounded by the interval
    nonlinearity measure of the activation.
    """
    W = np.asarray(w_star, dtype=float)
    _guard_size(*W.shape)
    if n_mc < 10_000:
        raise DomainError(f"n_mc must be at least 10^4 for a usable estimate, got {n_mc}")
    rng = np.random.default_rng(0) if rng is None else rng
    X = rng.standard_normal((n_mc, W.shape[1]))
    R = rho_feature_matrix(o, W, X, kind)
    cov = np.cov(R, rowvar=False, ddof=1)
    return float(np.linalg.eigvalsh(np.atleast_2d(cov))[0])
