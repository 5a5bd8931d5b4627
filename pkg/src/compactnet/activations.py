"""Scalar activations, their derivatives, and Gaussian nonlinearity measures.

The nonlinearity measure ``zeta(theta)`` quantifies how far the derivative of
an activation is from constant/linear behaviour under a Gaussian input of
scale ``theta``; it is zero exactly for the identity and positive for the
genuinely nonlinear activations shipped here.  ``zeta_interval`` extends the
measure to a range of input scales.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError


class ActivationKind(str, enum.Enum):
    SIGMOID = "sigmoid"
    TANH = "tanh"
    ERF = "erf"
    SQUARED_RELU = "squared_relu"
    SOFTPLUS = "softplus"
    RELU = "relu"
    IDENTITY = "identity"


# Kinds whose derivative is Lipschitz (smoothness assumption of the analysis).
SMOOTH_KINDS = frozenset(
    {
        ActivationKind.SIGMOID,
        ActivationKind.TANH,
        ActivationKind.ERF,
        ActivationKind.SQUARED_RELU,
        ActivationKind.SOFTPLUS,
    }
)

# Kinds whose derivative has a kink at 0; quadrature must split there.
_KINKED = frozenset({ActivationKind.RELU, ActivationKind.SQUARED_RELU})

_SQRT_PI_HALF = np.sqrt(np.pi) / 2.0


def _sigmoid(x):
    # exp(-logaddexp(0,-x)) = 1/(1+exp(-x)) without overflow
    return np.exp(-np.logaddexp(0.0, -x))


def _check_finite(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("activation input must be finite")
    return arr


def act_value(kind: ActivationKind, x):
    """Evaluate the activation elementwise; scalars in, scalar out."""
    kind = ActivationKind(kind)
    arr = _check_finite(x)
    if kind is ActivationKind.SIGMOID:
        out = _sigmoid(arr)
    elif kind is ActivationKind.TANH:
        out = np.tanh(arr)
    elif kind is ActivationKind.ERF:
        # integral form: int_0^x exp(-t^2) dt
        out = _SQRT_PI_HALF * special.erf(arr)
    elif kind is ActivationKind.SQUARED_RELU:
        out = np.square(np.maximum(arr, 0.0))
    elif kind is ActivationKind.SOFTPLUS:
        # log(1+exp(x)), overflow-safe for large |x|
        out = np.logaddexp(0.0, arr)
    elif kind is ActivationKind.RELU:
        out = np.maximum(arr, 0.0)
    else:
        out = arr.copy()
    return float(out) if out.ndim == 0 else out


def act_deriv(kind: ActivationKind, x):
    """Derivative of the activation elementwise; relu uses deriv(0) = 0."""
    kind = ActivationKind(kind)
    arr = _check_finite(x)
    if kind is ActivationKind.SIGMOID:
        s = _sigmoid(arr)
        out = s * (1.0 - s)
    elif kind is ActivationKind.TANH:
        out = 1.0 - np.square(np.tanh(arr))
    elif kind is ActivationKind.ERF:
        out = np.exp(-np.square(arr))
    elif kind is ActivationKind.SQUARED_RELU:
        out = 2.0 * np.maximum(arr, 0.0)
    elif kind is ActivationKind.SOFTPLUS:
        out = _sigmoid(arr)
    elif kind is ActivationKind.RELU:
        out = (arr > 0).astype(float)
    else:
        out = np.ones_like(arr)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LipschitzConstants:
    """Conservative bounds: L >= sup|sigma''|, L0 >= |sigma'(0)|."""

    L: float
    L0: float


@functools.lru_cache(maxsize=None)
def lipschitz_constants(kind: ActivationKind) -> LipschitzConstants:
    """Numeric (L, L0) bounds for a smooth kind.

    L is estimated as the largest finite-difference slope of the derivative
    on a dense grid, inflated by 1% to stay an upper bound; L0 = |sigma'(0)|.
    Raises for relu, whose derivative is discontinuous.
    """
    kind = ActivationKind(kind)
    if kind is ActivationKind.RELU:
        raise DomainError("relu derivative is not Lipschitz; no (L, L0) pair")
    if kind is ActivationKind.IDENTITY:
        return LipschitzConstants(L=0.0, L0=1.0)
    grid = np.linspace(-30.0, 30.0, 240_001)
    d = act_deriv(kind, grid)
    slopes = np.abs(np.diff(d) / np.diff(grid))
    L = float(slopes.max()) * 1.01
    L0 = abs(act_deriv(kind, 0.0))
    if kind is ActivationKind.SQUARED_RELU:
        L0 = 0.0
    return LipschitzConstants(L=L, L0=L0)


@functools.lru_cache(maxsize=None)
def _leggauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def gaussian_expectation(fn, scale: float = 1.0, nodes: int = 24) -> float:
    """E[fn(g)] for g ~ N(0,1) by composite Gauss-Legendre panels.

    Panels are split at 0 and refined near it on the width 1/max(scale, 1),
    so integrands with a kink or sharp transition at the origin (relu-family
    derivatives, steep logistics) are resolved to near machine precision.
    """
    width = 1.0 / max(scale, 1.0)
    edges = np.unique(
        np.clip([0.0, 0.5 * width, width, 2.0 * width, 4.0, 8.0, 12.0], 0.0, 12.0)
    )
    t, w = _leggauss(nodes)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        x = 0.5 * (b - a) * t + 0.5 * (a + b)
        wx = 0.5 * (b - a) * w
        density = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
        total += wx @ (np.asarray(fn(x)) * density)
        total += wx @ (np.asarray(fn(-x)) * density)
    return float(total)


def _deriv_moments(kind: ActivationKind, theta: float, nodes: int):
    """Moments of eta = sigma'(theta*g): E[eta g^b] for b=0,1,2 and E[eta^2], E[(eta g)^2]."""
    d = lambda g: act_deriv(kind, theta * g)
    ex = lambda f: gaussian_expectation(f, scale=theta, nodes=nodes)
    m1 = ex(d)
    m1g = ex(lambda g: d(g) * g)
    m1g2 = ex(lambda g: d(g) * g * g)
    m2 = ex(lambda g: d(g) ** 2)
    m2g2 = ex(lambda g: (d(g) * g) ** 2)
    return m1, m1g, m1g2, m2, m2g2


def zeta(kind: ActivationKind, theta: float, nodes: int = 24) -> float:
    """Nonlinearity measure at Gaussian input scale theta > 0.

    With g ~ N(0,1) and eta = sigma'(theta*g), returns

        min{ var[eta] - E[eta g]^2 ,  var[eta g] - E[eta g^2]^2 }.

    ``nodes`` is the Gauss-Legendre node count per quadrature panel.
    """
    kind = ActivationKind(kind)
    if not np.isfinite(theta) or theta <= 0:
        raise DomainError(f"theta must be positive, got {theta}")
    m1, m1g, m1g2, m2, m2g2 = _deriv_moments(kind, float(theta), nodes)
    term1 = (m2 - m1 * m1) - m1g * m1g
    term2 = (m2g2 - m1g * m1g) - m1g2 * m1g2
    # both terms are nonnegative by Cauchy-Schwarz; negatives are roundoff
    return max(0.0, min(term1, term2))


def zeta_interval(
    kind: ActivationKind,
    alpha: float,
    beta: float,
    grid: int = 33,
    nodes: int = 24,
) -> float:
    """Nonlinearity measure over the scale interval [alpha, beta].

    Evaluates, by grid search with quadrature at each grid point,

        theta_1 = inf_{x,y} (v(x)+v(y) - sqrt((v(x)-v(y))^2 + 4 e(x)^2 e(y)^2)) / 2
        theta_2 = inf_x  var[g eta(x)] - E[g^2 eta(x)]^2

    where eta(x) = sigma'(x g), v(x) = var[eta(x)], e(x) = E[g eta(x)], and
    returns min(theta_1, theta_2).  Collapses to ``zeta(kind, alpha)`` when
    alpha == beta.
    """
    kind = ActivationKind(kind)
    if not (np.isfinite(alpha) and np.isfinite(beta)) or not 0 < alpha <= beta:
        raise DomainError(f"need 0 < alpha <= beta, got ({alpha}, {beta})")
    points = np.linspace(alpha, beta, 1 if alpha == beta else grid)
    v = np.empty(points.size)
    e1 = np.empty(points.size)
    term2 = np.empty(points.size)
    for i, x in enumerate(points):
        m1, m1g, m1g2, m2, m2g2 = _deriv_moments(kind, float(x), nodes)
        v[i] = m2 - m1 * m1
        e1[i] = m1g
        term2[i] = (m2g2 - m1g * m1g) - m1g2 * m1g2
    vx = v[:, None]
    vy = v[None, :]
    cross = 4.0 * np.outer(e1 * e1, e1 * e1)
    theta1 = 0.5 * (vx + vy - np.sqrt((vx - vy) ** 2 + cross))
    return max(0.0, min(float(theta1.min()), float(term2.min())))
