"""Constrained training of one-hidden-layer networks.

Projected gradient descent under sparsity, l1, low-rank, nuclear, subspace,
and convolutional weight-sharing constraints, with landscape diagnostics and
a reproducible synthetic experiment harness.
"""

__version__ = "0.1.0"

from . import activations, analysis, cnn, constraints, experiments, model, pgd, randact
from .activations import ActivationKind
from .constraints import ConstraintSpec
from .errors import CompactNetError

__all__ = [
    "ActivationKind",
    "CompactNetError",
    "ConstraintSpec",
    "__version__",
    "activations",
    "analysis",
    "cnn",
    "constraints",
    "experiments",
    "model",
    "pgd",
    "randact",
]
