"""Synthetic teacher-student experiments: sparse and convolutional planted weights.

One trial plants a teacher, draws Gaussian training/test data with noiseless
labels, initializes near the teacher ("good") or from scratch ("random"),
runs PGD under each requested constraint, and reports variance-normalized
train/test losses, a permutation-invariant row correlation, and the relative
recovery error.  Trials, teachers, data, and inits all come from disjoint
seeded substreams so sweeps extend rather than reshuffle the data.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import cnn, model, pgd
from .activations import ActivationKind, act_deriv
from .constraints import ConstraintSpec, project
from .errors import DivergenceError, DomainError, ShapeError

CSV_HEADER = (
    "trial,n,constraint,init,train_loss,test_loss,corr,recovery_err,iters,seed,status"
)


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce one experiment sweep."""

    family: str  # "sparse" | "cnn"
    p: int
    n_grid: tuple[int, ...]
    constraints: tuple[str, ...]
    h: int | None = None  # sparse family
    s: int | None = None  # per-row nonzeros (sparse)
    k: int | None = None  # cnn family
    b: int | None = None
    stride: int | None = None
    init_mode: str = "good"
    activation: ActivationKind = ActivationKind.RELU
    mu: float = 5.0
    iters: int = 2000
    n_test: int = 1000
    trials: int = 20
    master_seed: int = 0

    def __post_init__(self):
        if self.family not in ("sparse", "cnn"):
            raise DomainError(f"unknown family {self.family!r}")
        if self.init_mode not in ("good", "random"):
            raise DomainError(f"unknown init mode {self.init_mode!r}")
        if not self.n_grid or self.trials < 1 or self.n_test < 1:
            raise DomainError("n_grid must be nonempty, trials and n_test >= 1")
        if self.family == "sparse" and (self.h is None or self.s is None):
            raise DomainError("sparse family needs h and s")
        if self.family == "cnn" and None in (self.k, self.b, self.stride):
            raise DomainError("cnn family needs k, b, stride")


@dataclass
class ExperimentRecord:
    trial: int
    n: int
    constraint: str
    init_mode: str
    train_loss: float
    test_loss: float
    corr: float
    recovery_err: float
    iters_run: int
    seed: int
    status: str = "ok"

    def to_row(self) -> list:
        return [
            self.trial,
            self.n,
            self.constraint,
            self.init_mode,
            repr(self.train_loss),
            repr(self.test_loss),
            repr(self.corr),
            repr(self.recovery_err),
            self.iters_run,
            self.seed,
            self.status,
        ]

    @property
    def key(self):
        return (self.trial, self.n, self.constraint, self.init_mode)


def gen_sparse_teacher(h: int, p: int, s: int, rng: np.random.Generator) -> np.ndarray:
    """h x p matrix, each row with exactly s nonzeros at uniform positions.

    Nonzero values are N(0, p/(h*s)), which makes E||W x||^2 = ||x||^2 for
    standard Gaussian x.
    """
    if s > p:
        raise DomainError(f"row sparsity {s} exceeds row length {p}")
    W = np.zeros((h, p))
    std = np.sqrt(p / (h * s))
    for i in range(h):
        positions = rng.choice(p, size=s, replace=False)
        W[i, positions] = rng.normal(0.0, std, size=s)
    return W


def gen_cnn_teacher(
    k: int, b: int, p: int, stride: int, rng: np.random.Generator
) -> cnn.KernelBank:
    """Kernel bank with i.i.d. N(0, p/(h*b)) entries, h = k * patch count."""
    r = cnn.default_patch_count(p, b, stride)
    h = k * r
    K = rng.normal(0.0, np.sqrt(p / (h * b)), size=(k, b))
    return cnn.KernelBank(K=K, p=p, stride=stride)


def gen_dataset(
    w_star, o, n: int, kind: ActivationKind, rng: np.random.Generator
) -> model.Dataset:
    """n standard Gaussian inputs with exact (noiseless) teacher labels."""
    if n < 1:
        raise DomainError("need at least one sample")
    W = np.asarray(w_star, dtype=float)
    X = rng.standard_normal((n, W.shape[1]))
    return model.Dataset(X, model.predictions(o, W, X, kind))


def init_weights(
    mode: str, w_star, noise_std: float, rng: np.random.Generator
) -> np.ndarray:
    """good: teacher plus Gaussian noise; random: the noise alone."""
    W = np.asarray(w_star, dtype=float)
    Z = rng.normal(0.0, noise_std, size=W.shape)
    if mode == "good":
        return W + Z
    if mode == "random":
        return Z
    raise DomainError(f"unknown init mode {mode!r}")


def normalized_loss(pred, labels) -> float:
    """var(y - yhat) / var(y) with unbiased sample variances.

    Centering removes constant offsets (e.g. the large mean of nonnegative
    activations), so a constant predictor scores exactly 1.
    """
    pred = np.asarray(pred, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if pred.shape != labels.shape or pred.ndim != 1 or pred.size < 2:
        raise ShapeError("need two same-length vectors of size >= 2")
    vy = np.var(labels, ddof=1)
    if vy == 0:
        raise DomainError("labels have zero variance")
    return float(np.var(labels - pred, ddof=1) / vy)


def correlation(w_star, w_hat) -> float:
    """Mean over teacher rows of the best signed cosine against learned rows.

    Row permutations and positive rescalings of a recovered teacher score
    exactly 1; zero learned rows contribute cosine 0.
    """
    Ws = np.asarray(w_star, dtype=float)
    Wh = np.asarray(w_hat, dtype=float)
    if Ws.shape != Wh.shape:
        raise ShapeError(f"shape mismatch {Ws.shape} vs {Wh.shape}")
    ns = np.linalg.norm(Ws, axis=1)
    if np.any(ns == 0):
        raise DomainError("teacher has a zero row")
    nh = np.linalg.norm(Wh, axis=1)
    cos = (Ws @ Wh.T) / np.outer(ns, np.where(nh == 0, 1.0, nh))
    cos[:, nh == 0] = 0.0
    return float(np.mean(cos.max(axis=1)))


def _gn_spectral_norm(o, W, data, kind, rng, steps: int = 30) -> float:
    """Power-iteration estimate of the Gauss-Newton curvature at W."""
    X = data.inputs
    D = act_deriv(kind, X @ W.T) * np.asarray(o, dtype=float)
    V = rng.standard_normal(W.shape)
    lam = 0.0
    for _ in range(steps):
        t = ((D @ V) * X).sum(axis=1)
        HV = (D * t[:, None]).T @ X / data.n
        nv = np.linalg.norm(V)
        lam = float(np.linalg.norm(HV) / nv) if nv > 0 else 0.0
        nhv = np.linalg.norm(HV)
        if nhv == 0:
            return 0.0
        V = HV / nhv
    return lam


def effective_step_size(mu: float, o, w0, data, kind, rng) -> float:
    """Step size actually used for a run with nominal rate ``mu``.

    The nominal rate is read against the variance-normalized objective (the
    quantity the losses are reported in), giving mu / var(y); it is then
    capped at 0.9 / lambda_max of the empirical Gauss-Newton matrix at the
    initial point so every run stays in the stable regime regardless of n.
    """
    vy = np.var(data.labels, ddof=1)
    if vy == 0:
        raise DomainError("labels have zero variance")
    lam = _gn_spectral_norm(o, np.asarray(w0, dtype=float), data, kind, rng)
    base = mu / vy
    return float(min(base, 0.9 / lam)) if lam > 0 else float(base)


def _trial_streams(master_seed: int, trial: int) -> list[np.random.Generator]:
    root = np.random.SeedSequence(entropy=master_seed, spawn_key=(trial,))
    return [np.random.default_rng(child) for child in root.spawn(4)]


def _make_constraint(name: str, spec: ExperimentSpec, w_star) -> ConstraintSpec:
    if name == "none":
        return ConstraintSpec.none()
    if name == "l0":
        return ConstraintSpec.sparsity(spec.s * spec.h)
    if name == "l1":
        return ConstraintSpec.l1_ball(float(np.abs(w_star).sum()))
    if name == "conv":
        return ConstraintSpec.conv(spec.k, spec.b, spec.stride, spec.p)
    raise DomainError(f"unknown constraint name {name!r}")


def _run_single(spec: ExperimentSpec, trial: int) -> list[ExperimentRecord]:
    rng_teacher, rng_train, rng_test, rng_init = _trial_streams(spec.master_seed, trial)
    kind = spec.activation
    if spec.family == "sparse":
        w_star = gen_sparse_teacher(spec.h, spec.p, spec.s, rng_teacher)
        noise_std = np.sqrt(1.0 / spec.h)
    else:
        bank = gen_cnn_teacher(spec.k, spec.b, spec.p, spec.stride, rng_teacher)
        w_star = cnn.fc_from_kernels(bank)
        noise_std = np.sqrt(spec.p / (spec.b * spec.k))
    h = w_star.shape[0]
    o = np.ones(h)

    pool = gen_dataset(w_star, o, max(spec.n_grid), kind, rng_train)
    test = gen_dataset(w_star, o, spec.n_test, kind, rng_test)
    w0_base = init_weights(spec.init_mode, w_star, noise_std, rng_init)

    records = []
    for n in spec.n_grid:
        data = pool.subset(n)
        for ci, cname in enumerate(spec.constraints):
            cons = _make_constraint(cname, spec, w_star)
            w0 = project(cons, w0_base) if cname == "conv" else w0_base
            rng_power = np.random.default_rng([spec.master_seed, trial, n, ci])
            mu_eff = effective_step_size(spec.mu, o, w0, data, kind, rng_power)
            cfg = pgd.PgdConfig(mu=mu_eff, max_iters=spec.iters, constraint=cons)
            try:
                trace = pgd.pgd_run(cfg, o, w0, data, kind, w_star=w_star)
                w_hat = trace.W
                rec = ExperimentRecord(
                    trial=trial,
                    n=n,
                    constraint=cname,
                    init_mode=spec.init_mode,
                    train_loss=normalized_loss(
                        model.predictions(o, w_hat, data.inputs, kind), data.labels
                    ),
                    test_loss=normalized_loss(
                        model.predictions(o, w_hat, test.inputs, kind), test.labels
                    ),
                    corr=correlation(w_star, w_hat),
                    recovery_err=float(
                        np.linalg.norm(w_hat - w_star) / np.linalg.norm(w_star)
                    ),
                    iters_run=int(trace.iters[-1]),
                    seed=spec.master_seed,
                )
            except DivergenceError as err:
                rec = ExperimentRecord(
                    trial=trial,
                    n=n,
                    constraint=cname,
                    init_mode=spec.init_mode,
                    train_loss=float("nan"),
                    test_loss=float("nan"),
                    corr=float("nan"),
                    recovery_err=float("nan"),
                    iters_run=err.iteration or 0,
                    seed=spec.master_seed,
                    status=f"diverged@{err.iteration}",
                )
            records.append(rec)
    return records


def run_experiment(
    spec: ExperimentSpec, trial_subset=None
) -> list[ExperimentRecord]:
    """Run the sweep; one record per (trial, n, constraint).

    Records are keyed and independently derived per trial, so the content is
    identical whether trials run sequentially or are split across workers
    via ``trial_subset``.
    """
    trials = range(spec.trials) if trial_subset is None else trial_subset
    records = []
    for trial in trials:
        records.extend(_run_single(spec, trial))
    return records


def write_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(CSV_HEADER.split(","))
        for rec in records:
            out.writerow(rec.to_row())


def read_csv(path) -> list[ExperimentRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER.split(","):
            raise DomainError(f"unexpected CSV header {reader.fieldnames}")
        out = []
        for row in reader:
            out.append(
                ExperimentRecord(
                    trial=int(row["trial"]),
                    n=int(row["n"]),
                    constraint=row["constraint"],
                    init_mode=row["init"],
                    train_loss=float(row["train_loss"]),
                    test_loss=float(row["test_loss"]),
                    corr=float(row["corr"]),
                    recovery_err=float(row["recovery_err"]),
                    iters_run=int(row["iters"]),
                    seed=int(row["seed"]),
                    status=row["status"],
                )
            )
        return out


def paper_sparse_spec(init_mode: str = "good", master_seed: int = 0) -> ExperimentSpec:
    """The sparse benchmark: p=80, h=20, s=8, relu, nominal rate 5.

    Good init sweeps n = 100..1000; random init sweeps n = 200..2000.
    """
    grid = (
        tuple(range(100, 1001, 100))
        if init_mode == "good"
        else tuple(range(200, 2001, 200))
    )
    return ExperimentSpec(
        family="sparse",
        p=80,
        h=20,
        s=8,
        n_grid=grid,
        constraints=("none", "l1", "l0"),
        init_mode=init_mode,
        activation=ActivationKind.RELU,
        mu=5.0,
        iters=2000,
        trials=20,
        master_seed=master_seed,
    )


def paper_cnn_spec(init_mode: str = "good", master_seed: int = 0) -> ExperimentSpec:
    """The convolutional benchmark: p=81, b=15, stride=6, k=4, nominal rate 1.

    Good init runs the conv constraint only; random init compares conv
    against unconstrained.
    """
    return ExperimentSpec(
        family="cnn",
        p=81,
        k=4,
        b=15,
        stride=6,
        n_grid=tuple(range(100, 1001, 100)),
        constraints=("conv",) if init_mode == "good" else ("none", "conv"),
        init_mode=init_mode,
        activation=ActivationKind.RELU,
        mu=1.0,
        iters=2000,
        trials=20,
        master_seed=master_seed,
    )
