"""Command-line entry point.

Subcommands: experiment-sparse, experiment-cnn, train, analyze-hessian,
covdim, zeta.  Experiment runs write a records CSV plus a JSON manifest
(config echo, seed, version, timing) into --out-dir.  Exit codes: 0 success,
2 usage error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import subprocess
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, analysis, constraints, experiments, pgd
from .activations import ActivationKind, zeta, zeta_interval
from .errors import CompactNetError

EXIT_USAGE = 2
EXIT_NUMERIC = 3


def _default_seed() -> int:
    env = os.environ.get("COMPACTNET_SEED")
    return int(env) if env else 0


def _version_string() -> str:
    try:
        rev = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            capture_output=True,
            text=True,
            timeout=5,
        )
        if rev.returncode == 0:
            return f"{__version__}+g{rev.stdout.strip()}"
    except OSError:
        pass
    return __version__


def _write_manifest(out_dir: Path, config: dict, seed: int, started: float) -> None:
    manifest = {
        "config": config,
        "seed": seed,
        "version": _version_string(),
        "started_at": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime(started)),
        "duration_s": round(time.time() - started, 3),
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def _spec_config(spec: experiments.ExperimentSpec) -> dict:
    cfg = dataclasses.asdict(spec)
    cfg["activation"] = spec.activation.value
    return cfg


def _parse_grid(text: str) -> tuple[int, ...]:
    """Comma list ("100,200") or start:stop:step range ("100:1000:100")."""
    if ":" in text:
        start, stop, step = (int(tok) for tok in text.split(":"))
        return tuple(range(start, stop + 1, step))
    return tuple(int(tok) for tok in text.split(","))


def _experiment_overrides(args, fields) -> dict:
    """Merge config-file values under explicit flags (flags > file > preset)."""
    overrides = {}
    if args.config is not None:
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(fields) - {"n_grid", "constraints", "activation"}
        if unknown:
            raise CompactNetError(f"unknown config keys {sorted(unknown)}")
        for key, value in file_cfg.items():
            if key == "n_grid":
                value = tuple(value) if isinstance(value, list) else _parse_grid(value)
            elif key == "constraints":
                value = tuple(value)
            elif key == "activation":
                value = ActivationKind(value)
            overrides[key] = value
    for field in fields:
        value = getattr(args, field)
        if value is not None:
            overrides[field] = value
    if args.n_grid is not None:
        overrides["n_grid"] = _parse_grid(args.n_grid)
    if args.constraints is not None:
        overrides["constraints"] = tuple(args.constraints.split(","))
    return overrides


def _run_records(spec: experiments.ExperimentSpec, jobs: int):
    if jobs <= 1:
        return experiments.run_experiment(spec)
    chunks = [list(range(spec.trials))[i::jobs] for i in range(jobs)]
    chunks = [c for c in chunks if c]
    with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
        parts = pool.map(experiments.run_experiment, [spec] * len(chunks), chunks)
        records = [rec for part in parts for rec in part]
    records.sort(key=lambda r: (r.trial, r.n, r.constraint, r.init_mode))
    return records


def _cmd_experiment_sparse(args) -> int:
    started = time.time()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = experiments.paper_sparse_spec(init_mode=args.init, master_seed=args.seed)
    overrides = _experiment_overrides(args, ("p", "h", "s", "trials", "mu", "iters", "n_test"))
    if args.activation is not None:
        overrides["activation"] = ActivationKind(args.activation)
    spec = dataclasses.replace(spec, **overrides)
    records = _run_records(spec, args.jobs)
    csv_path = out_dir / f"sparse-{spec.init_mode}.csv"
    experiments.write_csv(records, csv_path)
    _write_manifest(out_dir, _spec_config(spec), args.seed, started)
    print(csv_path)
    return 0


def _cmd_experiment_cnn(args) -> int:
    started = time.time()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    init_modes = ("good", "random") if args.init == "both" else (args.init,)
    all_records = []
    configs = []
    for mode in init_modes:
        spec = experiments.paper_cnn_spec(init_mode=mode, master_seed=args.seed)
        overrides = _experiment_overrides(
            args, ("p", "k", "b", "stride", "trials", "mu", "iters", "n_test")
        )
        spec = dataclasses.replace(spec, **overrides)
        all_records.extend(_run_records(spec, args.jobs))
        configs.append(_spec_config(spec))
    csv_path = out_dir / "cnn.csv"
    experiments.write_csv(all_records, csv_path)
    _write_manifest(out_dir, {"sweeps": configs}, args.seed, started)
    print(csv_path)
    return 0


def _cmd_train(args) -> int:
    started = time.time()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng_teacher, rng_train, _rng_test, rng_init = experiments._trial_streams(args.seed, 0)
    kind = ActivationKind(args.activation)
    w_star = experiments.gen_sparse_teacher(args.h, args.p, args.s, rng_teacher)
    o = np.ones(args.h)
    data = experiments.gen_dataset(w_star, o, args.n, kind, rng_train)
    w0 = experiments.init_weights(args.init, w_star, np.sqrt(1.0 / args.h), rng_init)
    spec = experiments.ExperimentSpec(
        family="sparse",
        p=args.p,
        h=args.h,
        s=args.s,
        n_grid=(args.n,),
        constraints=(args.constraint,),
        init_mode=args.init,
        activation=kind,
        mu=args.mu,
        iters=args.iters,
        master_seed=args.seed,
    )
    cons = experiments._make_constraint(args.constraint, spec, w_star)
    mu_eff = experiments.effective_step_size(
        args.mu, o, w0, data, kind, np.random.default_rng([args.seed, 0])
    )
    cfg = pgd.PgdConfig(mu=mu_eff, max_iters=args.iters, constraint=cons)
    trace = pgd.pgd_run(cfg, o, w0, data, kind, w_star=w_star)
    trace_path = out_dir / "trace.csv"
    trace.to_csv(trace_path)
    _write_manifest(out_dir, _spec_config(spec) | {"mu_effective": mu_eff}, args.seed, started)
    print(trace_path)
    return 0


def _cmd_analyze_hessian(args) -> int:
    started = time.time()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng_teacher, rng_train, _r, _i = experiments._trial_streams(args.seed, 0)
    kind = ActivationKind(args.activation)
    w_star = experiments.gen_sparse_teacher(args.h, args.p, args.s, rng_teacher)
    o = np.ones(args.h)
    data = experiments.gen_dataset(w_star, o, args.n, kind, rng_train)
    H1 = analysis.hessian_ground_truth(o, w_star, data, kind)
    report = {
        "min_eigenvalue": analysis.restricted_eigenvalue(H1, "full"),
        "max_eigenvalue": float(np.linalg.eigvalsh(H1)[-1]),
        "inputs": {"h": args.h, "p": args.p, "s": args.s, "n": args.n,
                   "activation": kind.value},
        "seed": args.seed,
    }
    try:
        report["critical_quantities"] = analysis.critical_quantities(
            o, w_star, kind, args.n
        ).to_dict()
    except CompactNetError as err:
        report["critical_quantities_error"] = str(err)
    with open(out_dir / "hessian.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    _write_manifest(out_dir, report["inputs"], args.seed, started)
    print(out_dir / "hessian.json")
    return 0


def _cmd_covdim(args) -> int:
    name = args.constraint
    if name == "none":
        spec = constraints.ConstraintSpec.none()
    elif name in ("sparsity", "l0"):
        spec = constraints.ConstraintSpec.sparsity(args.s)
    elif name == "l1":
        spec = constraints.ConstraintSpec.l1_ball(1.0)
    elif name == "rank":
        spec = constraints.ConstraintSpec.rank(args.r)
    elif name == "subspace":
        basis = np.eye(args.h * args.p, args.d)
        spec = constraints.ConstraintSpec.subspace(basis)
    elif name == "conv":
        spec = constraints.ConstraintSpec.conv(args.k, args.b, args.stride, args.p)
    else:
        raise CompactNetError(f"unknown constraint {name!r}")
    result = constraints.covering_dimension(spec, args.h, args.p, nnz=args.s)
    print(f"{result.value:g}")
    return 0


def _cmd_zeta(args) -> int:
    kind = ActivationKind(args.activation)
    if args.alpha is not None or args.beta is not None:
        if args.alpha is None or args.beta is None:
            raise CompactNetError("interval evaluation needs both --alpha and --beta")
        print(f"{zeta_interval(kind, args.alpha, args.beta):.12g}")
    else:
        print(f"{zeta(kind, args.theta):.12g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="compactnet",
        description="Constrained training of one-hidden-layer networks: "
        "experiments and diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--out-dir", default="out", help="directory for CSV/manifest")
        p.add_argument("--seed", type=int, default=_default_seed(),
                       help="master seed (env COMPACTNET_SEED is the fallback)")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel worker processes for trials")

    sp = sub.add_parser("experiment-sparse", help="sparse-teacher sweep")
    add_common(sp)
    sp.add_argument("--config", help="JSON spec overrides "
                    "(precedence: flags > config file > preset)")
    sp.add_argument("--preset", choices=["paper"], default="paper")
    sp.add_argument("--init", choices=["good", "random"], default="good")
    sp.add_argument("--p", type=int)
    sp.add_argument("--h", type=int)
    sp.add_argument("--s", type=int)
    sp.add_argument("--n-grid", help='e.g. "100:1000:100" or "100,600"')
    sp.add_argument("--trials", type=int)
    sp.add_argument("--mu", type=float)
    sp.add_argument("--iters", type=int)
    sp.add_argument("--n-test", dest="n_test", type=int)
    sp.add_argument("--constraints", help="comma list from none,l1,l0")
    sp.add_argument("--activation", choices=[k.value for k in ActivationKind])
    sp.set_defaults(func=_cmd_experiment_sparse)

    cp = sub.add_parser("experiment-cnn", help="convolutional-teacher sweep")
    add_common(cp)
    cp.add_argument("--config", help="JSON spec overrides "
                    "(precedence: flags > config file > preset)")
    cp.add_argument("--preset", choices=["paper"], default="paper")
    cp.add_argument("--init", choices=["good", "random", "both"], default="both")
    cp.add_argument("--p", type=int)
    cp.add_argument("--k", type=int)
    cp.add_argument("--b", type=int)
    cp.add_argument("--stride", type=int)
    cp.add_argument("--n-grid")
    cp.add_argument("--trials", type=int)
    cp.add_argument("--mu", type=float)
    cp.add_argument("--iters", type=int)
    cp.add_argument("--n-test", dest="n_test", type=int)
    cp.add_argument("--constraints", help="comma list from none,conv")
    cp.set_defaults(func=_cmd_experiment_cnn)

    tp = sub.add_parser("train", help="single PGD run, trace CSV out")
    add_common(tp)
    tp.add_argument("--h", type=int, required=True)
    tp.add_argument("--p", type=int, required=True)
    tp.add_argument("--s", type=int, required=True)
    tp.add_argument("--n", type=int, required=True)
    tp.add_argument("--constraint", choices=["none", "l1", "l0"], default="none")
    tp.add_argument("--init", choices=["good", "random"], default="good")
    tp.add_argument("--activation", choices=[k.value for k in ActivationKind],
                    default="relu")
    tp.add_argument("--mu", type=float, default=5.0)
    tp.add_argument("--iters", type=int, default=2000)
    tp.set_defaults(func=_cmd_train)

    ap = sub.add_parser("analyze-hessian", help="curvature diagnostics, JSON out")
    add_common(ap)
    ap.add_argument("--h", type=int, required=True)
    ap.add_argument("--p", type=int, required=True)
    ap.add_argument("--s", type=int, required=True)
    ap.add_argument("--n", type=int, required=True)
    ap.add_argument("--activation", choices=[k.value for k in ActivationKind],
                    default="squared_relu")
    ap.set_defaults(func=_cmd_analyze_hessian)

    vp = sub.add_parser("covdim", help="print a covering-dimension value")
    vp.add_argument("--constraint", required=True,
                    choices=["none", "sparsity", "l0", "l1", "rank", "subspace", "conv"])
    vp.add_argument("--h", type=int, default=1)
    vp.add_argument("--p", type=int, default=1)
    vp.add_argument("--s", type=int)
    vp.add_argument("--r", type=int)
    vp.add_argument("--d", type=int)
    vp.add_argument("--k", type=int)
    vp.add_argument("--b", type=int)
    vp.add_argument("--stride", type=int, default=1)
    vp.set_defaults(func=_cmd_covdim)

    zp = sub.add_parser("zeta", help="print a nonlinearity-measure value")
    zp.add_argument("--activation", required=True,
                    choices=[k.value for k in ActivationKind])
    zp.add_argument("--theta", type=float, default=1.0)
    zp.add_argument("--alpha", type=float)
    zp.add_argument("--beta", type=float)
    zp.set_defaults(func=_cmd_zeta)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CompactNetError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
