"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The experiment-backed criteria run the full benchmark presets (hundreds of
2000-iteration PGD runs); expect the module to take tens of minutes on one
core.  Run with ``pytest -s tests/test_acceptance.py`` to see the lines as
they complete.
"""

import math

import numpy as np
import pytest

from compactnet import analysis, cnn, experiments, model, randact
from compactnet.activations import ActivationKind, zeta
from compactnet.constraints import ConstraintSpec, project
from compactnet.model import Dataset


def check(name: str, condition: bool, detail: str = ""):
    print(f"[ACCEPTANCE] {name}: {'PASS' if condition else 'FAIL'}  {detail}")
    assert condition, f"{name} failed: {detail}"


def means_by(records, constraint, field):
    """Mean of a record field per n, over trials, for one constraint series."""
    out = {}
    for rec in records:
        if rec.constraint == constraint:
            out.setdefault(rec.n, []).append(getattr(rec, field))
    return {n: float(np.mean(v)) for n, v in sorted(out.items())}


@pytest.fixture(scope="module")
def sparse_good_records():
    spec = experiments.paper_sparse_spec(init_mode="good", master_seed=0)
    print(
        f"\n[acceptance] sparse good-init sweep: {len(spec.n_grid)} n-values x "
        f"{len(spec.constraints)} constraints x {spec.trials} trials ..."
    )
    return experiments.run_experiment(spec)


@pytest.fixture(scope="module")
def sparse_random_records():
    import dataclasses

    spec = experiments.paper_sparse_spec(init_mode="random", master_seed=0)
    spec = dataclasses.replace(spec, n_grid=(2000,))
    print("\n[acceptance] sparse random-init runs at n=2000 ...")
    return experiments.run_experiment(spec)


@pytest.fixture(scope="module")
def cnn_records():
    print("\n[acceptance] cnn sweeps (good: conv; random: none+conv) ...")
    records = []
    for mode in ("good", "random"):
        spec = experiments.paper_cnn_spec(init_mode=mode, master_seed=0)
        records.extend(experiments.run_experiment(spec))
    return records


class TestSparseExperiments:
    def test_good_init_recovery(self, sparse_good_records):
        records = sparse_good_records
        assert all(r.status == "ok" for r in records)
        test_l1 = means_by(records, "l1", "test_loss")
        test_l0 = means_by(records, "l0", "test_loss")
        corr_l1 = means_by(records, "l1", "corr")
        corr_l0 = means_by(records, "l0", "corr")
        check(
            "sparse good-init: regularized recovery at n=600",
            test_l1[600] < 0.05
            and test_l0[600] < 0.05
            and corr_l1[600] > 0.95
            and corr_l0[600] > 0.95,
            f"test l1={test_l1[600]:.4f} l0={test_l0[600]:.4f} "
            f"corr l1={corr_l1[600]:.4f} l0={corr_l0[600]:.4f}",
        )
        test_none = means_by(records, "none", "test_loss")
        train_none = means_by(records, "none", "train_loss")
        check(
            "sparse good-init: unconstrained overfits at every n",
            all(v > 0.15 for v in test_none.values())
            and all(v < 0.01 for v in train_none.values()),
            f"test range [{min(test_none.values()):.3f}, {max(test_none.values()):.3f}], "
            f"max train {max(train_none.values()):.2e}",
        )

    def test_random_init_ordering(self, sparse_random_records):
        records = sparse_random_records
        test = {c: means_by(records, c, "test_loss")[2000] for c in ("l1", "l0", "none")}
        check(
            "sparse random-init: l1 < l0 < none at n=2000 and l1 < 0.1",
            test["l1"] < test["l0"] < test["none"] and test["l1"] < 0.1,
            f"l1={test['l1']:.4f} l0={test['l0']:.4f} none={test['none']:.4f}",
        )


class TestCnnExperiment:
    def test_conv_constraint_benefits(self, cnn_records):
        good = [r for r in cnn_records if r.init_mode == "good"]
        rand = [r for r in cnn_records if r.init_mode == "random"]
        conv_good = means_by(good, "conv", "test_loss")
        conv_rand = means_by(rand, "conv", "test_loss")
        none_rand = means_by(rand, "none", "test_loss")
        n_max = max(conv_good)
        check(
            "cnn: conv good-init near-zero test loss at largest n",
            conv_good[n_max] < 0.05,
            f"test at n={n_max}: {conv_good[n_max]:.4f}",
        )
        series = [conv_rand[n] for n in sorted(conv_rand)]
        inversions = sum(b > a for a, b in zip(series, series[1:]))
        check(
            "cnn: conv random-init improves with n (<= 1 inversion)",
            inversions <= 1 and series[-1] < series[0],
            f"series={['%.3f' % v for v in series]} inversions={inversions}",
        )
        worst = min(
            none_rand[n] - max(conv_rand[n], conv_good[n]) for n in sorted(none_rand)
        )
        check(
            "cnn: unconstrained worse than both conv runs at every n",
            worst > 0,
            f"min margin {worst:.4f}",
        )


class TestCnnIdentities:
    def test_gradient_equivalence(self):
        rng = np.random.default_rng(100)
        worst = 0.0
        for i in range(200):
            k = int(rng.integers(1, 4))
            b = int(rng.integers(2, 6))
            stride = int(rng.integers(1, b)) if i % 2 == 0 else int(rng.integers(1, b + 2))
            r = int(rng.integers(1, 5))
            p = (r - 1) * stride + b + int(rng.integers(0, stride))
            g = cnn.make_geometry(k, b, stride, p)
            bank = cnn.KernelBank(rng.standard_normal((k, b)), p=p, stride=stride, r=g.r)
            o = rng.standard_normal((g.k, g.r))
            data = Dataset(rng.standard_normal((6, p)), rng.standard_normal(6))
            W = cnn.fc_from_kernels(bank)
            grad_fc = model.gradient(o.reshape(-1), W, data, ActivationKind.TANH)
            grad_k = cnn.cnn_gradient(bank, o, data, ActivationKind.TANH)
            lhs = cnn.project_conv(grad_fc, g)
            rhs = cnn.fc_from_kernels(
                cnn.KernelBank(grad_k, p=p, stride=stride, r=g.r)
            ) / g.r
            err = np.linalg.norm(lhs - rhs) / (1 + np.linalg.norm(grad_fc))
            worst = max(worst, err)
        check(
            "cnn gradient equivalence over 200 geometries",
            worst <= 1e-10,
            f"worst relative error {worst:.2e}",
        )

    def test_circulant_bounds(self):
        rng = np.random.default_rng(101)
        ok = True
        detail = []
        for _ in range(50):
            b = int(rng.integers(1, 8))
            p = b + int(rng.integers(0, 10))
            stride = int(rng.integers(1, p + 1))
            r = (p - b) // stride + 1
            kern = rng.standard_normal(b)
            lo, hi = cnn.circulant_singular_bounds(kern, p)
            bank = cnn.KernelBank(kern.reshape(1, -1), p=p, stride=stride, r=r)
            sv = np.linalg.svd(cnn.fc_from_kernels(bank), compute_uv=False)
            if not (lo - 1e-9 <= sv.min() and sv.max() <= hi + 1e-9):
                ok = False
                detail.append(f"sandwich violated: {lo}, {sv.min()}, {sv.max()}, {hi}")
            sv_full = np.linalg.svd(cnn.circulant_matrix(kern, p), compute_uv=False)
            if abs(sv_full.min() - lo) > 1e-9 or abs(sv_full.max() - hi) > 1e-9:
                ok = False
                detail.append("full-sampling equality violated")
        for _ in range(20):
            b = int(rng.integers(2, 6))
            k = int(rng.integers(1, b + 1))
            stride = b + int(rng.integers(0, 3))
            r = int(rng.integers(1, 4))
            p = (r - 1) * stride + b + int(rng.integers(0, stride))
            K = rng.standard_normal((k, b))
            bank = cnn.KernelBank(K, p=p, stride=stride, r=r)
            sv_fc = np.linalg.svd(cnn.fc_from_kernels(bank), compute_uv=False)
            sv_k = np.linalg.svd(K, compute_uv=False)
            if abs(sv_fc.min() - sv_k.min()) > 1e-9:
                ok = False
                detail.append("non-overlap minimum mismatch")
        check("circulant singular-value bounds", ok, "; ".join(detail) or "50+20 instances")


class TestDecompositionIdentity:
    def test_gradient_identity(self):
        rng = np.random.default_rng(102)
        worst = 0.0
        for kind in (ActivationKind.TANH, ActivationKind.SQUARED_RELU):
            for _ in range(10):
                h, p, n = int(rng.integers(2, 5)), int(rng.integers(2, 7)), 25
                o = rng.uniform(0.5, 2.0, size=h) * rng.choice([-1, 1], size=h)
                W = rng.standard_normal((h, p)) * 0.8
                X = rng.standard_normal((n, p))
                data = Dataset(X, model.predictions(o, W, X, kind))
                U = W + 0.7 * rng.standard_normal((h, p))
                dec = analysis.hessian_decomposition(o, W, U, data, kind)
                grad = model.gradient(o, U, data, kind)
                recon = (dec.total @ (U - W).ravel()).reshape(W.shape)
                err = np.linalg.norm(grad - recon) / max(np.linalg.norm(grad), 1e-300)
                worst = max(worst, err)
        check(
            "gradient equals decomposition times displacement (20 instances)",
            worst <= 1e-8,
            f"worst relative error {worst:.2e}",
        )


class TestRestrictedEigTrend:
    def test_subspace_positivity_and_growth(self):
        h, p, d = 3, 8, 6
        medians = {}
        for n in (8 * d, 32 * d):
            vals = []
            for seed in range(20):
                rng = np.random.default_rng([200, seed])
                Q, _ = np.linalg.qr(rng.standard_normal((p, h)))
                w_star = Q.T[:h]
                o = np.ones(h)
                X = rng.standard_normal((n, p))
                data = Dataset(
                    X, model.predictions(o, w_star, X, ActivationKind.SQUARED_RELU)
                )
                H1 = analysis.hessian_ground_truth(
                    o, w_star, data, ActivationKind.SQUARED_RELU
                )
                raw = np.concatenate(
                    [w_star.reshape(-1, 1), rng.standard_normal((h * p, d - 1))], axis=1
                )
                B, _ = np.linalg.qr(raw)
                vals.append(
                    analysis.restricted_eigenvalue(H1, analysis.SubspaceDirections(B))
                )
            medians[n] = float(np.median(vals))
        check(
            "restricted eigenvalue positive and growing with n",
            medians[8 * d] > 0 and medians[32 * d] > medians[8 * d],
            f"median at n=48: {medians[48]:.4f}, at n=192: {medians[192]:.4f}",
        )


class TestZetaChecks:
    def test_zeta_criteria(self):
        ok = all(zeta(ActivationKind.IDENTITY, t) == 0.0 for t in (0.5, 1.0, 2.0))
        detail = [f"identity zero: {ok}"]
        for kind in (
            ActivationKind.SIGMOID,
            ActivationKind.TANH,
            ActivationKind.ERF,
            ActivationKind.SQUARED_RELU,
        ):
            pos = all(zeta(kind, t) > 0 for t in (0.5, 1.0, 2.0))
            ok = ok and pos
        sp = zeta(ActivationKind.SOFTPLUS, 10.0)
        ok = ok and sp > 0.05
        detail.append(f"softplus(10)={sp:.4f}")
        # Monte-Carlo oracle frozen from 10^6 draws with default_rng(20240612)
        mc_value = 0.3642373666031544
        sq = zeta(ActivationKind.SQUARED_RELU, 1.0)
        ok = ok and abs(sq - mc_value) < 1e-3 and abs(sq - (1 - 2 / math.pi)) < 1e-9
        detail.append(f"squared_relu(1)={sq:.6f} vs mc={mc_value:.6f}")
        check("nonlinearity measure checks", ok, "; ".join(detail))


class TestRandomActivationConvergence:
    def _run_one(self, seed, constrained):
        dims = (6, 5, 4, 3)
        ell = 1
        n = 4 * dims[ell] * dims[ell + 1]
        rng = np.random.default_rng([300, seed])
        layers = []
        for i in range(3):
            Q, _ = np.linalg.qr(rng.standard_normal((dims[i], dims[i + 1])))
            layers.append(Q[:, : dims[i + 1]].T)
        o = rng.choice([-1.0, 1.0], size=dims[-1])
        masks = randact.sample_masks(dims, n, rng)
        net = randact.RandActNetwork(layers=layers, o=o, masks=masks)
        prob = randact.collapse_layer(net, ell, rng.standard_normal((n, dims[0])))
        w_true = net.layers[ell]
        if constrained:
            raw = np.concatenate(
                [w_true.reshape(-1, 1), rng.standard_normal((w_true.size, 9))], axis=1
            )
            B, _ = np.linalg.qr(raw)
            spec = ConstraintSpec.subspace(B)
        else:
            spec = ConstraintSpec.none()
        Y = np.einsum("ni,nj->nij", prob.outputs, prob.inputs).reshape(n, -1)
        mu = 1.0 / float(np.linalg.eigvalsh(Y.T @ Y / n)[-1])
        trace = randact.randact_pgd(
            prob, spec, mu=mu, iters=5000,
            w0=rng.standard_normal(w_true.shape), w_star=w_true,
        )
        d2 = trace.dist_to_truth**2
        keep = d2 > d2[0] * 1e-24
        slope = np.polyfit(np.arange(d2.size)[keep], np.log(d2[keep]), 1)[0]
        rel = trace.dist_to_truth[-1] / np.linalg.norm(w_true)
        return slope, rel

    def test_global_convergence(self):
        ok = True
        worst_slope, worst_rel = -np.inf, 0.0
        for constrained in (False, True):
            for seed in range(10):
                slope, rel = self._run_one(seed, constrained)
                worst_slope = max(worst_slope, slope)
                worst_rel = max(worst_rel, rel)
                ok = ok and slope < -0.01 and rel < 1e-6
        check(
            "random-activation layer recovery from arbitrary init",
            ok,
            f"worst slope {worst_slope:.4f}, worst relative error {worst_rel:.2e}",
        )


class TestProjectionOracles:
    def test_small_instance_equivalence(self):
        from test_constraints import (
            l1_projection_oracle,
            rank_one_oracle,
            sparsity_projection_oracle,
        )

        rng = np.random.default_rng(103)
        worst = 0.0
        for _ in range(40):
            m = int(rng.integers(2, 7))
            v = rng.standard_normal(m) * 2
            tau = float(rng.uniform(0.2, np.abs(v).sum()))
            got = project(ConstraintSpec.l1_ball(tau), v.reshape(1, -1)).ravel()
            worst = max(worst, np.abs(got - l1_projection_oracle(v, tau)).max())
            s = int(rng.integers(1, m + 1))
            got = project(ConstraintSpec.sparsity(s), v.reshape(1, -1)).ravel()
            worst = max(worst, np.abs(got - sparsity_projection_oracle(v, s)).max())
        for _ in range(40):
            W = rng.standard_normal((2, 3))
            got = project(ConstraintSpec.rank(1), W)
            worst = max(worst, np.abs(got - rank_one_oracle(W)).max())
        check(
            "projections match exhaustive oracles (hp <= 6)",
            worst <= 1e-8,
            f"worst deviation {worst:.2e}",
        )

    def test_idempotence_and_nonexpansiveness(self):
        from test_constraints import CONVEX_TAGS, conv_shape, make_spec

        rng = np.random.default_rng(104)
        ok = True
        for tag in ("none", "sparsity", "l1_ball", "rank", "nuclear_ball", "subspace", "conv"):
            shape = conv_shape() if tag == "conv" else (3, 4)
            spec = make_spec(tag, shape, rng)
            for _ in range(50):
                W = rng.standard_normal(shape) * rng.uniform(0.2, 4)
                once = project(spec, W)
                ok = ok and np.linalg.norm(project(spec, once) - once) < 1e-10
            if tag in CONVEX_TAGS:
                for _ in range(50):
                    W1 = rng.standard_normal(shaperies := shape) * 2
                    W2 = rng.standard_normal(shape) * 2
                    lhs = np.linalg.norm(project(spec, W1) - project(spec, W2))
                    ok = ok and lhs <= np.linalg.norm(W1 - W2) + 1e-10
        check("projection idempotence and convex non-expansiveness", ok)


class TestGradientsVsFiniteDifferences:
    def test_all_three_gradients(self):
        rng = np.random.default_rng(105)
        worst = 0.0
        for _ in range(20):
            h, p, n = int(rng.integers(1, 5)), int(rng.integers(2, 7)), 12
            kinds = [ActivationKind.TANH, ActivationKind.SOFTPLUS, ActivationKind.SQUARED_RELU]
            kind = kinds[int(rng.integers(len(kinds)))]
            o = rng.standard_normal(h)
            W = rng.standard_normal((h, p)) * 0.7
            data = Dataset(rng.standard_normal((n, p)), rng.standard_normal(n))
            g = model.gradient(o, W, data, kind)
            worst = max(worst, _fd_error(lambda M: model.loss(o, M, data, kind), W, g))
        for _ in range(20):
            k, b, stride, r = 2, 3, int(rng.integers(1, 4)), 3
            p = (r - 1) * stride + b
            bank = cnn.KernelBank(rng.standard_normal((k, b)), p=p, stride=stride, r=r)
            o = rng.standard_normal((k, r))
            data = Dataset(rng.standard_normal((8, p)), rng.standard_normal(8))
            g = cnn.cnn_gradient(bank, o, data, ActivationKind.TANH)

            def cnn_loss(K):
                b2 = cnn.KernelBank(K, p=p, stride=stride, r=r)
                res = cnn.cnn_predictions(b2, o, data.inputs, ActivationKind.TANH)
                res = res - data.labels
                return 0.5 * np.mean(res * res)

            worst = max(worst, _fd_error(cnn_loss, bank.K, g))
        for _ in range(20):
            n = 15
            prob = randact.LayerProblem(
                layer_index=0,
                inputs=rng.standard_normal((n, 4)),
                outputs=rng.standard_normal((n, 3)),
                labels=rng.standard_normal(n),
            )
            U = rng.standard_normal((3, 4))
            g = randact.randact_gradient(prob, U)
            worst = max(
                worst,
                _fd_error(lambda M: randact.randact_loss_and_gradient(prob, M)[0], U, g),
            )
        check(
            "analytic gradients match central differences (3 models x 20)",
            worst <= 1e-5,
            f"worst absolute deviation {worst:.2e}",
        )


def _fd_error(loss_fn, point, grad, eps=1e-6):
    worst = 0.0
    flat = point.ravel()
    for idx in range(flat.size):
        plus, minus = point.copy().ravel(), point.copy().ravel()
        plus[idx] += eps
        minus[idx] -= eps
        fd = (loss_fn(plus.reshape(point.shape)) - loss_fn(minus.reshape(point.shape))) / (
            2 * eps
        )
        worst = max(worst, abs(grad.ravel()[idx] - fd))
    return worst
