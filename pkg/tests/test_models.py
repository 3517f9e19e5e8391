import math

import numpy as np
import pytest

from scml.basisgen import BasisGenConfig, generate_basis
from scml.core import BasisSet, Dataset, compose_metric, dist_global
from scml.datasets import make_two_gaussians, make_xor_mixture
from scml.evaluate import error_rate
from scml.models import (
    GlobalModel,
    LocalModel,
    MultiTaskModel,
    dist_local,
    fit_mt_scml,
    fit_scml_global,
    fit_scml_local,
    local_weights,
    model_from_dict,
    model_to_dict,
    robustness_bound,
)
from scml.optim import TrainConfig
from scml.triplets import generate_triplets


def unit_rows(rng, K, D):
    vecs = rng.normal(size=(K, D))
    return BasisSet(vecs / np.linalg.norm(vecs, axis=1, keepdims=True))


def small_problem(seed=0, n=80):
    ds = make_two_gaussians(n, seed=seed)
    basis = generate_basis(ds, BasisGenConfig(num_regions=2, J_levels=(8,), rng_seed=seed))
    tri = generate_triplets(ds, 2, 4)
    return ds, basis, tri


class TestFitGlobal:
    def test_huge_beta_degenerates_to_zero_metric(self):
        ds, basis, tri = small_problem()
        cfg = TrainConfig(beta=1e6, epochs=3, rng_seed=0)
        model = fit_scml_global(ds, basis, tri, cfg)
        assert model.nnz == 0
        assert model.distance(ds.features[0], ds.features[1]) == 0.0

    def test_prefers_discriminative_axis(self):
        # axis-aligned separation along e1; basis is {e1, e2}
        ds = make_two_gaussians(150, separation=6.0, seed=1)
        basis = BasisSet(np.eye(2))
        tri = generate_triplets(ds, 3, 6)
        cfg = TrainConfig(beta=1e-3, epochs=20, rng_seed=0)
        model = fit_scml_global(ds, basis, tri, cfg)
        assert model.w[0] > model.w[1]

    def test_cross_distances_match_scalar_distance(self):
        ds, basis, tri = small_problem(seed=2)
        cfg = TrainConfig(beta=1e-2, epochs=5, rng_seed=0)
        model = fit_scml_global(ds, basis, tri, cfg)
        D = model.cross_distances(ds.features[:4], ds.features[:6])
        for i in range(4):
            for j in range(6):
                assert D[i, j] == pytest.approx(
                    model.distance(ds.features[i], ds.features[j]), abs=1e-9
                )


class TestFitMultiTask:
    def test_single_task_coincides_with_global(self):
        ds, basis, tri = small_problem(seed=3)
        # triplet count divisible by the batch keeps the sampled order
        # identical between the two solver paths
        m = (tri.shape[0] // 10) * 10
        tri = tri[:m]
        cfg = TrainConfig(beta=5e-3, epochs=8, rng_seed=1)
        solo = fit_scml_global(ds, basis, tri, cfg)
        mt = fit_mt_scml([ds], [basis], [tri], cfg)
        np.testing.assert_allclose(mt.W[0], solo.w, atol=1e-8)

    def test_identical_tasks_get_equal_rows(self):
        ds, basis, tri = small_problem(seed=4)
        cfg = TrainConfig(beta=1e-2, epochs=6, rng_seed=2)
        mt = fit_mt_scml([ds, ds], [basis, basis], [tri, tri], cfg)
        np.testing.assert_allclose(mt.W[0], mt.W[1], atol=1e-6)

    def test_selected_columns_counts_nonzero_columns(self):
        ds, basis, tri = small_problem(seed=5)
        cfg = TrainConfig(beta=1e-2, epochs=5, rng_seed=0)
        mt = fit_mt_scml([ds, ds], [basis, basis], [tri, tri], cfg)
        norms = np.linalg.norm(mt.W, axis=0)
        assert mt.selected_columns.size == np.count_nonzero(norms)

    def test_shared_structure_uses_fewer_columns_than_independent_fits(self):
        from scml.datasets import make_multitask_shared, standardize
        from scml.evaluate import split

        tasks = make_multitask_shared(n_per_task=800, dim=20, num_tasks=3,
                                      shared_dim=5, seed=7)
        splits = [standardize(*split(t, seed=1)) for t in tasks]
        trains = [s[0] for s in splits]
        vals = [s[1] for s in splits]
        bases = [
            generate_basis(tr, BasisGenConfig(J_levels=(10, 20), basis_budget=40,
                                              rng_seed=i))
            for i, tr in enumerate(trains)
        ]
        tris = [generate_triplets(tr, 3, 10) for tr in trains]
        grid = (1e-2, 1e-1)

        def pick(fit, score):
            best = None
            for beta in grid:
                model = fit(beta)
                err = score(model)
                if best is None or err < best[0] or (err == best[0] and beta > best[1]):
                    best = (err, beta, model)
            return best[2]

        mt = pick(
            lambda b: fit_mt_scml(trains, bases, tris, TrainConfig(beta=b, epochs=12, rng_seed=0)),
            lambda m: float(np.mean([
                error_rate(m.task_model(t), trains[t], vals[t]) for t in range(3)
            ])),
        )
        solo_nnz = 0
        for t in range(3):
            solo = pick(
                lambda b: fit_scml_global(trains[t], bases[t], tris[t],
                                          TrainConfig(beta=b, epochs=12, rng_seed=0)),
                lambda m: error_rate(m, trains[t], vals[t]),
            )
            solo_nnz += solo.nnz
        assert mt.selected_columns.size < solo_nnz


class TestFitLocal:
    def test_warm_start_reproduces_global_distances(self):
        ds, basis, tri = small_problem(seed=8, n=60)
        cfg = TrainConfig(beta=1e-2, epochs=4, rng_seed=0)
        warm = fit_scml_global(ds, basis, tri, cfg)
        # freeze training at the initialization: one epoch with degenerate
        # data is not needed, we inspect the initial tensor directly
        local = fit_scml_local(
            ds, basis, tri, TrainConfig(beta=1e-2, epochs=1, rng_seed=0),
            embed_dim=5, warm=warm,
        )
        A0 = np.zeros_like(local.Atilde)
        A0[-1] = np.sqrt(warm.w)
        init = LocalModel(basis, A0, local.embedding, 0.0)
        X = ds.features
        for i in range(0, 30, 3):
            for j in range(0, 30, 5):
                d_init = dist_local(init, X[i], X[j])
                d_glob = dist_global(warm.w, basis, X[i], X[j])
                assert d_init == pytest.approx(d_glob, abs=1e-10)

    def test_local_beats_global_on_multimodal_data(self):
        wins = 0
        for seed in range(10):
            ds = make_xor_mixture(240, seed=seed)
            tr = ds.subset(range(0, 160))
            te = ds.subset(range(160, 240))
            basis = generate_basis(
                tr, BasisGenConfig(num_regions=4, J_levels=(10, 20), rng_seed=seed)
            )
            tri = generate_triplets(tr, 2, 4)
            cfg = TrainConfig(beta=1e-3, epochs=12, rng_seed=seed)
            warm = fit_scml_global(tr, basis, tri, cfg)
            local = fit_scml_local(tr, basis, tri, cfg, embed_dim=10, warm=warm)
            e_g = error_rate(warm, tr, te, k=3)
            e_l = error_rate(local, tr, te, k=3)
            wins += e_l <= e_g
        assert wins >= 8

    def test_shared_basis_required(self):
        ds, basis, tri = small_problem(seed=9, n=60)
        cfg = TrainConfig(beta=1e-2, epochs=2, rng_seed=0)
        warm = fit_scml_global(ds, basis, tri, cfg)
        rng = np.random.default_rng(0)
        other = unit_rows(rng, basis.num_vectors + 1, ds.dim)
        with pytest.raises(ValueError):
            fit_scml_local(ds, other, tri, cfg, embed_dim=5, warm=warm)


class TestLocalWeightsAndDistance:
    def make_local(self, seed=10):
        ds, basis, tri = small_problem(seed=seed, n=60)
        cfg = TrainConfig(beta=1e-3, epochs=6, rng_seed=0)
        warm = fit_scml_global(ds, basis, tri, cfg)
        local = fit_scml_local(ds, basis, tri, cfg, embed_dim=6, warm=warm)
        return ds, local

    def test_zero_A_gives_constant_weights(self):
        ds, local = self.make_local()
        A = np.zeros_like(local.Atilde)
        A[-1] = np.linspace(0.5, 1.5, A.shape[1])
        const = LocalModel(local.basis, A, local.embedding, 0.0)
        rng = np.random.default_rng(1)
        for _ in range(5):
            x = rng.normal(size=ds.dim)
            np.testing.assert_allclose(local_weights(const, x), A[-1] ** 2, atol=1e-12)

    def test_weights_nonnegative_everywhere(self):
        ds, local = self.make_local(seed=11)
        rng = np.random.default_rng(2)
        probes = rng.normal(scale=5.0, size=(50, ds.dim))
        assert local_weights(local, probes).min() >= 0.0

    def test_weights_continuous_in_x(self):
        ds, local = self.make_local(seed=12)
        rng = np.random.default_rng(3)
        x = rng.normal(size=ds.dim)
        w0 = local_weights(local, x)
        gaps = []
        for eps in (1e-2, 1e-4, 1e-6):
            delta = rng.normal(size=ds.dim)
            delta *= eps / np.linalg.norm(delta)
            gaps.append(np.linalg.norm(local_weights(local, x + delta) - w0))
        assert gaps[2] < gaps[0] + 1e-12 and gaps[2] < 1e-4

    def test_dist_local_zero_on_identical_points(self):
        ds, local = self.make_local(seed=13)
        x = ds.features[7]
        assert dist_local(local, x, x) == 0.0

    def test_dist_local_matches_explicit_tensor(self):
        ds, local = self.make_local(seed=14)
        rng = np.random.default_rng(4)
        for _ in range(10):
            x, y = rng.normal(size=ds.dim), rng.normal(size=ds.dim)
            w_x = local_weights(local, x)
            T_x = compose_metric(w_x, local.basis)
            expected = (x - y) @ T_x @ (x - y)
            assert dist_local(local, x, y) == pytest.approx(expected, abs=1e-9)

    def test_cross_distances_match_scalar(self):
        ds, local = self.make_local(seed=15)
        D = local.cross_distances(ds.features[:5], ds.features[:7])
        for i in range(5):
            for j in range(7):
                assert D[i, j] == pytest.approx(
                    dist_local(local, ds.features[i], ds.features[j]), abs=1e-9
                )


class TestRobustnessBound:
    def test_reference_value(self):
        value = robustness_bound(0.0, 2.0, 10, 0.5, 1.0, 1, 1000, 1.0)
        assert value == pytest.approx(3 * math.sqrt(math.log(2) / 500), rel=1e-12)

    def test_zero_sparsity_drops_first_term(self):
        a = robustness_bound(0.5, 2.0, 0, 0.5, 1.0, 1, 1000, 1.0)
        b = robustness_bound(0.0, 2.0, 7, 0.5, 1.0, 1, 1000, 1.0)
        assert a == b

    def test_monotone_decreasing_in_n(self):
        args = dict(gamma_cover=0.1, R=1.0, K_star=5, beta=0.2, U=1.0, N=10, delta=0.05)
        v1 = robustness_bound(n=100, **args)
        v2 = robustness_bound(n=1000, **args)
        assert v2 < v1

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            robustness_bound(0.0, 1.0, 1, 0.0, 1.0, 1, 10, 0.5)
        with pytest.raises(ValueError):
            robustness_bound(0.0, 1.0, 1, 0.1, 1.0, 1, 10, 2.0)
        with pytest.raises(ValueError):
            robustness_bound(0.0, 1.0, 1, 0.1, 1.0, 0, 10, 0.5)


class TestSerialization:
    def test_global_round_trip(self):
        ds, basis, tri = small_problem(seed=16)
        cfg = TrainConfig(beta=1e-2, epochs=3, rng_seed=0)
        model = fit_scml_global(ds, basis, tri, cfg)
        again = model_from_dict(model_to_dict(model))
        assert isinstance(again, GlobalModel)
        np.testing.assert_array_equal(model.w, again.w)
        np.testing.assert_array_equal(model.basis.vectors, again.basis.vectors)

    def test_multitask_round_trip(self):
        ds, basis, tri = small_problem(seed=17)
        cfg = TrainConfig(beta=1e-2, epochs=3, rng_seed=0)
        model = fit_mt_scml([ds, ds], [basis, basis], [tri, tri], cfg)
        again = model_from_dict(model_to_dict(model))
        assert isinstance(again, MultiTaskModel)
        np.testing.assert_array_equal(model.W, again.W)

    def test_local_round_trip_preserves_distances(self):
        ds, basis, tri = small_problem(seed=18, n=60)
        cfg = TrainConfig(beta=1e-2, epochs=3, rng_seed=0)
        warm = fit_scml_global(ds, basis, tri, cfg)
        model = fit_scml_local(ds, basis, tri, cfg, embed_dim=5, warm=warm)
        again = model_from_dict(model_to_dict(model))
        x, y = ds.features[0], ds.features[1]
        assert dist_local(model, x, y) == dist_local(again, x, y)
