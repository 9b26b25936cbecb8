from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybridcast.errors import ConfigInvalid, DimensionMismatch, SampleBudgetExceedsData
from hybridcast.gbdt import (
    LEAFWISE,
    OBLIVIOUS,
    BinMapper,
    BoostConfig,
    GbdtModel,
    GossConfig,
    HistogramBuilder,
    TrainingView,
    Tree,
    best_split,
    build_histograms,
    compute_bin_edges,
    efb_bundle,
    fit_gbdt,
    goss_sample,
    grow_tree_leafwise,
    grow_tree_oblivious,
    ordered_target_stats,
    predict_gbdt,
)


def view_of(X, n_bins=256, bundles=None):
    mapper = BinMapper(n_bins).fit(X)
    fb = mapper.transform(X)
    return TrainingView(fb, mapper.edges,
                        HistogramBuilder(fb, mapper.n_bins_per_feature, bundles))


def node_hist(X, g, h=None, w=None, idx=None):
    mapper = BinMapper().fit(X)
    fb = mapper.transform(X)
    n = X.shape[0]
    h = np.ones(n) if h is None else h
    w = np.ones(n) if w is None else w
    idx = np.arange(n) if idx is None else idx
    return build_histograms(fb, g, h, w, idx, int(mapper.n_bins_per_feature.max())), mapper


def single_leaf(value):
    return Tree(np.array([-1], dtype=np.int32), np.zeros(1), np.array([-1], dtype=np.int32),
                np.array([-1], dtype=np.int32), np.array([value]))


def stump(threshold, low, high):
    return Tree(np.array([0, -1, -1], dtype=np.int32), np.array([threshold, 0.0, 0.0]),
                np.array([1, -1, -1], dtype=np.int32), np.array([2, -1, -1], dtype=np.int32),
                np.array([0.0, low, high]))


class TestBinning:
    def test_equal_count_quartiles(self):
        col = np.arange(1.0, 9.0)
        edges = compute_bin_edges(col, 4)
        assert edges.size == 3
        counts = np.bincount(np.searchsorted(edges, col, side="left"), minlength=4)
        np.testing.assert_array_equal(counts, [2, 2, 2, 2])

    def test_constant_column(self):
        assert compute_bin_edges(np.full(10, 3.0), 4).size == 0

    def test_duplicate_collapse(self):
        assert compute_bin_edges([1.0, 1, 1, 9], 4).size < 3

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=200), st.integers(2, 16))
    def test_edges_strictly_increasing_and_bounded(self, xs, n_bins):
        edges = compute_bin_edges(xs, n_bins)
        assert edges.size <= n_bins - 1
        assert np.all(np.diff(edges) > 0)

    def test_value_on_edge_goes_to_lower_bin(self):
        X = np.array([[1.0], [2.0], [3.0]])
        mapper = BinMapper(256).fit(X)
        fb = mapper.transform(np.array([[mapper.edges[0][0]]]))
        assert fb[0, 0] == 0


class TestHistograms:
    def test_single_sample(self):
        hist = build_histograms(np.array([[1]]), [2.0], [1.0], [1.0], [0], 3)
        assert hist.grad[0, 1] == 2.0 and hist.count[0, 1] == 1

    def test_two_samples_same_bin(self):
        hist = build_histograms(np.array([[2, 2]]), [1.0, 3.0], [1.0, 1.0], [1.0, 1.0], [0, 1], 3)
        assert hist.grad[0, 2] == 4.0 and hist.count[0, 2] == 2

    def test_amplified_weight(self):
        w = GossConfig(0.2, 0.1).amplification
        hist = build_histograms(np.array([[0]]), [0.5], [1.0], [w], [0], 1)
        assert hist.grad[0, 0] == 4.0

    @given(st.integers(0, 2**32 - 1))
    def test_parent_equals_sum_of_children(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 60))
        binned = rng.integers(0, 6, size=(3, n))
        g, h = rng.normal(size=n), rng.uniform(0.5, 2.0, size=n)
        w = rng.choice([1.0, 8.0], size=n)
        idx = np.arange(n)
        go_left = rng.random(n) < 0.5
        parent = build_histograms(binned, g, h, w, idx, 6)
        kids = (build_histograms(binned, g, h, w, idx[go_left], 6)
                + build_histograms(binned, g, h, w, idx[~go_left], 6))
        np.testing.assert_allclose(parent.grad, kids.grad, rtol=0, atol=1e-9)
        np.testing.assert_allclose(parent.hess, kids.hess, rtol=0, atol=1e-9)
        np.testing.assert_array_equal(parent.count, kids.count)
        assert parent.count.sum(axis=1).tolist() == [n] * 3


class TestBestSplit:
    def test_perfect_split_gain(self):
        y = np.array([-1.0, -1, 1, 1])
        g = y.mean() - y
        hist, mapper = node_hist(np.arange(4.0)[:, None], g)
        split = best_split(hist, mapper.n_bins_per_feature, g.sum(), 4.0, 4, lam=0.0, gamma=0.0)
        assert split.gain == 2.0
        assert (split.feature, split.bin) == (0, 1)
        assert (split.left_grad, split.left_hess, split.left_count) == (2.0, 2.0, 2)

    def test_zero_gradients(self):
        hist, mapper = node_hist(np.arange(6.0)[:, None], np.zeros(6))
        assert best_split(hist, mapper.n_bins_per_feature, 0.0, 6.0, 6) is None

    def test_tie_goes_to_lower_feature(self):
        x = np.arange(6.0)
        X = np.column_stack([x, x])
        g = np.array([1.0, 1, 1, -1, -1, -1])
        hist, mapper = node_hist(X, g)
        split = best_split(hist, mapper.n_bins_per_feature, 0.0, 6.0, 6, lam=1.0)
        assert split.feature == 0

    def test_min_samples_leaf_blocks(self):
        g = np.array([5.0, 0, 0, 0])
        hist, mapper = node_hist(np.arange(4.0)[:, None], g)
        nb = mapper.n_bins_per_feature
        assert best_split(hist, nb, 5.0, 4.0, 4, lam=0.0, min_samples_leaf=1).bin == 0
        split = best_split(hist, nb, 5.0, 4.0, 4, lam=0.0, min_samples_leaf=2)
        assert split.bin == 1

    def test_gamma_can_veto(self):
        y = np.array([-1.0, -1, 1, 1])
        hist, mapper = node_hist(np.arange(4.0)[:, None], -y)
        assert best_split(hist, mapper.n_bins_per_feature, 0.0, 4.0, 4, 0.0, 2.0) is None

    @given(st.integers(0, 2**32 - 1), st.floats(0.0, 3.0), st.integers(1, 3))
    def test_matches_brute_force(self, seed, lam, min_leaf):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 25))
        X = rng.integers(0, 5, size=(n, 3)).astype(float)
        g = rng.normal(size=n)
        hist, mapper = node_hist(X, g)
        G, H = float(np.sum(g)), float(n)
        best = 0.0

        def score(gs, hs):
            return gs * gs / (hs + lam) if hs + lam > 0 else 0.0

        for f in range(3):
            for t in mapper.edges[f]:
                left = X[:, f] <= t
                if left.sum() < min_leaf or (~left).sum() < min_leaf:
                    continue
                gain = 0.5 * (score(g[left].sum(), left.sum()) + score(g[~left].sum(), (~left).sum())
                              - score(G, H))
                best = max(best, gain)
        split = best_split(hist, mapper.n_bins_per_feature, G, H, n, lam, 0.0, min_leaf)
        if best <= 1e-9:
            assert split is None or split.gain <= 1e-9
        else:
            assert split.gain == pytest.approx(best, rel=1e-9, abs=1e-12)


class TestGoss:
    def test_amplification(self):
        cfg = GossConfig(0.2, 0.1)
        assert cfg.amplification == 8.0 == (1 - 0.2) / 0.1

    def test_top_rows_always_kept(self):
        g = np.array([0.1, -5, 0.2, 0.3, 4, -0.1, 0.05, 0.2, -0.3, 0.1])
        for seed in range(20):
            idx, w = goss_sample(g, GossConfig(0.2, 0.1), np.random.default_rng(seed))
            weights = dict(zip(idx.tolist(), w.tolist()))
            assert weights[1] == 1.0 and weights[4] == 1.0
            assert sorted(weights.values()) == [1.0, 1.0, 8.0]

    def test_unbiased_sum(self):
        g = np.random.default_rng(0).normal(0.3, 1.0, size=200)
        cfg = GossConfig(0.2, 0.1)
        totals = []
        for seed in range(1000):
            idx, w = goss_sample(g, cfg, np.random.default_rng(seed))
            totals.append(np.sum(w * g[idx]))
        assert abs(np.mean(totals) - g.sum()) / abs(g.sum()) < 0.02

    def test_deterministic(self):
        g = np.random.default_rng(1).normal(size=50)
        a = goss_sample(g, GossConfig(0.3, 0.2), np.random.default_rng(9))
        b = goss_sample(g, GossConfig(0.3, 0.2), np.random.default_rng(9))
        np.testing.assert_array_equal(a[0], b[0])

    def test_budget_errors(self):
        with pytest.raises(SampleBudgetExceedsData):
            goss_sample(np.ones(3), GossConfig(0.2, 0.1), np.random.default_rng(0))
        with pytest.raises(ConfigInvalid):
            GossConfig(0.7, 0.5)


class TestEfb:
    def test_disjoint_pair_bundles(self):
        fb = np.array([[1, 2, 0, 0], [0, 0, 3, 1]])
        bundles = efb_bundle(fb, [3, 4])
        assert [sorted(b.members) for b in bundles] == [[0, 1]]

    def test_dense_pair_stays_apart(self):
        fb = np.array([[1, 2, 1, 1], [2, 1, 3, 1]])
        assert len(efb_bundle(fb, [3, 4])) == 2

    def test_three_feature_fixture(self):
        a = [1, 1, 1, 0, 0, 0]
        b = [0, 0, 0, 1, 1, 0]
        c = [0, 0, 1, 0, 0, 1]
        bundles = efb_bundle(np.array([a, b, c]), [2, 2, 2])
        assert sorted(sorted(x.members) for x in bundles) == [[0, 1], [2]]

    def test_decode_recovers_original_bin(self):
        fb = np.array([[1, 2, 0, 0, 0], [0, 0, 3, 1, 0]])
        bundle = efb_bundle(fb, [3, 4])[0]
        assert bundle.decode(0) is None
        decoded = {bundle.decode(b) for b in range(1, bundle.n_bins)}
        assert decoded == {(0, 1), (0, 2), (1, 1), (1, 2), (1, 3)}

    @given(st.integers(0, 2**32 - 1))
    def test_bundled_training_is_bit_identical(self, seed):
        rng = np.random.default_rng(seed)
        n = 120
        X = np.zeros((n, 6))
        owner = rng.integers(0, 4, size=n)
        for j in range(4):
            rows = owner == j
            X[rows, j] = rng.uniform(1.0, 5.0, size=rows.sum())
        X[:, 4:] = rng.normal(size=(n, 2))
        y = X[:, 0] - 2 * X[:, 2] + X[:, 4] + rng.normal(0, 0.1, size=n)
        cfg = BoostConfig(n_iterations=8, max_leaves=6, min_samples_leaf=2, seed=seed,
                          goss=GossConfig(0.3, 0.2))
        bundled = fit_gbdt(X, y, cfg)
        plain = fit_gbdt(X, y, replace(cfg, efb=False))
        np.testing.assert_array_equal(bundled.predict(X), plain.predict(X))
        assert [t.to_dict() for t in bundled.trees] == [t.to_dict() for t in plain.trees]

    def test_sparse_features_do_get_bundled(self):
        X = np.zeros((40, 4))
        X[np.arange(40), np.arange(40) % 4] = np.arange(1, 41)
        mapper = BinMapper().fit(X)
        assert len(efb_bundle(mapper.transform(X), mapper.n_bins_per_feature)) == 1


class TestOrderedStats:
    def test_first_row_uses_prior(self):
        out = ordered_target_stats(["c"], [3.0], 1.0, [0], initial_prior=0.5)
        assert out[0] == 0.5

    def test_second_row_example(self):
        out = ordered_target_stats(["c", "c"], [1.0, 0.0], 1.0, [0, 1])
        assert out[1] == 1.0

    @given(st.integers(0, 2**32 - 1), st.integers(2, 30))
    def test_no_leakage(self, seed, n):
        rng = np.random.default_rng(seed)
        cats = rng.integers(0, 3, size=n)
        y = rng.normal(size=n)
        perm = rng.permutation(n)
        base = ordered_target_stats(cats, y, 1.0, perm)
        i = int(rng.integers(n))
        bumped = y.copy()
        bumped[i] += 10.0
        out = ordered_target_stats(cats, bumped, 1.0, perm)
        position = np.empty(n, dtype=int)
        position[perm] = np.arange(n)
        changed = np.flatnonzero(out != base)
        assert out[i] == base[i]
        assert np.all(position[changed] > position[i])

    def test_bad_permutation(self):
        with pytest.raises(ValueError):
            ordered_target_stats([1, 2], [0.0, 1.0], 1.0, [0, 0])


class TestLeafwise:
    def test_single_leaf(self):
        X = np.arange(5.0)[:, None]
        g = np.array([1.0, 2, 3, 4, 5])
        tree = grow_tree_leafwise(view_of(X), g, np.ones(5), np.arange(5), 1, 1.0, 0.0, 1)
        assert tree.n_leaves == 1
        assert tree.value[0] == -15.0 / 6.0

    def test_xor_points_isolated(self):
        X = np.array([[0.0, 0], [0, 1], [1, 0], [1, 1]])
        g = np.array([1.0, -3, 2, -5])
        tree = grow_tree_leafwise(view_of(X), g, np.ones(4), np.arange(4), 4, 0.0, 0.0, 1)
        assert tree.n_leaves == 4
        assert tree.feature[0] == 1
        np.testing.assert_array_equal(tree.predict(X), -g)

    def test_all_equal_features(self):
        X = np.ones((6, 3))
        g = np.arange(6.0)
        tree = grow_tree_leafwise(view_of(X), g, np.ones(6), np.arange(6), 8, 1.0, 0.0, 1)
        assert tree.n_leaves == 1

    def test_respects_max_leaves(self, rng):
        X = rng.normal(size=(200, 4))
        g = rng.normal(size=200)
        tree = grow_tree_leafwise(view_of(X), g, np.ones(200), np.arange(200), 7, 1.0, 0.0, 1)
        assert tree.n_leaves == 7
        assert np.all(np.isfinite(tree.value))


class TestOblivious:
    def perfect(self):
        X = np.column_stack([np.arange(4.0), [3.0, 0, 1, 2]])
        y = np.array([-1.0, -1, 1, 1])
        return X, y

    def test_depth_one_matches_best_split(self):
        X, y = self.perfect()
        g = y.mean() - y
        tree = grow_tree_oblivious(view_of(X), g, np.ones(4), np.arange(4), 1, 0.0, 0.0)
        hist, mapper = node_hist(X, g)
        split = best_split(hist, mapper.n_bins_per_feature, 0.0, 4.0, 4, 0.0, 0.0)
        assert tree.feature[0] == split.feature
        assert tree.threshold[0] == mapper.edges[split.feature][split.bin]

    def test_depth_two_shares_level_splits(self, rng):
        X = rng.normal(size=(100, 3))
        g = rng.normal(size=100)
        tree = grow_tree_oblivious(view_of(X), g, np.ones(100), np.arange(100), 2, 1.0, 0.0)
        assert tree.n_leaves == 4
        assert tree.is_oblivious()
        assert [len(s) for s in tree.level_splits()] == [1, 1]

    def test_loses_to_leafwise_on_crafted_data(self):
        # left half depends on x1, right half on x2
        X = np.array([[0, 0, 0], [0, 1, 0], [0, 0, 1], [0, 1, 1],
                      [1, 0, 0], [1, 1, 0], [1, 0, 1], [1, 1, 1]], dtype=float)
        y = np.array([0.0, 10, 0, 10, 20, 20, 30, 30])
        common = dict(n_iterations=1, learning_rate=1.0, lam=0.0, min_samples_leaf=1, efb=False)
        obl = fit_gbdt(X, y, BoostConfig(mode=OBLIVIOUS, depth=2, **common))
        leaf = fit_gbdt(X, y, BoostConfig(mode=LEAFWISE, max_leaves=4, **common))
        assert obl.trees[0].n_leaves == leaf.trees[0].n_leaves == 4
        assert leaf.train_loss[-1] == 0.0
        assert obl.train_loss[-1] > leaf.train_loss[-1]

    def test_every_fitted_tree_is_symmetric(self, rng):
        X = rng.normal(size=(150, 4))
        y = X[:, 0] ** 2 + X[:, 1] + rng.normal(0, 0.1, 150)
        model = fit_gbdt(X, y, BoostConfig(mode=OBLIVIOUS, depth=4, n_iterations=10),
                         categorical=rng.integers(0, 3, size=(150, 1)))
        assert all(t.is_oblivious() for t in model.trees)
        assert all(t.n_leaves == 16 for t in model.trees)


class TestFit:
    def test_zero_iterations(self, rng):
        X, y = rng.normal(size=(20, 2)), rng.normal(size=20)
        model = fit_gbdt(X, y, BoostConfig(n_iterations=0))
        np.testing.assert_array_equal(model.predict(rng.normal(size=(5, 2))), np.full(5, y.mean()))

    def exact_cfg(self, lr):
        return BoostConfig(n_iterations=6, learning_rate=lr, lam=0.0, gamma=0.0, max_leaves=16,
                           min_samples_leaf=1)

    def test_exact_fit_in_one_step(self):
        X = np.array([[3.0], [1.0], [4.0], [1.5], [9.0], [2.6]])
        y = np.array([2.0, -1.0, 5.0, 0.5, 3.0, -2.0])
        model = fit_gbdt(X, y, replace(self.exact_cfg(1.0), n_iterations=1))
        np.testing.assert_allclose(model.predict(X) - y, 0.0, atol=1e-12)

    def test_half_step_shrinks_mse_geometrically(self):
        X = np.array([[3.0], [1.0], [4.0], [1.5], [9.0], [2.6]])
        y = np.array([2.0, -1.0, 5.0, 0.5, 3.0, -2.0])
        model = fit_gbdt(X, y, self.exact_cfg(0.5))
        mse0 = model.train_loss[0]
        for m, loss in enumerate(model.train_loss):
            assert loss == pytest.approx(mse0 * 0.25 ** m, rel=1e-9)

    @given(st.integers(0, 2**32 - 1), st.sampled_from([LEAFWISE, OBLIVIOUS]),
           st.floats(0.05, 1.0))
    def test_training_loss_never_increases(self, seed, mode, lr):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(60, 3))
        y = np.sin(X[:, 0]) + X[:, 1] * X[:, 2] + rng.normal(0, 0.2, 60)
        model = fit_gbdt(X, y, BoostConfig(n_iterations=12, learning_rate=lr, mode=mode, depth=3,
                                           max_leaves=8, min_samples_leaf=2, seed=seed))
        assert np.all(np.diff(model.train_loss) <= 0.0)

    def test_thread_count_does_not_change_model(self, rng):
        X = rng.normal(size=(300, 8))
        y = X @ rng.normal(size=8) + rng.normal(size=300)
        for cfg in (BoostConfig(n_iterations=10, goss=GossConfig(0.2, 0.1)),
                    BoostConfig(n_iterations=10, mode=OBLIVIOUS, depth=4)):
            one = fit_gbdt(X, y, cfg, n_threads=1).dumps()
            many = fit_gbdt(X, y, cfg, n_threads=4).dumps()
            assert one == many

    def test_seed_reproducible(self, rng):
        X, y = rng.normal(size=(100, 3)), rng.normal(size=100)
        cfg = BoostConfig(n_iterations=5, goss=GossConfig(0.2, 0.1), seed=11)
        assert fit_gbdt(X, y, cfg).dumps() == fit_gbdt(X, y, cfg).dumps()

    @pytest.mark.parametrize("bad", [dict(learning_rate=0.0), dict(learning_rate=1.5),
                                     dict(n_bins=1), dict(lam=-1.0), dict(mode="deep"),
                                     dict(max_leaves=0), dict(seed=-1)])
    def test_invalid_config(self, bad):
        with pytest.raises(ConfigInvalid):
            fit_gbdt(np.ones((3, 1)), np.ones(3), BoostConfig(**bad))

    def test_max_leaves_one_is_allowed(self):
        model = fit_gbdt(np.arange(4.0)[:, None], np.arange(4.0),
                         BoostConfig(max_leaves=1, n_iterations=2))
        assert all(t.n_leaves == 1 for t in model.trees)

    def test_unknown_option(self):
        with pytest.raises(ConfigInvalid):
            BoostConfig.from_dict({"depthh": 3})


class TestPredict:
    def model(self, trees, base=5.0, lr=0.1):
        return GbdtModel(BoostConfig(learning_rate=lr), base, lr, 1, [np.empty(0)], trees)

    def test_no_trees(self):
        assert predict_gbdt(self.model([]), [1.0]) == 5.0

    def test_linear_form(self):
        assert predict_gbdt(self.model([single_leaf(2.0)]), [0.3]) == 5.2

    def test_boundary_goes_left(self):
        model = self.model([stump(1.0, -1.0, 1.0)], base=0.0, lr=1.0)
        assert predict_gbdt(model, [1.0]) == -1.0
        assert predict_gbdt(model, [np.nextafter(1.0, 2.0)]) == 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            predict_gbdt(self.model([]), [1.0, 2.0])

    def test_categorical_required_when_trained_with_it(self, rng):
        X, y = rng.normal(size=(30, 2)), rng.normal(size=30)
        model = fit_gbdt(X, y, BoostConfig(n_iterations=2), categorical=rng.integers(0, 2, (30, 1)))
        with pytest.raises(DimensionMismatch):
            model.predict(X)


class TestSerialization:
    @pytest.mark.parametrize("mode", [LEAFWISE, OBLIVIOUS])
    def test_round_trip_bit_exact(self, tmp_path, rng, mode):
        X = rng.normal(size=(120, 4))
        y = X[:, 0] * 3 + rng.normal(size=120)
        cats = rng.integers(0, 3, size=(120, 1)) if mode == OBLIVIOUS else None
        model = fit_gbdt(X, y, BoostConfig(mode=mode, n_iterations=7, depth=3,
                                           goss=GossConfig(0.2, 0.1)), categorical=cats)
        model.save(tmp_path / "m.json")
        back = GbdtModel.load(tmp_path / "m.json")
        np.testing.assert_array_equal(back.predict(X, cats), model.predict(X, cats))
        assert back.dumps() == model.dumps()
