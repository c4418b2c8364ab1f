import numpy as np
import pytest
from scipy import stats

from dccf.rng import substream
from dccf.synthgen import (SynthConfig, derive_world, generate_world,
                           sample_dataset, selection_distributions, write_dataset)

SMALL = SynthConfig(n_users=30, n_items=50, train_per_user=6, test_per_user=2,
                    feature_dim=6, latent_dim=6, seed=11)


class TestGenerateWorld:
    def test_determinism_is_bitwise(self):
        a = generate_world(SMALL)
        b = generate_world(SMALL)
        assert np.array_equal(a.user_latents, b.user_latents)
        assert np.array_equal(a.item_features, b.item_features)
        assert np.array_equal(a.true_scores, b.true_scores)
        assert np.array_equal(a.train_scores, b.train_scores)

    def test_no_confounding_means_equal_scores(self):
        cfg = SynthConfig(**{**SMALL.__dict__, "confounder_strength": 0.0})
        world = generate_world(cfg)
        assert np.array_equal(world.true_scores, world.train_scores)

    def test_confounding_shifts_train_scores(self):
        world = generate_world(SMALL)
        assert not np.allclose(world.true_scores, world.train_scores)

    def test_mediator_determines_unconfounded_scores(self):
        # plant a duplicate item: same latent -> same features -> with no
        # direct effect, every user scores the two items identically
        cfg = SynthConfig(**{**SMALL.__dict__, "direct_effect_scale": 0.0})
        base = generate_world(cfg)
        latents = base.item_latents.copy()
        latents[1] = latents[0]
        world = derive_world(cfg, base.user_latents, latents,
                             base.feature_net_weights, base.preference_net_weights,
                             base.direct_net_weights, base.confounder_draws,
                             base.confounder_item_loadings)
        assert np.array_equal(world.item_features[0], world.item_features[1])
        assert np.allclose(world.true_scores[:, 0], world.true_scores[:, 1], atol=1e-12)

    def test_direct_effect_changes_unconfounded_scores(self):
        w0 = generate_world(SynthConfig(**{**SMALL.__dict__, "direct_effect_scale": 0.0}))
        w5 = generate_world(SynthConfig(**{**SMALL.__dict__, "direct_effect_scale": 0.5}))
        assert not np.allclose(w0.true_scores, w5.true_scores)

    def test_global_confounder_shares_one_draw(self):
        cfg = SynthConfig(**{**SMALL.__dict__, "global_confounder": True})
        world = generate_world(cfg)
        assert np.all(world.confounder_draws == world.confounder_draws[0])

    def test_invalid_config_rejected(self):
        with pytest.raises(ValueError):
            SynthConfig(n_users=0)
        with pytest.raises(ValueError):
            SynthConfig(n_items=10, train_per_user=8, test_per_user=5)
        with pytest.raises(ValueError):
            SynthConfig(confounder_strength=-1.0)


class TestSampleDataset:
    def test_counts_match_config(self):
        world = generate_world(SMALL)
        table, features, split = sample_dataset(world, SMALL)
        assert len(split.train) == SMALL.n_users * SMALL.train_per_user
        assert len(split.test) == SMALL.n_users * SMALL.test_per_user
        assert features.vectors.shape == (SMALL.n_items, SMALL.feature_dim)
        assert table.n_users == SMALL.n_users

    def test_train_and_test_disjoint_per_user(self):
        world = generate_world(SMALL)
        _, _, split = sample_dataset(world, SMALL)
        train_sets, test_sets = {}, {}
        for u, v in split.train:
            train_sets.setdefault(u, set()).add(v)
        for u, v in split.test:
            test_sets.setdefault(u, set()).add(v)
        for u in test_sets:
            assert not train_sets[u] & test_sets[u]

    def test_exhaustive_train_covers_all_non_test_items(self):
        cfg = SynthConfig(n_users=4, n_items=10, train_per_user=8, test_per_user=2,
                          feature_dim=4, latent_dim=4, seed=5)
        world = generate_world(cfg)
        _, _, split = sample_dataset(world, cfg)
        per_user = {}
        for u, v in split.train + split.test:
            per_user.setdefault(u, set()).add(v)
        for u, items in per_user.items():
            assert items == set(range(10))

    def test_determinism(self):
        world = generate_world(SMALL)
        a = sample_dataset(world, SMALL)[2]
        b = sample_dataset(world, SMALL)[2]
        assert a.train == b.train and a.test == b.test

    def test_write_dataset_round_trips_via_loaders(self, tmp_path):
        from dccf.data import load_interactions, load_item_features, read_split

        world = generate_world(SMALL)
        table, features, split = sample_dataset(world, SMALL)
        write_dataset(tmp_path, table, features, split, SMALL)
        loaded = load_interactions(tmp_path / "interactions.tsv", 4.0)
        feats = load_item_features(tmp_path / "features.tsv", loaded)
        back = read_split(loaded, tmp_path / "train.tsv", tmp_path / "validation.tsv",
                          tmp_path / "test.tsv")
        assert len(back.train) == len(split.train)
        assert len(back.test) == len(split.test)
        # external ids line up: feature row of "i3" equals the world's row 3
        idx = loaded.item_index.get("i3")
        if idx is not None:
            assert np.allclose(feats.vectors[idx], world.item_features[3])


class TestConfounderEffect:
    def test_total_variation_increases_with_strength(self):
        strengths = [0.0, 0.5, 1.0, 2.0]
        tv_means = []
        for s in strengths:
            cfg = SynthConfig(n_users=10, n_items=40, train_per_user=5,
                              test_per_user=2, feature_dim=5, latent_dim=5,
                              confounder_strength=s, seed=3)
            world = generate_world(cfg)
            tvs = []
            for u in range(cfg.n_users):
                p_train, p_test = selection_distributions(world, u)
                tvs.append(0.5 * np.abs(p_train - p_test).sum())
            tv_means.append(np.mean(tvs))
        assert tv_means[0] == pytest.approx(0.0, abs=1e-12)
        for lo, hi in zip(tv_means, tv_means[1:]):
            assert hi > lo

    def test_unconfounded_popularities_indistinguishable(self):
        # pooled over 20 seeds; items binned by ground-truth popularity rank so
        # expected counts are large enough for the two-sample chi-square test
        train_counts = None
        test_counts = None
        for seed in range(20):
            cfg = SynthConfig(n_users=60, n_items=120, train_per_user=10,
                              test_per_user=3, feature_dim=5, latent_dim=5,
                              confounder_strength=0.0, seed=100 + seed)
            world = generate_world(cfg)
            if train_counts is None:
                marginals = np.mean([selection_distributions(world, u)[1]
                                     for u in range(cfg.n_users)], axis=0)
                order = np.argsort(-marginals)
                bins = np.empty(cfg.n_items, dtype=np.int64)
                bins[order] = np.arange(cfg.n_items) // 10
                train_counts = np.zeros(cfg.n_items // 10)
                test_counts = np.zeros(cfg.n_items // 10)
            _, _, split = sample_dataset(world, cfg)
            for _, v in split.train:
                train_counts[bins[v]] += 1
            for _, v in split.test:
                test_counts[bins[v]] += 1
        _, p_value, _, _ = stats.chi2_contingency(np.stack([train_counts, test_counts]))
        assert p_value > 0.01

    def test_confounded_popularities_distinguishable(self):
        # sanity check that the chi-square test has power at all
        train_counts = np.zeros(12)
        test_counts = np.zeros(12)
        bins = None
        for seed in range(20):
            cfg = SynthConfig(n_users=60, n_items=120, train_per_user=10,
                              test_per_user=3, feature_dim=5, latent_dim=5,
                              confounder_strength=2.0, global_confounder=True,
                              seed=200 + seed)
            world = generate_world(cfg)
            if bins is None:
                marginals = np.mean([selection_distributions(world, u)[1]
                                     for u in range(cfg.n_users)], axis=0)
                order = np.argsort(-marginals)
                bins = np.empty(cfg.n_items, dtype=np.int64)
                bins[order] = np.arange(cfg.n_items) // 10
            _, _, split = sample_dataset(world, cfg)
            for _, v in split.train:
                train_counts[bins[v]] += 1
            for _, v in split.test:
                test_counts[bins[v]] += 1
        _, p_value, _, _ = stats.chi2_contingency(np.stack([train_counts, test_counts]))
        assert p_value < 0.01


def test_substream_independence():
    a = substream(7, "world")
    b = substream(7, "sample")
    assert a.random() != b.random()
    with pytest.raises(ValueError):
        substream(7, "nonsense")
