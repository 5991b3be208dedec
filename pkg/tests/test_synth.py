import numpy as np
import pytest
from scipy import stats

from lirec.data import structurally_equal
from lirec.synth import (ConfigError, GenConfig, bayes_oracle_accuracy, correlation_matrix,
                         generate, load_truth, save_truth)

SMALL = dict(n_movies=3, clips_per_movie=60, test_movies=1)


def test_noiseless_features_are_prototypes():
    ds, t = generate(GenConfig(noise=0.0, **SMALL))
    for c in ds.clips:
        a, r = c.interaction, t.clips[c.id]["relationship"]
        vis = t.talk_visual if t.profiles[a] == "dialog" else t.proto_visual[a]
        assert np.array_equal(c.visual, np.broadcast_to(vis, c.visual.shape))
        if c.dialog is not None:
            assert t.profiles[a] != "visual"
            assert np.array_equal(c.dialog, np.broadcast_to(t.proto_dialog[a], c.dialog.shape))
        ident = t.identities[c.movie]
        j, k = c.pair
        for ch, arr in c.tracks.items():
            if ch == j:
                off = t.role_actor + 3.0 * t.proto_track[a] + 0.5 * t.proto_rel[r]
            elif ch == k:
                off = t.role_recipient + 3.0 * t.proto_reaction[a] + 0.5 * t.proto_rel[r]
            else:
                off = 0.0
            assert np.allclose(arr, ident[ch] + off, rtol=0, atol=1e-12)


def test_visual_only_classes_never_have_dialog(seed7):
    ds, t = seed7
    assert all(c.dialog is None for c in ds.clips if t.profiles[c.interaction] == "visual")


def test_deterministic():
    a, _ = generate(GenConfig(**SMALL))
    b, _ = generate(GenConfig(**SMALL))
    assert structurally_equal(a, b)
    c, _ = generate(GenConfig(**{**SMALL, "seed": 8}))
    assert not structurally_equal(a, c)


def test_uniform_correlation_frequencies():
    cfg = GenConfig(n_movies=40, clips_per_movie=250, correlation_strength=0.0, noise=0.1)
    ds, _ = generate(cfg)
    n = len(ds.clips)
    assert n >= 10**4
    counts = np.bincount([c.interaction for c in ds.clips], minlength=101)
    p = 1 / 101
    sd = np.sqrt(n * p * (1 - p))
    assert np.all(np.abs(counts - n * p) <= 3 * sd)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_correlation_columns_are_conditionals():
    for s in (0.0, 0.5, 1.0):
        C = correlation_matrix(GenConfig(correlation_strength=s, class_prior="power_law"))
        assert C.shape == (101, 15)
        assert np.allclose(C.sum(axis=0), 1.0) and (C >= 0).all()


def test_full_strength_blocks_are_disjoint():
    C = correlation_matrix(GenConfig(correlation_strength=1.0))
    assert ((C > 0).sum(axis=1) == 1).all()


@pytest.mark.parametrize("kw", [dict(n_characters=1), dict(noise=-1.0),
                                dict(dialog_missing_prob=1.5),
                                dict(frac_visual_only=0.7, frac_dialog_only=0.6),
                                dict(correlation=[[1.0]])])
def test_infeasible_config(kw):
    with pytest.raises(ConfigError):
        generate(GenConfig(**kw))


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="bogus"):
        GenConfig.from_dict({"bogus": 1})


def test_overlap_companions_see_each_other(seed7):
    ds, _ = seed7
    pairs = 0
    for i, c in enumerate(ds.clips):
        for j in range(i + 1, min(i + 3, len(ds.clips))):
            d = ds.clips[j]
            if d.movie == c.movie and d.pair == (c.pair[1], c.pair[0]) and d.start < c.end:
                assert d.interaction in ds.overlaps[i] and c.interaction in ds.overlaps[j]
                pairs += 1
    assert pairs > 50


def test_truth_round_trip(tmp_path):
    _, t = generate(GenConfig(**SMALL))
    save_truth(t, tmp_path / "truth.json")
    t2 = load_truth(tmp_path / "truth.json")
    assert t2.clips == t.clips and np.array_equal(t2.correlation, t.correlation)
    assert np.array_equal(t2.proto_reaction, t.proto_reaction) and t2.aliases == t.aliases


def test_aliases_share_content():
    ds, t = generate(GenConfig(alias_frac=0.5, correlation_strength=1.0, **SMALL))
    assert len(t.aliases) == 25
    R = t.config.n_relationships
    for a, b in t.aliases:
        assert a % R != b % R and t.profiles[a] == t.profiles[b]
        for proto in (t.proto_visual, t.proto_dialog, t.proto_track, t.proto_reaction):
            assert np.array_equal(proto[a], proto[b])
    assert len({x for p in t.aliases for x in p}) == 50


def test_aliasing_off_by_default(seed7):
    _, t = seed7
    assert t.aliases == []
    assert len({tuple(v) for v in t.proto_visual}) == t.config.n_interactions


def test_reaction_draws_leave_other_prototypes_alone():
    _, a = generate(GenConfig(reaction_scale=0.0, **SMALL))
    _, b = generate(GenConfig(**SMALL))
    assert np.array_equal(a.proto_track, b.proto_track)
    assert np.array_equal(a.proto_reaction, b.proto_reaction)


class TestOracle:
    def test_noiseless_is_perfect(self):
        ds, t = generate(GenConfig(noise=0.0, **SMALL))
        assert bayes_oracle_accuracy(ds, t) == {"interaction": 1.0, "relationship": 1.0,
                                                "pair": 1.0}

    def test_huge_noise_falls_back_to_prior(self):
        cfg = GenConfig(noise=1e6, class_prior="power_law", frac_visual_only=0.0,
                        frac_dialog_only=0.0, dialog_missing_prob=0.0, **SMALL)
        ds, t = generate(cfg)
        acc = bayes_oracle_accuracy(ds, t)["interaction"]
        majority = t.correlation.argmax(axis=0)
        rate = np.mean([c.interaction == majority[t.clips[c.id]["relationship"]]
                        for c in ds.clips])
        assert acc == pytest.approx(rate, abs=1e-12)

    def test_pinned_seed7(self, seed7):
        # computed once with the oracle at these configs
        ds, t = seed7
        assert bayes_oracle_accuracy(ds, t) == {"interaction": 1.0, "relationship": 1.0,
                                                "pair": 1.0}
        ds4, t4 = generate(GenConfig(noise=4.0))
        got = bayes_oracle_accuracy(ds4, t4)
        assert got["interaction"] == 1.0
        assert got["pair"] == pytest.approx(1997 / 2000, abs=1e-12)
        assert got["relationship"] == pytest.approx(119 / 120, abs=1e-12)
