import numpy as np
import pytest

from lirec.encoder import encode_bundle, encode_clip
from lirec.gradcheck import CASES, check_case, toy_dataset, toy_model
from lirec.heads import score_interactions, score_relationships
from lirec.losses import LossConfig
from lirec.model import Model, ModelConfig
from lirec.rng import stream


@pytest.fixture(scope="module")
def toy():
    return toy_dataset(3)


@pytest.mark.parametrize("case", CASES, ids=lambda c: c.label)
def test_gradients_two_seeds(case):
    assert max(check_case(case, s) for s in (0, 1)) < 1e-4


@pytest.mark.parametrize("case", CASES, ids=lambda c: c.label)
def test_gradients_without_dropout(case):
    assert check_case(case, 2, dropout=False) < 1e-4


def _params(model, seed=0):
    return model.init_params(seed)


def test_interaction_scores_use_ground_truth_pair(toy):
    m = toy_model(toy, CASES[0])
    p = _params(m)
    clips = list(range(len(toy.clips)))
    S = m.interaction_scores(p, toy, clips)
    for i in clips:
        phi = encode_clip(p, m.enc, toy, i, toy.clips[i].gt_pair() or (toy.clips[i].pair[0], None))
        if toy.clips[i].gt_pair() == toy.clips[i].pair:
            assert np.allclose(S[i], score_interactions(p, m.int_head, phi), atol=1e-12)


def test_relationship_scores_pool_the_bundle(toy):
    m = toy_model(toy, CASES[1])
    p = _params(m)
    b = toy.bundles[0]
    phi = encode_bundle(p, m.enc, toy, b)
    assert np.allclose(m.relationship_scores(p, toy, [b])[0],
                       score_relationships(p, m.rel_head, phi), atol=1e-12)


def test_pair_rows_are_local(toy):
    m = toy_model(toy, [c for c in CASES if c.regime == "int_char"][0])
    p = _params(m)
    i = next(i for i, c in enumerate(toy.clips) if len(c.tracks) >= 3)
    before = m.pair_matrices(p, toy, [i])[0]
    victim = max(toy.clips[i].tracks)
    toy.clips[i].tracks[victim] = toy.clips[i].tracks[victim] + 5.0
    toy.__dict__.pop("_pooled", None)
    try:
        after = m.pair_matrices(p, toy, [i])[0]
    finally:
        toy.clips[i].tracks[victim] = toy.clips[i].tracks[victim] - 5.0
        toy.__dict__.pop("_pooled", None)
    for row, pair in enumerate(toy.candidates[i]):
        same = victim not in pair
        assert np.allclose(before[row], after[row], rtol=0, atol=0) == same


def test_tensor_conditionals_match_matrix_and_vector(toy):
    m = toy_model(toy, [c for c in CASES if c.regime == "int_rel_char"][0])
    p = _params(m)
    clips = [i for i in range(len(toy.clips)) if toy.bundle_of(i) is not None]
    ev = m.eval_bundles(toy)
    for i, T in zip(clips, m.tensors(p, toy, clips)):
        M = m.pair_matrices(p, toy, [i])[0]
        Rp = m.relationship_by_pair(p, toy, ev[toy.bundle_of(i)], toy.candidates[i])
        assert np.allclose(T, M[:, :, None] + Rp[:, None, :], rtol=0, atol=1e-15)
        assert ((T > 0) & (T < 2)).all()


def test_eval_loss_is_deterministic(toy):
    m = toy_model(toy, CASES[5])
    p = _params(m)
    lc = LossConfig()
    a = m.loss_and_grad(p, toy, [0, 1, 2], lc, train=False, need_grad=False)[0]
    b = m.loss_and_grad(p, toy, [0, 1, 2], lc, train=False, need_grad=False)[0]
    assert a == b and a >= 0.0


def test_weak_sampling_follows_stream(toy):
    m = toy_model(toy, CASES[7])
    p = _params(m)
    lc = LossConfig(weak=True)
    run = lambda s: m.loss_and_grad(p, toy, list(range(len(toy.clips))), lc,  # noqa: E731
                                    rng_sample=stream(s, "sampling", 0), train=False,
                                    need_grad=False)[0]
    assert run(0) == run(0)


def test_init_is_seeded(toy):
    m = toy_model(toy, CASES[2])
    a, b, c = _params(m, 1), _params(m, 1), _params(m, 2)
    assert all(np.array_equal(a[k], b[k]) for k in a)
    assert any(not np.array_equal(a[k], c[k]) for k in a)
    assert any(k.startswith("enc_rel.") for k in a)


def test_shared_encoders_have_one_parameter_set(toy):
    cfg = ModelConfig(regime="int_rel", n_interactions=5, n_relationships=3,
                      dims=dict(toy.dims), enc_hidden=5, emb_dim=4, head_hidden=6,
                      share_encoders=True)
    assert not any(k.startswith("enc_rel.") for k in Model(cfg).init_params(0))


def test_wrong_regime_scoring_is_rejected(toy):
    m = toy_model(toy, CASES[1])
    with pytest.raises(ValueError, match="interaction head"):
        m.interaction_scores(_params(m), toy, [0])


@pytest.mark.parametrize("kw", [dict(regime="char"), dict(wiring="sideways")])
def test_bad_config(kw):
    with pytest.raises(ValueError):
        ModelConfig(**kw)


def test_config_round_trip():
    cfg = ModelConfig(regime="int_rel", modalities=("visual", "tracks"), share_encoders=True)
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg
