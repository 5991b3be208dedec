import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from lirec.heads import (InteractionHead, RelationshipHead, score_interactions,
                         score_interactions_joint, score_pair_matrix, score_relationships,
                         score_tensor)
from lirec.nn import UsageError, gradcheck
from lirec.rng import stream


def sig(x):
    return 1.0 / (1.0 + np.exp(-x))


def head(n_in=3, hidden=2, n=3, seed=0):
    h = InteractionHead("h", n_in, hidden, n)
    params = {}
    h.init(params, stream(seed, "init"))
    return h, params


class TestInteractionHead:
    def test_zero_weights(self):
        h, params = head()
        params = {k: np.zeros_like(v) for k, v in params.items()}
        assert np.array_equal(score_interactions(params, h, np.ones(3)), np.full(3, 0.5))

    def test_single_class(self):
        h, params = head(n=1)
        s = score_interactions(params, h, np.ones(3))
        assert s.shape == (1,) and 0.0 < s[0] < 1.0

    def test_hand_toy(self):
        h, params = head()
        # weights are stored (out, in)
        params["h.l1.W"] = np.array([[1.0, 0.0], [0.0, -1.0], [2.0, 1.0]]).T
        params["h.l1.b"] = np.array([0.0, 0.5])
        params["h.l2.W"] = np.array([[1.0, -1.0, 0.0], [0.5, 0.5, 2.0]]).T
        params["h.l2.b"] = np.array([0.0, 0.1, -0.2])
        x = np.array([1.0, 2.0, -1.0])
        # hidden pre-activation: (1 - 2, -2 - 1 + .5) = (-1, -2.5) -> relu 0, 0
        assert np.allclose(score_interactions(params, h, x), sig(np.array([0.0, 0.1, -0.2])))
        x = np.array([1.0, -2.0, 1.0])
        # (1 + 2, 2 + 1 + .5) = (3, 3.5)
        want = sig(np.array([3.0 + 1.75, -3.0 + 1.75 + 0.1, 7.0 - 0.2]))
        assert np.allclose(score_interactions(params, h, x), want, rtol=0, atol=1e-15)

    def test_backward_needs_cache(self):
        h, params = head()
        with pytest.raises(UsageError):
            h.backward(params, {}, None, np.ones((1, 3)))

    def test_gradcheck(self):
        h, params = head(4, 5, 3, seed=2)
        x = stream(2, "eval").standard_normal((6, 4))
        w = stream(3, "eval").standard_normal((6, 3))
        f = lambda p: float((w * h.forward(p, x)[0]).sum())  # noqa: E731

        def g(p):
            s, cache = h.forward(p, x)
            grads = {k: np.zeros_like(v) for k, v in p.items()}
            h.backward(p, grads, cache, w)
            return grads

        assert max(gradcheck(f, g, params).values()) < 1e-6


class TestRelationshipHead:
    def test_zero_weights(self):
        r = RelationshipHead("r", 4, 15)
        params = {}
        r.init(params, stream(0, "init"))
        params = {k: np.zeros_like(v) for k, v in params.items()}
        assert np.array_equal(score_relationships(params, r, np.ones(4)), np.full(15, 0.5))

    def test_hand_toy(self):
        r = RelationshipHead("r", 2, 2)
        params = {"r.l.W": np.array([[1.0, 2.0], [-1.0, 0.0]]), "r.l.b": np.array([0.0, 0.5])}
        s = score_relationships(params, r, np.array([0.5, 1.0]))
        assert np.allclose(s, sig(np.array([2.5, 0.0])), rtol=0, atol=1e-15)


class TestJointHead:
    def test_zero_relationship_block_reduces_to_plain_head(self):
        plain, p0 = head(3, 4, 2, seed=1)
        joint = InteractionHead("h", 6, 4, 2)
        p1 = dict(p0)
        p1["h.l1.W"] = np.hstack([p0["h.l1.W"], stream(5, "init").standard_normal((4, 3))])
        x = np.array([0.3, -0.2, 0.9])
        assert np.allclose(score_interactions_joint(p1, joint, x, np.zeros(3)),
                           score_interactions(p0, plain, x), rtol=0, atol=1e-15)

    def test_concatenation_order(self):
        h = InteractionHead("h", 2, 1, 1)
        params = {"h.l1.W": np.array([[1.0, 0.0]]), "h.l1.b": np.zeros(1),
                  "h.l2.W": np.array([[1.0]]), "h.l2.b": np.zeros(1)}
        s = score_interactions_joint(params, h, np.array([2.0]), np.array([5.0]))
        assert s[0] == pytest.approx(sig(2.0))


class TestPairMatrix:
    def test_single_pair_row(self):
        h, params = head()
        x = np.array([0.1, 0.2, 0.3])
        assert np.array_equal(score_pair_matrix(params, h, x)[0],
                              score_interactions(params, h, x))

    @given(hnp.arrays(float, (4, 3), elements=st.floats(-3, 3)), st.permutations(range(4)))
    def test_permutation_equivariance(self, X, perm):
        h, params = head()
        S = score_pair_matrix(params, h, X)
        assert np.allclose(score_pair_matrix(params, h, X[list(perm)]), S[list(perm)],
                           rtol=0, atol=1e-15)

    def test_loop_oracle(self):
        h, params = head(3, 4, 4, seed=3)
        X = stream(1, "eval").standard_normal((3, 3))
        S = score_pair_matrix(params, h, X)
        for p in range(3):
            assert np.allclose(S[p], score_interactions(params, h, X[p]), rtol=0, atol=1e-15)


class TestTensor:
    def test_scalar(self):
        assert score_tensor([[0.3]], [[0.6]]).item() == pytest.approx(0.9)

    def test_triple_loop(self):
        M = np.array([[0.1, 0.7, 0.4], [0.9, 0.2, 0.3]])
        Rp = np.array([[0.5, 0.6], [0.05, 0.95]])
        T = score_tensor(M, Rp)
        for p in range(2):
            for a in range(3):
                for r in range(2):
                    assert T[p, a, r] == M[p, a] + Rp[p, r]

    @given(hnp.arrays(float, (3, 4), elements=st.floats(0.01, 0.99)),
           hnp.arrays(float, (3, 2), elements=st.floats(0.01, 0.99)))
    def test_conditionals_reduce_to_heads(self, M, Rp):
        T = score_tensor(M, Rp)
        assert ((T > 0) & (T < 2)).all()
        for p in range(3):
            assert (T[p].argmax(axis=0) == M[p].argmax()).all()
            assert (T[p].argmax(axis=1) == Rp[p].argmax()).all()

    def test_pair_count_mismatch(self):
        with pytest.raises(ValueError):
            score_tensor(np.ones((2, 3)), np.ones((3, 2)))
