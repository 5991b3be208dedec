"""Scoring heads and the pair x interaction x relationship score tensor."""

import numpy as np

from .nn import Dense, UsageError, activation, activation_backward


class InteractionHead:
    """sigmoid(W2 relu(W1 x + b1) + b2), one score per interaction."""

    def __init__(self, name, n_in, hidden, n_classes):
        self.l1 = Dense(name + ".l1", n_in, hidden)
        self.l2 = Dense(name + ".l2", hidden, n_classes)
        self.n_in = n_in

    def init(self, params, rng):
        self.l1.init(params, rng)
        self.l2.init(params, rng)

    def forward(self, params, x):
        h, c1 = self.l1.forward(params, x)
        h = activation(h, "relu")
        s, c2 = self.l2.forward(params, h)
        s = activation(s, "sigmoid")
        return s, (c1, h, c2, s)

    def backward(self, params, grads, cache, ds):
        if cache is None:
            raise UsageError("InteractionHead.backward called without a forward cache")
        c1, h, c2, s = cache
        d = activation_backward("sigmoid", s, ds)
        d = self.l2.backward(params, grads, c2, d)
        d = activation_backward("relu", h, d)
        return self.l1.backward(params, grads, c1, d)


class RelationshipHead:
    """sigmoid(W x + b), linear over the pooled bundle embedding."""

    def __init__(self, name, n_in, n_classes):
        self.l = Dense(name + ".l", n_in, n_classes)
        self.n_in = n_in

    def init(self, params, rng):
        self.l.init(params, rng)

    def forward(self, params, x):
        z, c = self.l.forward(params, x)
        s = activation(z, "sigmoid")
        return s, (c, s)

    def backward(self, params, grads, cache, ds):
        if cache is None:
            raise UsageError("RelationshipHead.backward called without a forward cache")
        c, s = cache
        return self.l.backward(params, grads, c, activation_backward("sigmoid", s, ds))


def score_interactions(params, head, phi):
    s, _ = head.forward(params, np.atleast_2d(phi))
    return s[0] if np.ndim(phi) == 1 else s


def score_relationships(params, head, phi_bundle):
    s, _ = head.forward(params, np.atleast_2d(phi_bundle))
    return s[0] if np.ndim(phi_bundle) == 1 else s


def score_interactions_joint(params, head, phi_int, phi_rel):
    """Interaction head on the concatenation (interaction emb | relationship emb)."""
    x = np.concatenate([np.atleast_2d(phi_int), np.atleast_2d(phi_rel)], axis=1)
    s, _ = head.forward(params, x)
    return s[0] if np.ndim(phi_int) == 1 else s


def score_pair_matrix(params, head, pair_embeddings):
    """Rows are candidate pairs, columns interactions."""
    s, _ = head.forward(params, np.atleast_2d(pair_embeddings))
    return s


def score_tensor(pair_matrix, rel_by_pair):
    """T[p, a, r] = s_IC(a, p) + s_RC(r, p)."""
    pair_matrix = np.asarray(pair_matrix)
    rel_by_pair = np.asarray(rel_by_pair)
    if pair_matrix.shape[0] != rel_by_pair.shape[0]:
        raise ValueError("pair matrix and relationship scores disagree on the pair count")
    return pair_matrix[:, :, None] + rel_by_pair[:, None, :]
