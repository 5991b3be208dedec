"""Clip representations: temporal pooling, per-modality MLPs and the fused
``visual | dialog | actor track | recipient track`` embedding.

Missing modalities (no dialog, untracked or unseen characters) produce an
exactly-zero block, so the embedding width is the same for every clip.
"""

from dataclasses import dataclass

import numpy as np

from .nn import Dense, UsageError, activation, activation_backward, dropout_backward, dropout_forward

POOL_KINDS = ("max", "avg", "sum")
MODALITIES = ("visual", "dialog", "tracks")


def pool_temporal(block, kind="max"):
    """Column-wise reduction over the rows of a (segments x dims) block."""
    block = np.asarray(block, dtype=np.float64)
    if block.ndim != 2 or block.shape[0] == 0:
        raise ValueError("empty feature block; route it through the missing-modality path")
    if kind == "max":
        return block.max(axis=0)
    if kind == "avg":
        return block.mean(axis=0)
    if kind == "sum":
        return block.sum(axis=0)
    raise ValueError(f"unknown pool kind {kind!r}")


class ModalityEncoder:
    """Linear -> ReLU -> dropout -> Linear -> tanh."""

    def __init__(self, name, n_in, hidden, n_out, p_drop=0.3):
        self.l1 = Dense(name + ".l1", n_in, hidden)
        self.l2 = Dense(name + ".l2", hidden, n_out)
        self.p_keep = 1.0 - p_drop
        self.n_out = n_out

    def init(self, params, rng):
        self.l1.init(params, rng)
        self.l2.init(params, rng)

    def forward(self, params, x, train=False, rng=None):
        h, c1 = self.l1.forward(params, x)
        h = activation(h, "relu")
        hd, cd = dropout_forward(h, self.p_keep, rng, train)
        y, c2 = self.l2.forward(params, hd)
        y = activation(y, "tanh")
        return y, (c1, h, cd, c2, y)

    def backward(self, params, grads, cache, dy):
        if cache is None:
            raise UsageError("ModalityEncoder.backward called without a forward cache")
        c1, h, cd, c2, y = cache
        d = activation_backward("tanh", y, dy)
        d = self.l2.backward(params, grads, c2, d)
        d = dropout_backward(cd, d)
        d = activation_backward("relu", h, d)
        return self.l1.backward(params, grads, c1, d)


@dataclass
class EncoderInputs:
    visual: np.ndarray      # (U, Dv) pooled
    dialog: np.ndarray      # (U, Dd) pooled, zero rows where missing
    has_dialog: np.ndarray  # (U,) bool
    tracks: np.ndarray      # (T, Dt) pooled, one row per (clip, character)
    clip: np.ndarray        # (Q,) row -> clip position
    actor: np.ndarray       # (Q,) row -> track position, -1 when absent
    recipient: np.ndarray   # (Q,)


class ClipEncoder:
    """Produces Phi(v, p) rows; width ``3 * emb_dim``."""

    def __init__(self, name, dims, hidden=64, emb_dim=64, p_drop=0.3,
                 modalities=MODALITIES):
        if emb_dim % 2:
            raise ValueError("emb_dim must be even (track block holds two characters)")
        unknown = set(modalities) - set(MODALITIES)
        if unknown:
            raise ValueError(f"unknown modalities {sorted(unknown)}")
        self.name = name
        self.emb_dim = emb_dim
        self.modalities = tuple(modalities)
        self.visual = ModalityEncoder(name + ".visual", dims["visual"], hidden, emb_dim, p_drop)
        self.dialog = ModalityEncoder(name + ".dialog", dims["dialog"], hidden, emb_dim, p_drop)
        self.track = ModalityEncoder(name + ".track", dims["track"], hidden, emb_dim // 2, p_drop)

    @property
    def dim(self):
        return 3 * self.emb_dim

    def init(self, params, rng):
        for enc in (self.visual, self.dialog, self.track):
            enc.init(params, rng)

    def forward(self, params, inp, train=False, rng=None):
        U, Q, E = len(inp.visual), len(inp.clip), self.emb_dim
        cache = {}
        hv = np.zeros((U, E))
        hd = np.zeros((U, E))
        ht = np.zeros((len(inp.tracks) + 1, E // 2))
        if "visual" in self.modalities and U:
            hv, cache["visual"] = self.visual.forward(params, inp.visual, train, rng)
        if "dialog" in self.modalities and U:
            raw, cache["dialog"] = self.dialog.forward(params, inp.dialog, train, rng)
            hd = raw * inp.has_dialog[:, None]
        if "tracks" in self.modalities and len(inp.tracks):
            out, cache["tracks"] = self.track.forward(params, inp.tracks, train, rng)
            ht = np.vstack([out, np.zeros((1, E // 2))])
        # row -1 indexes the trailing zero row
        phi = np.concatenate(
            [hv[inp.clip], hd[inp.clip], ht[inp.actor], ht[inp.recipient]], axis=1
        ) if Q else np.zeros((0, 3 * E))
        return phi, (inp, cache)

    def backward(self, params, grads, cache, dphi):
        if cache is None:
            raise UsageError("ClipEncoder.backward called without a forward cache")
        inp, c = cache
        E = self.emb_dim
        U, T = len(inp.visual), len(inp.tracks)
        if "visual" in c:
            dv = np.zeros((U, E))
            np.add.at(dv, inp.clip, dphi[:, :E])
            self.visual.backward(params, grads, c["visual"], dv)
        if "dialog" in c:
            dd = np.zeros((U, E))
            np.add.at(dd, inp.clip, dphi[:, E:2 * E])
            self.dialog.backward(params, grads, c["dialog"], dd * inp.has_dialog[:, None])
        if "tracks" in c:
            dt = np.zeros((T + 1, E // 2))
            np.add.at(dt, inp.actor, dphi[:, 2 * E:2 * E + E // 2])
            np.add.at(dt, inp.recipient, dphi[:, 2 * E + E // 2:])
            self.track.backward(params, grads, c["tracks"], dt[:T])


# ---------------------------------------------------------------- batching


class PooledFeatures:
    """Temporally pooled raw features for every clip of a dataset."""

    def __init__(self, dataset, kind="max"):
        self.kind = kind
        dims = dataset.dims
        n = len(dataset.clips)
        self.visual = np.zeros((n, dims["visual"]))
        self.dialog = np.zeros((n, dims["dialog"]))
        self.has_dialog = np.zeros(n, dtype=bool)
        self.track_dim = dims["track"]
        self.tracks = []
        for i, c in enumerate(dataset.clips):
            self.visual[i] = pool_temporal(c.visual, kind)
            if c.dialog is not None:
                self.dialog[i] = pool_temporal(c.dialog, kind)
                self.has_dialog[i] = True
            self.tracks.append({ch: pool_temporal(t, kind) for ch, t in c.tracks.items()})


def pooled(dataset, kind="max"):
    cache = dataset.__dict__.setdefault("_pooled", {})
    if kind not in cache:
        cache[kind] = PooledFeatures(dataset, kind)
    return cache[kind]


def assemble(feats, requests):
    """Gather encoder inputs for ``(clip index, actor, recipient)`` requests.

    Characters that are None or have no track in that clip map to the zero
    row, which is how unseen characters get a zero track block.
    """
    clip_pos, track_pos, track_rows = {}, {}, []
    clip, actor, recip = [], [], []
    for ci, j, k in requests:
        clip.append(clip_pos.setdefault(ci, len(clip_pos)))
        tr = feats.tracks[ci]
        for ch, out in ((j, actor), (k, recip)):
            if ch is None or ch not in tr:
                out.append(-1)
                continue
            key = (ci, ch)
            if key not in track_pos:
                track_pos[key] = len(track_rows)
                track_rows.append(tr[ch])
            out.append(track_pos[key])
    order = list(clip_pos)
    return EncoderInputs(
        visual=feats.visual[order],
        dialog=feats.dialog[order],
        has_dialog=feats.has_dialog[order],
        tracks=np.array(track_rows) if track_rows else np.zeros((0, feats.track_dim)),
        clip=np.array(clip, dtype=np.int64),
        actor=np.array(actor, dtype=np.int64),
        recipient=np.array(recip, dtype=np.int64),
    )


def pool_rows(phi, groups, kind="max"):
    """Reduce groups of rows of ``phi``; ``groups`` is a list of index lists."""
    G = len(groups)
    L = max(len(g) for g in groups)
    idx = np.full((G, L), len(phi), dtype=np.int64)
    for i, g in enumerate(groups):
        if len(g) == 0:
            raise UsageError("cannot pool an empty bundle")
        idx[i, :len(g)] = g
    counts = np.array([len(g) for g in groups], dtype=np.float64)
    if kind == "max":
        padded = np.vstack([phi, np.full((1, phi.shape[1]), -np.inf)])
        stack = padded[idx]                 # (G, L, D)
        arg = stack.argmax(axis=1)          # first maximal row on ties
        src = np.take_along_axis(idx, arg, axis=1)
        out = np.take_along_axis(stack, arg[:, None, :], axis=1)[:, 0, :]
        return out, ("max", src, phi.shape)
    padded = np.vstack([phi, np.zeros((1, phi.shape[1]))])
    out = padded[idx].sum(axis=1)
    if kind == "avg":
        out = out / counts[:, None]
    elif kind != "sum":
        raise ValueError(f"unknown pool kind {kind!r}")
    return out, (kind, idx, counts, phi.shape)


def pool_rows_backward(cache, dout):
    if cache is None:
        raise UsageError("pool_rows_backward called without a forward cache")
    kind = cache[0]
    if kind == "max":
        _, src, shape = cache
        d = np.zeros((shape[0] + 1, shape[1]))
        cols = np.broadcast_to(np.arange(shape[1]), src.shape)
        np.add.at(d, (src, cols), dout)
        return d[:-1]
    _, idx, counts, shape = cache
    if kind == "avg":
        dout = dout / counts[:, None]
    d = np.zeros((shape[0] + 1, shape[1]))
    np.add.at(d, idx, np.repeat(dout[:, None, :], idx.shape[1], axis=1))
    return d[:-1]


def encode_clip(params, encoder, dataset, clip_idx, pair, train=False, rng=None, kind="max"):
    """Phi(v, p) for one clip and one of its candidate pairs."""
    if tuple(pair) not in dataset.candidates[clip_idx]:
        raise UsageError(f"pair {pair} is not a candidate of clip {dataset.clips[clip_idx].id}")
    inp = assemble(pooled(dataset, kind), [(clip_idx, pair[0], pair[1])])
    phi, _ = encoder.forward(params, inp, train, rng)
    return phi[0]


def encode_bundle(params, encoder, dataset, bundle, g="max", pair=None, train=False,
                  rng=None, kind="max"):
    """g-pooled embedding of the bundle's clips under one pair hypothesis."""
    if not bundle.clips:
        raise UsageError("cannot encode an empty bundle")
    j, k = pair if pair is not None else bundle.pair
    inp = assemble(pooled(dataset, kind), [(i, j, k) for i in bundle.clips])
    phi, _ = encoder.forward(params, inp, train, rng)
    out, _ = pool_rows(phi, [list(range(len(bundle.clips)))], g)
    return out[0]
