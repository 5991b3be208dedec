"""Model assembly for the five training regimes.

=============  ==========================================================
``int``        interaction head on Phi(v, p*)                (clips)
``rel``        relationship head on g(Phi(V, p*))            (bundles)
``int_rel``    both, with a configurable wiring between them (bundles)
``int_char``   pair x interaction matrix, full or weak       (clips)
``int_rel_char`` pair x interaction x relationship, full/weak (bundles)
=============  ==========================================================

``Model.loss_and_grad`` runs forward, the regime loss and the backward pass
for a batch; the ``*_scores`` methods are the eval-mode scoring API used by
the evaluator.
"""

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import losses as L
from .data import build_bundles
from .encoder import MODALITIES, ClipEncoder, assemble, pool_rows, pool_rows_backward, pooled
from .heads import InteractionHead, RelationshipHead, score_tensor
from .nn import zeros_like_params
from .rng import stream

REGIMES = ("int", "rel", "int_rel", "int_char", "int_rel_char")
WIRINGS = ("rel_to_int", "int_to_rel", "both")
CLIP_REGIMES = ("int", "int_char")


@dataclass
class ModelConfig:
    regime: str = "int"
    n_interactions: int = 101
    n_relationships: int = 15
    dims: dict = field(default_factory=lambda: {"visual": 32, "dialog": 32, "track": 32})
    enc_hidden: int = 64
    emb_dim: int = 64
    head_hidden: int = 128
    dropout: float = 0.3
    modalities: tuple = MODALITIES
    temporal_pool: str = "max"
    bundle_pool: str = "max"
    wiring: str = "rel_to_int"
    share_encoders: bool = False

    def __post_init__(self):
        self.modalities = tuple(self.modalities)
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}; expected one of {REGIMES}")
        if self.wiring not in WIRINGS:
            raise ValueError(f"unknown wiring {self.wiring!r}; expected one of {WIRINGS}")

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["modalities"] = list(self.modalities)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _members(pair):
    return (None, None) if pair is None else (pair[0], pair[1])


def _ranges(sizes):
    out, start = [], 0
    for n in sizes:
        out.append(list(range(start, start + n)))
        start += n
    return out


def _bundle_candidates(dataset, bundle):
    seen = set()
    for i in bundle.clips:
        seen.update(dataset.candidates[i])
    return sorted(seen, key=lambda p: (p[1] is None, p[0], -1 if p[1] is None else p[1]))


class Model:
    def __init__(self, cfg):
        self.cfg = cfg
        r = cfg.regime
        D = 3 * cfg.emb_dim
        enc = lambda name: ClipEncoder(name, cfg.dims, cfg.enc_hidden, cfg.emb_dim,  # noqa: E731
                                       cfg.dropout, cfg.modalities)
        self.enc = enc("enc")
        self.enc_rel = None
        if r == "int_rel":
            self.enc_rel = self.enc if cfg.share_encoders else enc("enc_rel")
        self.int_head = self.rel_head = None
        if r != "rel":
            joint_in = r == "int_rel" and cfg.wiring in ("rel_to_int", "both")
            self.int_head = InteractionHead("int_head", 2 * D if joint_in else D,
                                            cfg.head_hidden, cfg.n_interactions)
        if r in ("rel", "int_rel", "int_rel_char"):
            joint_in = r == "int_rel" and cfg.wiring in ("int_to_rel", "both")
            self.rel_head = RelationshipHead("rel_head", 2 * D if joint_in else D,
                                             cfg.n_relationships)

    @property
    def dim(self):
        return self.enc.dim

    def init_params(self, seed):
        rng = stream(seed, "init")
        params = {}
        self.enc.init(params, rng)
        if self.enc_rel is not None and self.enc_rel is not self.enc:
            self.enc_rel.init(params, rng)
        for head in (self.int_head, self.rel_head):
            if head is not None:
                head.init(params, rng)
        return params

    # ------------------------------------------------------------ training

    def loss_and_grad(self, params, dataset, samples, loss_cfg, epoch=0,
                      rng_dropout=None, rng_sample=None, train=True, need_grad=True):
        """Mean regime loss over ``samples`` and its gradient.

        ``samples`` are clip indices for clip regimes and PairBundles otherwise.
        Returns ``(loss, parts, grads)``; ``grads`` is None when not requested.
        """
        grads = zeros_like_params(params) if need_grad else None
        fn = getattr(self, "_loss_" + self.cfg.regime)
        loss, parts = fn(params, dataset, samples, loss_cfg, epoch, rng_dropout,
                         rng_sample, train, grads)
        return loss, parts, grads

    def _encode(self, params, enc, dataset, requests, train, rng):
        inp = assemble(pooled(dataset, self.cfg.temporal_pool), requests)
        return enc.forward(params, inp, train, rng)

    def _loss_int(self, params, ds, clips, lc, epoch, rng_d, rng_s, train, grads):
        reqs = [(i, *_members(ds.clips[i].pair)) for i in clips]
        phi, ec = self._encode(params, self.enc, ds, reqs, train, rng_d)
        S, hc = self.int_head.forward(params, phi)
        dS = np.zeros_like(S)
        total = 0.0
        for b, i in enumerate(clips):
            loss, g = L.loss_interaction(S[b], ds.clips[i].interaction, ds.overlaps[i],
                                         lc.margin_int)
            total += loss
            dS[b] = g
        n = len(clips)
        if grads is not None:
            dphi = self.int_head.backward(params, grads, hc, dS / n)
            self.enc.backward(params, grads, ec, dphi)
        return total / n, {"int": total / n}

    def _loss_rel(self, params, ds, bundles, lc, epoch, rng_d, rng_s, train, grads):
        bundles = [b for b in bundles if b.relationship is not None]
        if not bundles:
            return 0.0, {"rel": 0.0}
        reqs = [(i, *b.pair) for b in bundles for i in b.clips]
        phi, ec = self._encode(params, self.enc, ds, reqs, train, rng_d)
        pv, pc = pool_rows(phi, _ranges([len(b.clips) for b in bundles]), self.cfg.bundle_pool)
        S, hc = self.rel_head.forward(params, pv)
        dS = np.zeros_like(S)
        total = 0.0
        for b, bundle in enumerate(bundles):
            loss, g = L.loss_relationship(S[b], bundle.relationship, lc.margin_rel)
            total += loss
            dS[b] = g
        n = len(bundles)
        if grads is not None:
            dpv = self.rel_head.backward(params, grads, hc, dS / n)
            self.enc.backward(params, grads, ec, pool_rows_backward(pc, dpv))
        return total / n, {"rel": total / n}

    def _forward_int_rel(self, params, ds, bundles, train, rng_d):
        cfg = self.cfg
        reqs = [(i, *b.pair) for b in bundles for i in b.clips]
        groups = _ranges([len(b.clips) for b in bundles])
        row_bundle = np.repeat(np.arange(len(bundles)), [len(b.clips) for b in bundles])
        phi_i, ec_i = self._encode(params, self.enc, ds, reqs, train, rng_d)
        if self.enc_rel is self.enc:
            phi_r, ec_r = phi_i, None
        else:
            phi_r, ec_r = self._encode(params, self.enc_rel, ds, reqs, train, rng_d)
        pv_r, pc_r = pool_rows(phi_r, groups, cfg.bundle_pool)
        c = {"ec_i": ec_i, "ec_r": ec_r, "pc_r": pc_r, "row_bundle": row_bundle,
             "n_rows": len(reqs)}
        x_int = phi_i
        if cfg.wiring in ("rel_to_int", "both"):
            x_int = np.concatenate([phi_i, pv_r[row_bundle]], axis=1)
        x_rel = pv_r
        if cfg.wiring in ("int_to_rel", "both"):
            pv_i, c["pc_i"] = pool_rows(phi_i, groups, cfg.bundle_pool)
            x_rel = np.concatenate([pv_r, pv_i], axis=1)
        S_int, c["hc_i"] = self.int_head.forward(params, x_int)
        S_rel, c["hc_r"] = self.rel_head.forward(params, x_rel)
        return S_int, S_rel, c

    def _backward_int_rel(self, params, grads, c, dS_int, dS_rel):
        D = self.dim
        dx_int = self.int_head.backward(params, grads, c["hc_i"], dS_int)
        dx_rel = self.rel_head.backward(params, grads, c["hc_r"], dS_rel)
        dphi_i = dx_int[:, :D].copy()
        dpv_r = dx_rel[:, :D].copy()
        if dx_int.shape[1] > D:
            np.add.at(dpv_r, c["row_bundle"], dx_int[:, D:])
        if dx_rel.shape[1] > D:
            dphi_i += pool_rows_backward(c["pc_i"], dx_rel[:, D:])
        dphi_r = pool_rows_backward(c["pc_r"], dpv_r)
        if c["ec_r"] is None:
            self.enc.backward(params, grads, c["ec_i"], dphi_i + dphi_r)
        else:
            self.enc.backward(params, grads, c["ec_i"], dphi_i)
            self.enc_rel.backward(params, grads, c["ec_r"], dphi_r)

    def _loss_int_rel(self, params, ds, bundles, lc, epoch, rng_d, rng_s, train, grads):
        S_int, S_rel, c = self._forward_int_rel(params, ds, bundles, train, rng_d)
        dS_int = np.zeros_like(S_int)
        dS_rel = np.zeros_like(S_rel)
        total = tot_r = tot_i = 0.0
        row = 0
        for b, bundle in enumerate(bundles):
            lr = 0.0
            if bundle.relationship is not None:
                lr, g = L.loss_relationship(S_rel[b], bundle.relationship, lc.margin_rel)
                dS_rel[b] = g
            li = []
            w = lc.lam / len(bundle.clips)
            for i in bundle.clips:
                loss, g = L.loss_interaction(S_int[row], ds.clips[i].interaction,
                                             ds.overlaps[i], lc.margin_int)
                li.append(loss)
                dS_int[row] = w * g
                row += 1
            total += L.loss_joint(lr, li, lc.lam)
            tot_r += lr
            tot_i += sum(li) / len(li)
        n = len(bundles)
        if grads is not None:
            self._backward_int_rel(params, grads, c, dS_int / n, dS_rel / n)
        return total / n, {"rel": tot_r / n, "int": tot_i / n}

    def _loss_int_char(self, params, ds, clips, lc, epoch, rng_d, rng_s, train, grads):
        red = lc.reduction(epoch)
        keep = []
        for i in clips:
            if not ds.candidates[i]:
                continue
            if not lc.weak and ds.clips[i].gt_pair() is None:
                continue
            keep.append(i)
        if not keep:
            return 0.0, {"int_char": 0.0}
        reqs = [(i, p[0], p[1]) for i in keep for p in ds.candidates[i]]
        phi, ec = self._encode(params, self.enc, ds, reqs, train, rng_d)
        S, hc = self.int_head.forward(params, phi)
        dS = np.zeros_like(S)
        total = 0.0
        row = 0
        for i in keep:
            cands = ds.candidates[i]
            clip = ds.clips[i]
            Sv = S[row:row + len(cands)]
            if lc.weak:
                p = L.sample_pair_weak(Sv, clip.interaction, rng_s, lc.multinomial)
                loss, g = L.loss_pair_weak(Sv, clip.interaction, p, ds.overlaps[i],
                                           lc.margin_int_char, red)
            else:
                p = cands.index(clip.gt_pair())
                loss, g = L.loss_pair_full(Sv, clip.interaction, p, ds.overlaps[i],
                                           lc.margin_int_char, red)
            total += loss
            dS[row:row + len(cands)] = g
            row += len(cands)
        n = len(keep)
        if grads is not None:
            dphi = self.int_head.backward(params, grads, hc, dS / n)
            self.enc.backward(params, grads, ec, dphi)
        return total / n, {"int_char": total / n}

    def _forward_irc(self, params, ds, bundles, train, rng_d):
        """s_IC for every (clip, bundle candidate) and s_RC for every (bundle, candidate)."""
        cands = [_bundle_candidates(ds, b) for b in bundles]
        reqs, groups = [], []
        for b, cs in zip(bundles, cands):
            base = len(reqs)
            n = len(b.clips)
            for u, i in enumerate(b.clips):
                reqs.extend((i, p[0], p[1]) for p in cs)
            # rows are clip-major, so pair p of clip u sits at base + u*P + p
            groups.extend([base + u * len(cs) + p for u in range(n)] for p in range(len(cs)))
        phi, ec = self._encode(params, self.enc, ds, reqs, train, rng_d)
        S_ic, hc_i = self.int_head.forward(params, phi)
        pv, pc = pool_rows(phi, groups, self.cfg.bundle_pool)
        S_rc, hc_r = self.rel_head.forward(params, pv)
        return cands, S_ic, S_rc, (ec, hc_i, pc, hc_r)

    def _backward_irc(self, params, grads, c, dS_ic, dS_rc):
        ec, hc_i, pc, hc_r = c
        dphi = self.int_head.backward(params, grads, hc_i, dS_ic)
        dphi += pool_rows_backward(pc, self.rel_head.backward(params, grads, hc_r, dS_rc))
        self.enc.backward(params, grads, ec, dphi)

    def _loss_int_rel_char(self, params, ds, bundles, lc, epoch, rng_d, rng_s, train, grads):
        red = lc.reduction(epoch)
        bundles = [b for b in bundles if any(ds.candidates[i] for i in b.clips)]
        if not bundles:
            return 0.0, {"rel_char": 0.0, "int_char": 0.0}
        cands, S_ic, S_rc, c = self._forward_irc(params, ds, bundles, train, rng_d)
        dS_ic = np.zeros_like(S_ic)
        dS_rc = np.zeros_like(S_rc)
        total = tot_r = tot_i = 0.0
        row = prow = 0
        for b, cs in zip(bundles, cands):
            P, n = len(cs), len(b.clips)
            Src = S_rc[prow:prow + P]
            r = b.relationship
            a_star = [ds.clips[i].interaction for i in b.clips]
            blocks = [S_ic[row + u * P: row + (u + 1) * P] for u in range(n)]
            rel_part = Src[:, r] if r is not None else np.zeros(P)
            li = []
            w = lc.lam / n
            for u, i in enumerate(b.clips):
                Sv = blocks[u]
                if lc.weak:
                    p = L.sample_pair(rel_part + Sv[:, a_star[u]], rng_s, lc.multinomial)
                    loss, g = L.loss_pair_weak(Sv, a_star[u], p, ds.overlaps[i],
                                               lc.margin_int_char, red)
                else:
                    gt = ds.clips[i].gt_pair()
                    if gt is None:
                        li.append(0.0)
                        continue
                    loss, g = L.loss_pair_full(Sv, a_star[u], cs.index(gt), ds.overlaps[i],
                                               lc.margin_int_char, red)
                li.append(loss)
                dS_ic[row + u * P: row + (u + 1) * P] = w * g
            lr = 0.0
            if r is not None:
                if lc.weak:
                    mean_ic = np.mean([blocks[u][:, a_star[u]] for u in range(n)], axis=0)
                    p = L.sample_pair(Src[:, r] + mean_ic, rng_s, lc.multinomial)
                    lr, g = L.loss_rel_pair(Src, r, p, lc.margin_rel_char, weak=True)
                    dS_rc[prow:prow + P] = g
                elif tuple(b.pair) in cs:
                    lr, g = L.loss_rel_pair(Src, r, cs.index(tuple(b.pair)),
                                            lc.margin_rel_char, weak=False)
                    dS_rc[prow:prow + P] = g
            total += L.loss_irc_weak(lr, li, lc.lam)
            tot_r += lr
            tot_i += sum(li) / n
            row += n * P
            prow += P
        nb = len(bundles)
        if grads is not None:
            self._backward_irc(params, grads, c, dS_ic / nb, dS_rc / nb)
        return total / nb, {"rel_char": tot_r / nb, "int_char": tot_i / nb}

    # ------------------------------------------------------------- scoring

    def eval_bundles(self, dataset, cap=18):
        """Eval-uniform bundle for every base bundle, aligned with dataset.bundles."""
        return build_bundles(dataset, cap, "eval-uniform")

    def interaction_scores(self, params, dataset, clips, cap=18):
        """Scores over A for each clip under its ground-truth pair."""
        if self.int_head is None:
            raise ValueError(f"regime {self.cfg.regime!r} has no interaction head")
        if not clips:
            return np.zeros((0, self.cfg.n_interactions))
        reqs = [(i, *_members(dataset.clips[i].pair)) for i in clips]
        phi, _ = self._encode(params, self.enc, dataset, reqs, False, None)
        if self.cfg.regime == "int_rel" and self.cfg.wiring in ("rel_to_int", "both"):
            ctx = self._rel_context(params, dataset, clips, cap)
            phi = np.concatenate([phi, ctx], axis=1)
        S, _ = self.int_head.forward(params, phi)
        return S

    def _rel_context(self, params, dataset, clips, cap):
        ev = self.eval_bundles(dataset, cap)
        need = sorted({dataset.bundle_of(i) for i in clips} - {None})
        pos = {b: n for n, b in enumerate(need)}
        ctx = np.zeros((len(clips), self.dim))
        if need:
            reqs = [(i, *ev[b].pair) for b in need for i in ev[b].clips]
            phi, _ = self._encode(params, self.enc_rel, dataset, reqs, False, None)
            pv, _ = pool_rows(phi, _ranges([len(ev[b].clips) for b in need]),
                              self.cfg.bundle_pool)
            for n, i in enumerate(clips):
                if dataset.bundle_of(i) is not None:
                    ctx[n] = pv[pos[dataset.bundle_of(i)]]
        return ctx

    def relationship_scores(self, params, dataset, bundles):
        """Scores over R for each bundle under its ground-truth pair."""
        if self.rel_head is None:
            raise ValueError(f"regime {self.cfg.regime!r} has no relationship head")
        if not bundles:
            return np.zeros((0, self.cfg.n_relationships))
        if self.cfg.regime == "int_rel":
            _, S_rel, _ = self._forward_int_rel(params, dataset, bundles, False, None)
            return S_rel
        reqs = [(i, *b.pair) for b in bundles for i in b.clips]
        phi, _ = self._encode(params, self.enc, dataset, reqs, False, None)
        pv, _ = pool_rows(phi, _ranges([len(b.clips) for b in bundles]), self.cfg.bundle_pool)
        S, _ = self.rel_head.forward(params, pv)
        return S

    def pair_matrices(self, params, dataset, clips):
        """One (candidates x A) matrix per clip."""
        if self.int_head is None or self.cfg.regime == "int_rel":
            raise ValueError(f"regime {self.cfg.regime!r} does not score pairs")
        reqs = [(i, p[0], p[1]) for i in clips for p in dataset.candidates[i]]
        if not reqs:
            return [np.zeros((0, self.cfg.n_interactions)) for _ in clips]
        phi, _ = self._encode(params, self.enc, dataset, reqs, False, None)
        S, _ = self.int_head.forward(params, phi)
        out, row = [], 0
        for i in clips:
            n = len(dataset.candidates[i])
            out.append(S[row:row + n])
            row += n
        return out

    def relationship_by_pair(self, params, dataset, bundle, pairs):
        """s_RC(V, r, p) as a (len(pairs) x R) matrix."""
        reqs = [(i, p[0], p[1]) for p in pairs for i in bundle.clips]
        phi, _ = self._encode(params, self.enc, dataset, reqs, False, None)
        pv, _ = pool_rows(phi, _ranges([len(bundle.clips)] * len(pairs)), self.cfg.bundle_pool)
        S, _ = self.rel_head.forward(params, pv)
        return S

    def tensors(self, params, dataset, clips, cap=18):
        """Score tensor (candidates x A x R) per clip, using the clip's eval bundle."""
        if self.cfg.regime != "int_rel_char":
            raise ValueError("score tensors need the int_rel_char regime")
        mats = self.pair_matrices(params, dataset, clips)
        ev = self.eval_bundles(dataset, cap)
        out = []
        for i, M in zip(clips, mats):
            cands = dataset.candidates[i]
            if dataset.bundle_of(i) is not None:
                Rm = self.relationship_by_pair(params, dataset, ev[dataset.bundle_of(i)], cands)
            else:
                Rm = np.zeros((len(cands), self.cfg.n_relationships))
            out.append(score_tensor(M, Rm))
        return out
