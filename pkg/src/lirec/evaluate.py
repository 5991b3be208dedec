"""Metrics, evaluation protocols and random baselines.

Argmax ties always go to the lowest index.  Every metric is computed over
the samples that carry the labels it needs, and the count is reported next
to it.
"""

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import build_bundles

SWEEP = tuple(range(1, 19))


# ---------------------------------------------------------------- pure metrics


def ranks(scores, labels):
    """0-based rank of each label under lowest-index tie breaking."""
    S = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        return np.zeros(0, dtype=np.int64)
    s = S[np.arange(len(labels)), labels][:, None]
    cols = np.arange(S.shape[1])[None, :]
    ahead = (S > s) | ((S == s) & (cols < labels[:, None]))
    return ahead.sum(axis=1)


def topk_accuracy(scores, labels, k=1):
    r = ranks(scores, labels)
    return float(np.mean(r < k)) if len(r) else float("nan")


def soft_accuracy(scores, labels, overlaps):
    """Top-1 hit when the prediction is a* or any label overlapping the clip."""
    if len(labels) == 0:
        return float("nan")
    pred = np.asarray(scores).argmax(axis=1)
    hits = [p == a or p in o for p, a, o in zip(pred, labels, overlaps)]
    return float(np.mean(hits))


def matrix_hits(M, a_star, p_star):
    """(character | a*, interaction | p*, joint) hits for one pairs x A matrix."""
    M = np.asarray(M)
    p, a = np.unravel_index(int(np.argmax(M)), M.shape)
    return (int(np.argmax(M[:, a_star])) == p_star,
            int(np.argmax(M[p_star])) == a_star,
            (p, a) == (p_star, a_star))


def tensor_hits(T, a_star, p_star, r_star):
    """(character, interaction, relationship, joint) hits for a pairs x A x R tensor."""
    T = np.asarray(T)
    p, a, r = np.unravel_index(int(np.argmax(T)), T.shape)
    return (int(np.argmax(T[:, a_star, r_star])) == p_star,
            int(np.argmax(T[p_star, :, r_star])) == a_star,
            int(np.argmax(T[p_star, a_star, :])) == r_star,
            (p, a, r) == (p_star, a_star, r_star))


def _mean(x):
    return float(np.mean(x)) if len(x) else float("nan")


def confusion_counts(labels, preds, n):
    C = np.zeros((n, n), dtype=np.int64)
    np.add.at(C, (np.asarray(labels, dtype=np.int64), np.asarray(preds, dtype=np.int64)), 1)
    return C


# ---------------------------------------------------------------- baselines


def random_topk_baseline(n_classes, n_samples=10_000, k=1, rng=None):
    """Monte-Carlo top-k accuracy of a uniform random scorer."""
    rng = rng if rng is not None else np.random.default_rng(0)
    labels = rng.integers(0, n_classes, n_samples)
    return topk_accuracy(rng.random((n_samples, n_classes)), labels, k)


def analytic_pair_baseline(cand_counts, n_interactions):
    """Expected (character, joint) accuracy of a uniform random pair matrix."""
    P = np.asarray(cand_counts, dtype=np.float64)
    return float(np.mean(1.0 / P)), float(np.mean(1.0 / (P * n_interactions)))


def analytic_tensor_baseline(cand_counts, n_interactions, n_relationships):
    P = np.asarray(cand_counts, dtype=np.float64)
    return float(np.mean(1.0 / (P * n_interactions * n_relationships)))


def mc_pair_baseline(cand_counts, n_interactions, trials=1, rng=None):
    """Monte-Carlo (character, joint) accuracy and the per-sample hit arrays.

    Each sample draws a uniform random matrix and a uniform ground truth.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    char, joint = [], []
    for _ in range(trials):
        for P in cand_counts:
            M = rng.random((P, n_interactions))
            a, p = rng.integers(n_interactions), rng.integers(P)
            c, _, j = matrix_hits(M, a, p)
            char.append(c)
            joint.append(j)
    return np.array(char, dtype=float), np.array(joint, dtype=float)


def mc_tensor_joint(cand_counts, n_interactions, n_relationships, trials=1, rng=None):
    rng = rng if rng is not None else np.random.default_rng(0)
    hits = []
    for _ in range(trials):
        for P in cand_counts:
            T = rng.random((P, n_interactions, n_relationships))
            a, p, r = (rng.integers(n_interactions), rng.integers(P),
                       rng.integers(n_relationships))
            hits.append(tensor_hits(T, a, p, r)[3])
    return np.array(hits, dtype=float)


# ---------------------------------------------------------------- reports


@dataclass
class MetricReport:
    top1: float | None = None
    top5: float | None = None
    soft: float | None = None
    relationship: float | None = None
    relationship_sweep: dict | None = None
    char_given_int: float | None = None
    int_given_pair: float | None = None
    joint_matrix: float | None = None
    char_given_int_rel: float | None = None
    int_given_pair_rel: float | None = None
    rel_given_pair_int: float | None = None
    joint_tensor: float | None = None
    random_char: float | None = None
    random_joint: float | None = None
    counts: dict = field(default_factory=dict)
    confusion: np.ndarray | None = None

    def check(self):
        if self.top1 is not None and np.isfinite(self.top1):
            assert self.top5 >= self.top1 and self.soft >= self.top1
        for k, v in asdict(self).items():
            if isinstance(v, float) and np.isfinite(v):
                assert 0.0 <= v <= 1.0, k

    def to_dict(self):
        d = asdict(self)
        d.pop("confusion")
        if d["relationship_sweep"] is not None:
            d["relationship_sweep"] = {str(k): v for k, v in d["relationship_sweep"].items()}
        return {k: v for k, v in d.items() if v is not None}

    def write(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)

    def write_sweep_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["clips_per_bundle", "relationship_top1"])
            for k, v in sorted((self.relationship_sweep or {}).items()):
                w.writerow([k, repr(v)])

    def write_confusion_csv(self, path):
        if self.confusion is None:
            return
        np.savetxt(path, self.confusion, fmt="%d", delimiter=",")


def eval_interactions(model, params, dataset, split="test", cap=18):
    idx = dataset.clip_indices(split)
    S = model.interaction_scores(params, dataset, idx, cap)
    labels = [dataset.clips[i].interaction for i in idx]
    out = {
        "top1": topk_accuracy(S, labels, 1),
        "top5": topk_accuracy(S, labels, 5),
        "soft": soft_accuracy(S, labels, [dataset.overlaps[i] for i in idx]),
        "n": len(idx),
    }
    if len(idx):
        out["confusion"] = confusion_counts(labels, S.argmax(axis=1), dataset.n_interactions)
    return out


def eval_relationships(model, params, dataset, split="test", sizes=SWEEP):
    """Top-1 relationship accuracy for each clips-per-bundle size."""
    curve, n = {}, 0
    for k in sizes:
        bundles = [b for b in build_bundles(dataset, k, "eval-uniform", split=split)
                   if b.relationship is not None]
        S = model.relationship_scores(params, dataset, bundles)
        curve[k] = topk_accuracy(S, [b.relationship for b in bundles], 1)
        n = len(bundles)
    return curve, n


def _pair_eval_clips(dataset, split):
    out = []
    for i in dataset.clip_indices(split):
        gt = dataset.clips[i].gt_pair()
        if gt is not None and gt in dataset.candidates[i]:
            out.append(i)
    return out


def eval_pair_matrix(model, params, dataset, split="test"):
    idx = _pair_eval_clips(dataset, split)
    mats = model.pair_matrices(params, dataset, idx)
    hits = [matrix_hits(M, dataset.clips[i].interaction,
                        dataset.candidates[i].index(dataset.clips[i].gt_pair()))
            for i, M in zip(idx, mats)]
    h = np.array(hits, dtype=float).reshape(-1, 3)
    rc, rj = analytic_pair_baseline([len(dataset.candidates[i]) for i in idx] or [1],
                                    dataset.n_interactions)
    return {"char_given_int": _mean(h[:, 0]), "int_given_pair": _mean(h[:, 1]),
            "joint_matrix": _mean(h[:, 2]), "random_char": rc, "random_joint": rj,
            "n": len(idx)}


def eval_tensor(model, params, dataset, split="test", cap=18):
    idx = [i for i in _pair_eval_clips(dataset, split)
           if dataset.clips[i].relationship is not None]
    tensors = model.tensors(params, dataset, idx, cap)
    hits = []
    for i, T in zip(idx, tensors):
        c = dataset.clips[i]
        hits.append(tensor_hits(T, c.interaction, dataset.candidates[i].index(c.gt_pair()),
                                c.relationship))
    h = np.array(hits, dtype=float).reshape(-1, 4)
    return {"char_given_int_rel": _mean(h[:, 0]), "int_given_pair_rel": _mean(h[:, 1]),
            "rel_given_pair_int": _mean(h[:, 2]), "joint_tensor": _mean(h[:, 3]),
            "n": len(idx)}


def evaluate(model, params, dataset, split="test", cap=18, sizes=SWEEP):
    """Every metric the model's regime supports."""
    rep = MetricReport()
    regime = model.cfg.regime
    if model.int_head is not None:
        r = eval_interactions(model, params, dataset, split, cap)
        rep.top1, rep.top5, rep.soft = r["top1"], r["top5"], r["soft"]
        rep.confusion = r.get("confusion")
        rep.counts["interaction"] = r["n"]
    if model.rel_head is not None:
        curve, n = eval_relationships(model, params, dataset, split, sizes)
        rep.relationship_sweep = curve
        rep.relationship = curve[max(curve)] if curve else None
        rep.counts["relationship"] = n
    if regime in ("int_char", "int_rel_char"):
        r = eval_pair_matrix(model, params, dataset, split)
        for k in ("char_given_int", "int_given_pair", "joint_matrix", "random_char",
                  "random_joint"):
            setattr(rep, k, r[k])
        rep.counts["pair"] = r["n"]
    if regime == "int_rel_char":
        r = eval_tensor(model, params, dataset, split, cap)
        for k in ("char_given_int_rel", "int_given_pair_rel", "rel_given_pair_int",
                  "joint_tensor"):
            setattr(rep, k, r[k])
        rep.counts["tensor"] = r["n"]
    return rep
