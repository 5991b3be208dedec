"""Seeded synthetic movie datasets with planted structure.

Features are class prototypes plus Gaussian noise:

* visual: per-interaction prototype, except dialog-only classes which all
  share one "people talking" prototype;
* dialog: per-interaction prototype; absent for visual-only classes and,
  at random, for a fraction of the others;
* tracks: character identity + role offset (actor / recipient), where the
  actor also carries an interaction component and both members carry a
  relationship component. Distractor characters carry identity only.

Interactions are drawn from ``P(a | r)`` (the correlation matrix, stored
``|A| x |R|`` with columns summing to one) given the pair's relationship.
"""

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .data import ClipRecord, Movie, MovieDataset
from .rng import stream
from .vocab import default_interactions, default_relationships

PROFILES = ("visual", "dialog", "both")


class ConfigError(ValueError):
    pass


@dataclass
class GenConfig:
    n_movies: int = 8
    n_characters: int = 6
    clips_per_movie: int = 250
    pairs_per_movie: int = 8
    n_interactions: int = 101
    n_relationships: int = 15
    dim_visual: int = 32
    dim_dialog: int = 32
    dim_track: int = 32
    noise: float = 1.5
    correlation_strength: float = 0.8
    correlation: list | None = None
    frac_visual_only: float = 0.3
    frac_dialog_only: float = 0.3
    dialog_missing_prob: float = 0.1
    overlap_rate: float = 0.1
    actor_missing_prob: float = 0.0
    recipient_missing_prob: float = 0.24
    max_distractors: int = 2
    min_segments: int = 2
    max_segments: int = 6
    min_sentences: int = 1
    max_sentences: int = 4
    relationship_change_prob: float = 0.1
    relationship_missing_prob: float = 0.0
    alias_frac: float = 0.0
    track_class_scale: float = 3.0
    reaction_scale: float = 3.0
    rel_feature_scale: float = 0.5
    class_prior: str = "uniform"
    power_law_exponent: float = 1.0
    test_movies: int = 2
    seed: int = 7

    def validate(self):
        probs = ("correlation_strength", "frac_visual_only", "frac_dialog_only",
                 "dialog_missing_prob", "overlap_rate", "actor_missing_prob",
                 "recipient_missing_prob", "relationship_change_prob",
                 "relationship_missing_prob", "alias_frac")
        for name in probs:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.frac_visual_only + self.frac_dialog_only > 1.0:
            raise ConfigError("frac_visual_only + frac_dialog_only exceeds 1")
        if self.n_characters < 2:
            raise ConfigError("need at least 2 characters per movie to form a pair")
        if self.n_movies < 1 or self.clips_per_movie < 1 or self.pairs_per_movie < 1:
            raise ConfigError("movie, clip and pair counts must be positive")
        if self.n_interactions < 1 or self.n_relationships < 1:
            raise ConfigError("vocabularies must be non-empty")
        if self.noise < 0:
            raise ConfigError("noise must be non-negative")
        if not 1 <= self.min_segments <= self.max_segments:
            raise ConfigError("need 1 <= min_segments <= max_segments")
        if not 1 <= self.min_sentences <= self.max_sentences:
            raise ConfigError("need 1 <= min_sentences <= max_sentences")
        if self.class_prior not in ("uniform", "power_law"):
            raise ConfigError(f"unknown class_prior {self.class_prior!r}")
        if not 0 <= self.test_movies <= self.n_movies:
            raise ConfigError("test_movies out of range")
        if self.correlation is not None:
            C = np.asarray(self.correlation, dtype=float)
            if C.shape != (self.n_interactions, self.n_relationships):
                raise ConfigError(f"correlation must be |A| x |R|, got {C.shape}")
            if (C < 0).any() or not np.allclose(C.sum(axis=0), 1.0, atol=1e-9):
                raise ConfigError("correlation columns must be probability vectors")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown generator keys: {sorted(unknown)}")
        return cls(**d)


def interaction_prior(cfg):
    A = cfg.n_interactions
    if cfg.class_prior == "uniform":
        return np.full(A, 1.0 / A)
    w = 1.0 / np.arange(1, A + 1) ** cfg.power_law_exponent
    return w / w.sum()


def correlation_matrix(cfg):
    """``P(a | r)`` as an |A| x |R| array.

    Strength 1 gives each relationship its own disjoint block of
    interactions (``a mod |R| == r``); strength 0 gives the class prior.
    """
    if cfg.correlation is not None:
        return np.asarray(cfg.correlation, dtype=float)
    A, R = cfg.n_interactions, cfg.n_relationships
    block = np.zeros((A, R))
    prior = interaction_prior(cfg)
    for a in range(A):
        block[a, a % R] = prior[a]
    block /= np.where(block.sum(axis=0) > 0, block.sum(axis=0), 1.0)
    s = cfg.correlation_strength
    return s * block + (1.0 - s) * prior[:, None]


@dataclass
class PlantedTruth:
    config: GenConfig
    profiles: list
    correlation: np.ndarray
    proto_visual: np.ndarray
    talk_visual: np.ndarray
    proto_dialog: np.ndarray
    proto_track: np.ndarray
    role_actor: np.ndarray
    role_recipient: np.ndarray
    proto_rel: np.ndarray
    identities: dict
    proto_reaction: np.ndarray | None = None
    clips: dict = field(default_factory=dict)
    aliases: list = field(default_factory=list)

    def to_json(self):
        arr = lambda a: np.asarray(a).tolist()  # noqa: E731
        return {
            "config": dataclasses.asdict(self.config),
            "profiles": self.profiles,
            "correlation": arr(self.correlation),
            "proto_visual": arr(self.proto_visual),
            "talk_visual": arr(self.talk_visual),
            "proto_dialog": arr(self.proto_dialog),
            "proto_track": arr(self.proto_track),
            "role_actor": arr(self.role_actor),
            "role_recipient": arr(self.role_recipient),
            "proto_rel": arr(self.proto_rel),
            "identities": {k: arr(v) for k, v in self.identities.items()},
            "proto_reaction": arr(self.proto_reaction),
            "clips": self.clips,
            "aliases": [list(p) for p in self.aliases],
        }

    @classmethod
    def from_json(cls, d):
        a = np.asarray
        return cls(
            GenConfig.from_dict(d["config"]), list(d["profiles"]), a(d["correlation"]),
            a(d["proto_visual"]), a(d["talk_visual"]), a(d["proto_dialog"]),
            a(d["proto_track"]), a(d["role_actor"]), a(d["role_recipient"]),
            a(d["proto_rel"]), {k: a(v) for k, v in d["identities"].items()},
            a(d["proto_reaction"]),
            {k: {**v, "pair": tuple(v["pair"])} for k, v in d["clips"].items()},
            [tuple(p) for p in d.get("aliases", [])],
        )


def save_truth(truth, path):
    with open(path, "w") as f:
        json.dump(truth.to_json(), f)


def load_truth(path):
    with open(path) as f:
        return PlantedTruth.from_json(json.load(f))


def _profiles(cfg, rng):
    A = cfg.n_interactions
    n_v = int(round(cfg.frac_visual_only * A))
    n_d = int(round(cfg.frac_dialog_only * A))
    order = rng.permutation(A)
    prof = ["both"] * A
    for a in order[:n_v]:
        prof[a] = "visual"
    for a in order[n_v:n_v + n_d]:
        prof[a] = "dialog"
    return prof


def _alias(cfg, truth):
    """Make pairs of interactions from different relationship blocks look alike.

    The second member of each pair copies the first one's visual, dialog and
    track prototypes and its modality profile, so only the relationship
    context can tell them apart.  Returns the list of (source, copy) pairs.
    """
    A, R = cfg.n_interactions, cfg.n_relationships
    n_pairs = int(round(cfg.alias_frac * A / 2))
    if n_pairs == 0 or R < 2:
        return []
    order = [int(a) for a in stream(cfg.seed, "gen", 2).permutation(A)]
    used, pairs = set(), []
    for a in order:
        if len(pairs) == n_pairs:
            break
        if a in used:
            continue
        for b in order:
            if b not in used and b != a and b % R != a % R:
                pairs.append((a, b))
                used.update((a, b))
                break
    for a, b in pairs:
        truth.proto_visual[b] = truth.proto_visual[a]
        truth.proto_dialog[b] = truth.proto_dialog[a]
        truth.proto_track[b] = truth.proto_track[a]
        truth.proto_reaction[b] = truth.proto_reaction[a]
        truth.profiles[b] = truth.profiles[a]
    return pairs


def generate(cfg):
    """Build a :class:`MovieDataset` and the :class:`PlantedTruth` behind it."""
    cfg.validate()
    A, R = cfg.n_interactions, cfg.n_relationships
    g = stream(cfg.seed, "gen", 0)
    profiles = _profiles(cfg, g)
    C = correlation_matrix(cfg)
    truth = PlantedTruth(
        config=cfg,
        profiles=profiles,
        correlation=C,
        proto_visual=g.standard_normal((A, cfg.dim_visual)),
        talk_visual=g.standard_normal(cfg.dim_visual),
        proto_dialog=g.standard_normal((A, cfg.dim_dialog)),
        proto_track=g.standard_normal((A, cfg.dim_track)),
        role_actor=g.standard_normal(cfg.dim_track),
        role_recipient=g.standard_normal(cfg.dim_track),
        proto_rel=g.standard_normal((R, cfg.dim_track)),
        identities={},
        proto_reaction=stream(cfg.seed, "gen", 3).standard_normal((A, cfg.dim_track)),
    )
    truth.aliases = _alias(cfg, truth)
    rel_prior = np.full(R, 1.0 / R)
    movies, clips = [], []
    for mi in range(cfg.n_movies):
        split = "test" if mi >= cfg.n_movies - cfg.test_movies else "train"
        m, mclips = _generate_movie(cfg, truth, mi, split, rel_prior)
        movies.append(m)
        clips.extend(mclips)
    ds = MovieDataset(default_interactions(A), default_relationships(R),
                      {"visual": cfg.dim_visual, "dialog": cfg.dim_dialog,
                       "track": cfg.dim_track}, movies, clips)
    return ds, truth


def _generate_movie(cfg, truth, mi, split, rel_prior):
    rng = stream(cfg.seed, "gen", 1, mi)
    R = cfg.n_relationships
    mid = f"m{mi:03d}"
    n = cfg.n_characters
    movie = Movie(mid, [f"{mid}_c{j}" for j in range(n)], split)
    ident = rng.standard_normal((n, cfg.dim_track))
    truth.identities[mid] = ident

    all_pairs = [(j, k) for j in range(n) for k in range(n) if j != k]
    n_active = min(cfg.pairs_per_movie, len(all_pairs))
    active = [all_pairs[i] for i in sorted(rng.choice(len(all_pairs), n_active, replace=False))]

    # timeline: spans and acting pairs
    spans = []
    t = 0.0
    while len(spans) < cfg.clips_per_movie:
        d = rng.uniform(4.0, 12.0)
        pair = active[rng.integers(n_active)]
        spans.append((t, t + d, pair))
        if len(spans) < cfg.clips_per_movie and rng.random() < cfg.overlap_rate:
            spans.append((t + 0.1 * d, t + 1.1 * d, (pair[1], pair[0])))
            t += 1.1 * d
        t += d + rng.uniform(1.0, 4.0)

    # relationships: each ordered pair gets one or two segments over its clips
    by_pair = {}
    for i, (_, _, p) in enumerate(spans):
        by_pair.setdefault(p, []).append(i)
    rel_of, label_of = {}, {}
    for p in sorted(by_pair):
        idx = by_pair[p]
        r0 = int(rng.choice(R, p=rel_prior))
        seg = [(0, r0)]
        if len(idx) > 1 and R > 1 and rng.random() < cfg.relationship_change_prob:
            cut = int(rng.integers(1, len(idx)))
            r1 = int(rng.choice([r for r in range(R) if r != r0]))
            seg.append((cut, r1))
        for s, (start, r) in enumerate(seg):
            stop = seg[s + 1][0] if s + 1 < len(seg) else len(idx)
            missing = rng.random() < cfg.relationship_missing_prob
            for i in idx[start:stop]:
                rel_of[i] = r
                label_of[i] = None if missing else r

    C = truth.correlation
    sig = cfg.noise
    clips = []
    for i, (s, e, (j, k)) in enumerate(spans):
        r = rel_of[i]
        a = int(rng.choice(cfg.n_interactions, p=C[:, r]))
        prof = truth.profiles[a]
        n_seg = int(rng.integers(cfg.min_segments, cfg.max_segments + 1))
        vis_mean = truth.talk_visual if prof == "dialog" else truth.proto_visual[a]
        visual = vis_mean + sig * rng.standard_normal((n_seg, cfg.dim_visual))
        dialog = None
        if prof != "visual" and rng.random() >= cfg.dialog_missing_prob:
            n_sent = int(rng.integers(cfg.min_sentences, cfg.max_sentences + 1))
            dialog = truth.proto_dialog[a] + sig * rng.standard_normal((n_sent, cfg.dim_dialog))
        present = {}
        if rng.random() >= cfg.actor_missing_prob:
            present[j] = (truth.role_actor + cfg.track_class_scale * truth.proto_track[a]
                          + cfg.rel_feature_scale * truth.proto_rel[r])
        if rng.random() >= cfg.recipient_missing_prob:
            present[k] = (truth.role_recipient + cfg.reaction_scale * truth.proto_reaction[a]
                          + cfg.rel_feature_scale * truth.proto_rel[r])
        others = [c for c in range(n) if c not in (j, k)]
        n_dis = int(rng.integers(0, min(cfg.max_distractors, len(others)) + 1))
        for c in rng.choice(others, n_dis, replace=False) if n_dis else []:
            present[int(c)] = np.zeros(cfg.dim_track)
        tracks = {
            c: ident[c] + off + sig * rng.standard_normal((n_seg, cfg.dim_track))
            for c, off in sorted(present.items())
        }
        cid = f"{mid}_v{i:04d}"
        clips.append(ClipRecord(cid, mid, round(s, 6), round(e, 6), visual, dialog, tracks,
                                a, (j, k), label_of[i]))
        truth.clips[cid] = {"interaction": a, "pair": (j, k), "relationship": r}
    return movie, clips


# -------------------------------------------------------------- Bayes oracle


def _track_expect(truth, a, r, role):
    cfg = truth.config
    if role == "actor":
        return (truth.role_actor + cfg.track_class_scale * truth.proto_track[a]
                + cfg.rel_feature_scale * truth.proto_rel[r])
    if role == "recipient":
        return (truth.role_recipient + cfg.reaction_scale * truth.proto_reaction[a]
                + cfg.rel_feature_scale * truth.proto_rel[r])
    return np.zeros_like(truth.role_actor)


def _content_loglik(truth, clip):
    """log p(visual, dialog | a) for every interaction a."""
    cfg = truth.config
    var2 = 2.0 * max(cfg.noise, 1e-6) ** 2
    talk = np.array([p == "dialog" for p in truth.profiles])
    visual_only = np.array([p == "visual" for p in truth.profiles])
    vis_means = np.where(talk[:, None], truth.talk_visual[None, :], truth.proto_visual)
    ll = -len(clip.visual) * ((clip.visual.mean(0) - vis_means) ** 2).sum(1) / var2
    with np.errstate(divide="ignore"):
        if clip.dialog is None:
            ll = ll + np.where(visual_only, 0.0, np.log(cfg.dialog_missing_prob))
        else:
            ll = ll - len(clip.dialog) * ((clip.dialog.mean(0) - truth.proto_dialog) ** 2).sum(1) / var2
            ll = ll + np.where(visual_only, -np.inf, np.log1p(-cfg.dialog_missing_prob))
    return ll


def _pair_loglik(truth, clip):
    """log p(actor and recipient tracks | a, r) as an |R| x |A| array."""
    cfg = truth.config
    var2 = 2.0 * max(cfg.noise, 1e-6) ** 2
    R, A = cfg.n_relationships, cfg.n_interactions
    ident = truth.identities[clip.movie]
    j, k = clip.pair
    ll = np.zeros((R, A))
    if j in clip.tracks:
        x = clip.tracks[j].mean(0) - ident[j]
        mu = (truth.role_actor + cfg.track_class_scale * truth.proto_track[None, :, :]
              + cfg.rel_feature_scale * truth.proto_rel[:, None, :])
        ll -= len(clip.tracks[j]) * ((x - mu) ** 2).sum(-1) / var2
    if k in clip.tracks:
        x = clip.tracks[k].mean(0) - ident[k]
        mu = (truth.role_recipient + cfg.reaction_scale * truth.proto_reaction[None, :, :]
              + cfg.rel_feature_scale * truth.proto_rel[:, None, :])
        ll -= len(clip.tracks[k]) * ((x - mu) ** 2).sum(-1) / var2
    return ll


def bayes_oracle_accuracy(dataset, truth, split=None):
    """Accuracy of the Bayes classifier that knows every planted prototype.

    Interaction: MAP over classes given the clip's features and the true
    relationship.  Relationship: MAP over r for each labelled bundle,
    marginalizing each clip's interaction.  Pair: MAP over candidate pairs
    given the true interaction and relationship.
    """
    cfg = truth.config
    var2 = 2.0 * max(cfg.noise, 1e-6) ** 2
    C = truth.correlation
    R = cfg.n_relationships
    with np.errstate(divide="ignore"):
        logC = np.log(C)
    idx = dataset.clip_indices(split)

    hits = []
    for i in idx:
        clip = dataset.clips[i]
        r = truth.clips[clip.id]["relationship"]
        score = _content_loglik(truth, clip) + _pair_loglik(truth, clip)[r] + logC[:, r]
        hits.append(int(np.argmax(score)) == clip.interaction)
    out = {"interaction": float(np.mean(hits)) if hits else float("nan")}

    keep = set(idx)
    hits = []
    for b in dataset.bundles:
        if b.relationship is None or b.clips[0] not in keep:
            continue
        score = np.log(np.full(R, 1.0 / R))
        for i in b.clips:
            clip = dataset.clips[i]
            per_r = _content_loglik(truth, clip)[None, :] + _pair_loglik(truth, clip)
            score = score + logsumexp(per_r + logC.T, axis=1)
        hits.append(int(np.argmax(score)) == b.relationship)
    out["relationship"] = float(np.mean(hits)) if hits else float("nan")

    hits = []
    for i in idx:
        clip = dataset.clips[i]
        gt = clip.gt_pair()
        if gt is None:
            continue
        t = truth.clips[clip.id]
        a, r = t["interaction"], t["relationship"]
        ident = truth.identities[clip.movie]
        cands = dataset.candidates[i]
        scores = []
        for p in cands:
            s = 0.0
            for c, arr in clip.tracks.items():
                role = "actor" if c == p[0] else "recipient" if c == p[1] else "none"
                x = arr.mean(0) - ident[c]
                s -= len(arr) * ((x - _track_expect(truth, a, r, role)) ** 2).sum() / var2
            scores.append(s)
        hits.append(cands[int(np.argmax(scores))] == gt)
    out["pair"] = float(np.mean(hits)) if hits else float("nan")
    return out
