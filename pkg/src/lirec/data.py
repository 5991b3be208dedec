"""Movies, clips, character pairs and the on-disk dataset format.

A dataset directory holds ``manifest.json`` plus LIRC feature files (see
:mod:`lirec.checkpoint`).  Each feature reference in the manifest names a
file and a tensor inside it.  Field names are documented in the README.
"""

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from . import checkpoint
from .rng import stream

log = logging.getLogger(__name__)

FORMAT = "lirec-dataset"
FORMAT_VERSION = 1
OVERLAP_IOU = 0.2

# (actor, recipient); recipient None is a singleton track
PairId = tuple


class DatasetError(ValueError):
    pass


@dataclass
class Movie:
    id: str
    characters: list
    split: str = "train"


@dataclass
class ClipRecord:
    id: str
    movie: str
    start: float
    end: float
    visual: np.ndarray
    dialog: np.ndarray | None = None
    tracks: dict = field(default_factory=dict)
    interaction: int = 0
    pair: tuple | None = None
    relationship: int | None = None

    @property
    def present(self):
        return sorted(self.tracks)

    def gt_pair(self):
        """Ground-truth pair as a candidate PairId, or None.

        Untracked members are replaced by None; a pair whose actor is
        untracked has no candidate representation.
        """
        if self.pair is None:
            return None
        j, k = self.pair
        if j is None or j not in self.tracks:
            return None
        return (j, k if k in self.tracks else None)


@dataclass
class PairBundle:
    pair: PairId
    movie: str
    clips: list
    relationship: int | None = None


def iou(a, b):
    """Temporal IoU of half-open spans ``(start, end)``."""
    inter = min(a[1], b[1]) - max(a[0], b[0])
    if inter <= 0:
        return 0.0
    return inter / ((a[1] - a[0]) + (b[1] - b[0]) - inter)


def candidate_pairs(clip):
    """All ordered pairs of tracked characters, then singletons."""
    present = clip.present
    pairs = [(j, k) for j in present for k in present if j != k]
    return pairs + [(j, None) for j in present]


def _sort_key(movie_order):
    return lambda c: (movie_order[c.movie], c.start, c.id)


@dataclass
class MovieDataset:
    interactions: list = field(default_factory=list)
    relationships: list = field(default_factory=list)
    dims: dict = field(default_factory=lambda: {"visual": 0, "dialog": 0, "track": 0})
    movies: list = field(default_factory=list)
    clips: list = field(default_factory=list)
    overlaps: list = field(default_factory=list)
    bundles: list = field(default_factory=list)
    candidates: list = field(default_factory=list)

    def __post_init__(self):
        self.finalize()

    def finalize(self):
        order = {m.id: i for i, m in enumerate(self.movies)}
        self.clips = sorted(self.clips, key=_sort_key(order))
        self._index = {c.id: i for i, c in enumerate(self.clips)}
        self.overlaps = compute_overlap_sets(self)
        self.candidates = [candidate_pairs(c) for c in self.clips]
        self.bundles = base_bundles(self)
        self._bundle_of = {}
        for b, bundle in enumerate(self.bundles):
            for i in bundle.clips:
                self._bundle_of[i] = b

    @property
    def n_interactions(self):
        return len(self.interactions)

    @property
    def n_relationships(self):
        return len(self.relationships)

    def index(self, clip_id):
        return self._index[clip_id]

    def movie(self, movie_id):
        for m in self.movies:
            if m.id == movie_id:
                return m
        raise KeyError(movie_id)

    def split_of(self, clip_idx):
        return self.movie(self.clips[clip_idx].movie).split

    def clip_indices(self, split=None):
        if split is None:
            return list(range(len(self.clips)))
        splits = {m.id: m.split for m in self.movies}
        return [i for i, c in enumerate(self.clips) if splits[c.movie] == split]

    def bundle_of(self, clip_idx):
        """Index into ``bundles`` of the clip's bundle, or None."""
        return self._bundle_of.get(clip_idx)


def compute_overlap_sets(dataset, threshold=OVERLAP_IOU):
    """For every clip, labels of *other* clips in the same movie with IoU > threshold."""
    out = [set() for _ in dataset.clips]
    by_movie = {}
    for i, c in enumerate(dataset.clips):
        by_movie.setdefault(c.movie, []).append(i)
    for idx in by_movie.values():
        idx = np.asarray(idx)
        s = np.array([dataset.clips[i].start for i in idx])
        e = np.array([dataset.clips[i].end for i in idx])
        inter = np.minimum(e[:, None], e[None, :]) - np.maximum(s[:, None], s[None, :])
        inter = np.maximum(inter, 0.0)
        union = (e - s)[:, None] + (e - s)[None, :] - inter
        hit = inter / union > threshold
        np.fill_diagonal(hit, False)
        for a, b in zip(*np.nonzero(hit)):
            out[idx[a]].add(dataset.clips[idx[b]].interaction)
    return [frozenset(o) for o in out]


def base_bundles(dataset):
    """Chronological clip runs per (movie, ordered pair, relationship segment)."""
    groups = {}
    for i, c in enumerate(dataset.clips):
        if c.pair is None or c.pair[0] is None or c.pair[1] is None:
            continue
        groups.setdefault((c.movie, tuple(c.pair)), []).append(i)
    bundles = []
    for (movie, pair), idx in groups.items():
        run = [idx[0]]
        for i in idx[1:]:
            if dataset.clips[i].relationship == dataset.clips[run[-1]].relationship:
                run.append(i)
            else:
                bundles.append(PairBundle(pair, movie, run, dataset.clips[run[0]].relationship))
                run = [i]
        bundles.append(PairBundle(pair, movie, run, dataset.clips[run[0]].relationship))
    bundles.sort(key=lambda b: b.clips[0])
    return bundles


def uniform_subset(n, cap):
    """Evenly spaced indices ``floor(i * n / cap)`` when n exceeds cap."""
    if n <= cap:
        return list(range(n))
    return [i * n // cap for i in range(cap)]


def build_bundles(dataset, cap=18, mode="eval-uniform", seed=0, epoch=0, split=None):
    """Cap every base bundle at ``cap`` clips.

    ``train-random`` draws a fresh subset per (seed, epoch); ``eval-uniform``
    takes a fixed evenly spaced subset of the chronological clip list.
    Subsets are always returned in chronological order.
    """
    if cap < 1:
        raise ValueError(f"bundle cap must be >= 1, got {cap}")
    if mode not in ("train-random", "eval-uniform"):
        raise ValueError(f"unknown bundle mode {mode!r}")
    keep = None if split is None else {m.id for m in dataset.movies if m.split == split}
    rng = stream(seed, "sampling", 1_000_003, epoch)
    out, skipped = [], 0
    for b in dataset.bundles:
        if keep is not None and b.movie not in keep:
            continue
        n = len(b.clips)
        if n == 0:
            skipped += 1
            continue
        if mode == "eval-uniform":
            pick = uniform_subset(n, cap)
        elif n <= cap:
            pick = list(range(n))
        else:
            pick = sorted(rng.choice(n, size=cap, replace=False).tolist())
        out.append(PairBundle(b.pair, b.movie, [b.clips[i] for i in pick], b.relationship))
    if skipped:
        log.warning("skipped %d bundles with no clips", skipped)
    return out


# ---------------------------------------------------------------- disk format


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_dataset(dataset, root):
    os.makedirs(os.path.join(root, "features"), exist_ok=True)
    per_movie = {m.id: {} for m in dataset.movies}
    clip_entries = []
    for c in dataset.clips:
        rel = f"features/{c.movie}.lirc"
        tensors = per_movie[c.movie]

        def ref(name, arr):
            tensors[name] = arr
            return {"file": rel, "tensor": name, "shape": list(arr.shape)}

        feats = {"visual": ref(f"{c.id}/visual", c.visual), "dialog": None, "tracks": {}}
        if c.dialog is not None:
            feats["dialog"] = ref(f"{c.id}/dialog", c.dialog)
        for ch, arr in sorted(c.tracks.items()):
            feats["tracks"][str(ch)] = ref(f"{c.id}/track/{ch}", arr)
        clip_entries.append({
            "id": c.id,
            "movie": c.movie,
            "start": c.start,
            "end": c.end,
            "interaction": c.interaction,
            "pair": None if c.pair is None else list(c.pair),
            "relationship": c.relationship,
            "features": feats,
        })
    files = {}
    for movie_id, tensors in per_movie.items():
        rel = f"features/{movie_id}.lirc"
        checkpoint.save_tensors(os.path.join(root, rel), tensors)
        files[rel] = {"sha256": _sha256(os.path.join(root, rel))}
    manifest = {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "interactions": list(dataset.interactions),
        "relationships": list(dataset.relationships),
        "dims": dict(dataset.dims),
        "files": files,
        "movies": [
            {"id": m.id, "split": m.split, "characters": list(m.characters)}
            for m in dataset.movies
        ],
        "clips": clip_entries,
    }
    with open(os.path.join(root, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=1)


def load_dataset(root):
    path = os.path.join(root, "manifest.json")
    if not os.path.exists(path):
        raise DatasetError(f"missing manifest file: {path}")
    with open(path) as f:
        try:
            man = json.load(f)
        except json.JSONDecodeError as e:
            raise DatasetError(f"{path}: invalid JSON ({e})") from None
    if man.get("format", FORMAT) != FORMAT:
        raise DatasetError(f"{path}: unexpected format {man.get('format')!r}")
    if man.get("version", FORMAT_VERSION) != FORMAT_VERSION:
        raise DatasetError(f"{path}: unsupported version {man.get('version')!r}")

    files = man.get("files", {})
    cache = {}

    def fetch(ref, clip_id):
        rel = ref["file"]
        if rel not in cache:
            full = os.path.join(root, rel)
            if not os.path.exists(full):
                raise DatasetError(f"clip {clip_id}: missing feature file {full}")
            want = files.get(rel, {}).get("sha256")
            if want is not None and _sha256(full) != want:
                raise DatasetError(f"checksum mismatch for feature file {full}")
            try:
                cache[rel] = checkpoint.load_tensors(full)
            except checkpoint.CheckpointError as e:
                raise DatasetError(str(e)) from None
        tensors = cache[rel]
        if ref["tensor"] not in tensors:
            raise DatasetError(f"clip {clip_id}: tensor {ref['tensor']!r} not in {rel}")
        arr = tensors[ref["tensor"]]
        if "shape" in ref and list(arr.shape) != list(ref["shape"]):
            raise DatasetError(
                f"clip {clip_id}: tensor {ref['tensor']!r} has shape {arr.shape}, "
                f"manifest says {ref['shape']}"
            )
        return arr

    interactions = man.get("interactions", [])
    relationships = man.get("relationships", [])
    for name, vocab in (("interactions", interactions), ("relationships", relationships)):
        if len(set(vocab)) != len(vocab):
            raise DatasetError(f"duplicate names in {name} vocabulary")
    dims = man.get("dims", {"visual": 0, "dialog": 0, "track": 0})
    movies = [Movie(m["id"], list(m["characters"]), m.get("split", "train"))
              for m in man.get("movies", [])]
    n_chars = {m.id: len(m.characters) for m in movies}
    if len(n_chars) != len(movies):
        raise DatasetError("duplicate movie ids")

    def check_block(arr, width, what, clip_id):
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] != width:
            raise DatasetError(f"clip {clip_id}: {what} block has shape {arr.shape}, "
                               f"expected (n>=1, {width})")

    clips, seen = [], set()
    for e in man.get("clips", []):
        cid = e["id"]
        if cid in seen:
            raise DatasetError(f"duplicate clip id {cid}")
        seen.add(cid)
        if e["movie"] not in n_chars:
            raise DatasetError(f"clip {cid}: unknown movie {e['movie']!r}")
        if not e["end"] > e["start"]:
            raise DatasetError(f"clip {cid}: empty span [{e['start']}, {e['end']})")
        if not 0 <= e["interaction"] < len(interactions):
            raise DatasetError(f"clip {cid}: interaction {e['interaction']} out of range")
        rel = e.get("relationship")
        if rel is not None and not 0 <= rel < len(relationships):
            raise DatasetError(f"clip {cid}: relationship {rel} out of range")
        nc = n_chars[e["movie"]]
        pair = e.get("pair")
        if pair is not None:
            for ch in pair:
                if ch is not None and not 0 <= ch < nc:
                    raise DatasetError(f"clip {cid}: character {ch} not in movie {e['movie']}")
            if pair[0] is not None and pair[0] == pair[1]:
                raise DatasetError(f"clip {cid}: pair members must differ")
            pair = tuple(pair)
        feats = e["features"]
        if feats.get("visual") is None:
            raise DatasetError(f"clip {cid}: visual features are required")
        visual = fetch(feats["visual"], cid)
        check_block(visual, dims["visual"], "visual", cid)
        dialog = None
        if feats.get("dialog") is not None:
            dialog = fetch(feats["dialog"], cid)
            check_block(dialog, dims["dialog"], "dialog", cid)
        tracks = {}
        for ch, ref in feats.get("tracks", {}).items():
            ch = int(ch)
            if not 0 <= ch < nc:
                raise DatasetError(f"clip {cid}: track for unknown character {ch}")
            tracks[ch] = fetch(ref, cid)
            check_block(tracks[ch], dims["track"], f"track {ch}", cid)
        clips.append(ClipRecord(cid, e["movie"], float(e["start"]), float(e["end"]),
                                visual, dialog, tracks, int(e["interaction"]), pair, rel))
    return MovieDataset(interactions, relationships, dims, movies, clips)


def structurally_equal(a, b):
    """Field-by-field equality of two datasets, including feature arrays."""
    if (a.interactions, a.relationships, a.dims) != (b.interactions, b.relationships, b.dims):
        return False
    if [(m.id, m.split, m.characters) for m in a.movies] != \
       [(m.id, m.split, m.characters) for m in b.movies]:
        return False
    if len(a.clips) != len(b.clips):
        return False
    for x, y in zip(a.clips, b.clips):
        if (x.id, x.movie, x.start, x.end, x.interaction, x.pair, x.relationship) != \
           (y.id, y.movie, y.start, y.end, y.interaction, y.pair, y.relationship):
            return False
        if not np.array_equal(x.visual, y.visual):
            return False
        if (x.dialog is None) != (y.dialog is None):
            return False
        if x.dialog is not None and not np.array_equal(x.dialog, y.dialog):
            return False
        if sorted(x.tracks) != sorted(y.tracks):
            return False
        if any(not np.array_equal(x.tracks[k], y.tracks[k]) for k in x.tracks):
            return False
    return True
