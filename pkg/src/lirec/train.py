"""Epoch loop, batching, burn-in schedule, Adam and checkpointing."""

import dataclasses
import json
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__, checkpoint
from .data import build_bundles
from .losses import LossConfig
from .model import CLIP_REGIMES, Model, ModelConfig
from .nn import AdamState, NonFiniteError, adam_step
from .rng import stream
from .synth import ConfigError

log = logging.getLogger(__name__)

PAIR_REGIMES = ("int_char", "int_rel_char")
CODE_VERSION = __version__


@dataclass
class TrainConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    batch_size: int = 64
    lr: float = 3e-5
    epochs: int = 60
    bundle_cap: int = 18
    seed: int = 0
    split: str = "train"
    checkpoint_every: int = 0   # 0: only the final checkpoint
    eval_every: int = 0         # 0: never

    @property
    def regime(self):
        return self.model.regime

    def validate(self):
        for name in ("batch_size", "bundle_cap"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("epochs", "checkpoint_every", "eval_every"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if not self.lr > 0:
            raise ConfigError("lr must be positive")
        if self.loss.weak and self.regime not in PAIR_REGIMES:
            raise ConfigError(f"weak supervision needs a pair regime {PAIR_REGIMES}, "
                             f"got {self.regime!r}")
        self.loss.validate()

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["model"] = self.model.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        model = ModelConfig.from_dict(d.pop("model", {}))
        loss = LossConfig(**d.pop("loss", {}))
        return cls(model=model, loss=loss, **d)


@dataclass
class TrainLog:
    records: list = field(default_factory=list)
    burn_in_switch: int | None = None
    path: str | None = None

    def append(self, rec):
        if self.records and rec["epoch"] <= self.records[-1]["epoch"]:
            raise ValueError("epoch index must increase")
        self.records.append(rec)
        if self.path:
            with open(self.path, "a") as f:
                f.write(json.dumps(rec, sort_keys=True) + "\n")


@dataclass
class TrainResult:
    params: dict
    optimizer: AdamState
    epoch: int
    log: TrainLog
    checkpoint: str | None = None


def epoch_samples(dataset, cfg, epoch):
    """Training units for one epoch, in a seeded shuffled order."""
    regime, lc = cfg.regime, cfg.loss
    if regime in CLIP_REGIMES:
        units = dataset.clip_indices(cfg.split)
        if regime == "int_char":
            units = [i for i in units if dataset.candidates[i]
                     and (lc.weak or dataset.clips[i].gt_pair() is not None)]
    else:
        units = build_bundles(dataset, cfg.bundle_cap, "train-random", cfg.seed, epoch,
                              split=cfg.split)
        if regime == "rel":
            units = [b for b in units if b.relationship is not None]
        if regime == "int_rel_char":
            units = [b for b in units if any(dataset.candidates[i] for i in b.clips)]
    order = stream(cfg.seed, "data", epoch).permutation(len(units))
    return [units[k] for k in order]


def check_dataset(dataset, cfg):
    if cfg.regime in ("rel", "int_rel", "int_rel_char"):
        if not any(c.relationship is not None for c in dataset.clips):
            raise ConfigError(f"regime {cfg.regime!r} needs relationship labels")
    if dataset.n_interactions != cfg.model.n_interactions:
        raise ConfigError(f"dataset has {dataset.n_interactions} interactions, "
                         f"model expects {cfg.model.n_interactions}")
    if dataset.n_relationships != cfg.model.n_relationships:
        raise ConfigError(f"dataset has {dataset.n_relationships} relationships, "
                         f"model expects {cfg.model.n_relationships}")
    if dict(dataset.dims) != dict(cfg.model.dims):
        raise ConfigError(f"feature dims {dataset.dims} differ from model dims {cfg.model.dims}")


def _sample_ids(dataset, batch):
    ids = []
    for s in batch:
        if isinstance(s, (int, np.integer)):
            ids.append(dataset.clips[s].id)
        else:
            ids.append([dataset.clips[i].id for i in s.clips])
    return ids


def optimizer_tensors(state):
    out = {"m/" + k: v for k, v in state.m.items()}
    out.update({"v/" + k: v for k, v in state.v.items()})
    return out


def optimizer_from_tensors(tensors, step, lr):
    state = AdamState(lr=lr, t=step)
    for k, v in tensors.items():
        kind, name = k.split("/", 1)
        getattr(state, kind)[name] = v
    return state


def save_checkpoint(path, params, state, epoch, cfg):
    meta = {"epoch": epoch, "config": cfg.to_dict(), "code_version": CODE_VERSION}
    checkpoint.save(path, params, optimizer_tensors(state), state.t, meta)


def train_epoch(model, params, state, dataset, cfg, epoch):
    samples = epoch_samples(dataset, cfg, epoch)
    totals, n_batches = {}, 0
    for b, start in enumerate(range(0, len(samples), cfg.batch_size)):
        batch = samples[start:start + cfg.batch_size]
        loss, parts, grads = model.loss_and_grad(
            params, dataset, batch, cfg.loss, epoch,
            rng_dropout=stream(cfg.seed, "dropout", epoch, b),
            rng_sample=stream(cfg.seed, "sampling", epoch, b), train=True)
        bad = not np.isfinite(loss) or any(not np.all(np.isfinite(g)) for g in grads.values())
        if bad:
            raise NonFiniteError(f"non-finite loss at epoch {epoch}, batch {b}; "
                                 f"ids: {json.dumps(_sample_ids(dataset, batch))}")
        params = adam_step(params, grads, state)
        totals["loss"] = totals.get("loss", 0.0) + loss
        for k, v in parts.items():
            totals[k] = totals.get(k, 0.0) + v
        n_batches += 1
    means = {k: v / max(n_batches, 1) for k, v in totals.items()}
    means.setdefault("loss", 0.0)
    return params, means, len(samples)


def train(cfg, dataset, out_dir=None, eval_fn=None, _start=None):
    """Train ``cfg.epochs`` epochs; writes checkpoints and a JSONL log into ``out_dir``.

    ``eval_fn(model, params, epoch) -> dict`` is called every ``eval_every``
    epochs and its result stored in the log.
    """
    cfg.validate()
    check_dataset(dataset, cfg)
    model = Model(cfg.model)
    if _start is None:
        params = model.init_params(cfg.seed)
        state = AdamState(lr=cfg.lr)
        first = 0
    else:
        params, state, first = _start
    tlog = TrainLog()
    ckpt = None
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        tlog.path = os.path.join(out_dir, "train_log.jsonl")
        if first == 0 and os.path.exists(tlog.path):
            os.remove(tlog.path)
    if cfg.loss.negatives == "sum-max" and cfg.loss.burn_in < cfg.epochs:
        tlog.burn_in_switch = cfg.loss.burn_in
    for epoch in range(first, cfg.epochs):
        t0 = time.perf_counter()
        params, means, n = train_epoch(model, params, state, dataset, cfg, epoch)
        rec = {"epoch": epoch, "reduction": cfg.loss.reduction(epoch), "samples": n,
               "wall_time": time.perf_counter() - t0, **means}
        if eval_fn is not None and cfg.eval_every and (epoch + 1) % cfg.eval_every == 0:
            rec["metrics"] = eval_fn(model, params, epoch)
        tlog.append(rec)
        log.info("epoch %d loss %.5f", epoch, means["loss"])
        if out_dir and cfg.checkpoint_every and (epoch + 1) % cfg.checkpoint_every == 0:
            save_checkpoint(os.path.join(out_dir, f"epoch_{epoch + 1:04d}.lirc"),
                            params, state, epoch + 1, cfg)
    if out_dir:
        ckpt = os.path.join(out_dir, "final.lirc")
        save_checkpoint(ckpt, params, state, max(cfg.epochs, first), cfg)
    return TrainResult(params, state, max(cfg.epochs, first), tlog, ckpt)


def load_checkpoint(path, cfg=None):
    """``(params, AdamState, epoch, TrainConfig)`` from a checkpoint file.

    With ``cfg`` given, parameter shapes are checked against a model built
    from it.
    """
    params, opt, step, meta = checkpoint.load(path)
    saved = TrainConfig.from_dict(meta["config"])
    cfg = cfg or saved
    expect = Model(cfg.model).init_params(0)
    if set(expect) != set(params):
        raise checkpoint.CheckpointError(
            f"checkpoint parameters do not match the {cfg.regime!r} model layout")
    for k, v in expect.items():
        if v.shape != params[k].shape:
            raise checkpoint.CheckpointError(
                f"shape mismatch for {k}: checkpoint {params[k].shape}, config {v.shape}")
    return params, optimizer_from_tensors(opt, step, cfg.lr), int(meta["epoch"]), cfg


def resume(path, cfg, dataset, out_dir=None, eval_fn=None):
    """Continue a run from ``path`` up to ``cfg.epochs``; a no-op when already there."""
    params, state, epoch, cfg = load_checkpoint(path, cfg)
    return train(cfg, dataset, out_dir, eval_fn, _start=(params, state, epoch))
