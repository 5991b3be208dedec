"""Versioned JSON run configuration (generator + trainer + evaluator).

Precedence is flags > file > defaults.  A single top-level ``seed`` drives
every random stream; the sections may not carry their own.
"""

import dataclasses
import json
from dataclasses import dataclass, field

from .evaluate import SWEEP
from .losses import LossConfig
from .model import ModelConfig
from .synth import ConfigError, GenConfig
from .train import TrainConfig

SCHEMA_VERSION = 1


@dataclass
class EvalOptions:
    split: str = "test"
    bundle_cap: int = 18
    sweep: list = field(default_factory=lambda: list(SWEEP))

    def validate(self):
        if self.bundle_cap < 1 or any(k < 1 for k in self.sweep):
            raise ConfigError("bundle sizes must be >= 1")


@dataclass
class RunConfig:
    seed: int = 7
    gen: GenConfig = field(default_factory=GenConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalOptions = field(default_factory=EvalOptions)
    paths: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sync()

    def sync(self):
        """Propagate the seed and the generator's vocab/dims into the model config."""
        self.gen.seed = self.seed
        self.train.seed = self.seed
        m = self.train.model
        m.n_interactions = self.gen.n_interactions
        m.n_relationships = self.gen.n_relationships
        m.dims = {"visual": self.gen.dim_visual, "dialog": self.gen.dim_dialog,
                  "track": self.gen.dim_track}
        return self

    def validate(self):
        self.sync()
        self.gen.validate()
        try:
            self.train.validate()
        except ValueError as e:
            raise ConfigError(str(e)) from e
        self.eval.validate()

    def to_dict(self):
        d = {"schema": SCHEMA_VERSION, "seed": self.seed,
             "gen": dataclasses.asdict(self.gen), "train": self.train.to_dict(),
             "eval": dataclasses.asdict(self.eval), "paths": dict(self.paths)}
        d["gen"].pop("seed")
        d["train"].pop("seed")
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        schema = d.pop("schema", SCHEMA_VERSION)
        if schema != SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema {schema}; expected {SCHEMA_VERSION}")
        unknown = set(d) - {"seed", "gen", "train", "eval", "paths"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for section in ("gen", "train"):
            if "seed" in d.get(section, {}):
                raise ConfigError(f"set the seed at top level, not in {section!r}")
        gen = GenConfig.from_dict(d.get("gen", {}))
        train = _build(TrainConfig, d.get("train", {}), "train",
                       nested={"model": ModelConfig, "loss": LossConfig})
        ev = _build(EvalOptions, d.get("eval", {}), "eval")
        return cls(seed=int(d.get("seed", 7)), gen=gen, train=train, eval=ev,
                   paths=dict(d.get("paths", {})))


def _build(cls, d, where, nested=None):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    kw = dict(d)
    for name, sub in (nested or {}).items():
        if name in kw:
            kw[name] = _build(sub, kw[name], f"{where}.{name}")
    try:
        return cls(**kw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from e


def load(path):
    try:
        with open(path) as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return RunConfig.from_dict(data)


def apply_overrides(d, pairs):
    """Apply ``a.b.c=value`` strings to a config dict; values parse as JSON when possible."""
    d = json.loads(json.dumps(d))
    for item in pairs:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = d
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-object")
        node[parts[-1]] = value
    return d
