"""Finite-difference checks of every regime loss on tiny generated datasets."""

from dataclasses import dataclass

import numpy as np

from .losses import LossConfig
from .model import Model, ModelConfig
from .nn import gradcheck
from .rng import stream
from .synth import GenConfig, generate


@dataclass
class Case:
    regime: str
    weak: bool = False
    negatives: str = "sum"
    wiring: str = "rel_to_int"

    @property
    def label(self):
        tag = self.regime
        if self.regime in ("int_char", "int_rel_char"):
            tag += "/" + ("weak" if self.weak else "full")
        if self.regime == "int_char":
            tag += "/" + self.negatives
        if self.regime == "int_rel":
            tag += "/" + self.wiring
        return tag


CASES = (
    Case("int"),
    Case("rel"),
    Case("int_rel", wiring="rel_to_int"),
    Case("int_rel", wiring="int_to_rel"),
    Case("int_rel", wiring="both"),
    Case("int_char", weak=False, negatives="sum"),
    Case("int_char", weak=False, negatives="sum-max"),
    Case("int_char", weak=True, negatives="sum"),
    Case("int_char", weak=True, negatives="sum-max"),
    Case("int_rel_char", weak=False),
    Case("int_rel_char", weak=True),
)


def toy_dataset(seed):
    cfg = GenConfig(n_movies=1, n_characters=3, clips_per_movie=7, pairs_per_movie=2,
                    n_interactions=5, n_relationships=3, dim_visual=4, dim_dialog=3,
                    dim_track=3, noise=0.5, track_class_scale=1.0, reaction_scale=1.0,
                    overlap_rate=0.3, max_segments=3,
                    relationship_change_prob=0.3, test_movies=0, seed=seed)
    return generate(cfg)[0]


def toy_model(ds, case):
    cfg = ModelConfig(regime=case.regime, n_interactions=ds.n_interactions,
                      n_relationships=ds.n_relationships, dims=dict(ds.dims), enc_hidden=5,
                      emb_dim=4, head_hidden=6, wiring=case.wiring)
    return Model(cfg)


def check_case(case, seed, h=1e-5, dropout=True):
    """Max relative error over all parameters for one case on one toy instance."""
    ds = toy_dataset(seed)
    model = toy_model(ds, case)
    params = model.init_params(seed)
    # zero biases plus a fully dropped hidden layer put ReLUs exactly on their
    # kink, so check at a jittered point instead of the raw initialisation
    jitter = stream(seed, "init", 1)
    params = {k: v + 0.1 * jitter.standard_normal(v.shape) for k, v in params.items()}
    lc = LossConfig(negatives=case.negatives, weak=case.weak, burn_in=0)
    if case.regime in ("int", "int_char"):
        samples = list(range(len(ds.clips)))
    else:
        samples = ds.bundles

    def run(p, need_grad):
        return model.loss_and_grad(p, ds, samples, lc, epoch=0,
                                   rng_dropout=stream(seed, "dropout", 0),
                                   rng_sample=stream(seed, "sampling", 0),
                                   train=dropout, need_grad=need_grad)

    errs = gradcheck(lambda p: run(p, False)[0], lambda p: run(p, True)[2], params, h)
    return max(errs.values()) if errs else 0.0


def check_all(seeds=range(20), cases=CASES, h=1e-5):
    """``{case label: max relative error over seeds}``."""
    out = {}
    for case in cases:
        out[case.label] = max(check_case(case, s, h) for s in seeds)
    return out


def worst(report):
    return float(np.max(list(report.values()))) if report else 0.0
