"""Trend experiments on synthetic data.

    python3 scripts/experiments.py modalities [--epochs 30]
    python3 scripts/experiments.py joint [--data-seeds 7 8 9] [--seeds 4]
    python3 scripts/experiments.py bundles
    python3 scripts/experiments.py weak [--epochs 100]

Each prints a table and, with ``--out``, writes the numbers as JSON.
"""

import argparse
import json
import time

import numpy as np

from lirec.evaluate import eval_interactions, eval_pair_matrix, eval_relationships
from lirec.losses import LossConfig
from lirec.model import Model, ModelConfig
from lirec.synth import GenConfig, generate
from lirec.train import TrainConfig, train

# aliased interactions, half the relationship labels withheld, no
# relationship-specific track signal: interaction labels are the only route
# to the missing relationship supervision
JOINT_GEN = dict(correlation_strength=1.0, rel_feature_scale=0.0, n_movies=20, test_movies=8,
                 relationship_missing_prob=0.5, alias_frac=1.0, noise=0.5,
                 track_class_scale=1.0, reaction_scale=0.0)


def fit(ds, regime, seed, epochs, lr=1e-3, batch=64, loss=None, **model):
    mc = ModelConfig(regime=regime, n_interactions=ds.n_interactions,
                     n_relationships=ds.n_relationships, dims=dict(ds.dims), **model)
    r = train(TrainConfig(model=mc, loss=loss or LossConfig(), lr=lr, batch_size=batch,
                          epochs=epochs, seed=seed), ds)
    return Model(mc), r.params


def modalities(args):
    ds, _ = generate(GenConfig(seed=args.data_seeds[0]))
    out = {}
    for mods in (("visual",), ("dialog",), ("visual", "dialog"), ("visual", "dialog", "tracks")):
        name = "+".join(mods)
        accs = [eval_interactions(*fit(ds, "int", s, args.epochs, modalities=mods), ds)["top1"]
                for s in range(args.seeds)]
        out[name] = float(np.mean(accs))
        print(f"{name:24s} top-1 {out[name]:.3f}", flush=True)
    return out


def joint(args):
    out = {}
    for ds_seed in args.data_seeds:
        ds, _ = generate(GenConfig(seed=ds_seed, **JOINT_GEN))
        row = {}
        for regime in ("rel", "int_rel"):
            accs = [eval_relationships(*fit(ds, regime, s, args.epochs, batch=16), ds,
                                       sizes=(18,))[0][18] for s in range(args.seeds)]
            row[regime] = float(np.mean(accs))
        out[ds_seed] = row
        print(f"data seed {ds_seed}: Rel-only {row['rel']:.3f}  Rel->Int {row['int_rel']:.3f}",
              flush=True)
    return out


def bundles(args):
    ds, _ = generate(GenConfig(seed=args.data_seeds[0]))
    curves = [eval_relationships(*fit(ds, "rel", s, args.epochs), ds)[0]
              for s in range(args.seeds)]
    out = {k: float(np.mean([c[k] for c in curves])) for k in curves[0]}
    for k, v in out.items():
        print(f"{k:3d} clips  {v:.3f}")
    return out


def weak(args):
    ds, _ = generate(GenConfig(seed=args.data_seeds[0]))
    out = {}
    for name, lc in (("full", LossConfig(weak=False)),
                     ("weak multinomial", LossConfig(weak=True, multinomial=True)),
                     ("weak argmax", LossConfig(weak=True, multinomial=False))):
        rs = [eval_pair_matrix(*fit(ds, "int_char", s, args.epochs, loss=lc), ds)
              for s in range(args.seeds)]
        out[name] = {k: float(np.mean([r[k] for r in rs])) for k in
                     ("char_given_int", "int_given_pair", "joint_matrix", "random_char")}
        print(f"{name:18s} char {out[name]['char_given_int']:.3f}  "
              f"joint {out[name]['joint_matrix']:.3f}  "
              f"(random char {out[name]['random_char']:.3f})", flush=True)
    return out


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("experiment", choices=["modalities", "joint", "bundles", "weak"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--seeds", type=int, default=1, help="training seeds to average")
    p.add_argument("--data-seeds", type=int, nargs="+", default=[7])
    p.add_argument("--out", help="write results as JSON here")
    args = p.parse_args()
    if args.epochs is None:
        args.epochs = {"joint": 60, "weak": 100}.get(args.experiment, 30)
    t = time.time()
    res = globals()[args.experiment](args)
    print(f"{time.time() - t:.0f}s")
    if args.out:
        with open(args.out, "w") as f:
            json.dump({"experiment": args.experiment, "epochs": args.epochs,
                       "seeds": args.seeds, "data_seeds": args.data_seeds,
                       "results": res}, f, indent=2)


if __name__ == "__main__":
    main()
