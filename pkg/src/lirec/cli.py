"""``lirec`` command line: generate, train, eval, gradcheck, inspect.

Exit codes: 0 success, 1 validation or usage error, 2 runtime failure.
"""

import argparse
import hashlib
import json
import logging
import os
import sys

from . import __version__
from .checkpoint import CheckpointError
from .config import RunConfig, apply_overrides
from .config import load as load_config
from .data import DatasetError, load_dataset, write_dataset
from .synth import ConfigError, generate, save_truth

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
INVALID = (ConfigError, DatasetError, CheckpointError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _run_config(args):
    base = load_config(args.config).to_dict() if args.config else RunConfig().to_dict()
    sets = list(args.set or [])
    for flag, key in (("seed", "seed"), ("epochs", "train.epochs"), ("lr", "train.lr"),
                      ("regime", "train.model.regime")):
        v = getattr(args, flag, None)
        if v is not None:
            sets.append(f"{key}={json.dumps(v)}")
    cfg = RunConfig.from_dict(apply_overrides(base, sets))
    if getattr(args, "weak", False):
        cfg.train.loss.weak = True
    cfg.validate()
    return cfg


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _finish_run(out, command, cfg=None, extra=None):
    """Echo config, seed and code version, then list every produced file."""
    run = {"command": command, "code_version": __version__, "argv": sys.argv[1:]}
    if cfg is not None:
        run["seed"] = cfg.seed
        run["config"] = cfg.to_dict()
    run.update(extra or {})
    with open(os.path.join(out, "run.json"), "w") as f:
        json.dump(run, f, indent=2, sort_keys=True)
    files = {}
    for root, _, names in os.walk(out):
        for n in sorted(names):
            p = os.path.join(root, n)
            rel = os.path.relpath(p, out)
            if rel != "run_manifest.json":
                files[rel] = _sha256(p)
    with open(os.path.join(out, "run_manifest.json"), "w") as f:
        json.dump({"files": dict(sorted(files.items()))}, f, indent=2)


def cmd_generate(args):
    cfg = _run_config(args)
    ds, truth = generate(cfg.gen)
    write_dataset(ds, args.out)
    save_truth(truth, os.path.join(args.out, "truth.json"))
    _finish_run(args.out, "generate", cfg)
    print(f"wrote {len(ds.movies)} movies, {len(ds.clips)} clips to {args.out}")
    return EXIT_OK


def cmd_train(args):
    from .evaluate import evaluate
    from .train import resume, train

    cfg = _run_config(args)
    ds = load_dataset(args.data)
    os.makedirs(args.out, exist_ok=True)

    def eval_fn(model, params, epoch):
        rep = evaluate(model, params, ds, cfg.eval.split, cfg.eval.bundle_cap,
                       tuple(cfg.eval.sweep))
        return rep.to_dict()

    if args.resume:
        res = resume(args.resume, cfg.train, ds, args.out, eval_fn)
    else:
        res = train(cfg.train, ds, args.out, eval_fn)
    _finish_run(args.out, "train", cfg, {"data": os.path.abspath(args.data)})
    last = res.log.records[-1]["loss"] if res.log.records else float("nan")
    print(f"trained to epoch {res.epoch}; final loss {last:.6f}; checkpoint {res.checkpoint}")
    return EXIT_OK


def cmd_eval(args):
    from .evaluate import evaluate
    from .model import Model
    from .train import load_checkpoint

    params, _, epoch, tcfg = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.data)
    model = Model(tcfg.model)
    sweep = tuple(range(1, args.cap + 1))
    rep = evaluate(model, params, ds, args.split, args.cap, sweep)
    out = os.path.dirname(os.path.abspath(args.report))
    os.makedirs(out, exist_ok=True)
    rep.write(args.report)
    stem = os.path.splitext(args.report)[0]
    if rep.relationship_sweep is not None:
        rep.write_sweep_csv(stem + "_sweep.csv")
    rep.write_confusion_csv(stem + "_confusion.csv")
    _finish_run(out, "eval", extra={"checkpoint": os.path.abspath(args.checkpoint),
                                    "epoch": epoch, "split": args.split})
    print(json.dumps(rep.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_gradcheck(args):
    from .gradcheck import CASES, check_case

    worst = 0.0
    for case in CASES:
        err = max(check_case(case, args.seed + i) for i in range(args.instances))
        worst = max(worst, err)
        print(f"{case.label:28s} {err:.3e}")
    print(f"max relative error {worst:.3e}")
    return EXIT_OK if worst < 1e-4 else EXIT_RUNTIME


def cmd_inspect(args):
    path = args.path
    if os.path.isfile(path):
        from .checkpoint import load

        params, opt, step, meta = load(path)
        print(f"checkpoint {path}: step {step}, epoch {meta.get('epoch')}")
        for k, v in params.items():
            print(f"  {k:32s} {tuple(v.shape)}")
        return EXIT_OK
    ds = load_dataset(path)
    chars = sum(len(m.characters) for m in ds.movies)
    print(f"movies        {len(ds.movies)}")
    print(f"characters    {chars}")
    print(f"clips         {len(ds.clips)}")
    print(f"interactions  {ds.n_interactions}")
    print(f"relationships {ds.n_relationships}")
    print(f"bundles       {len(ds.bundles)}")
    for split in sorted({m.split for m in ds.movies}):
        print(f"split {split:8s}{len(ds.clip_indices(split))} clips")
    return EXIT_OK


def build_parser():
    p = _Parser(prog="lirec", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_config(sp):
        sp.add_argument("--config", help="JSON run config")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key, e.g. train.loss.lam=1.0")

    g = sub.add_parser("generate", help="write a synthetic dataset")
    with_config(g)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train a model")
    with_config(t)
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--epochs", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--regime")
    t.add_argument("--weak", action="store_true", help="latent-pair supervision")
    t.add_argument("--resume", help="checkpoint to continue from")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--report", required=True)
    e.add_argument("--split", default="test")
    e.add_argument("--cap", type=int, default=18)
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("gradcheck", help="finite-difference check of every loss")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--instances", type=int, default=20)
    c.set_defaults(func=cmd_gradcheck)

    i = sub.add_parser("inspect", help="summarise a dataset directory or checkpoint")
    i.add_argument("path")
    i.set_defaults(func=cmd_inspect)
    return p


def _limit_threads():
    n = os.environ.get("LIREC_THREADS")
    if not n:
        return None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(int(n))


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    _limit_threads()
    try:
        return args.func(args)
    except INVALID as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:  # noqa: BLE001
        print(f"runtime failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
