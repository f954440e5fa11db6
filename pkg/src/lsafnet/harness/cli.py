"""Command line entry point: gen-synthetic, train, eval, predict, ablate.

Every command takes ``--config FILE`` (YAML; either flat or with a section named
after the command, ``ablate`` falling back to ``train``) and repeated
``--set key=value`` overrides. The resolved
config is written next to the command's outputs.
"""

import argparse
import logging
from pathlib import Path
import sys

from ..data import PALETTE_FILE, Palette, gen_synthetic, load_dataset
from ..errors import LSAFNetError
from .ablate import ablate, format_table
from .checkpoint import load_checkpoint, model_from_checkpoint
from .config import EvalConfig, PredictConfig, SyntheticConfig, TrainConfig, build_config, write_config
from .evaluate import evaluate, predict_samples
from .render import render
from .train import train


def _cmd_gen_synthetic(args):
    cfg = build_config(SyntheticConfig, args.config, args.set, "gen-synthetic")
    out = gen_synthetic(cfg.out_dir, cfg.seed, cfg.count, cfg.size, cfg.num_classes, cfg.change_fraction)
    write_config(cfg, out, "synthetic_config.yaml")
    samples = load_dataset(out)
    print(f"wrote {len(samples)} samples to {out}")


def _cmd_train(args):
    cfg = build_config(TrainConfig, args.config, args.set, "train")
    result = train(cfg, resume=args.resume)
    print(f"last checkpoint: {result.last_checkpoint}")
    print(f"best checkpoint: {result.best_checkpoint}")
    print(f"log: {result.log_path}")


def _cmd_eval(args):
    cfg = build_config(EvalConfig, args.config, args.set, "eval")
    report = evaluate(cfg.checkpoint, cfg.data_root, cfg.threshold, cfg.shards, cfg.batch_size, cfg.oracle)
    text = report.to_text()
    if cfg.out_dir:
        write_config(cfg, cfg.out_dir, "eval_config.yaml")
        Path(cfg.out_dir, "report.txt").write_text(text + "\n")
    print(text)


def _cmd_predict(args):
    cfg = build_config(PredictConfig, args.config, args.set, "predict")
    state = load_checkpoint(cfg.checkpoint)
    model = model_from_checkpoint(state)
    palette = Palette.from_json(Path(cfg.data_root) / PALETTE_FILE)
    samples = load_dataset(cfg.data_root, palette)
    write_config(cfg, cfg.out_dir, "predict_config.yaml")
    preds = predict_samples(model, samples, cfg.threshold, cfg.batch_size)
    for sample, (m1, m2, mask) in zip(samples, preds):
        render(m1, m2, mask, palette, cfg.out_dir, sample.stem)
    print(f"rendered {len(samples)} predictions to {cfg.out_dir}")


def _cmd_ablate(args):
    cfg = build_config(TrainConfig, args.config, args.set, ("ablate", "train"))
    rows = ablate(cfg)
    print(format_table(rows), end="")


def build_parser():
    parser = argparse.ArgumentParser(prog="lsafnet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "gen-synthetic": _cmd_gen_synthetic,
        "train": _cmd_train,
        "eval": _cmd_eval,
        "predict": _cmd_predict,
        "ablate": _cmd_ablate,
    }
    for name, fn in commands.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (repeatable, dotted keys for nested maps)")
        if name == "train":
            p.add_argument("--resume", help="checkpoint to resume from")
        p.set_defaults(func=fn)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except LSAFNetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
