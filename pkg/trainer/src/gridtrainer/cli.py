"""Command-line entry point: train on T4GR movies, infer to the
prediction-file protocol."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import load_config
from .data import MovieStore, batch_iterator, split_samples
from .infer import infer_to_protocol
from .t4gr import T4grError, read_slot_inputs
from .train import DivergenceError, evaluate, load_checkpoint, save_checkpoint, train
from .unet import TrainConfig, TrainerConfigError


def _cmd_train(args) -> int:
    cfg = load_config(args.config) if args.config else TrainConfig()
    if args.steps is not None:
        cfg = replace(cfg, steps=args.steps)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    store = MovieStore.load(args.movies, t_in=cfg.in_channels // _channels(args.movies))
    train_samples, val_samples = split_samples(store, args.folds)
    batches = batch_iterator(store, train_samples, cfg.batch_size, cfg.seed)
    val = None
    if val_samples:
        val_iter = batch_iterator(store, val_samples, cfg.batch_size, cfg.seed + 1)
        val = [next(val_iter) for _ in range(max(1, len(val_samples) // cfg.batch_size))]
    result = train(batches, cfg, val_batches=val, log=print)
    if result.best_state is not None:
        result.model.load_state_dict(result.best_state)
    save_checkpoint(result.model, args.out, step=cfg.steps)
    last = result.losses[-1] if result.losses else float("nan")
    print(f"saved {args.out}  (final loss {last:.6f}"
          + (f", best val {result.best_val_loss:.6f})" if result.best_val_loss is not None else ")"))
    return 0


def _channels(store_paths) -> int:
    from .t4gr import read_movie

    frames, _, _ = read_movie(store_paths[0])
    return frames.shape[1]


def _cmd_infer(args) -> int:
    model = load_checkpoint(args.checkpoint)
    values, slots = read_slot_inputs(args.inputs)
    written = infer_to_protocol(model, values, slots, args.protocol_dir)
    print(f"wrote {len(written)} prediction files to {args.protocol_dir}")
    return 0


def _cmd_eval(args) -> int:
    model = load_checkpoint(args.checkpoint)
    store = MovieStore.load(args.movies, t_in=model.cfg.in_channels // _channels(args.movies))
    samples, _ = split_samples(store, None)
    batches = batch_iterator(store, samples, model.cfg.batch_size, seed=0)
    n_batches = max(1, len(samples) // model.cfg.batch_size)
    loss = evaluate(model, [next(batches) for _ in range(n_batches)])
    print(f"mse {loss:.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridtrainer", description="Reference U-Net trainer for traffic grids."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on T4GR movies")
    p.add_argument("movies", nargs="+", metavar="movie.t4gr")
    p.add_argument("--config", help="[trainer] config file")
    p.add_argument("--folds", help="fold manifest; fold 0 becomes validation")
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--out", required=True, metavar="checkpoint.pt")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("infer", help="write protocol prediction files")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--inputs", required=True, metavar="inputs.t4gr")
    p.add_argument("--protocol-dir", required=True)
    p.set_defaults(fn=_cmd_infer)

    p = sub.add_parser("eval", help="MSE of a checkpoint over movie samples")
    p.add_argument("movies", nargs="+", metavar="movie.t4gr")
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(fn=_cmd_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (TrainerConfigError, T4grError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
