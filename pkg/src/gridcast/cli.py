"""Command-line entry point.

Subcommands: convert, mask, tda, predict, ensemble, score, folds, pipeline.
Exit codes: 0 ok, 2 config, 3 shape, 4 file format, 5 alignment,
6 protocol, 7 pipeline stage, 1 anything else.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import dataset, predictors, roadmap, tda
from .ensemble import AGGREGATORS, ensemble
from .errors import (
    AlignmentError,
    ConfigError,
    GridcastError,
    PipelineError,
    ProtocolError,
    ShapeError,
    TensorFormatError,
)
from .evaluate import format_report, report_to_json, score_run
from .manifest import load_manifest
from .pipeline import plan_stages, read_input_set, run_pipeline, validate_manifest
from .tensorio import (
    Tensor,
    read_movie,
    read_prediction_set,
    read_tensor,
    write_prediction_set,
    write_tensor,
)

_EXIT_CODES = (
    (ConfigError, 2),
    (ShapeError, 3),
    (TensorFormatError, 4),
    (AlignmentError, 5),
    (ProtocolError, 6),
    (PipelineError, 7),
)


def _cmd_convert(args) -> int:
    src, dst = Path(args.src), Path(args.dst)
    if src.suffix == ".npy" and dst.suffix == ".t4gr":
        arr = np.load(src)
        if arr.dtype not in (np.uint8, np.float32):
            raise ConfigError(f"{src}: dtype {arr.dtype} is not u8/f32; cast it first")
        write_tensor(Tensor(arr), dst)
    elif src.suffix == ".t4gr" and dst.suffix == ".npy":
        np.save(dst, read_tensor(src).data)
    else:
        raise ConfigError("convert handles .npy <-> .t4gr only")
    print(f"wrote {dst}")
    return 0


def _cmd_mask(args) -> int:
    if args.action == "build":
        movies = [read_movie(p) for p in args.inputs]
        mask = roadmap.build_mask(movies)
    elif args.action == "union":
        if len(args.inputs) < 2:
            raise ConfigError("mask union needs at least two mask files")
        masks = [roadmap.import_external_mask(p) for p in args.inputs]
        mask = masks[0]
        for other in masks[1:]:
            mask = roadmap.union_masks(mask, other)
    else:  # apply
        ps = read_prediction_set(args.pred)
        mask = roadmap.import_external_mask(args.mask)
        write_prediction_set(roadmap.apply_mask(ps, mask), args.out)
        print(f"wrote {args.out}")
        return 0
    roadmap.export_mask(mask, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_tda(args) -> int:
    if args.action == "fit":
        train = [read_movie(p) for p in args.train]
        test = [read_movie(p) for p in args.test_movies]
        for p in args.test_inputs:
            inputs = read_input_set(p)
            from .pipeline import _inputs_as_movie

            test.append(_inputs_as_movie(inputs, Path(p).stem))
        lam = tda.compute_lambda(
            tda.mean_map(train, year_label="train"),
            tda.mean_map(test, year_label="test"),
        )
        tda.write_lambda(lam, args.out)
    elif args.action == "apply":
        lam = tda.read_lambda(args.lam)
        t = read_tensor(args.src)
        write_tensor(tda.apply_lambda(t, lam, quantize=args.quantize_u8), args.out)
    else:  # invert
        lam = tda.read_lambda(args.lam)
        ps = read_prediction_set(args.src)
        out = tda.apply_inverse_lambda(ps, lam, quantize=args.quantize_u8)
        write_prediction_set(out, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_predict(args) -> int:
    inputs = read_input_set(args.inputs)
    spec = inputs.spec
    if args.kind == "persistence":
        rows = [
            predictors.predict_persistence(
                Tensor(inputs.values.data[i]), t_out=spec.t_out, channels=spec.channels
            ).data
            for i in range(len(inputs.slots))
        ]
        values = Tensor(np.stack(rows))
    elif args.kind == "historical_mean":
        if not args.train:
            raise ConfigError("historical_mean needs --train movie files")
        mean = tda.mean_map([read_movie(p) for p in args.train], year_label="train")
        frame = predictors.predict_historical_mean(mean, t_out=spec.t_out)
        values = Tensor(
            np.broadcast_to(frame.data, (len(inputs.slots),) + frame.dims).copy()
        )
    else:  # external
        if not args.protocol_dir:
            raise ConfigError("external predictor needs --protocol-dir")
        ps = predictors.run_external(inputs.slots, args.protocol_dir, spec)
        write_prediction_set(ps, args.out)
        print(f"wrote {args.out}")
        return 0
    from .tensorio import PredictionSet

    write_prediction_set(
        PredictionSet(spec=spec, slots=inputs.slots, values=values), args.out
    )
    print(f"wrote {args.out}")
    return 0


def _cmd_ensemble(args) -> int:
    members = [read_prediction_set(p) for p in args.members]
    out = ensemble(members, aggregator=args.agg)
    write_prediction_set(out, args.out)
    print(f"wrote {args.out}")
    return 0


def _collect_sets(path_arg: str) -> dict[str, str]:
    path = Path(path_arg)
    if path.is_dir():
        return {p.stem: str(p) for p in sorted(path.glob("*.t4gr"))}
    return {path.stem: str(path)}


def _cmd_score(args) -> int:
    pred_paths = _collect_sets(args.pred)
    target_paths = _collect_sets(args.target)
    if len(pred_paths) == 1 and len(target_paths) == 1:
        # two single files score as one city regardless of filenames
        city = next(iter(pred_paths))
        target_paths = {city: next(iter(target_paths.values()))}
    preds = {}
    for city, p in pred_paths.items():
        ps = read_prediction_set(p)
        if args.mask:
            mask = roadmap.import_external_mask(args.mask)
            ps = roadmap.apply_mask(ps, mask)
        preds[city] = ps
    targets = {
        city: read_prediction_set(p, preds[city].spec if city in preds else None)
        for city, p in target_paths.items()
    }
    report = score_run(preds, targets, masked=bool(args.mask))
    sys.stdout.write(format_report(report))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(format_report(report))
        (out / "report.json").write_text(report_to_json(report))
    return 0


def _cmd_folds(args) -> int:
    samples = []
    for p in args.movies:
        samples.extend(dataset.enumerate_samples(read_movie(p)))
    split = dataset.make_folds(samples, seed=args.seed)
    Path(args.out).write_text(split.to_text())
    print(f"wrote {args.out} ({len(samples)} samples)")
    return 0


def _cmd_pipeline(args) -> int:
    manifest = load_manifest(args.manifest)
    if args.seed is not None:
        from dataclasses import replace

        manifest = replace(manifest, seed=args.seed)
    root = Path(args.manifest).resolve().parent
    if args.dry_run:
        validate_manifest(manifest, root)
        for line in plan_stages(manifest):
            print(line)
        return 0
    report = run_pipeline(manifest, root=root)
    if report is not None:
        sys.stdout.write(format_report(report))
    print(f"artifacts in {root / manifest.output_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridcast",
        description="Traffic-grid forecasting pipeline toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert .npy <-> .t4gr")
    p.add_argument("src")
    p.add_argument("dst")
    p.set_defaults(fn=_cmd_convert)

    p = sub.add_parser("mask", help="build, union, or apply road masks")
    mask_sub = p.add_subparsers(dest="action", required=True)
    b = mask_sub.add_parser("build", help="mask from movie files")
    b.add_argument("inputs", nargs="+", metavar="movie.t4gr")
    b.add_argument("-o", "--out", required=True)
    b.set_defaults(fn=_cmd_mask)
    u = mask_sub.add_parser("union", help="OR several mask files")
    u.add_argument("inputs", nargs="+", metavar="mask.t4gr")
    u.add_argument("-o", "--out", required=True)
    u.set_defaults(fn=_cmd_mask)
    a = mask_sub.add_parser("apply", help="multiply mask onto a prediction set")
    a.add_argument("--pred", required=True)
    a.add_argument("--mask", required=True)
    a.add_argument("-o", "--out", required=True)
    a.set_defaults(fn=_cmd_mask)

    p = sub.add_parser("tda", help="fit or apply domain-scaling maps")
    tda_sub = p.add_subparsers(dest="action", required=True)
    f = tda_sub.add_parser("fit", help="fit lambda from train and test data")
    f.add_argument("--train", nargs="+", required=True, metavar="movie.t4gr")
    f.add_argument("--test-movies", nargs="*", default=[], metavar="movie.t4gr")
    f.add_argument("--test-inputs", nargs="*", default=[], metavar="inputs.t4gr")
    f.add_argument("-o", "--out", required=True)
    f.set_defaults(fn=_cmd_tda)
    ap = tda_sub.add_parser("apply", help="multiply a tensor file by lambda")
    ap.add_argument("src")
    ap.add_argument("lam", metavar="lambda.t4gr")
    ap.add_argument("-o", "--out", required=True)
    ap.add_argument("--quantize-u8", action="store_true")
    ap.set_defaults(fn=_cmd_tda)
    inv = tda_sub.add_parser("invert", help="multiply a prediction set by 1/lambda")
    inv.add_argument("src")
    inv.add_argument("lam", metavar="lambda.t4gr")
    inv.add_argument("-o", "--out", required=True)
    inv.add_argument("--quantize-u8", action="store_true")
    inv.set_defaults(fn=_cmd_tda)

    p = sub.add_parser("predict", help="run a baseline or collect external predictions")
    p.add_argument("--kind", choices=[k.value for k in predictors.PredictorKind], required=True)
    p.add_argument("--inputs", required=True, metavar="inputs.t4gr")
    p.add_argument("--train", nargs="*", default=[], metavar="movie.t4gr")
    p.add_argument("--protocol-dir")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(fn=_cmd_predict)

    p = sub.add_parser("ensemble", help="aggregate prediction sets")
    p.add_argument("members", nargs="+", metavar="pred.t4gr")
    p.add_argument("--agg", choices=AGGREGATORS, default="mean")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(fn=_cmd_ensemble)

    p = sub.add_parser("score", help="MSE report for predictions vs targets")
    p.add_argument("--pred", required=True, help="prediction set file or directory")
    p.add_argument("--target", required=True, help="target set file or directory")
    p.add_argument("--mask", help="optional mask applied to predictions first")
    p.add_argument("--out", help="directory for report.txt/report.json")
    p.set_defaults(fn=_cmd_score)

    p = sub.add_parser("folds", help="seeded 4-fold sample split manifest")
    p.add_argument("movies", nargs="+", metavar="movie.t4gr")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(fn=_cmd_folds)

    p = sub.add_parser("pipeline", help="run a manifest end to end")
    p.add_argument("manifest")
    p.add_argument("--dry-run", action="store_true")
    p.add_argument("--seed", type=int, help="override the manifest seed")
    p.set_defaults(fn=_cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except GridcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for klass, code in _EXIT_CODES:
            if isinstance(exc, klass):
                return code
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
