"""Command-line front end.

Commands: augment, preview, stats, bench, probe.  Every command is a pure
function of (input files, flags, seed): rerunning reproduces byte-identical
outputs.  Exit codes: 0 success, 1 usage, 2 format, 3 I/O, 4 gate violation.

Flags may also be supplied through a JSON file (``--config``) whose keys
mirror flag destinations; explicit flags win over file values, and unknown
keys are rejected.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import augment as aug_mod
from . import compositor as comp
from . import dataset as ds
from . import evalstats as ev
from .errors import FormatError
from .image import ConstantNoise, GaussianNoise, UniformNoise
from .rng import derive_image_streams


class UsageError(Exception):
    pass


class GateViolation(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse's own failures to exit code 1
        raise UsageError(message)


def _sub(subparsers, name, help_text):
    return subparsers.add_parser(
        name, help=help_text,
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)


AUG_CHOICES = list(aug_mod.KINDS)
PREVIEW_AUGS = ["hflip", "vflip", "jitter", "erasing", "cutout", "grid",
                "randaug", "autoaug"]


def _add_common(parser):
    parser.add_argument("--config", help="JSON file of flag defaults")
    parser.add_argument("--seed", type=int, default=0,
                        help="global seed")


def _add_aug_flags(parser):
    parser.add_argument("--aug", choices=AUG_CHOICES, default="hflip",
                        help="augmentation kind")
    parser.add_argument("--apply-probability", type=float, default=None,
                        help="override the kind's default apply probability")
    parser.add_argument("--jitter-brightness", type=float, default=0.4)
    parser.add_argument("--jitter-contrast", type=float, default=0.4)
    parser.add_argument("--jitter-saturation", type=float, default=0.4)
    parser.add_argument("--jitter-hue", type=float, default=0.1)
    parser.add_argument("--erase-scale", type=float, nargs=2,
                        default=[0.02, 0.4], metavar=("LO", "HI"))
    parser.add_argument("--erase-ratio", type=float, nargs=2,
                        default=[0.3, 3.3], metavar=("LO", "HI"))
    parser.add_argument("--cutout-area", type=float, default=0.25,
                        help="cutout mask area fraction")
    parser.add_argument("--grid-rows", type=int, default=4)
    parser.add_argument("--grid-cols", type=int, default=4)
    parser.add_argument("--randaug-n", type=int, default=2,
                        help="randaug op count")
    parser.add_argument("--randaug-m", type=float, default=9,
                        help="randaug magnitude on 0-30")
    parser.add_argument("--policy-file",
                        help="auto-augmentation policy table file "
                             "(default: bundled 25-sub-policy table)")


def _add_yona_flags(parser, default_on: bool):
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--yona", dest="yona", action="store_true",
                       help="compose through the half-masking pipeline")
    group.add_argument("--no-yona", dest="yona", action="store_false")
    parser.set_defaults(yona=default_on)
    parser.add_argument("--mask-fraction", type=float, default=0.5,
                        help="masked fraction of the cut axis")
    parser.add_argument("--noise", default="uniform",
                        help="uniform | constant:V | gaussian:MEAN,STD")
    parser.add_argument("--axis-policy", default="random",
                        choices=["random", "height", "width"])
    parser.add_argument("--masked-piece", default="random",
                        choices=["random", "first", "second"])
    parser.add_argument("--region-reference", default="piece",
                        choices=["piece", "image"],
                        help="dims used by region augs on a piece")


def build_parser():
    parser = _Parser(prog="yona",
                     description="Deterministic patch-masking augmentation "
                                 "engine")
    subs = parser.add_subparsers(dest="command", metavar="COMMAND")
    table = {}

    p = _sub(subs, "augment", "emit an augmented dataset")
    p.add_argument("--dataset", required=True, help="CIFAR binary batch file")
    p.add_argument("--variant", choices=[ds.CIFAR10, ds.CIFAR100],
                   default=ds.CIFAR10)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=1)
    _add_aug_flags(p)
    _add_yona_flags(p, default_on=True)
    _add_common(p)
    p.set_defaults(func=cmd_augment)
    table["augment"] = p

    p = _sub(subs, "preview", "write original/augmented/composited PNG grids")
    p.add_argument("--image", action="append", default=[],
                   help="input PNG (repeatable)")
    p.add_argument("--dataset", help="CIFAR batch file to draw images from")
    p.add_argument("--variant", choices=[ds.CIFAR10, ds.CIFAR100],
                   default=ds.CIFAR10)
    p.add_argument("--count", type=int, default=1,
                   help="number of dataset images")
    p.add_argument("--out", required=True)
    p.add_argument("--augs", nargs="+", default=PREVIEW_AUGS,
                   choices=AUG_CHOICES)
    _add_yona_flags(p, default_on=True)
    _add_common(p)
    p.set_defaults(func=cmd_preview)
    table["preview"] = p

    p = _sub(subs, "stats", "empirical pipeline statistics")
    p.add_argument("--dataset", required=True)
    p.add_argument("--variant", choices=[ds.CIFAR10, ds.CIFAR100],
                   default=ds.CIFAR10)
    p.add_argument("--n", type=int, default=10_000,
                   help="sample count")
    p.add_argument("--report", help="also write the report to this file")
    p.add_argument("--gate-axis-low", type=float)
    p.add_argument("--gate-axis-high", type=float)
    p.add_argument("--gate-masked-low", type=float)
    p.add_argument("--gate-masked-high", type=float)
    _add_aug_flags(p)
    _add_yona_flags(p, default_on=True)
    _add_common(p)
    p.set_defaults(func=cmd_stats)
    table["stats"] = p

    p = _sub(subs, "bench", "throughput of plain vs composited augmentation")
    p.add_argument("--iterations", type=int, default=10_000)
    p.add_argument("--dims", default="3x32x32", help="image dims CxHxW")
    p.add_argument("--report", help="also write the report to this file")
    p.add_argument("--gate-ratio", type=float,
                   help="fail (exit 4) if ratio exceeds this bound")
    _add_aug_flags(p)
    _add_yona_flags(p, default_on=True)
    _add_common(p)
    p.set_defaults(func=cmd_bench)
    table["bench"] = p

    p = _sub(subs, "probe", "train the linear probe end to end")
    p.add_argument("--dataset", required=True)
    p.add_argument("--variant", choices=[ds.CIFAR10, ds.CIFAR100],
                   default=ds.CIFAR10)
    p.add_argument("--train-count", type=int, default=1000)
    p.add_argument("--eval-count", type=int, default=0)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--calibration-bins", type=int, default=15)
    p.add_argument("--gate-loss-decrease", action="store_true",
                   help="fail (exit 4) unless final loss < initial loss")
    _add_aug_flags(p)
    _add_yona_flags(p, default_on=False)
    _add_common(p)
    p.set_defaults(func=cmd_probe)
    table["probe"] = p

    return parser, table


def _build_spec(args, forced_probability: float | None = None
                ) -> aug_mod.AugmentationSpec:
    overrides = {}
    probability = getattr(args, "apply_probability", None)
    if probability is None:
        probability = forced_probability
    if probability is not None:
        overrides["apply_probability"] = probability
    policy = None
    if getattr(args, "policy_file", None):
        policy = aug_mod.load_policy(args.policy_file)
    return aug_mod.AugmentationSpec(
        kind=args.aug,
        brightness=args.jitter_brightness,
        contrast=args.jitter_contrast,
        saturation=args.jitter_saturation,
        hue=args.jitter_hue,
        erase_scale=tuple(args.erase_scale),
        erase_ratio=tuple(args.erase_ratio),
        cutout_area_fraction=args.cutout_area,
        grid_rows=args.grid_rows,
        grid_cols=args.grid_cols,
        randaug_num_ops=args.randaug_n,
        randaug_magnitude=args.randaug_m,
        policy=policy,
        **overrides)


def _parse_noise(text: str):
    if text == "uniform":
        return UniformNoise()
    if text.startswith("constant:"):
        return ConstantNoise(int(text.split(":", 1)[1]))
    if text.startswith("gaussian:"):
        mean, _, std = text.split(":", 1)[1].partition(",")
        return GaussianNoise(float(mean), float(std))
    raise UsageError(f"cannot parse noise spec {text!r}")


def _build_yona(args) -> comp.YonaConfig | None:
    if not args.yona:
        return None
    return comp.YonaConfig(mask_fraction=args.mask_fraction,
                           axis_policy=args.axis_policy,
                           noise=_parse_noise(args.noise),
                           masked_piece_policy=args.masked_piece,
                           region_reference=args.region_reference)


# --------------------------------------------------------------------------
# Commands

def cmd_augment(args) -> None:
    records = ds.read_cifar(args.dataset, args.variant)
    manifest = ds.write_augmented_dataset(
        records, _build_spec(args), _build_yona(args), args.seed, args.out,
        variant=args.variant, workers=args.workers)
    sys.stdout.write(manifest.to_text())


def cmd_preview(args) -> None:
    images = [ds.read_png(path) for path in args.image]
    if args.dataset:
        records = ds.read_cifar(args.dataset, args.variant)
        images.extend(r.image for r in records[:args.count])
    if not images:
        raise UsageError("preview needs --image and/or --dataset")
    yona_config = _build_yona(args) or comp.YonaConfig()
    os.makedirs(args.out, exist_ok=True)
    index_lines = []
    for i, image in enumerate(images):
        for j, kind in enumerate(args.augs):
            spec = aug_mod.default_spec(kind)
            row = i * len(args.augs) + j
            _, augment, _ = derive_image_streams(args.seed, row)
            augmented = aug_mod.apply_augmentation(spec, image, augment)
            structure, augment, noise = derive_image_streams(args.seed, row)
            composed = comp.yona_apply(image, spec, yona_config, structure,
                                       augment, noise)
            names = []
            for column, img in (("original", image), ("augmented", augmented),
                                ("yona", composed)):
                name = f"img{i:03d}_{kind}_{column}.png"
                ds.write_png(img, os.path.join(args.out, name))
                names.append(name)
            index_lines.append(
                f"image {i} aug {kind} seed {args.seed}: " + " ".join(names))
    with open(os.path.join(args.out, "index.txt"), "w",
              encoding="utf-8") as fh:
        fh.write("\n".join(index_lines) + "\n")
    print(f"wrote {len(images) * len(args.augs) * 3} PNG files to {args.out}")


def cmd_stats(args) -> None:
    records = ds.read_cifar(args.dataset, args.variant)
    report = ev.collect_stats(records, _build_spec(args), _build_yona(args),
                              args.seed, args.n)
    sys.stdout.write(report.to_text())
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(report.to_text())
    _check_bound("axis_height_frequency", report.axis_height_frequency,
                 args.gate_axis_low, args.gate_axis_high)
    _check_bound("masked_fraction_mean", report.masked_fraction_mean,
                 args.gate_masked_low, args.gate_masked_high)


def _check_bound(name, value, low, high) -> None:
    if low is not None and value < low:
        raise GateViolation(f"{name}={value:.4f} below bound {low}")
    if high is not None and value > high:
        raise GateViolation(f"{name}={value:.4f} above bound {high}")


def cmd_bench(args) -> None:
    try:
        dims = tuple(int(d) for d in args.dims.lower().split("x"))
        if len(dims) != 3:
            raise ValueError
    except ValueError:
        raise UsageError(f"cannot parse --dims {args.dims!r}, want CxHxW")
    # benchmark work, not coin luck: force application unless overridden
    spec = _build_spec(args, forced_probability=1.0)
    result = ev.benchmark_throughput(spec, _build_yona(args)
                                     or comp.YonaConfig(),
                                     image_dims=dims,
                                     n_iterations=args.iterations,
                                     seed=args.seed)
    sys.stdout.write(result.to_text())
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(result.to_text())
    if args.gate_ratio is not None and result.ratio > args.gate_ratio:
        raise GateViolation(
            f"ratio={result.ratio:.3f} above bound {args.gate_ratio}")


def cmd_probe(args) -> None:
    if args.train_count < 1:
        raise UsageError("--train-count must be at least 1")
    records = ds.read_cifar(args.dataset, args.variant)
    if len(records) < args.train_count + args.eval_count:
        raise UsageError(
            f"dataset holds {len(records)} records, need "
            f"{args.train_count + args.eval_count}")
    train = records[:args.train_count]
    spec = _build_spec(args) if args.aug != "identity" else None
    model, losses = ev.train_linear_probe(
        train, spec, _build_yona(args), args.epochs, args.lr, args.momentum,
        args.batch_size, args.seed)
    for epoch, loss in enumerate(losses):
        print(f"epoch_loss_{epoch}={loss:.6f}")
    train_preds = ev.evaluate_probe(model, train)
    accuracy = sum(p.correct for p in train_preds) / len(train_preds)
    print(f"train_accuracy={accuracy:.4f}")
    if args.eval_count > 0:
        held_out = records[args.train_count:args.train_count + args.eval_count]
        preds = ev.evaluate_probe(model, held_out)
        accuracy = sum(p.correct for p in preds) / len(preds)
        print(f"eval_accuracy={accuracy:.4f}")
        if len(preds) >= args.calibration_bins:
            err = ev.rms_calibration_error(preds, args.calibration_bins)
            print(f"rms_calibration_error_percent={err:.4f}")
    if args.gate_loss_decrease and not losses[-1] < losses[0]:
        raise GateViolation(
            f"final loss {losses[-1]:.6f} did not improve on initial "
            f"{losses[0]:.6f}")


# --------------------------------------------------------------------------
# Entry

def _merge_config_file(args, parser_table, argv) -> argparse.Namespace:
    path = args.config
    with open(path, "r", encoding="utf-8") as fh:
        try:
            values = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})")
    if not isinstance(values, dict):
        raise FormatError(f"{path}: config must be a JSON object")
    sub = parser_table[args.command]
    known = {a.dest for a in sub._actions}
    unknown = set(values) - known
    if unknown:
        raise UsageError(
            f"{path}: unknown config keys {sorted(unknown)}")
    sub.set_defaults(**values)
    return sub.parse_args(argv[1:])


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, table = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "command", None) is None:
            raise UsageError("a command is required "
                             "(augment|preview|stats|bench|probe)")
        if getattr(args, "config", None):
            args = _merge_config_file(args, table, argv)
            args.func = table[argv[0]].get_default("func")
        args.func(args)
        return 0
    except FormatError as exc:  # FormatError subclasses ValueError
        print(f"format error: {exc}", file=sys.stderr)
        return 2
    except (UsageError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except GateViolation as exc:
        print(f"gate violated: {exc}", file=sys.stderr)
        return 4


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
