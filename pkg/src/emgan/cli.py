"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 non-finite loss,
4 failed check (grad-check above tolerance).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import evaluate, gradcheck, phantom, train
from .errors import DataError, IndexOutOfRange, NonFiniteLoss, ShapeMismatch
from .volume import (
    Volume,
    center_crop,
    export_raw,
    import_raw,
    normalize,
    read_vxv,
    reslice,
    write_vxv,
)

log = logging.getLogger("emgan")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NONFINITE, EXIT_CHECK = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# -- config file -------------------------------------------------------------------

# config-file keys -> (TrainingConfig field, parser)
_TRAIN_KEYS = {
    "task": ("task", str),
    "adversarial": ("adversarial", None),
    "pixel_loss": ("use_pixelwise_loss", None),
    "loss": ("pixel_loss", str),
    "lr": ("lr", float),
    "beta1": ("beta1", float),
    "beta2": ("beta2", float),
    "batch_size": ("batch_size", int),
    "steps": ("max_step", int),
    "lambda_pix": ("lambda_pix", float),
    "patch": ("patch", int),
    "checkpoint_every": ("checkpoint_every", int),
    "seed": ("seed", int),
    "full_volume": ("full_volume", None),
}


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def read_config(path):
    """``key=value`` lines; ``#`` starts a comment; dashes and underscores are interchangeable."""
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _TRAIN_KEYS:
                raise UsageError(f"{path}:{n}: unknown key {key!r}")
            field, conv = _TRAIN_KEYS[key]
            try:
                out[field] = _parse_bool(value) if conv is None else conv(value)
            except ValueError as exc:
                raise UsageError(f"{path}:{n}: bad value for {key}: {exc}") from None
    return out


def training_config(args):
    """Defaults, overridden by the config file, overridden by flags."""
    merged = {}
    if args.config:
        merged.update(read_config(args.config))
    for key, (field, _) in _TRAIN_KEYS.items():
        value = getattr(args, key, None)
        if value is not None:
            merged[field] = value
    if args.baseline:
        merged.setdefault("adversarial", False)
        merged.setdefault("use_pixelwise_loss", True)
    if merged.get("adversarial") is False and "lr" not in merged:
        merged["lr"] = train.BASELINE_LR
    try:
        return train.TrainingConfig(**merged)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# -- subcommands -------------------------------------------------------------------

def cmd_gen_phantom(args):
    z, y, x = args.dims
    if args.averaging:
        v = phantom.make_averaging_volume((z, y, x), args.noise, args.seed, args.scale)
        write_vxv(args.out, v)
        log.info("wrote averaging volume %s", args.out)
        return EXIT_OK
    cfg = phantom.PhantomConfig((z, y, x), args.scale, args.jitter, args.noise, args.drop, args.seed)
    truth = phantom.generate_phantom(cfg)
    phantom.write_truth(args.out, truth)
    log.info("wrote %s", ", ".join(phantom.truth_paths(args.out)))
    return EXIT_OK


def cmd_import_raw(args):
    v = import_raw(args.input, args.dims, args.voxel_size)
    write_vxv(args.out, v)
    return EXIT_OK


def cmd_export_raw(args):
    export_raw(args.out, read_vxv(args.input))
    return EXIT_OK


def cmd_train(args):
    cfg = training_config(args)
    if not args.input:
        raise UsageError("train needs --in")
    volume = read_vxv(args.input)

    def progress(report):
        if args.verbose or report.step % 50 == 0 or report.step == cfg.max_step:
            log.info("step %d  D %.4g  G %.4g  pix %.4g  p_real %.3f  p_fake %.3f", report.step,
                     report.d_loss, report.g_loss, report.pixel_loss, report.p_real, report.p_fake)

    state = train.run_training(cfg, volume, args.out, resume=not args.no_resume, on_step=progress)
    log.info("finished at step %d; checkpoints in %s", state.step, args.out)
    return EXIT_OK


def _generator_path(path):
    return train.latest_generator(path) if os.path.isdir(path) else path


def _zero_slices(data):
    return [k for k in range(1, data.shape[0] - 1) if not np.any(data[k])]


def cmd_infer(args):
    gen = _generator_path(args.ckpt)
    volume = read_vxv(args.input)
    data = volume.data if args.raw_units else normalize(volume).data
    if args.task == "interp":
        ks = args.slices if args.slices is not None else _zero_slices(volume.data)
        if not ks:
            raise UsageError("no --slices given and no all-zero interior slice found")
        out = evaluate.fill_slices(gen, data, ks)
        log.info("filled slices %s", ",".join(map(str, ks)))
    else:
        out = evaluate.infer_volume(args.task, gen, data)
    write_vxv(args.out, Volume(out))
    return EXIT_OK


def cmd_reslice(args):
    v = read_vxv(args.input)
    img = v.data[args.index] if args.plane == "xy" else reslice(v, args.plane, args.index)
    if args.out.endswith(".png"):
        evaluate.export_png(img, args.out)
    else:
        np.save(args.out, img)
    return EXIT_OK


def cmd_eval(args):
    if args.ckpt:
        gen = _generator_path(args.ckpt)
        if args.task == "interp":
            if args.input is None or args.k is None:
                raise UsageError("eval --task interp needs --in and --k")
            print(evaluate.evaluate_interpolation(gen, read_vxv(args.input), args.k))
        elif args.task == "align":
            if not args.truth_prefix:
                raise UsageError("eval --task align needs --truth-prefix")
            inp, out = evaluate.evaluate_alignment(gen, phantom.read_truth(args.truth_prefix))
            print("# input vs clean")
            print(inp)
            print("# output vs clean")
            print(out)
        else:
            raise UsageError("model evaluation supports --task interp and align")
        return EXIT_OK
    if not (args.pred and args.truth):
        raise UsageError("eval needs --pred and --truth (or --ckpt)")
    pred, ref = read_vxv(args.pred).data, read_vxv(args.truth).data
    if args.crop and pred.shape != ref.shape:
        target = tuple(min(a, b) for a, b in zip(pred.shape, ref.shape))
        pred, ref = center_crop(pred, target), center_crop(ref, target)
    print(evaluate.compare(pred, ref))
    return EXIT_OK


def cmd_grad_check(args):
    targets = gradcheck.NETWORKS if args.target == "all" else (args.target,)
    worst = 0.0
    for kind in targets:
        err = gradcheck.check_network(kind, args.seed, args.max_per_tensor)
        print(f"{kind}\t{err:.3e}")
        worst = max(worst, err)
    ok = worst <= args.tol
    print(f"{'PASS' if ok else 'FAIL'}\tworst {worst:.3e} (tolerance {args.tol:g})")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_export_png(args):
    v = read_vxv(args.input)
    if args.plane == "xy":
        if not 0 <= args.index < v.dims[0]:
            raise IndexOutOfRange(f"z index {args.index} outside [0, {v.dims[0]})")
        img = v.data[args.index]
    else:
        img = reslice(v, args.plane, args.index)
    evaluate.export_png(img, args.out)
    return EXIT_OK


# -- parser ------------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="emgan", description="Adversarial restoration of serial-section EM volumes.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--seed", type=int, default=None if name == "train" else 0)
        sp.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
        sp.set_defaults(func=func)
        return sp

    sp = add("gen-phantom", cmd_gen_phantom, "write a synthetic phantom and its ground truth")
    sp.add_argument("--dims", type=int, nargs=3, metavar=("Z", "Y", "X"), default=(64, 64, 64))
    sp.add_argument("--scale", type=float, default=12.0, help="feature wavelength in voxels")
    sp.add_argument("--jitter", type=int, default=2, help="max per-slice offset")
    sp.add_argument("--noise", type=float, default=0.1)
    sp.add_argument("--drop", type=int, default=0, help="number of interior slices to zero")
    sp.add_argument("--averaging", action="store_true",
                    help="write a single volume whose slices average their neighbours")
    sp.add_argument("--out", required=True, help="output prefix (or .vxv path with --averaging)")

    sp = add("import-raw", cmd_import_raw, "convert headerless u8 data to VXV1")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--dims", type=int, nargs=3, metavar=("X", "Y", "Z"), required=True)
    sp.add_argument("--voxel-size", type=float, nargs=3, metavar=("Z", "Y", "X"))
    sp.add_argument("--out", required=True)

    sp = add("export-raw", cmd_export_raw, "convert VXV1 back to headerless u8 (values in [0, 1])")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", required=True)

    sp = add("train", cmd_train, "train a generator (adversarial or pixel-only)")
    sp.add_argument("--config", help="key=value file; flags override it")
    sp.add_argument("--task", choices=train.TASKS)
    sp.add_argument("--adversarial", action=argparse.BooleanOptionalAction, default=None)
    sp.add_argument("--pixel-loss", dest="pixel_loss", action=argparse.BooleanOptionalAction, default=None)
    sp.add_argument("--loss", choices=("l1", "mse"))
    sp.add_argument("--baseline", action="store_true", help="pixel-only regression (lr 0.001 unless set)")
    sp.add_argument("--lr", type=float)
    sp.add_argument("--beta1", type=float)
    sp.add_argument("--beta2", type=float)
    sp.add_argument("--batch-size", type=int)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--lambda-pix", type=float)
    sp.add_argument("--patch", type=int)
    sp.add_argument("--checkpoint-every", type=int)
    sp.add_argument("--full-volume", action=argparse.BooleanOptionalAction, default=None)
    sp.add_argument("--no-resume", action="store_true")
    sp.add_argument("--in", dest="input")
    sp.add_argument("--out", required=True, help="checkpoint directory")

    sp = add("infer", cmd_infer, "run a trained generator")
    sp.add_argument("--task", choices=train.TASKS, required=True)
    sp.add_argument("--ckpt", required=True, help="gen.vxck or a training directory")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--slices", type=lambda s: [int(t) for t in s.split(",")],
                    help="interp: comma-separated slices to fill (default: all-zero slices)")
    sp.add_argument("--raw-units", action="store_true", help="skip input normalization")

    sp = add("reslice", cmd_reslice, "extract an xy, xz or yz plane")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--plane", choices=("xy", "xz", "yz"), required=True)
    sp.add_argument("--index", type=int, required=True)
    sp.add_argument("--out", required=True, help=".png, or .npy for raw values")

    sp = add("eval", cmd_eval, "metrics of a prediction or a trained generator")
    sp.add_argument("--pred")
    sp.add_argument("--truth")
    sp.add_argument("--crop", action="store_true", help="centre-crop both to their common shape")
    sp.add_argument("--ckpt")
    sp.add_argument("--task", choices=train.TASKS, default="interp")
    sp.add_argument("--in", dest="input")
    sp.add_argument("--k", type=int)
    sp.add_argument("--truth-prefix")

    sp = add("grad-check", cmd_grad_check, "finite-difference check of full networks")
    sp.add_argument("--target", choices=gradcheck.NETWORKS + ("all",), default="all")
    sp.add_argument("--max-per-tensor", type=int, default=3)
    sp.add_argument("--tol", type=float, default=1e-4)

    sp = add("export-png", cmd_export_png, "write one plane of a volume as PNG")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--plane", choices=("xy", "xz", "yz"), default="xy")
    sp.add_argument("--index", type=int, required=True)
    sp.add_argument("--out", required=True)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                            format="%(message)s", stream=sys.stderr)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except NonFiniteLoss as exc:
        print(f"emgan: training diverged: {exc}", file=sys.stderr)
        return EXIT_NONFINITE
    except (DataError, ShapeMismatch, OSError) as exc:
        print(f"emgan: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        # invalid parameter combinations rejected by config dataclasses
        print(f"emgan: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
