"""Command-line front end.

Exit codes: 0 success, 2 usage or config error, 3 data/format error,
4 numeric failure (non-finite values).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from mfm import config as cfgmod
from mfm.data import generate_dataset
from mfm.degradations import degrade_blur, degrade_noise, degrade_sr
from mfm.masking import (DimensionMismatchError, MaskConfig, MaskKind, MaskShape, build_mask,
                         corrupt_image, default_radius, sample_filter)
from mfm.model import CheckpointError, load_checkpoint
from mfm.netpbm import NetpbmError, encode, quantize, read_image, write_image
from mfm.probe import ProbeConfig, append_probe_report, extract_features, linear_probe
from mfm.spectral import image_spectrum, log_power_map
from mfm.train import NumericError, pretrain

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class UsageError(Exception):
    pass


def _default_seed() -> int:
    env = os.environ.get("MFM_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"MFM_SEED must be an integer, got {env!r}") from None


def _seed(args) -> int:
    return _default_seed() if args.seed is None else args.seed


def _check_finite(image: np.ndarray) -> None:
    if not np.all(np.isfinite(image)):
        raise NumericError("non-finite pixel values")


def _spectrum_pixels(image: np.ndarray) -> np.ndarray:
    """8-bit log-power map of the channel-averaged, DC-centered spectrum."""
    gray = image.mean(axis=-1, keepdims=True)
    return quantize(log_power_map(image_spectrum(gray)[0]))


def _write_outputs(args, image: np.ndarray) -> None:
    _check_finite(image)
    write_image(args.output, image)
    if args.spectrum:
        Path(args.spectrum).write_bytes(encode(_spectrum_pixels(image)))


def cmd_mask(args) -> int:
    width = args.width or args.size
    mask = build_mask(MaskShape(args.shape), args.radius, MaskKind(args.kind), args.size, width)
    Path(args.output).write_bytes(encode((mask.bits * 255).astype(np.uint8)))
    return 0


def cmd_corrupt(args) -> int:
    image = read_image(args.input)
    h, w = image.shape[:2]
    radius = args.radius if args.radius is not None else default_radius(h, w)
    if radius < 1:
        raise UsageError(f"radius must be >= 1, got {radius}")
    if args.kind == "random":
        rng = np.random.default_rng(_seed(args))
        mask = sample_filter(MaskConfig(MaskShape(args.shape), radius, args.p), rng, h, w)
    else:
        mask = build_mask(MaskShape(args.shape), radius, MaskKind(args.kind), h, w)
    _write_outputs(args, corrupt_image(image, mask))
    return 0


def cmd_degrade(args) -> int:
    image = read_image(args.input)
    rng = np.random.default_rng(_seed(args))
    if args.task == "sr":
        out = degrade_sr(image, args.scale)
    elif args.task == "deblur":
        kernels = (args.kernel,) if args.kernel else (7, 9, 11, 13, 15, 17, 19, 21)
        if any(k < 3 or k % 2 == 0 for k in kernels):
            raise UsageError("blur kernel size must be odd and >= 3")
        sigma = 5.0 if args.sigma is None else args.sigma
        out = degrade_blur(image, sigma, rng, kernels)
    else:
        sigma = 75.0 if args.sigma is None else args.sigma
        out = degrade_noise(image, sigma, rng)
    _write_outputs(args, out)
    return 0


def cmd_spectrum(args) -> int:
    image = read_image(args.input)
    _check_finite(image)
    Path(args.output).write_bytes(encode(_spectrum_pixels(image)))
    return 0


def _parse_overrides(extra: list[str]) -> list[tuple[str, str]]:
    pairs = []
    it = iter(extra)
    for token in it:
        if not token.startswith("--"):
            raise UsageError(f"unexpected argument {token!r}")
        key = token[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            value = next(it, None)
            if value is None:
                raise UsageError(f"missing value for {token}")
        pairs.append((key, value))
    return pairs


def _load_settings(args, extra: list[str]) -> dict:
    base = cfgmod.defaults()
    base["seed"] = _default_seed()
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        base = cfgmod.parse_config(text, base)
    return cfgmod.apply_overrides(base, _parse_overrides(extra))


def cmd_pretrain(args, extra) -> int:
    settings = _load_settings(args, extra)
    run = cfgmod.to_run_config(settings)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.txt").write_text(cfgmod.dump_config(settings), encoding="utf-8")

    def report(epoch, loss, lr):
        print(f"epoch {epoch + 1}/{run.epochs} loss {loss:.6f} lr {lr:.6g}", flush=True)

    pretrain(run, checkpoint_path=out_dir / "checkpoint.bin", history_path=out_dir / "loss.csv",
             on_epoch=report)
    return 0


def cmd_probe(args) -> int:
    seed = _seed(args)
    model = load_checkpoint(args.checkpoint)
    ds = generate_dataset(args.n_per_class, args.image_size, seed, model.config.in_channels)
    if args.onehot_features:
        feats = np.eye(int(ds.labels.max()) + 1)[ds.labels]
    else:
        feats = extract_features(model, ds.images)
    acc = linear_probe(feats, ds.labels, ProbeConfig())
    label = args.label or Path(args.checkpoint).stem
    print(f"accuracy {acc:.6f}")
    if args.out:
        append_probe_report(args.out, seed, label, acc)
    return 0


def cmd_config(args, extra) -> int:
    """``dump`` prints effective settings; ``load`` validates a file (or stdin) and prints its canonical form."""
    extra = list(extra)
    if args.action == "load":
        source = extra.pop(0) if extra and not extra[0].startswith("--") else args.config
        if source is None or source == "-":
            base = cfgmod.defaults()
            base["seed"] = _default_seed()
            settings = cfgmod.apply_overrides(cfgmod.parse_config(sys.stdin.read(), base),
                                              _parse_overrides(extra))
        else:
            args.config = source
            settings = _load_settings(args, extra)
    else:
        settings = _load_settings(args, extra)
    cfgmod.to_run_config(settings)
    sys.stdout.write(cfgmod.dump_config(settings))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfm", description="Masked frequency modeling toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    shapes = [s.value for s in MaskShape]

    p = sub.add_parser("mask", help="write a frequency mask as PGM (255 = kept)")
    p.add_argument("output")
    p.add_argument("--shape", choices=shapes, default="circle")
    p.add_argument("--radius", type=int, required=True)
    p.add_argument("--kind", choices=["low", "high"], default="low")
    p.add_argument("--size", type=int, required=True, help="height (and width unless --width)")
    p.add_argument("--width", type=int)

    p = sub.add_parser("corrupt", help="low-/high-pass filter a PGM/PPM image")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--shape", choices=shapes, default="circle")
    p.add_argument("--radius", type=int, help="default scales 16 px at 224 to the image size")
    p.add_argument("--kind", choices=["low", "high", "random"], default="low")
    p.add_argument("--p", type=float, default=0.5, help="low-pass probability for --kind random")
    p.add_argument("--seed", type=int)
    p.add_argument("--spectrum", help="also write the log-power spectrum of the result")

    p = sub.add_parser("degrade", help="apply SR, blur or noise degradation")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--task", choices=["sr", "deblur", "denoise"], required=True)
    p.add_argument("--scale", type=int, default=8)
    p.add_argument("--sigma", type=float, help="blur std in pixels, or noise std in 0-255 units")
    p.add_argument("--kernel", type=int, help="force one blur kernel size")
    p.add_argument("--seed", type=int)
    p.add_argument("--spectrum")

    p = sub.add_parser("spectrum", help="write the log-power spectrum of an image")
    p.add_argument("input")
    p.add_argument("output")

    p = sub.add_parser("pretrain", help="run pre-training; extra --key value pairs override the config")
    p.add_argument("--config")
    p.add_argument("--out-dir", default="run")

    p = sub.add_parser("probe", help="linear-probe a checkpoint on the toy dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--seed", type=int, help="dataset seed")
    p.add_argument("--n-per-class", type=int, default=250)
    p.add_argument("--image-size", type=int, default=32)
    p.add_argument("--out", help="CSV report to append to")
    p.add_argument("--label", help="task column of the report")
    p.add_argument("--onehot-features", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("config", help="dump or validate a run config")
    p.add_argument("action", choices=["dump", "load"])
    p.add_argument("--config", help="config file (load also accepts it positionally, default stdin)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command in ("pretrain", "config"):
            return (cmd_pretrain if args.command == "pretrain" else cmd_config)(args, extra)
        if extra:
            parser.error(f"unrecognized arguments: {' '.join(extra)}")
        handler = {"mask": cmd_mask, "corrupt": cmd_corrupt, "degrade": cmd_degrade,
                   "spectrum": cmd_spectrum, "probe": cmd_probe}[args.command]
        return handler(args)
    except (UsageError, cfgmod.ConfigError) as exc:
        print(f"mfm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NetpbmError, DimensionMismatchError, CheckpointError, OSError, ValueError) as exc:
        print(f"mfm: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, FloatingPointError) as exc:
        print(f"mfm: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
