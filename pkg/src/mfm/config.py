"""``key = value`` run configuration files.

Keys are dotted paths such as ``mask.shape`` or ``optim.peak_lr``. Lines
starting with ``#`` are comments. Every key has a default, unknown keys are
rejected, and :func:`dump_config` writes a sorted canonical form that parses
back to the same settings.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

from mfm.degradations import DegradeConfig
from mfm.loss import LossConfig, TargetArea
from mfm.masking import MaskConfig, MaskShape
from mfm.model import ModelConfig
from mfm.train import LossKind, RunConfig, Task


class ConfigError(ValueError):
    pass


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _float_pair(text: str) -> tuple[float, float]:
    lo, hi = (float(v) for v in text.split(","))
    return lo, hi


def _radius(text: str):
    if text == "auto":
        return None
    if ":" in text:
        lo, hi = text.split(":")
        return int(lo), int(hi)
    return int(text)


def _fmt_radius(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, tuple):
        return f"{value[0]}:{value[1]}"
    return str(value)


def _opt_int(text: str):
    return None if text == "auto" else int(text)


def _enum(cls):
    return lambda text: cls(text.lower())


@dataclass(frozen=True)
class Key:
    default: Any
    parse: Callable[[str], Any]
    fmt: Callable[[Any], str] = str
    doc: str = ""


_floats = dict(parse=float, fmt=repr)
_ints = ",".join
_enum_fmt = lambda e: e.value  # noqa: E731

KEYS: dict[str, Key] = {
    "task": Key(Task.MFM, _enum(Task), _enum_fmt, "mfm | sr | deblur | denoise | none"),
    "seed": Key(0, int, doc="run seed (model init, shuffling, augmentation, corruption)"),
    "data.n_per_class": Key(200, int, doc="images per class in the synthetic set"),
    "data.image_size": Key(32, int, doc="square image side in pixels"),
    "data.seed": Key(None, _opt_int, _fmt_radius, "dataset seed, or auto to reuse the run seed"),
    "data.crop_scale": Key((0.6, 1.0), _float_pair, lambda v: f"{v[0]!r},{v[1]!r}", "crop area range"),
    "data.flip_p": Key(0.5, **_floats, doc="horizontal flip probability"),
    "mask.shape": Key(MaskShape.CIRCLE, _enum(MaskShape), _enum_fmt, "circle | square | rhombus"),
    "mask.radius": Key(None, _radius, _fmt_radius, "auto | R | LO:HI"),
    "mask.p": Key(0.5, **_floats, doc="probability of a low-pass filter"),
    "loss.kind": Key(LossKind.FREQ, _enum(LossKind), _enum_fmt, "freq | l1 | l2"),
    "loss.gamma": Key(1.0, **_floats, doc="frequency distance exponent"),
    "loss.epsilon": Key(1e-8, **_floats, doc="gradient dead zone for gamma < 2"),
    "loss.target": Key(TargetArea.MASKED, _enum(TargetArea), _enum_fmt, "masked | full"),
    "degrade.sr_scale": Key(8, int, doc="bicubic down/up scale factor"),
    "degrade.blur_sigma": Key(5.0, **_floats, doc="Gaussian blur std in pixels"),
    "degrade.blur_kernels": Key((7, 9, 11, 13, 15, 17, 19, 21), _int_list,
                                lambda v: ",".join(map(str, v)), "odd kernel sizes to draw from"),
    "degrade.noise_sigma": Key(75.0, **_floats, doc="Gaussian noise std in 0-255 units"),
    "model.in_channels": Key(3, int, doc="1 or 3"),
    "model.widths": Key((16, 32, 32), _int_list, lambda v: ",".join(map(str, v)), "encoder widths"),
    "model.kernel_size": Key(3, int, doc="odd conv kernel size"),
    "optim.epochs": Key(30, int),
    "optim.batch_size": Key(64, int),
    "optim.peak_lr": Key(3e-3, **_floats),
    "optim.warmup_epochs": Key(2, int),
    "optim.weight_decay": Key(0.05, **_floats),
    "optim.beta1": Key(0.9, **_floats),
    "optim.beta2": Key(0.95, **_floats),
    "optim.eps": Key(1e-8, **_floats),
    "optim.clip_norm": Key(3.0, **_floats, doc="global gradient norm cap (0 disables)"),
}


def defaults() -> dict[str, Any]:
    return {k: spec.default for k, spec in KEYS.items()}


def parse_value(key: str, text: str) -> Any:
    if key not in KEYS:
        raise ConfigError(f"unknown key {key!r}")
    try:
        return KEYS[key].parse(text.strip())
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from exc


def parse_config(text: str, base: dict[str, Any] | None = None) -> dict[str, Any]:
    """Parse config text on top of ``base`` (defaults if None)."""
    settings = dict(defaults() if base is None else base)
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        settings[key] = parse_value(key, value)
    return settings


def apply_overrides(settings: dict[str, Any], pairs: list[tuple[str, str]]) -> dict[str, Any]:
    out = dict(settings)
    for key, value in pairs:
        out[key] = parse_value(key, value)
    return out


def dump_config(settings: dict[str, Any]) -> str:
    return "".join(f"{key} = {KEYS[key].fmt(settings[key])}\n" for key in sorted(settings))


def to_run_config(settings: dict[str, Any]) -> RunConfig:
    s = settings
    try:
        return RunConfig(
            task=s["task"],
            seed=s["seed"],
            epochs=s["optim.epochs"],
            batch_size=s["optim.batch_size"],
            peak_lr=s["optim.peak_lr"],
            warmup_epochs=s["optim.warmup_epochs"],
            weight_decay=s["optim.weight_decay"],
            betas=(s["optim.beta1"], s["optim.beta2"]),
            adam_eps=s["optim.eps"],
            clip_norm=s["optim.clip_norm"],
            n_per_class=s["data.n_per_class"],
            image_size=s["data.image_size"],
            data_seed=s["data.seed"],
            crop_scale=s["data.crop_scale"],
            flip_p=s["data.flip_p"],
            loss_kind=s["loss.kind"],
            mask=MaskConfig(s["mask.shape"], s["mask.radius"], s["mask.p"]),
            loss=LossConfig(s["loss.gamma"], s["loss.epsilon"], s["loss.target"]),
            degrade=DegradeConfig(sr_scale=s["degrade.sr_scale"], blur_sigma=s["degrade.blur_sigma"],
                                  blur_kernel_choices=s["degrade.blur_kernels"],
                                  noise_sigma=s["degrade.noise_sigma"]),
            model=ModelConfig(s["model.in_channels"], s["model.widths"], s["model.kernel_size"], s["seed"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
