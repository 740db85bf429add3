import pytest
from hypothesis import given, strategies as st

from mfm.config import KEYS, ConfigError, apply_overrides, defaults, dump_config, parse_config, to_run_config
from mfm.loss import TargetArea
from mfm.masking import MaskShape
from mfm.train import LossKind, RunConfig, Task


def test_defaults_build_default_run():
    run = to_run_config(defaults())
    assert run == RunConfig()


def test_dump_parse_round_trip():
    settings = apply_overrides(defaults(), [("mask.radius", "2:5"), ("loss.gamma", "0.1"),
                                            ("data.seed", "9"), ("model.widths", "4,8")])
    assert parse_config(dump_config(settings)) == settings
    text = dump_config(defaults())
    assert text.splitlines() == sorted(text.splitlines())
    assert len(text.splitlines()) == len(KEYS)


@given(st.floats(1e-6, 10), st.integers(1, 64), st.sampled_from(list(MaskShape)), st.sampled_from(list(Task)))
def test_round_trip_property(gamma, radius, shape, task):
    settings = dict(defaults(), **{"loss.gamma": gamma, "mask.radius": radius, "mask.shape": shape, "task": task})
    assert parse_config(dump_config(settings)) == settings


def test_parse_values():
    s = parse_config("task = DENOISE\nmask.shape = rhombus\nloss.target = full\nloss.kind = l1\n"
                     "mask.radius = auto\n# c\n\ndata.crop_scale = 0.5, 1.0\n")
    assert s["task"] is Task.DENOISE and s["mask.shape"] is MaskShape.RHOMBUS
    assert s["loss.target"] is TargetArea.FULL and s["loss.kind"] is LossKind.L1
    assert s["mask.radius"] is None and s["data.crop_scale"] == (0.5, 1.0)
    run = to_run_config(s)
    assert run.mask.shape is MaskShape.RHOMBUS and run.loss.target_area is TargetArea.FULL


@pytest.mark.parametrize("text", ["nokey\n", "bogus = 1\n", "seed = x\n", "seed = 1\nseed = 2\n",
                                  "task = jpeg\n", "mask.radius = 1:2:3\n"])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


@pytest.mark.parametrize("pair", [("mask.p", "2"), ("optim.warmup_epochs", "30"), ("model.kernel_size", "4"),
                                  ("degrade.blur_kernels", "8")])
def test_semantic_errors(pair):
    with pytest.raises(ConfigError):
        to_run_config(apply_overrides(defaults(), [pair]))
