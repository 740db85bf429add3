import csv
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from mfm import config as cfgmod
from mfm.cli import main
from mfm.masking import MaskKind, MaskShape, build_mask, corrupt_image, sample_filter, MaskConfig
from mfm.model import load_checkpoint
from mfm.netpbm import decode, quantize, read_image, write_image

GOLDEN = Path(__file__).parent / "golden"
sys.path.insert(0, str(GOLDEN))
from make_golden import SCENARIOS, scenario_argv  # noqa: E402


@pytest.mark.parametrize("name,args", SCENARIOS, ids=[s[0] for s in SCENARIOS])
def test_golden_outputs(name, args, tmp_path):
    out = tmp_path / name
    assert main(scenario_argv(args, out)) == 0
    assert out.read_bytes() == (GOLDEN / name).read_bytes()


def test_golden_masks_match_library():
    bits = build_mask(MaskShape.CIRCLE, 4, MaskKind.LOW_PASS, 32, 32).bits
    assert np.array_equal(decode((GOLDEN / "mask_circle_low_32.pgm").read_bytes())[..., 0], bits * 255)
    # 45 lattice points lie strictly inside a radius-4 circle (rows of 5, 7, 7, 7, 7, 7, 5)
    assert bits.sum() == 45
    rh = decode((GOLDEN / "mask_rhombus_high_16x20.pgm").read_bytes())[..., 0]
    assert rh.shape == (16, 20) and (rh == 0).sum() == 13 and rh[8, 10] == 0


def test_golden_corrupt_matches_library():
    color = read_image(GOLDEN / "input_color.ppm")
    expected = quantize(corrupt_image(color, build_mask(MaskShape.SQUARE, 3, MaskKind.HIGH_PASS, 32, 32)))
    assert np.array_equal(decode((GOLDEN / "corrupt_square_high.ppm").read_bytes()), expected)
    gray = read_image(GOLDEN / "input_gray.pgm")
    mask = sample_filter(MaskConfig(radius=2), np.random.default_rng(7), 24, 24)
    got = decode((GOLDEN / "corrupt_random_seed7.pgm").read_bytes())
    assert np.array_equal(got, quantize(corrupt_image(gray, mask)))


def test_mask_r1_pixel(tmp_path):
    out = tmp_path / "m.pgm"
    assert main(["mask", str(out), "--radius", "1", "--size", "4"]) == 0
    assert out.read_bytes() == b"P5\n4 4\n255\n" + bytes(10) + b"\xff" + bytes(5)


def test_degrade_tasks_and_spectrum(tmp_path):
    src = GOLDEN / "input_color.ppm"
    for task in ("sr", "deblur", "denoise"):
        out, spec = tmp_path / f"{task}.ppm", tmp_path / f"{task}_spec.pgm"
        assert main(["degrade", str(src), str(out), "--task", task, "--scale", "4", "--seed", "1",
                     "--spectrum", str(spec)]) == 0
        assert decode(out.read_bytes()).shape == (32, 32, 3)
        assert decode(spec.read_bytes()).shape == (32, 32, 1)
    assert main(["spectrum", str(src), str(tmp_path / "s.pgm")]) == 0
    spec = decode((tmp_path / "s.pgm").read_bytes())[..., 0]
    assert spec[16, 16] == 255  # DC dominates a nonnegative image


def test_seed_env_fallback(tmp_path, monkeypatch):
    src = str(GOLDEN / "input_color.ppm")
    monkeypatch.setenv("MFM_SEED", "5")
    assert main(["degrade", src, str(tmp_path / "a.ppm"), "--task", "denoise"]) == 0
    assert main(["degrade", src, str(tmp_path / "b.ppm"), "--task", "denoise", "--seed", "5"]) == 0
    assert (tmp_path / "a.ppm").read_bytes() == (tmp_path / "b.ppm").read_bytes()
    monkeypatch.setenv("MFM_SEED", "nope")
    assert main(["degrade", src, str(tmp_path / "c.ppm"), "--task", "denoise"]) == 2


def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"P2\n1 1\n255\n0")
    out = str(tmp_path / "o.pgm")
    assert main(["corrupt", str(bad), out]) == 3
    assert main(["corrupt", str(tmp_path / "missing.pgm"), out]) == 3
    assert main(["degrade", str(GOLDEN / "input_gray.pgm"), out, "--task", "sr", "--scale", "64"]) == 3
    assert main(["degrade", str(GOLDEN / "input_gray.pgm"), out, "--task", "deblur", "--kernel", "4"]) == 2
    assert main(["corrupt", str(GOLDEN / "input_gray.pgm"), out, "--radius", "0"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["mask", out, "--radius", "2", "--size", "4", "--bogus"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_config_dump_and_load(tmp_path, capsys, monkeypatch):
    assert main(["config", "dump", "--mask.radius", "3", "--optim.epochs", "5"]) == 0
    text = capsys.readouterr().out
    assert "mask.radius = 3\n" in text and "optim.epochs = 5\n" in text
    path = tmp_path / "run.cfg"
    path.write_text("# comment\n" + text)
    assert main(["config", "load", str(path)]) == 0
    assert capsys.readouterr().out == text
    import io
    monkeypatch.setattr(sys, "stdin", io.StringIO("task = sr\n"))
    assert main(["config", "load"]) == 0
    assert "task = sr\n" in capsys.readouterr().out
    path.write_text("mask.radius = 0\n")
    assert main(["config", "load", str(path)]) == 2
    assert main(["config", "dump", "--nope", "1"]) == 2
    assert main(["config", "dump", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_pretrain_and_probe(tmp_path, capsys):
    run_dir = tmp_path / "run"
    args = ["pretrain", "--out-dir", str(run_dir), "--optim.epochs", "2", "--optim.warmup_epochs", "0",
            "--data.n_per_class", "2", "--data.image_size", "8", "--model.widths", "4,4", "--seed", "3"]
    assert main(args) == 0
    out = capsys.readouterr().out
    assert out.count("epoch ") == 2
    settings = cfgmod.parse_config((run_dir / "config.txt").read_text())
    assert settings["seed"] == 3 and settings["model.widths"] == (4, 4)
    model = load_checkpoint(run_dir / "checkpoint.bin")
    assert model.config.widths == (4, 4) and model.config.seed == 3
    assert (run_dir / "loss.csv").read_text().startswith("epoch,step,lr,loss\n")

    report = tmp_path / "probe.csv"
    assert main(["probe", "--checkpoint", str(run_dir / "checkpoint.bin"), "--seed", "1", "--n-per-class", "5",
                 "--image-size", "8", "--out", str(report), "--label", "mfm"]) == 0
    assert main(["probe", "--checkpoint", str(run_dir / "checkpoint.bin"), "--seed", "1", "--n-per-class", "5",
                 "--image-size", "8", "--out", str(report), "--onehot-features"]) == 0
    rows = list(csv.reader(open(report)))
    assert rows[0] == ["seed", "task", "accuracy"]
    assert rows[1][:2] == ["1", "mfm"]
    assert rows[2] == ["1", "checkpoint", "1.000000"]
    assert main(["probe", "--checkpoint", str(tmp_path / "probe.csv")]) == 3


def test_numeric_failure_exit(tmp_path):
    args = ["pretrain", "--out-dir", str(tmp_path / "r"), "--optim.epochs", "2", "--optim.warmup_epochs", "0",
            "--data.n_per_class", "1", "--data.image_size", "8", "--model.widths", "2",
            "--optim.peak_lr", "1e300", "--optim.clip_norm", "0"]
    with np.errstate(all="ignore"):
        assert main(args) == 4


def test_console_entry_point(tmp_path):
    out = tmp_path / "m.pgm"
    proc = subprocess.run([sys.executable, "-m", "mfm.cli", "mask", str(out), "--radius", "2", "--size", "8"],
                          capture_output=True)
    assert proc.returncode == 0, proc.stderr
    assert decode(out.read_bytes()).shape == (8, 8, 1)


def test_write_image_grayscale_path(tmp_path):
    write_image(tmp_path / "g.pgm", np.full((2, 2, 1), 0.5))
    assert (tmp_path / "g.pgm").read_bytes() == b"P5\n2 2\n255\n" + bytes([128]) * 4
