"""Regenerate the CLI golden files. Run from any directory: python tests/golden/make_golden.py

Only rerun when an output format or algorithm changes on purpose; the test
suite byte-compares against the committed files.
"""

from pathlib import Path

import numpy as np

from mfm.cli import main
from mfm.data import fractal_noise, generate_dataset
from mfm.netpbm import write_image

HERE = Path(__file__).resolve().parent

# (output name, argv after the subcommand's input/output paths)
SCENARIOS = [
    ("mask_circle_low_32.pgm", ["mask", "{out}", "--shape", "circle", "--radius", "4", "--kind", "low",
                                "--size", "32"]),
    ("mask_rhombus_high_16x20.pgm", ["mask", "{out}", "--shape", "rhombus", "--radius", "3", "--kind", "high",
                                     "--size", "16", "--width", "20"]),
    ("corrupt_square_high.ppm", ["corrupt", "{color}", "{out}", "--shape", "square", "--radius", "3",
                                 "--kind", "high"]),
    ("corrupt_random_seed7.pgm", ["corrupt", "{gray}", "{out}", "--kind", "random", "--seed", "7"]),
    ("degrade_deblur_seed3.ppm", ["degrade", "{color}", "{out}", "--task", "deblur", "--sigma", "2",
                                  "--seed", "3"]),
]


def make_inputs():
    write_image(HERE / "input_color.ppm", fractal_noise(32, np.random.default_rng(0)))
    write_image(HERE / "input_gray.pgm", generate_dataset(1, 24, seed=0, channels=1).images[6])


def scenario_argv(args, out):
    subs = {"out": str(out), "color": str(HERE / "input_color.ppm"), "gray": str(HERE / "input_gray.pgm")}
    return [a.format(**subs) for a in args]


if __name__ == "__main__":
    make_inputs()
    for name, args in SCENARIOS:
        assert main(scenario_argv(args, HERE / name)) == 0
        print("wrote", name)
