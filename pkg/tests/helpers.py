import numpy as np


def disk_mask(side, radius, cx=None, cy=None):
    cx = side / 2 if cx is None else cx
    cy = side / 2 if cy is None else cy
    yy, xx = np.mgrid[0:side, 0:side]
    return (xx + 0.5 - cx) ** 2 + (yy + 0.5 - cy) ** 2 <= radius**2


SMALL_CONFIG = """\
# desk-scale corpus: 1 µm detection grid keeps the low-res slides >= 512
seed = 7
det_mpp = 1.0
patch_size = 512
patch_count = 2
ladder = 512,256,128,64,32,28
synth.n_slides = 2
synth.objects_per_slide = 5
synth.slide_side = 3072
synth.side_min = 512
synth.side_max = 600
"""


def run_chain(main, root, config_text=SMALL_CONFIG, backend="threshold", jobs=1, stages=None, extra=()):
    """Run the CLI stages under ``root``; returns ``{stage: directory}``."""
    root.mkdir(parents=True, exist_ok=True)
    cfg = root / "run.cfg"
    cfg.write_text(config_text)
    dirs = {name: root / name for name in ("synth", "tile", "crop", "segment", "eval", "stats")}
    prev = None
    for name in stages or dirs:
        argv = [name, "--config", str(cfg), "--out", str(dirs[name]), "--jobs", str(jobs), *extra]
        if prev is not None:
            argv += ["--in", str(dirs[prev])]
        if name == "segment":
            argv += ["--backend", backend]
        code = main(argv)
        if code != 0:
            raise AssertionError(f"stage {name} exited with {code}")
        prev = name
    return dirs
