"""Recovering perturbed strokes from eight rendered views.

The ground truth is rendered from a turntable of eight cameras.  The
fit starts from the same strokes with noisy control points and runs Adam
on positions only, a random batch of views per step.  The full run in
the test suite uses 500 steps; this one is shorter.  Run:

    python notebooks/03_multiview_recovery.py [out_dir] [steps]
"""

import sys
from pathlib import Path

import numpy as np

from sketch3d import FitConfig, RenderConfig, fit_multiview, render
from sketch3d.io import export_step, write_png
from sketch3d.scenes import recovery_scene

out = Path(sys.argv[1] if len(sys.argv) > 1 else "notebook_out")
steps = int(sys.argv[2]) if len(sys.argv) > 2 else 150
out.mkdir(parents=True, exist_ok=True)

truth, init, cams = recovery_scene()
cfg = FitConfig(n_curves=len(truth), total_steps=steps, dnd_start=steps, spp=16, lr=0.002)
rc = RenderConfig(cfg.spp, seed=cfg.render_seed)
targets = [(render(truth, cam, rc), cam) for cam in cams]


def point_error(sketch):
    return float(np.mean([np.linalg.norm(a.points - b.points, axis=1).mean()
                          for a, b in zip(sketch.curves, truth.curves)]))


print(f"initial mean control-point error {point_error(init):.4f}")
rep = fit_multiview(targets, cfg, init)
print(f"loss {rep.losses[0]:.3e} -> {rep.losses[-1]:.3e} in {rep.steps} steps, {rep.wall_clock:.1f}s")
print(f"final mean control-point error {point_error(rep.sketch):.4f}")

for k in (0, 2):
    write_png(render(init, cams[k], rc), out / f"recovery_init_{k}.png")
    write_png(render(rep.sketch, cams[k], rc), out / f"recovery_fit_{k}.png")
    write_png(targets[k][0], out / f"recovery_target_{k}.png")
export_step(rep.sketch, out / "recovery.step")
