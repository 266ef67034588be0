"""Score distillation with a stand-in noise predictor.

A real text-to-image model is out of scope, so a mock predictor stands
in.  The ``pull_toward`` mock returns the noise that would turn the
noisy render into a fixed target image.  Its distillation gradient is
then proportional to the difference between render and target, so the
fit should move the stroke toward the target.  Run:

    python notebooks/04_score_distillation.py
"""

import numpy as np

from sketch3d import FitConfig, RenderConfig, Sketch, fit_sds, mock_noise_predictor, orbit_camera, render
from sketch3d.distill import DiffusionSchedule, anneal_bounds
from sketch3d.scenes import gradcheck_scene

# The timestep range narrows linearly, then stays fixed.
for step in (0, 900, 1800, 3600, 3999):
    lo, hi = anneal_bounds(step)
    print(f"step {step:4d}: t in [{lo:.3f}, {hi:.3f}]")
sched = DiffusionSchedule()
print("alpha_bar at t=0.2, 0.5, 0.8:", [round(sched.alpha_bar(t), 4) for t in (0.2, 0.5, 0.8)])

sketch = Sketch(gradcheck_scene()[0].curves[:1])
cam = orbit_camera(2.0, 0.0, 10.0, 60.0, (32, 32))
goal = sketch.with_points([sketch.curves[0].points + [0.06, -0.04, 0.0]])
target = render(goal, cam, RenderConfig(16)).pixels[..., :3]


def distance(s):
    return float(np.linalg.norm(render(s, cam, RenderConfig(16)).pixels[..., :3] - target))


cfg = FitConfig(n_curves=1, loss="sds", total_steps=300, dnd_start=300, spp=16, n_boundary_samples=128)
rep = fit_sds(mock_noise_predictor("pull_toward", target), None, cfg, sketch, cam)
print(f"image distance to target {distance(sketch):.3f} -> {distance(rep.sketch):.3f}")
