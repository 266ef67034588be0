"""Gradients of an image loss with respect to 3D control points.

The backward pass adds two parts.  The interior term differentiates the
colour of every sample that lands inside a stroke.  The boundary term
integrates the colour jump across each stroke edge, which carries the
whole position gradient for a solid stroke.  Here both are compared with
central finite differences of a Monte Carlo loss.  Run:

    python notebooks/02_gradients.py
"""

import numpy as np

from sketch3d import GradImage, RenderConfig, backward, render
from sketch3d.grad import BoundarySampleConfig, gradcheck
from sketch3d.scenes import GRADCHECK_SHIFT, gradcheck_scene

sketch, cam = gradcheck_scene()
shift = np.array(GRADCHECK_SHIFT)

# One backward pass against a shifted copy of the scene.
target = render(sketch.with_points([c.points + shift for c in sketch.curves]), cam, RenderConfig(64, seed=1))
rc = RenderConfig(16, seed=0)
img = render(sketch, cam, rc)
upstream = GradImage(2.0 * (img.pixels - target.pixels) / img.pixels.size)
buf = backward(sketch, cam, upstream, BoundarySampleConfig(512, seed=0), rc)
for c, g in zip(sketch.curves, buf.curves):
    step = -g.points3d.sum(axis=0)
    print(f"curve {c.id}: summed descent direction {np.round(step / np.linalg.norm(step), 3)} "
          f"(shift direction {np.round(shift / np.linalg.norm(shift), 3)})")

# The full check averages 64 seeds at spp 256.  With 8 seeds few or no
# components clear the noise floor; max |z| in the last line should stay a few units.
rep = gradcheck(sketch, cam, shift, n_seeds=8, spp=64, target_spp=256)
print(rep.summary())
