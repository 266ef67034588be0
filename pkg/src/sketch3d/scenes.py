"""Pinned fixture scenes shared by the CLI, notebooks and tests."""

from __future__ import annotations

import numpy as np

from .camera import Camera, orbit_camera
from .curves import RationalBezier3, Sketch

FIG4_SIZE = 128
FIG4_FOCAL = 128.0
# Control points in pixels and their depths: the arcs run from far (top) to
# near (bottom), so their upper crossing with the line is behind it and the
# lower crossing in front.
FIG4_ARC_PIXELS = ((24.0, 16.0), (120.0, 64.0), (24.0, 112.0))
FIG4_ARC_DEPTHS = (3.0, 2.0, 1.0)
FIG4_ARC_WEIGHTS = (0.5, 1.0, 2.0)
FIG4_ARC_COLORS = ((0.9, 0.1, 0.1, 0.6), (0.1, 0.7, 0.1, 0.6), (0.1, 0.2, 0.9, 0.6))
FIG4_LINE_X = 44.0
FIG4_LINE_DEPTH = 2.0
FIG4_LINE_COLOR = (0.15, 0.15, 0.15, 0.7)
FIG4_WIDTH = 6.0


def fig4_camera() -> Camera:
    """Camera at the origin looking down +z; world axes equal camera axes."""
    return Camera(np.eye(3), np.zeros(3), FIG4_FOCAL, FIG4_SIZE, FIG4_SIZE)


def unproject(u: float, v: float, z: float, cam: Camera) -> np.ndarray:
    """World point at depth ``z`` that projects to pixel (u, v)."""
    cx, cy = cam.principal_point
    p_cam = np.array([(u - cx) * z / cam.focal_px, (v - cy) * z / cam.focal_px, z])
    return cam.rotation.T @ (p_cam - cam.translation)


def figure4_scene() -> tuple[Sketch, Camera]:
    """Three quadratic arcs sharing control points but not weights, crossed by a line."""
    cam = fig4_camera()
    arc_pts = np.array([unproject(u, v, z, cam) for (u, v), z in zip(FIG4_ARC_PIXELS, FIG4_ARC_DEPTHS)])
    curves = [
        RationalBezier3(arc_pts, [1.0, w, 1.0], width=FIG4_WIDTH, color=col, user_order=i, id=i)
        for i, (w, col) in enumerate(zip(FIG4_ARC_WEIGHTS, FIG4_ARC_COLORS))
    ]
    line = np.array([unproject(FIG4_LINE_X, 4.0, FIG4_LINE_DEPTH, cam),
                     unproject(FIG4_LINE_X, 124.0, FIG4_LINE_DEPTH, cam)])
    curves.append(RationalBezier3(line, width=FIG4_WIDTH, color=FIG4_LINE_COLOR, user_order=3, id=3))
    return Sketch(curves), cam


GRADCHECK_SHIFT = (0.05, -0.03, 0.0)


def gradcheck_scene() -> tuple[Sketch, Camera]:
    """Two overlapping translucent strokes seen at 32 x 32."""
    cam = orbit_camera(2.0, 0.0, 0.0, 60.0, (32, 32))
    c0 = RationalBezier3(
        [[-0.6, -0.3, 0.1], [-0.2, 0.4, 0.0], [0.2, -0.4, 0.2], [0.6, 0.3, -0.1]],
        width=3.0, color=(0.9, 0.1, 0.1, 0.8), id=0, user_order=0,
    )
    c1 = RationalBezier3(
        [[-0.5, 0.5, -0.3], [0.0, 0.2, 0.3], [0.5, 0.6, 0.0]],
        width=2.5, color=(0.1, 0.2, 0.9, 0.7), id=1, user_order=1,
    )
    return Sketch([c0, c1]), cam


def turntable_cameras(n: int = 8, radius: float = 2.0, elevation_deg: float = 15.0,
                      fov_deg: float = 60.0, image_size=(128, 128)) -> list[Camera]:
    return [orbit_camera(radius, 360.0 * k / n, elevation_deg, fov_deg, image_size) for k in range(n)]


def recovery_scene(seed: int = 1, n_curves: int = 6, sigma: float = 0.05):
    """Ground-truth strokes, their perturbed copy and eight turntable cameras.

    Each stroke runs roughly straight for 0.7 units from a point in the
    cube [-0.6, 0.6]^3, with 0.1 control-point jitter.  Returns
    ``(truth, init, cameras)`` where ``init`` adds Gaussian noise of
    standard deviation ``sigma`` to every control point.
    """
    rng = np.random.default_rng(seed)
    curves = []
    for i in range(n_curves):
        p0 = rng.uniform(-0.6, 0.6, 3)
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        pts = p0 + np.outer(np.linspace(0.0, 1.0, 4), 0.7 * d) + rng.normal(0.0, 0.1, (4, 3))
        curves.append(RationalBezier3(pts, id=i, user_order=i))
    truth = Sketch(curves)
    init = truth.with_points([c.points + rng.normal(0.0, sigma, c.points.shape) for c in truth.curves])
    return truth, init, turntable_cameras()
