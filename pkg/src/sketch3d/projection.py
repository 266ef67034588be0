"""Perspective projection of 3D rational curves to 2D rational curves.

A 3D rational Bezier seen through a pinhole camera is again a rational
Bezier in the image plane, with control points projected individually and
each weight multiplied by the camera-space depth of its control point.
"""

from __future__ import annotations

import numpy as np

from .camera import Camera, world_to_camera
from .curves import BINOM, RationalBezier2, RationalBezier3


class BehindCamera(ValueError):
    """A point or control point is not in front of the near plane."""


def project_point(p, focal_px: float, principal_point=(0.0, 0.0), near_z: float = 1e-3) -> np.ndarray:
    """Project camera-space point(s) to pixel coordinates."""
    p = np.asarray(p, dtype=np.float64)
    z = p[..., 2]
    if np.any(z <= near_z):
        raise BehindCamera(f"depth {np.min(z)} is not beyond near plane {near_z}")
    xy = focal_px * p[..., :2] / z[..., None]
    return xy + np.asarray(principal_point, dtype=np.float64)


def project_curve(curve: RationalBezier3, cam: Camera) -> RationalBezier2:
    cam_pts = world_to_camera(cam, curve.points)
    pts2 = project_point(cam_pts, cam.focal_px, cam.principal_point, cam.near_z)
    depths = cam_pts[:, 2]
    return RationalBezier2(
        pts2,
        curve.weights * depths,
        curve.weights,
        depths,
        width=curve.width,
        color=curve.color,
        user_order=curve.user_order,
        id=curve.id,
    )


def depth_at(curve: RationalBezier2, t) -> np.ndarray | float:
    """Camera-space depth of the source 3D curve at parameter ``t``.

    Equals sum(B w_adj) / sum(B w_src), i.e. the depth-weighted average of
    the control depths under the rational basis.
    """
    t = np.asarray(t, dtype=np.float64)
    n = curve.degree
    tt = t[..., None]
    i = np.arange(n + 1)
    basis = BINOM[n, : n + 1] * tt**i * (1.0 - tt) ** (n - i)
    z = (basis @ curve.weights) / (basis @ curve.src_weights)
    return float(z) if z.ndim == 0 else z
