"""Pinhole camera model and the randomized orbit sampler.

Conventions (a choice, not derived from anything upstream):

* world space is right-handed with +y up;
* camera space is right-handed with +x right, +y down and +z pointing from
  the camera into the scene, so visible points have z > 0;
* pixel coordinates start at the top-left image corner with y down; pixel
  ``(i, j)`` covers ``[i, i+1) x [j, j+1)`` and its center is ``(i+0.5, j+0.5)``;
* the principal point is the image center ``(W/2, H/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True, eq=False)
class Camera:
    rotation: np.ndarray
    translation: np.ndarray
    focal_px: float
    image_width: int
    image_height: int
    near_z: float = 1e-3

    def __post_init__(self):
        R = np.array(self.rotation, dtype=np.float64)
        T = np.array(self.translation, dtype=np.float64)
        if R.shape != (3, 3) or T.shape != (3,):
            raise ValueError("rotation must be 3x3 and translation a 3-vector")
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-10, rtol=0):
            raise ValueError("rotation is not orthonormal")
        if not self.focal_px > 0 or not self.near_z > 0:
            raise ValueError("focal_px and near_z must be positive")
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("image dimensions must be positive")
        R.setflags(write=False)
        T.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", T)
        object.__setattr__(self, "focal_px", float(self.focal_px))
        object.__setattr__(self, "image_width", int(self.image_width))
        object.__setattr__(self, "image_height", int(self.image_height))

    @property
    def principal_point(self) -> tuple[float, float]:
        return self.image_width / 2.0, self.image_height / 2.0

    @property
    def position(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    def __eq__(self, other):
        if not isinstance(other, Camera):
            return NotImplemented
        return (
            np.array_equal(self.rotation, other.rotation)
            and np.array_equal(self.translation, other.translation)
            and self.focal_px == other.focal_px
            and self.image_width == other.image_width
            and self.image_height == other.image_height
            and self.near_z == other.near_z
        )


@dataclass(frozen=True)
class CameraSamplerConfig:
    radius_range: tuple[float, float] = (1.8, 2.0)
    azimuth_range_deg: tuple[float, float] = (-180.0, 180.0)
    elevation_range_deg: tuple[float, float] = (0.0, 30.0)
    fov_deg: float = 60.0
    image_size: tuple[int, int] = (512, 512)

    def __post_init__(self):
        for name in ("radius_range", "azimuth_range_deg", "elevation_range_deg"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} is empty: {lo} > {hi}")
        if self.radius_range[0] <= 0:
            raise ValueError("radii must be positive")
        if not 0 < self.fov_deg < 180:
            raise ValueError(f"fov must be in (0, 180), got {self.fov_deg}")

    def fixed_radius(self, radius: float) -> "CameraSamplerConfig":
        """Override for backbones that ignore relative distance (radius pinned)."""
        return replace(self, radius_range=(radius, radius))


def fov_to_focal(fov_deg: float, image_height: int) -> float:
    """Vertical field of view in degrees to focal length in pixels."""
    if not 0 < fov_deg < 180:
        raise ValueError(f"fov must be in (0, 180), got {fov_deg}")
    return (image_height / 2.0) / math.tan(math.radians(fov_deg) / 2.0)


def world_to_camera(cam: Camera, p) -> np.ndarray:
    """Rigid world-to-camera transform; ``p`` may be (3,) or (..., 3)."""
    return np.asarray(p, dtype=np.float64) @ cam.rotation.T + cam.translation


def look_at(eye, target=(0.0, 0.0, 0.0), up=(0.0, 1.0, 0.0)) -> tuple[np.ndarray, np.ndarray]:
    """Rotation and translation of a camera at ``eye`` looking at ``target``."""
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    forward /= np.linalg.norm(forward)
    right = np.cross(forward, up)
    norm = np.linalg.norm(right)
    if norm < 1e-12:
        raise ValueError("view direction is parallel to the up vector")
    right /= norm
    down = np.cross(forward, right)
    R = np.stack([right, down, forward])
    return R, -R @ eye


def orbit_camera(
    radius: float,
    azimuth_deg: float,
    elevation_deg: float,
    fov_deg: float = 60.0,
    image_size: tuple[int, int] = (512, 512),
    near_z: float = 1e-3,
) -> Camera:
    """Camera on a sphere around the origin, looking at it.

    Azimuth 0 / elevation 0 puts the camera on the +z axis.
    """
    az, el = math.radians(azimuth_deg), math.radians(elevation_deg)
    eye = radius * np.array([math.cos(el) * math.sin(az), math.sin(el), math.cos(el) * math.cos(az)])
    R, T = look_at(eye)
    width, height = image_size
    return Camera(R, T, fov_to_focal(fov_deg, height), width, height, near_z)


def sample_camera(rng: np.random.Generator, cfg: CameraSamplerConfig = CameraSamplerConfig()) -> Camera:
    radius = rng.uniform(*cfg.radius_range)
    azimuth = rng.uniform(*cfg.azimuth_range_deg)
    elevation = rng.uniform(*cfg.elevation_range_deg)
    return orbit_camera(radius, azimuth, elevation, cfg.fov_deg, cfg.image_size)
