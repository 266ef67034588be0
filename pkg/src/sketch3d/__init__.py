"""Differentiable rendering of 3D rational Bezier sketches."""

import os

import numba

# The TBB layer warns on some installs; prefer OpenMP unless the user chose.
if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ and "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

from .camera import Camera, CameraSamplerConfig, look_at, orbit_camera, sample_camera  # noqa: E402
from .curves import RationalBezier2, RationalBezier3, Sketch, eval2, eval3, polyline_length  # noqa: E402
from .distill import (  # noqa: E402
    AnnealConfig,
    DiffusionSchedule,
    NoiseQuery,
    add_noise,
    anneal_timestep,
    cfg_combine,
    dynamic_noise_deletion,
    mock_noise_predictor,
    pseudo_ground_truth,
    sds_pixel_grad,
)
from .fit import FitConfig, FitReport, adam_step, fit_multiview, fit_sds, init_sketch, l2_loss_and_grad  # noqa: E402
from .grad import BoundarySampleConfig, GradBuffer, GradImage, backward, fd_gradient  # noqa: E402
from .projection import BehindCamera, depth_at, project_curve, project_point  # noqa: E402
from .raster import RasterImage, RenderConfig, render, render_reference  # noqa: E402
from .rootsolve import Polynomial, closest_point, find_roots  # noqa: E402

__all__ = [
    "AnnealConfig", "BehindCamera", "BoundarySampleConfig", "Camera", "CameraSamplerConfig",
    "DiffusionSchedule", "FitConfig", "FitReport", "GradBuffer", "GradImage", "NoiseQuery",
    "Polynomial", "RasterImage", "RationalBezier2", "RationalBezier3", "RenderConfig", "Sketch",
    "adam_step", "add_noise", "anneal_timestep", "backward", "cfg_combine", "closest_point",
    "depth_at", "dynamic_noise_deletion", "eval2", "eval3", "fd_gradient", "find_roots",
    "fit_multiview", "fit_sds", "init_sketch", "l2_loss_and_grad", "look_at", "mock_noise_predictor",
    "orbit_camera", "polyline_length", "project_curve", "project_point", "pseudo_ground_truth",
    "render", "render_reference", "sample_camera", "sds_pixel_grad",
]
