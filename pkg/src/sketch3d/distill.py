"""Score-distillation gradients, timestep annealing and noise-curve pruning.

No diffusion model lives here.  A noise predictor is anything callable on a
:class:`NoiseQuery`; the conditioning payload (text embedding, reference
image plus relative pose, ...) is forwarded untouched.  Mock predictors
are provided for desk-scale loops and tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Protocol

import numpy as np

from .curves import Sketch, polyline_length


def cosine_alpha_bar(t, s: float = 0.008, floor: float = 1e-5):
    """Cumulative signal fraction of the cosine noise schedule, t in (0, 1]."""
    f = np.cos((np.asarray(t, dtype=np.float64) + s) / (1.0 + s) * np.pi / 2) ** 2
    f0 = math.cos(s / (1.0 + s) * math.pi / 2) ** 2
    return np.clip(f / f0, floor, 1.0 - floor)


@dataclass(frozen=True)
class DiffusionSchedule:
    """Noise schedule: t -> alpha_bar(t) plus the SDS timestep weight.

    ``table`` optionally overrides the cosine schedule with (t, alpha_bar)
    samples that are linearly interpolated.
    """

    table: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    weight_fn: Callable[[float], float] | None = None

    def __post_init__(self):
        if self.table is not None:
            ts, ab = (np.asarray(a, dtype=np.float64) for a in self.table)
            if np.any(np.diff(ts) <= 0):
                raise ValueError("schedule times must increase")
            if np.any(np.diff(ab) > 0) or np.any((ab <= 0) | (ab >= 1)):
                raise ValueError("alpha_bar must lie in (0, 1) and be non-increasing")

    def alpha_bar(self, t: float) -> float:
        if self.table is None:
            return float(cosine_alpha_bar(t))
        ts, ab = self.table
        return float(np.interp(t, ts, ab))

    def weight(self, t: float) -> float:
        if self.weight_fn is not None:
            return float(self.weight_fn(t))
        return 1.0 - self.alpha_bar(t)


@dataclass(frozen=True)
class NoiseQuery:
    """Inputs to a noise predictor.

    ``conditioning`` is None for the unconditional branch of guidance.
    ``injected_noise`` and ``clean`` are only populated by in-tree loops so
    that mock predictors can be exact; a real backbone ignores them.
    """

    noisy: np.ndarray
    conditioning: Any
    t: float
    alpha_bar: float
    injected_noise: np.ndarray | None = None
    clean: np.ndarray | None = None


class NoisePredictor(Protocol):
    def __call__(self, query: NoiseQuery) -> np.ndarray: ...


@dataclass(frozen=True)
class AnnealConfig:
    t_max_start: float = 0.85
    t_max_end: float = 0.3
    t_min_start: float = 0.85
    t_min_end: float = 0.1
    anneal_steps: int = 3600
    total_steps: int = 4000

    def __post_init__(self):
        if self.t_max_end > self.t_max_start or self.t_min_end > self.t_min_start:
            raise ValueError("annealed bounds must not increase")
        if not 0 < self.anneal_steps <= self.total_steps:
            raise ValueError("need 0 < anneal_steps <= total_steps")


def _same_shape(*arrays):
    shapes = {np.shape(a) for a in arrays}
    if len(shapes) != 1:
        raise ValueError(f"shape mismatch: {sorted(shapes)}")


def add_noise(image, eps, t: float, sched: DiffusionSchedule = DiffusionSchedule(), alpha_bar=None):
    """sqrt(ab) * image + sqrt(1 - ab) * eps."""
    _same_shape(image, eps)
    ab = sched.alpha_bar(t) if alpha_bar is None else alpha_bar
    return math.sqrt(ab) * np.asarray(image) + math.sqrt(1.0 - ab) * np.asarray(eps)


def cfg_combine(eps_cond, eps_uncond, lam: float):
    _same_shape(eps_cond, eps_uncond)
    return np.asarray(eps_uncond) + lam * (np.asarray(eps_cond) - np.asarray(eps_uncond))


def pseudo_ground_truth(noisy, eps_hat, t: float, sched: DiffusionSchedule = DiffusionSchedule(), alpha_bar=None):
    """One-step denoised estimate of the clean image."""
    _same_shape(noisy, eps_hat)
    ab = sched.alpha_bar(t) if alpha_bar is None else alpha_bar
    if ab <= 0:
        raise ValueError(f"alpha_bar must be positive, got {ab}")
    return (np.asarray(noisy) - math.sqrt(1.0 - ab) * np.asarray(eps_hat)) / math.sqrt(ab)


def sds_pixel_grad(image, eps, eps_hat, t: float, sched: DiffusionSchedule = DiffusionSchedule(),
                   form: str = "direct", alpha_bar=None):
    """Per-pixel SDS gradient, to be back-propagated as dL/dI.

    ``direct``: w(t) (eps_hat - eps).
    ``pseudo_gt``: w(t) sqrt(ab / (1 - ab)) (I - I0_hat), which is the same
    quantity written as a match between the render and the denoised estimate.
    """
    _same_shape(image, eps, eps_hat)
    ab = sched.alpha_bar(t) if alpha_bar is None else alpha_bar
    w = sched.weight(t)
    if form == "direct":
        return w * (np.asarray(eps_hat) - np.asarray(eps))
    if form == "pseudo_gt":
        if ab >= 1.0:
            raise ValueError("pseudo_gt form is undefined at alpha_bar = 1")
        noisy = add_noise(image, eps, t, alpha_bar=ab)
        i0 = pseudo_ground_truth(noisy, eps_hat, t, alpha_bar=ab)
        return w * math.sqrt(ab / (1.0 - ab)) * (np.asarray(image) - i0)
    raise ValueError(f"unknown form {form!r}")


def anneal_bounds(step: int, cfg: AnnealConfig = AnnealConfig()) -> tuple[float, float]:
    """(t_min, t_max) at ``step``: linear ramps over the first anneal_steps, then constant."""
    frac = min(max(step, 0) / cfg.anneal_steps, 1.0)
    t_max = cfg.t_max_start + frac * (cfg.t_max_end - cfg.t_max_start)
    t_min = cfg.t_min_start + frac * (cfg.t_min_end - cfg.t_min_start)
    return t_min, t_max


def anneal_timestep(step: int, cfg: AnnealConfig = AnnealConfig(), rng: np.random.Generator | None = None) -> float:
    t_min, t_max = anneal_bounds(step, cfg)
    rng = rng or np.random.default_rng()
    return float(rng.uniform(t_min, t_max)) if t_max > t_min else t_min


def dynamic_noise_deletion(sketch: Sketch, threshold: float = 0.1, n_seg: int = 20) -> tuple[Sketch, list[int]]:
    """Drop curves whose discretized 3D length is below ``threshold``."""
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    kept, removed = [], []
    for c in sketch.curves:
        if polyline_length(c, n_seg) < threshold:
            removed.append(c.id)
        else:
            kept.append(c)
    return Sketch(kept, sketch.background_color), removed


# --------------------------------------------------------------------------
# mock predictors


class ZeroPredictor:
    def __call__(self, query: NoiseQuery) -> np.ndarray:
        return np.zeros_like(query.noisy)


class EchoPredictor:
    """Returns the noise that was injected: a perfect denoiser."""

    def __call__(self, query: NoiseQuery) -> np.ndarray:
        if query.injected_noise is None:
            raise ValueError("echo predictor needs the injected noise")
        return np.array(query.injected_noise, copy=True)


class PullTowardPredictor:
    """Predicts the noise whose one-step denoising yields ``target`` exactly."""

    def __init__(self, target):
        self.target = np.asarray(target, dtype=np.float64)

    def __call__(self, query: NoiseQuery) -> np.ndarray:
        ab = query.alpha_bar
        if ab >= 1.0:
            raise ValueError("pull_toward is undefined at alpha_bar = 1")
        return (query.noisy - math.sqrt(ab) * self.target) / math.sqrt(1.0 - ab)


class ConditionedPullPredictor:
    """Pulls toward the conditioning payload (an image); zero noise when unconditional."""

    def __call__(self, query: NoiseQuery) -> np.ndarray:
        if query.conditioning is None:
            return np.zeros_like(query.noisy)
        return PullTowardPredictor(query.conditioning)(query)


def mock_noise_predictor(kind: str, target=None) -> NoisePredictor:
    if kind == "zero":
        return ZeroPredictor()
    if kind == "echo":
        return EchoPredictor()
    if kind == "pull_toward":
        if target is None:
            raise ValueError("pull_toward needs a target image")
        return PullTowardPredictor(target)
    if kind == "conditioned":
        return ConditionedPullPredictor()
    raise ValueError(f"unknown mock predictor {kind!r}")
