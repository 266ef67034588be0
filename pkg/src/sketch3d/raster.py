"""Depth-aware anti-aliased rasterization of projected curves.

A sample point is covered by a curve when its distance to the curve is
below half the stroke width.  Each covering curve contributes one fragment
at its closest point; fragments are ordered by the depth of the source 3D
curve at that point (ties broken by user order) and composited front to
back over the background.  Pixel values average the scene function over
stratified jittered samples inside the pixel (a one-pixel box filter).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np

from .camera import Camera
from .curves import RationalBezier2, Sketch, split_homogeneous
from .projection import BehindCamera, project_curve
from .rootsolve import closest_point_kernel

N_SUBBOXES = 8
# Samples lie within this distance of their pixel center.
HALF_DIAGONAL = math.sqrt(0.5)
WHITE = (1.0, 1.0, 1.0, 1.0)


@dataclass
class RasterImage:
    """RGBA image with channels in [0, 1]; ``pixels`` has shape (H, W, 4)."""

    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 4 or 0 in self.pixels.shape:
            raise ValueError(f"expected a non-empty (H, W, 4) array, got {self.pixels.shape}")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def filled(cls, width: int, height: int, color=WHITE) -> "RasterImage":
        return cls(np.broadcast_to(np.asarray(color, dtype=np.float64), (height, width, 4)).copy())


@dataclass(frozen=True)
class RenderConfig:
    samples_per_pixel: int = 16
    background: tuple | None = None  # None: take the sketch background (white for bare 2D curves)
    depth_tie_epsilon: float = 1e-6
    seed: int = 0
    cull: bool = True

    def __post_init__(self):
        s = math.isqrt(self.samples_per_pixel)
        if self.samples_per_pixel < 1 or s * s != self.samples_per_pixel:
            raise ValueError(f"samples_per_pixel must be a perfect square, got {self.samples_per_pixel}")


@dataclass(frozen=True)
class Fragment:
    curve_id: int
    t_star: float
    depth: float
    user_order: int
    color: tuple


@dataclass
class PackedCurves:
    """Struct-of-arrays view of projected curves for the numba kernels."""

    degree: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    src_weights: np.ndarray
    half_width: np.ndarray
    color: np.ndarray
    order: np.ndarray
    boxes: np.ndarray
    reach: np.ndarray
    ids: list = field(default_factory=list)

    def __len__(self):
        return len(self.degree)


def _sub_boxes(curve: RationalBezier2, k: int) -> np.ndarray:
    """Control-point boxes of ``k`` equal-parameter pieces, inflated by half the width.

    Pieces of a nonnegatively weighted rational curve lie in the convex hull
    of their own control points, so a point outside every box is farther
    than half the width from the curve.
    """
    boxes = np.empty((k, 4))
    pts, w = curve.points, curve.weights
    remaining = 1.0
    for i in range(k):
        if i == k - 1:
            piece = pts
        else:
            (piece, pw), (pts, w) = split_homogeneous(pts, w, (1.0 / k) / remaining)
            remaining -= 1.0 / k
        h = curve.width / 2.0
        boxes[i] = (*(piece.min(axis=0) - h), *(piece.max(axis=0) + h))
    return boxes


def pack_curves(curves: list[RationalBezier2], cull: bool = True) -> PackedCurves:
    c = len(curves)
    packed = PackedCurves(
        degree=np.zeros(c, dtype=np.int64),
        points=np.zeros((c, 4, 2)),
        weights=np.zeros((c, 4)),
        src_weights=np.zeros((c, 4)),
        half_width=np.zeros(c),
        color=np.zeros((c, 4)),
        order=np.zeros(c, dtype=np.int64),
        boxes=np.zeros((c, N_SUBBOXES, 4)),
        reach=np.full(c, np.inf),
        ids=[cv.id for cv in curves],
    )
    for i, cv in enumerate(curves):
        n = cv.degree
        packed.degree[i] = n
        packed.points[i, : n + 1] = cv.points
        packed.weights[i, : n + 1] = cv.weights
        packed.src_weights[i, : n + 1] = cv.src_weights
        packed.half_width[i] = cv.width / 2.0
        packed.color[i] = cv.color
        packed.order[i] = cv.user_order
        if cull:
            packed.boxes[i] = _sub_boxes(cv, N_SUBBOXES)
            packed.reach[i] = cv.width / 2.0 + HALF_DIAGONAL + 1e-6
        else:
            packed.boxes[i] = (-np.inf, -np.inf, np.inf, np.inf)
    return packed


# --------------------------------------------------------------------------
# kernels


@numba.njit(cache=True)
def splitmix64(x):
    x = (x + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = x
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True)
def hash_uniform(seed, stream, counter):
    """Uniform double in [0, 1) from a counter-based stream; independent of scheduling."""
    h = splitmix64(np.uint64(seed) ^ splitmix64(np.uint64(stream) * np.uint64(0x2545F4914F6CDD1D)))
    h = splitmix64(h ^ np.uint64(counter))
    return float(h >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@numba.njit(cache=True)
def depth_kernel(points_unused, weights, src_weights, n, t):
    s = 1.0 - t
    num = 0.0
    den = 0.0
    for i in range(n + 1):
        c = 1.0
        if n == 2 and i == 1:
            c = 2.0
        elif n == 3 and (i == 1 or i == 2):
            c = 3.0
        b = c * t**i * s ** (n - i)
        num += b * weights[i]
        den += b * src_weights[i]
    return num / den


@numba.njit(cache=True)
def in_boxes(boxes, c, x, y):
    for k in range(boxes.shape[1]):
        if boxes[c, k, 0] <= x <= boxes[c, k, 2] and boxes[c, k, 1] <= y <= boxes[c, k, 3]:
            return True
    return False


@numba.njit(cache=True)
def box_hits_square(boxes, c, x0, y0, x1, y1):
    for k in range(boxes.shape[1]):
        if boxes[c, k, 0] <= x1 and boxes[c, k, 2] >= x0 and boxes[c, k, 1] <= y1 and boxes[c, k, 3] >= y0:
            return True
    return False


@numba.njit(cache=True)
def gather_fragments(x, y, cand, ncand, degree, points, weights, src_weights, half_width, order,
                     boxes, tie_eps, fr_curve, fr_t, fr_depth):
    """Fragments covering (x, y) sorted front to back; returns their count."""
    nf = 0
    for ci in range(ncand):
        c = cand[ci]
        if not in_boxes(boxes, c, x, y):
            continue
        n = degree[c]
        t, d2 = closest_point_kernel(points[c], weights[c], n, x, y)
        h = half_width[c]
        if d2 < h * h:
            z = depth_kernel(points[c], weights[c], src_weights[c], n, t)
            # insertion sort on (depth, user order)
            j = nf
            while j > 0:
                pz = fr_depth[j - 1]
                pc = fr_curve[j - 1]
                if abs(pz - z) <= tie_eps:
                    ahead = order[pc] > order[c]
                else:
                    ahead = pz > z
                if not ahead:
                    break
                fr_curve[j] = fr_curve[j - 1]
                fr_t[j] = fr_t[j - 1]
                fr_depth[j] = fr_depth[j - 1]
                j -= 1
            fr_curve[j] = c
            fr_t[j] = t
            fr_depth[j] = z
            nf += 1
    return nf


@numba.njit(cache=True)
def composite(nf, fr_curve, color, bg, out):
    """Front-to-back straight-alpha compositing over ``bg``."""
    trans = 1.0
    for ch in range(4):
        out[ch] = 0.0
    for k in range(nf):
        c = fr_curve[k]
        a = color[c, 3]
        for ch in range(3):
            out[ch] += trans * a * color[c, ch]
        out[3] += trans * a
        trans *= 1.0 - a
    for ch in range(4):
        out[ch] += trans * bg[ch]


@numba.njit(cache=True)
def scene_color(x, y, cand, ncand, degree, points, weights, src_weights, half_width, color, order,
                boxes, tie_eps, bg, fr_curve, fr_t, fr_depth, out):
    nf = gather_fragments(x, y, cand, ncand, degree, points, weights, src_weights, half_width,
                          order, boxes, tie_eps, fr_curve, fr_t, fr_depth)
    composite(nf, fr_curve, color, bg, out)
    return nf


@numba.njit(cache=True)
def pixel_candidates(px, py, ncurves, boxes, cand, degree, points, weights, reach):
    """Curves that can cover some sample of pixel (px, py).

    Distance to a curve is 1-Lipschitz, so a curve farther than its
    ``reach`` (half width plus the half diagonal) from the pixel center
    misses every sample.
    """
    n = 0
    for c in range(ncurves):
        if not box_hits_square(boxes, c, px, py, px + 1.0, py + 1.0):
            continue
        if reach[c] < math.inf:
            _, d2 = closest_point_kernel(points[c], weights[c], degree[c], px + 0.5, py + 0.5)
            if d2 > reach[c] * reach[c]:
                continue
        cand[n] = c
        n += 1
    return n


@numba.njit(cache=True)
def sample_offset(seed, pixel, s, side, k):
    """Stratified jittered position of sample ``k`` within its pixel."""
    u = hash_uniform(seed, pixel, 2 * k)
    v = hash_uniform(seed, pixel, 2 * k + 1)
    i = k % side
    j = k // side
    return (i + u) / side, (j + v) / side


@numba.njit(parallel=True, cache=True)
def render_kernel(width, height, spp, seed, degree, points, weights, src_weights, half_width,
                  color, order, boxes, reach, tie_eps, bg):
    img = np.zeros((height, width, 4))
    nc = degree.shape[0]
    side = int(round(math.sqrt(spp)))
    for py in numba.prange(height):
        cand = np.empty(max(nc, 1), dtype=np.int64)
        fr_curve = np.empty(max(nc, 1), dtype=np.int64)
        fr_t = np.empty(max(nc, 1))
        fr_depth = np.empty(max(nc, 1))
        rgba = np.empty(4)
        for px in range(width):
            ncand = pixel_candidates(float(px), float(py), nc, boxes, cand, degree, points, weights, reach)
            if ncand == 0:
                for ch in range(4):
                    img[py, px, ch] = bg[ch]
                continue
            pix = py * width + px
            acc = np.zeros(4)
            for k in range(spp):
                ox, oy = sample_offset(seed, pix, spp, side, k)
                scene_color(px + ox, py + oy, cand, ncand, degree, points, weights, src_weights,
                            half_width, color, order, boxes, tie_eps, bg, fr_curve, fr_t, fr_depth, rgba)
                for ch in range(4):
                    acc[ch] += rgba[ch]
            for ch in range(4):
                img[py, px, ch] = acc[ch] / spp
    return img


# --------------------------------------------------------------------------
# Python API


def _background(cfg: RenderConfig, default) -> np.ndarray:
    bg = cfg.background if cfg.background is not None else default
    return np.asarray(bg, dtype=np.float64)


def project_sketch(sketch: Sketch, cam: Camera) -> list[RationalBezier2]:
    """Project every curve once; curves crossing the near plane are skipped with a warning."""
    out = []
    for c in sketch.curves:
        try:
            out.append(project_curve(c, cam))
        except BehindCamera as exc:
            warnings.warn(f"skipping curve {c.id}: {exc}", stacklevel=2)
    return out


def render_curves(curves2d: list[RationalBezier2], width: int, height: int,
                  cfg: RenderConfig = RenderConfig(), background=WHITE) -> RasterImage:
    """Render already-projected curves into a ``width`` x ``height`` image."""
    if width <= 0 or height <= 0:
        raise ValueError(f"zero-size image {width}x{height}")
    p = pack_curves(curves2d, cfg.cull)
    img = render_kernel(width, height, cfg.samples_per_pixel, cfg.seed, p.degree, p.points, p.weights,
                        p.src_weights, p.half_width, p.color, p.order, p.boxes, p.reach, cfg.depth_tie_epsilon,
                        _background(cfg, background))
    return RasterImage(img)


def render(sketch: Sketch, cam: Camera, cfg: RenderConfig = RenderConfig()) -> RasterImage:
    curves2d = project_sketch(sketch, cam)
    return render_curves(curves2d, cam.image_width, cam.image_height, cfg, sketch.background_color)


def render_reference(sketch: Sketch, cam: Camera, spp: int = 1024, seed: int = 0) -> RasterImage:
    """High sample-count render used as ground truth in convergence tests."""
    return render(sketch, cam, RenderConfig(samples_per_pixel=spp, seed=seed))


def _scratch(n):
    n = max(n, 1)
    return np.empty(n, dtype=np.int64), np.empty(n), np.empty(n)


def fragments_at(curves2d: list[RationalBezier2], x: float, y: float,
                 tie_eps: float = 1e-6) -> list[Fragment]:
    """Fragments covering (x, y), front to back."""
    p = pack_curves(curves2d, cull=False)
    nc = len(p)
    fr_curve, fr_t, fr_depth = _scratch(nc)
    cand = np.arange(max(nc, 1), dtype=np.int64)
    nf = gather_fragments(float(x), float(y), cand, nc, p.degree, p.points, p.weights, p.src_weights,
                          p.half_width, p.order, p.boxes, tie_eps, fr_curve, fr_t, fr_depth)
    return [
        Fragment(p.ids[c], float(fr_t[k]), float(fr_depth[k]), int(p.order[c]), tuple(p.color[c]))
        for k, c in enumerate(fr_curve[:nf])
    ]


def scene_eval(curves2d: list[RationalBezier2], x: float, y: float,
               background=WHITE, tie_eps: float = 1e-6) -> np.ndarray:
    """RGBA of the vector scene at a single point."""
    p = pack_curves(curves2d, cull=False)
    nc = len(p)
    fr_curve, fr_t, fr_depth = _scratch(nc)
    cand = np.arange(max(nc, 1), dtype=np.int64)
    out = np.empty(4)
    scene_color(float(x), float(y), cand, nc, p.degree, p.points, p.weights, p.src_weights, p.half_width,
                p.color, p.order, p.boxes, tie_eps, np.asarray(background, dtype=np.float64),
                fr_curve, fr_t, fr_depth, out)
    return out
