"""Reverse-mode gradients of a scalar image loss with respect to curve parameters.

Given dL/dI per pixel, the 2D gradient has two parts:

* an interior term: the forward samples are replayed and the compositing
  recurrence is differentiated with respect to each fragment's color and
  opacity;
* a boundary term: points are sampled on the stroke outline (two offset
  curves at +-width/2 plus two round caps), the scene is evaluated just
  inside and just outside, and the jump is weighted by the normal velocity
  of the outline over the sampling density (Reynolds transport).

The 2D gradients are then chained through the perspective projection and
the rigid camera transform to the 3D control points.  The depth sort is
treated as locally constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .camera import Camera, world_to_camera
from .curves import RationalBezier2, RationalBezier3, Sketch, polyline_length
from .projection import BehindCamera, project_curve
from .raster import (
    RasterImage,
    RenderConfig,
    WHITE,
    gather_fragments,
    hash_uniform,
    pack_curves,
    pixel_candidates,
    render,
    sample_offset,
    scene_color,
)
from .rootsolve import _B2P

N_CHUNKS = 64


@dataclass
class GradImage:
    """Per-pixel upstream gradient dL/dI, shape (H, W, 4)."""

    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 4:
            raise ValueError(f"expected an (H, W, 4) array, got {self.pixels.shape}")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def zeros(cls, width: int, height: int) -> "GradImage":
        return cls(np.zeros((height, width, 4)))


@dataclass(frozen=True)
class BoundarySampleConfig:
    n_boundary_samples: int = 256  # per curve; the pool is shared by all curves
    epsilon: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.n_boundary_samples < 1 or not self.epsilon > 0:
            raise ValueError("need n_boundary_samples >= 1 and epsilon > 0")


@dataclass
class CurveGrad:
    points2d: np.ndarray
    weights2d: np.ndarray
    color: np.ndarray
    width: float = 0.0
    points3d: np.ndarray | None = None
    weights3d: np.ndarray | None = None

    @classmethod
    def zeros(cls, degree: int) -> "CurveGrad":
        n = degree + 1
        return cls(np.zeros((n, 2)), np.zeros(n), np.zeros(4), 0.0, np.zeros((n, 3)), np.zeros(n))


@dataclass
class GradBuffer:
    """Gradients aligned with a curve list (sketch order)."""

    ids: list[int] = field(default_factory=list)
    curves: list[CurveGrad] = field(default_factory=list)

    def __len__(self):
        return len(self.curves)

    def points3d(self) -> list[np.ndarray]:
        return [g.points3d for g in self.curves]

    def flat_points3d(self) -> np.ndarray:
        return np.concatenate([g.points3d.ravel() for g in self.curves]) if self.curves else np.zeros(0)

    def flat_colors(self) -> np.ndarray:
        return np.concatenate([g.color for g in self.curves]) if self.curves else np.zeros(0)

    def scaled(self, factor: float) -> "GradBuffer":
        out = []
        for g in self.curves:
            out.append(CurveGrad(
                g.points2d * factor, g.weights2d * factor, g.color * factor, g.width * factor,
                None if g.points3d is None else g.points3d * factor,
                None if g.weights3d is None else g.weights3d * factor,
            ))
        return GradBuffer(list(self.ids), out)

    def __add__(self, other: "GradBuffer") -> "GradBuffer":
        if self.ids != other.ids:
            raise ValueError("gradient buffers refer to different curves")
        out = []
        for a, b in zip(self.curves, other.curves):
            out.append(CurveGrad(
                a.points2d + b.points2d, a.weights2d + b.weights2d, a.color + b.color, a.width + b.width,
                None if a.points3d is None else a.points3d + b.points3d,
                None if a.weights3d is None else a.weights3d + b.weights3d,
            ))
        return GradBuffer(list(self.ids), out)

    def is_finite(self) -> bool:
        for g in self.curves:
            for arr in (g.points2d, g.weights2d, g.color, g.points3d, g.weights3d):
                if arr is not None and not np.all(np.isfinite(arr)):
                    return False
            if not math.isfinite(g.width):
                return False
        return True


# --------------------------------------------------------------------------
# interior term


@numba.njit(cache=True)
def _accumulate_composite_grad(nf, fr_curve, color, bg, g, weight, dcolor, rest):
    """Add weight * dC/d(color, alpha) . g for every fragment into ``dcolor``."""
    # rest[k] = composite of fragments after k over the background
    for ch in range(4):
        rest[nf, ch] = bg[ch]
    for k in range(nf - 1, -1, -1):
        c = fr_curve[k]
        a = color[c, 3]
        for ch in range(3):
            rest[k, ch] = a * color[c, ch] + (1.0 - a) * rest[k + 1, ch]
        rest[k, 3] = a + (1.0 - a) * rest[k + 1, 3]
    trans = 1.0
    for k in range(nf):
        c = fr_curve[k]
        a = color[c, 3]
        da = 0.0
        for ch in range(3):
            dcolor[c, ch] += weight * g[ch] * trans * a
            da += g[ch] * trans * (color[c, ch] - rest[k + 1, ch])
        da += g[3] * trans * (1.0 - rest[k + 1, 3])
        dcolor[c, 3] += weight * da
        trans *= 1.0 - a


@numba.njit(parallel=True, cache=True)
def interior_kernel(width, height, spp, seed, degree, points, weights, src_weights, half_width,
                    color, order, boxes, reach, tie_eps, bg, grad):
    nc = degree.shape[0]
    rows = np.zeros((height, max(nc, 1), 4))
    side = int(round(math.sqrt(spp)))
    for py in numba.prange(height):
        cand = np.empty(max(nc, 1), dtype=np.int64)
        fr_curve = np.empty(max(nc, 1), dtype=np.int64)
        fr_t = np.empty(max(nc, 1))
        fr_depth = np.empty(max(nc, 1))
        rest = np.empty((nc + 1, 4))
        g = np.empty(4)
        for px in range(width):
            nz = False
            for ch in range(4):
                g[ch] = grad[py, px, ch]
                if g[ch] != 0.0:
                    nz = True
            if not nz:
                continue
            ncand = pixel_candidates(float(px), float(py), nc, boxes, cand, degree, points, weights, reach)
            if ncand == 0:
                continue
            pix = py * width + px
            for k in range(spp):
                ox, oy = sample_offset(seed, pix, spp, side, k)
                nf = gather_fragments(px + ox, py + oy, cand, ncand, degree, points, weights,
                                      src_weights, half_width, order, boxes, tie_eps, fr_curve, fr_t, fr_depth)
                if nf > 0:
                    _accumulate_composite_grad(nf, fr_curve, color, bg, g, 1.0 / spp, rows[py], rest)
    out = np.zeros((nc, 4))
    for py in range(height):
        for c in range(nc):
            for ch in range(4):
                out[c, ch] += rows[py, c, ch]
    return out


# --------------------------------------------------------------------------
# boundary term


@numba.njit(cache=True)
def curve_jet(points, weights, n, t, basis):
    """Point, first and second derivative of a 2D rational curve; fills ``basis`` with B_i(t)."""
    num_x = np.zeros(4)
    num_y = np.zeros(4)
    den = np.zeros(4)
    for k in range(n + 1):
        for i in range(k + 1):
            f = _B2P[n, k, i] * weights[i]
            den[k] += f
            num_x[k] += f * points[i, 0]
            num_y[k] += f * points[i, 1]
    s = 1.0 - t
    for i in range(n + 1):
        c = 1.0
        if n == 2 and i == 1:
            c = 2.0
        elif n == 3 and (i == 1 or i == 2):
            c = 3.0
        basis[i] = c * t**i * s ** (n - i)
    nx, dnx, ddnx = _jet(num_x, n, t)
    ny, dny, ddny = _jet(num_y, n, t)
    d, dd, ddd = _jet(den, n, t)
    x = nx / d
    y = ny / d
    dx = (dnx * d - nx * dd) / (d * d)
    dy = (dny * d - ny * dd) / (d * d)
    ddx = (ddnx - 2.0 * dd * dx - ddd * x) / d
    ddy = (ddny - 2.0 * dd * dy - ddd * y) / d
    return x, y, dx, dy, ddx, ddy, d


@numba.njit(cache=True)
def _jet(c, n, t):
    f = 0.0
    df = 0.0
    ddf = 0.0
    for k in range(n, -1, -1):
        ddf = ddf * t + 2.0 * df
        df = df * t + f
        f = f * t + c[k]
    return f, df, ddf


@numba.njit(cache=True)
def _end_tangent(points, n, at_end):
    """Unit tangent at an endpoint, pointing along increasing t."""
    if at_end:
        base = n
        for k in range(n - 1, -1, -1):
            dx = points[base, 0] - points[k, 0]
            dy = points[base, 1] - points[k, 1]
            r = math.sqrt(dx * dx + dy * dy)
            if r > 1e-12:
                return dx / r, dy / r
    else:
        for k in range(1, n + 1):
            dx = points[k, 0] - points[0, 0]
            dy = points[k, 1] - points[0, 1]
            r = math.sqrt(dx * dx + dy * dy)
            if r > 1e-12:
                return dx / r, dy / r
    return 1.0, 0.0


@numba.njit(cache=True)
def _side_value(x, y, width, height, grad, cand, nc, degree, points, weights, src_weights,
                half_width, color, order, boxes, tie_eps, bg, fr_curve, fr_t, fr_depth, rgba):
    """dL/dI . f at a point (zero outside the image)."""
    if x < 0.0 or y < 0.0 or x >= width or y >= height:
        return 0.0
    px = int(x)
    py = int(y)
    scene_color(x, y, cand, nc, degree, points, weights, src_weights, half_width, color, order,
                boxes, tie_eps, bg, fr_curve, fr_t, fr_depth, rgba)
    acc = 0.0
    for ch in range(4):
        acc += grad[py, px, ch] * rgba[ch]
    return acc


@numba.njit(parallel=True, cache=True)
def boundary_kernel(width, height, n_samples, seed, eps, degree, points, weights, src_weights,
                    half_width, color, order, boxes, tie_eps, bg, grad, curve_cdf, side_len, cap_len):
    nc = degree.shape[0]
    d_pts = np.zeros((N_CHUNKS, max(nc, 1), 4, 2))
    d_w = np.zeros((N_CHUNKS, max(nc, 1), 4))
    d_width = np.zeros((N_CHUNKS, max(nc, 1)))
    total = curve_cdf[nc - 1] if nc > 0 else 0.0
    for chunk in numba.prange(N_CHUNKS):
        cand = np.arange(max(nc, 1))
        fr_curve = np.empty(max(nc, 1), dtype=np.int64)
        fr_t = np.empty(max(nc, 1))
        fr_depth = np.empty(max(nc, 1))
        rgba = np.empty(4)
        basis = np.zeros(4)
        j0 = chunk * n_samples // N_CHUNKS
        j1 = (chunk + 1) * n_samples // N_CHUNKS
        if nc == 0 or total <= 0.0:
            continue
        for j in range(j0, j1):
            u0 = hash_uniform(seed, j, 0) * total
            c = 0
            while c < nc - 1 and curve_cdf[c] <= u0:
                c += 1
            prev = curve_cdf[c - 1] if c > 0 else 0.0
            lc = curve_cdf[c] - prev
            p_curve = lc / total
            n = degree[c]
            h = half_width[c]
            u1 = hash_uniform(seed, j, 1) * lc
            u2 = hash_uniform(seed, j, 2)
            # component: 0 left side, 1 right side, 2 start cap, 3 end cap
            if u1 < side_len[c]:
                comp = 0
            elif u1 < 2.0 * side_len[c]:
                comp = 1
            elif u1 < 2.0 * side_len[c] + cap_len[c]:
                comp = 2
            else:
                comp = 3
            if comp < 2:
                p_comp = side_len[c] / lc
                s = 1.0 if comp == 0 else -1.0
                t = u2
                x, y, dx, dy, ddx, ddy, den = curve_jet(points[c], weights[c], n, t, basis)
                speed = math.sqrt(dx * dx + dy * dy)
                if speed < 1e-12:
                    continue
                tx = dx / speed
                ty = dy / speed
                kappa = (dx * ddy - dy * ddx) / (speed * speed * speed)
                jac = speed * abs(1.0 - s * h * kappa)
                if jac <= 0.0:
                    continue
                nx = -ty * s
                ny = tx * s
                pdf = p_curve * p_comp / jac
            else:
                p_comp = cap_len[c] / lc
                at_end = comp == 3
                tx, ty = _end_tangent(points[c], n, at_end)
                phi = math.pi * u2
                cphi = math.cos(phi)
                sphi = math.sin(phi)
                # sweep from the left normal through the outward tangent to the right normal
                if at_end:
                    nx = cphi * (-ty) + sphi * tx
                    ny = cphi * tx + sphi * ty
                    x = points[c, n, 0]
                    y = points[c, n, 1]
                else:
                    nx = cphi * (-ty) - sphi * tx
                    ny = cphi * tx - sphi * ty
                    x = points[c, 0, 0]
                    y = points[c, 0, 1]
                pdf = p_curve * p_comp / (math.pi * h)
            bx = x + h * nx
            by = y + h * ny
            g_in = _side_value(bx - eps * nx, by - eps * ny, width, height, grad, cand, nc, degree, points,
                               weights, src_weights, half_width, color, order, boxes, tie_eps, bg,
                               fr_curve, fr_t, fr_depth, rgba)
            g_out = _side_value(bx + eps * nx, by + eps * ny, width, height, grad, cand, nc, degree, points,
                                weights, src_weights, half_width, color, order, boxes, tie_eps, bg,
                                fr_curve, fr_t, fr_depth, rgba)
            jump = g_in - g_out
            if jump == 0.0:
                continue
            wgt = jump / (pdf * n_samples)
            d_width[chunk, c] += 0.5 * wgt
            if comp < 2:
                for i in range(n + 1):
                    bi = basis[i] / den
                    d_pts[chunk, c, i, 0] += wgt * bi * weights[c, i] * nx
                    d_pts[chunk, c, i, 1] += wgt * bi * weights[c, i] * ny
                    d_w[chunk, c, i] += wgt * bi * ((points[c, i, 0] - x) * nx + (points[c, i, 1] - y) * ny)
            elif comp == 2:
                d_pts[chunk, c, 0, 0] += wgt * nx
                d_pts[chunk, c, 0, 1] += wgt * ny
            else:
                d_pts[chunk, c, n, 0] += wgt * nx
                d_pts[chunk, c, n, 1] += wgt * ny
    out_pts = np.zeros((max(nc, 1), 4, 2))
    out_w = np.zeros((max(nc, 1), 4))
    out_width = np.zeros(max(nc, 1))
    for chunk in range(N_CHUNKS):
        out_pts += d_pts[chunk]
        out_w += d_w[chunk]
        out_width += d_width[chunk]
    return out_pts, out_w, out_width


# --------------------------------------------------------------------------
# Python API


def backward_2d(
    curves2d: list[RationalBezier2],
    image_size: tuple[int, int],
    grad_image: GradImage,
    cfg: BoundarySampleConfig = BoundarySampleConfig(),
    render_cfg: RenderConfig = RenderConfig(),
    background=WHITE,
) -> GradBuffer:
    """Gradients with respect to the 2D curve parameters.

    ``render_cfg`` must match the forward pass so that the interior term
    replays the same samples.
    """
    width, height = image_size
    if (grad_image.width, grad_image.height) != (width, height):
        raise ValueError("gradient image does not match the image size")
    buf = GradBuffer([c.id for c in curves2d], [CurveGrad.zeros(c.degree) for c in curves2d])
    for g in buf.curves:
        g.points3d = None
        g.weights3d = None
    if not curves2d or not np.any(grad_image.pixels):
        return buf
    p = pack_curves(curves2d, render_cfg.cull)
    bg = np.asarray(render_cfg.background if render_cfg.background is not None else background, dtype=np.float64)
    G = np.ascontiguousarray(grad_image.pixels)
    dcolor = interior_kernel(width, height, render_cfg.samples_per_pixel, render_cfg.seed, p.degree, p.points,
                             p.weights, p.src_weights, p.half_width, p.color, p.order, p.boxes,
                             p.reach, render_cfg.depth_tie_epsilon, bg, G)
    side_len = np.array([polyline_length(c, 20) for c in curves2d])
    cap_len = np.pi * p.half_width
    cdf = np.cumsum(2.0 * side_len + 2.0 * cap_len)
    n_total = cfg.n_boundary_samples * len(curves2d)
    d_pts, d_w, d_width = boundary_kernel(width, height, n_total, cfg.seed, cfg.epsilon, p.degree, p.points,
                                          p.weights, p.src_weights, p.half_width, p.color, p.order, p.boxes,
                                          render_cfg.depth_tie_epsilon, bg, G, cdf, side_len, cap_len)
    for i, (c, g) in enumerate(zip(curves2d, buf.curves)):
        n = c.degree + 1
        g.points2d = d_pts[i, :n].copy()
        g.weights2d = d_w[i, :n].copy()
        g.color = dcolor[i].copy()
        g.width = float(d_width[i])
    return buf


def backward_project(curve3: RationalBezier3, cam: Camera, grad2d: CurveGrad) -> CurveGrad:
    """Chain 2D control-point and adjusted-weight gradients to world space.

    Pixel position (f x/z + cx, f y/z + cy) and adjusted weight w~ z depend on
    the camera-space point; world points map to camera space by the rotation.
    Color and width gradients pass through unchanged.
    """
    cam_pts = world_to_camera(cam, curve3.points)
    x, y, z = cam_pts[:, 0], cam_pts[:, 1], cam_pts[:, 2]
    f = cam.focal_px
    gu, gv = grad2d.points2d[:, 0], grad2d.points2d[:, 1]
    gw = grad2d.weights2d
    d_cam = np.stack([
        gu * f / z,
        gv * f / z,
        -gu * f * x / z**2 - gv * f * y / z**2 + gw * curve3.weights,
    ], axis=1)
    return CurveGrad(
        grad2d.points2d, grad2d.weights2d, grad2d.color, grad2d.width,
        points3d=d_cam @ cam.rotation,
        weights3d=gw * z,
    )


def backward(
    sketch: Sketch,
    cam: Camera,
    grad_image: GradImage,
    cfg: BoundarySampleConfig = BoundarySampleConfig(),
    render_cfg: RenderConfig = RenderConfig(),
) -> GradBuffer:
    """Full gradient with respect to the 3D sketch; skipped curves get zeros."""
    projected, kept = [], []
    for c in sketch.curves:
        try:
            projected.append(project_curve(c, cam))
            kept.append(c)
        except BehindCamera:
            pass
    g2 = backward_2d(projected, (cam.image_width, cam.image_height), grad_image, cfg, render_cfg,
                     sketch.background_color)
    by_id = {c.id: backward_project(c, cam, g) for c, g in zip(kept, g2.curves)}
    return GradBuffer(
        [c.id for c in sketch.curves],
        [by_id.get(c.id, CurveGrad.zeros(c.degree)) for c in sketch.curves],
    )


def fd_gradient(
    sketch: Sketch,
    cam: Camera,
    loss_fn,
    h: float = 1e-3,
    spp: int = 16,
    n_seeds: int = 1,
    include_color: bool = True,
    return_stderr: bool = False,
    include_points: bool = True,
):
    """Central differences of ``loss_fn`` applied to the seed-averaged render.

    Averaging images before the loss makes this the derivative of the loss
    of the converged image, which is what :func:`backward` estimates; the
    mean of per-seed losses would add the derivative of the Monte Carlo
    variance.  Perturbs every world-space control-point coordinate by +-h
    (and every color channel, if requested).  With ``return_stderr`` also
    returns standard errors from batch means over up to 8 seed groups.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    seeds = range(n_seeds)
    groups = np.array_split(np.arange(n_seeds), min(8, n_seeds))

    def images(sk):
        return np.stack([render(sk, cam, RenderConfig(samples_per_pixel=spp, seed=s)).pixels for s in seeds])

    grads = [CurveGrad.zeros(c.degree) for c in sketch.curves]
    errs = [CurveGrad.zeros(c.degree) for c in sketch.curves]

    def fd(plus, minus):
        return (loss_fn(RasterImage(plus.mean(0))) - loss_fn(RasterImage(minus.mean(0)))) / (2.0 * h)

    def central(i, make):
        plus, minus = images(make(+h)), images(make(-h))
        est = fd(plus, minus)
        if len(groups) < 2:
            return est, 0.0
        per = np.array([fd(plus[g], minus[g]) for g in groups])
        return est, per.std(ddof=1) / math.sqrt(len(groups))

    for i, c in enumerate(sketch.curves):
        for k in range(c.degree + 1 if include_points else 0):
            for a in range(3):
                def make(d, i=i, k=k, a=a, c=c):
                    pts = c.points.copy()
                    pts[k, a] += d
                    return _replace_curve(sketch, i, c.replace(points=pts))
                grads[i].points3d[k, a], errs[i].points3d[k, a] = central(i, make)
        if include_color:
            for ch in range(4):
                def make(d, i=i, ch=ch, c=c):
                    col = c.color.copy()
                    col[ch] = col[ch] + d
                    return _replace_curve(sketch, i, _unchecked_color(c, col))
                grads[i].color[ch], errs[i].color[ch] = central(i, make)
    ids = [c.id for c in sketch.curves]
    if return_stderr:
        return GradBuffer(ids, grads), GradBuffer(list(ids), errs)
    return GradBuffer(ids, grads)


def _replace_curve(sketch: Sketch, i: int, curve: RationalBezier3) -> Sketch:
    curves = list(sketch.curves)
    curves[i] = curve
    return Sketch(curves, sketch.background_color)


def _unchecked_color(curve: RationalBezier3, color: np.ndarray) -> RationalBezier3:
    """Copy of ``curve`` with a color that may step slightly outside [0, 1] for differencing."""
    clone = curve.replace()
    color = np.array(color, dtype=np.float64)
    color.setflags(write=False)
    object.__setattr__(clone, "color", color)
    return clone


@dataclass
class GradcheckReport:
    """Analytic versus finite-difference gradients of an L2 image loss.

    A point component is checked when it sits above the noise floor: three
    combined standard errors must fit inside ``tolerance * |fd|``.
    """

    analytic: np.ndarray
    analytic_stderr: np.ndarray
    fd: np.ndarray
    fd_stderr: np.ndarray
    color_analytic: np.ndarray
    color_fd: np.ndarray
    tolerance: float
    seconds: float

    @property
    def sigma(self) -> np.ndarray:
        return np.hypot(self.analytic_stderr, self.fd_stderr)

    @property
    def checked(self) -> np.ndarray:
        return 3.0 * self.sigma <= self.tolerance * np.abs(self.fd)

    @property
    def rel_error(self) -> np.ndarray:
        return np.abs(self.analytic - self.fd) / np.maximum(np.abs(self.fd), 1e-300)

    @property
    def max_rel_error(self) -> float:
        m = self.checked
        return float(self.rel_error[m].max()) if m.any() else math.inf

    @property
    def max_z(self) -> float:
        return float(np.max(np.abs(self.analytic - self.fd) / np.maximum(self.sigma, 1e-300)))

    @property
    def color_max_rel_error(self) -> float:
        scale = np.maximum(np.abs(self.color_fd), 1e-12)
        big = np.abs(self.color_fd) > 1e-9
        if not big.any():
            return 0.0
        return float((np.abs(self.color_analytic - self.color_fd) / scale)[big].max())

    def summary(self) -> str:
        rows = ["   analytic      fd    sigma   rel  checked"]
        for a, f, s, r, c in zip(self.analytic, self.fd, self.sigma, self.rel_error, self.checked):
            rows.append(f"{a: .6f} {f: .6f} {s:.6f} {r:6.3f}  {'yes' if c else 'no'}")
        rows.append(f"checked {int(self.checked.sum())}/{self.checked.size}, max |z| {self.max_z:.2f}, "
                    f"color max rel {self.color_max_rel_error:.2e}, {self.seconds:.1f}s")
        return "\n".join(rows)


def gradcheck(
    sketch: Sketch,
    cam: Camera,
    shift,
    n_seeds: int = 64,
    spp: int = 256,
    h: float = 1e-3,
    n_boundary_samples: int = 512,
    color_spp: int = 16,
    target_spp: int = 1024,
    target_seed: int = 999,
    tolerance: float = 0.05,
    fd_spp: int | None = None,
) -> GradcheckReport:
    """Check :func:`backward` against central differences on a shifted-target L2 loss.

    Both sides differentiate the loss of the seed-averaged image, so the
    upstream gradient handed to every per-seed backward pass is the one of
    that averaged image.  ``fd_spp`` (default ``spp``) sets the sample
    count of the point differences, which dominate the cost.
    """
    import time

    t0 = time.perf_counter()
    target_sketch = sketch.with_points([c.points + np.asarray(shift, dtype=np.float64) for c in sketch.curves])
    target = render(target_sketch, cam, RenderConfig(target_spp, seed=target_seed)).pixels
    n_px = target.size

    def loss_fn(img):
        return float(np.sum((img.pixels - target) ** 2) / n_px)

    def analytic(spp_):
        cfgs = [RenderConfig(spp_, seed=s) for s in range(n_seeds)]
        mean = np.mean([render(sketch, cam, rc).pixels for rc in cfgs], axis=0)
        G = GradImage(2.0 * (mean - target) / n_px)
        return [backward(sketch, cam, G, BoundarySampleConfig(n_boundary_samples, seed=s), rc)
                for s, rc in enumerate(cfgs)]

    per_seed = np.array([g.flat_points3d() for g in analytic(spp)])
    a_mean = per_seed.mean(0)
    a_err = per_seed.std(0, ddof=1) / math.sqrt(n_seeds) if n_seeds > 1 else np.zeros_like(a_mean)
    fd, fd_err = fd_gradient(sketch, cam, loss_fn, h, fd_spp or spp, n_seeds, include_color=False, return_stderr=True)
    col_a = np.mean([g.flat_colors() for g in analytic(color_spp)], axis=0)
    col_fd = fd_gradient(sketch, cam, loss_fn, h, color_spp, n_seeds, include_points=False).flat_colors()
    return GradcheckReport(a_mean, a_err, fd.flat_points3d(), fd_err.flat_points3d(), col_a, col_fd,
                           tolerance, time.perf_counter() - t0)
