"""Rational Bezier curve types and Bernstein-basis evaluation.

Curves of degree 1 to 3 are supported in both 3D (world or camera space)
and 2D (pixel space).  A projected 2D curve also carries the source
weights and camera-space depths of its 3D parent so that depth along the
curve can be recovered without unprojecting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Sequence

import numpy as np

MAX_DEGREE = 3
DEFAULT_WIDTH = 1.5
DEFAULT_COLOR = (0.0, 0.0, 0.0, 1.0)

# Binomial table indexed [n, i] for n <= MAX_DEGREE.
BINOM = np.array(
    [[comb(n, i) for i in range(MAX_DEGREE + 1)] for n in range(MAX_DEGREE + 1)],
    dtype=np.float64,
)


def _frozen(a, dtype=np.float64) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def _check_common(points: np.ndarray, weights: np.ndarray, width: float, color: np.ndarray) -> None:
    n = len(points) - 1
    if not 1 <= n <= MAX_DEGREE:
        raise ValueError(f"degree must be in 1..{MAX_DEGREE}, got {n}")
    if weights.shape != (n + 1,):
        raise ValueError(f"expected {n + 1} weights, got shape {weights.shape}")
    # Interior weights may vanish; endpoint weights may not, or the
    # denominator hits zero at t=0 or t=1.
    if np.any(weights < 0) or weights[0] <= 0 or weights[-1] <= 0:
        raise ValueError(f"weights must be nonnegative with positive endpoints, got {weights}")
    if not np.all(np.isfinite(points)) or not np.all(np.isfinite(weights)):
        raise ValueError("non-finite control data")
    if not width > 0:
        raise ValueError(f"width must be positive, got {width}")
    if color.shape != (4,) or np.any(color < 0) or np.any(color > 1):
        raise ValueError(f"color must be RGBA in [0, 1], got {color}")


@dataclass(frozen=True, eq=False)
class RationalBezier3:
    """A 3D stroke: rational Bezier control polygon plus drawing attributes."""

    points: np.ndarray
    weights: np.ndarray = None
    width: float = DEFAULT_WIDTH
    color: np.ndarray = DEFAULT_COLOR
    user_order: int = 0
    id: int = 0

    def __post_init__(self):
        pts = _frozen(self.points)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must have shape (n+1, 3), got {pts.shape}")
        w = np.ones(len(pts)) if self.weights is None else self.weights
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "color", _frozen(self.color))
        object.__setattr__(self, "width", float(self.width))
        _check_common(self.points, self.weights, self.width, self.color)

    @property
    def degree(self) -> int:
        return len(self.points) - 1

    def replace(self, **changes) -> "RationalBezier3":
        kw = dict(
            points=self.points, weights=self.weights, width=self.width,
            color=self.color, user_order=self.user_order, id=self.id,
        )
        kw.update(changes)
        return RationalBezier3(**kw)

    def __eq__(self, other):
        if not isinstance(other, RationalBezier3):
            return NotImplemented
        return (
            np.array_equal(self.points, other.points)
            and np.array_equal(self.weights, other.weights)
            and self.width == other.width
            and np.array_equal(self.color, other.color)
            and self.user_order == other.user_order
            and self.id == other.id
        )


@dataclass(frozen=True, eq=False)
class RationalBezier2:
    """A projected 2D curve in pixel coordinates.

    ``weights`` are the adjusted weights (source weight times source depth);
    ``src_weights`` and ``src_depths`` are kept for depth recovery.
    """

    points: np.ndarray
    weights: np.ndarray
    src_weights: np.ndarray
    src_depths: np.ndarray
    width: float = DEFAULT_WIDTH
    color: np.ndarray = DEFAULT_COLOR
    user_order: int = 0
    id: int = 0

    def __post_init__(self):
        pts = _frozen(self.points)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"points must have shape (n+1, 2), got {pts.shape}")
        object.__setattr__(self, "points", pts)
        for name in ("weights", "src_weights", "src_depths", "color"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "width", float(self.width))
        _check_common(self.points, self.weights, self.width, self.color)
        if np.any(self.src_depths <= 0):
            raise ValueError("all source depths must be positive")
        if not np.allclose(self.weights, self.src_weights * self.src_depths, rtol=1e-12, atol=0):
            raise ValueError("adjusted weights must equal src_weights * src_depths")

    @classmethod
    def planar(cls, points, weights=None, **kw) -> "RationalBezier2":
        """Build a 2D curve with unit source depths (no 3D parent)."""
        pts = np.asarray(points, dtype=np.float64)
        w = np.ones(len(pts)) if weights is None else np.asarray(weights, dtype=np.float64)
        return cls(pts, w, w, np.ones(len(pts)), **kw)

    @property
    def degree(self) -> int:
        return len(self.points) - 1


@dataclass
class Sketch:
    """An ordered collection of 3D strokes over a background color."""

    curves: list[RationalBezier3] = field(default_factory=list)
    background_color: tuple = (1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        ids = [c.id for c in self.curves]
        if len(set(ids)) != len(ids):
            raise ValueError(f"curve ids must be unique, got {ids}")
        self.background_color = tuple(float(c) for c in self.background_color)

    def __len__(self) -> int:
        return len(self.curves)

    @classmethod
    def from_points(cls, control_points: Sequence, **curve_kw) -> "Sketch":
        """Sketch with one curve per control polygon; list order sets user_order and id."""
        curves = [
            RationalBezier3(np.asarray(p, dtype=np.float64), user_order=i, id=i, **curve_kw)
            for i, p in enumerate(control_points)
        ]
        return cls(curves)

    def with_points(self, points: Sequence[np.ndarray]) -> "Sketch":
        return Sketch(
            [c.replace(points=p) for c, p in zip(self.curves, points)],
            self.background_color,
        )

    def __eq__(self, other):
        if not isinstance(other, Sketch):
            return NotImplemented
        return self.curves == other.curves and self.background_color == other.background_color


def bernstein(i: int, n: int, t: float) -> float:
    if not 0 <= i <= n <= MAX_DEGREE:
        raise ValueError(f"need 0 <= i <= n <= {MAX_DEGREE}, got i={i}, n={n}")
    return comb(n, i) * t**i * (1.0 - t) ** (n - i)


def _eval(points: np.ndarray, weights: np.ndarray, t) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    n = len(points) - 1
    tt = t[..., None]
    i = np.arange(n + 1)
    basis = BINOM[n, : n + 1] * tt**i * (1.0 - tt) ** (n - i) * weights
    # Offsets from P0 keep coincident control points exact.
    return points[0] + (basis @ (points - points[0])) / basis.sum(axis=-1)[..., None]


def eval3(curve: RationalBezier3, t) -> np.ndarray:
    """Point(s) on a 3D curve; ``t`` may be a scalar or an array."""
    return _eval(curve.points, curve.weights, t)


def eval2(curve: RationalBezier2, t) -> np.ndarray:
    """Point(s) on a projected 2D curve, using the adjusted weights."""
    return _eval(curve.points, curve.weights, t)


def evaluate(curve, t) -> np.ndarray:
    return _eval(curve.points, curve.weights, t)


def polyline_length(curve, n_seg: int = 20) -> float:
    """Total chord length of the curve sampled at ``n_seg + 1`` uniform parameters."""
    if n_seg < 1:
        raise ValueError("n_seg must be >= 1")
    pts = evaluate(curve, np.linspace(0.0, 1.0, n_seg + 1))
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def de_casteljau(points, t: float) -> np.ndarray:
    """Polynomial Bezier evaluation by repeated interpolation."""
    pts = np.array(points, dtype=np.float64)
    while len(pts) > 1:
        pts = (1.0 - t) * pts[:-1] + t * pts[1:]
    return pts[0]


def split_homogeneous(points: np.ndarray, weights: np.ndarray, t: float):
    """Split a rational curve at ``t``; returns ((P, w) left, (P, w) right)."""
    hom = np.hstack([points * weights[:, None], weights[:, None]])
    left, right = [hom[0]], [hom[-1]]
    level = hom
    while len(level) > 1:
        level = (1.0 - t) * level[:-1] + t * level[1:]
        left.append(level[0])
        right.append(level[-1])
    left = np.array(left)
    right = np.array(right[::-1])
    return (
        (left[:, :-1] / left[:, -1:], left[:, -1]),
        (right[:, :-1] / right[:, -1:], right[:, -1]),
    )
