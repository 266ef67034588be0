"""Closest point between a 2D query point and a rational Bezier curve.

The squared distance |p(t) - q|^2 is stationary where

    rho(t) = sum_k (N_k(t) - q_k D(t)) * (N_k'(t) D(t) - N_k(t) D'(t))

vanishes, ``N/D`` being the power-basis numerator and denominator of the
curve.  ``rho`` has degree 3n - 2 (1, 4 or 7).  Its real roots in (0, 1)
are isolated by the roots of two lower-degree isolator polynomials ``a``
and ``b`` with ``a = c * rho - b * rho'``:  between any two adjacent roots
of ``rho`` one of ``a`` or ``b`` changes sign.  Each isolating interval is
then refined with a bracketed Newton/bisection hybrid.

Everything performance-critical is written as numba kernels on plain
float64 arrays so the rasterizer can call it per sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .curves import RationalBezier2

MAX_POLY_DEGREE = 9
TRIM_RTOL = 1e-12
# A critical point counts as a tangential root when |rho| there is within this
# many ulps of the evaluation error bound sum |c_k| |x|^k.
MULTIPLE_ROOT_ULPS = 64.0
FALLBACK_SUBINTERVALS = 64
# Roots this close with the polynomial vanishing between them are one multiple root.
CLUSTER_GAP = 1e-7
REFINE_MAX_ITER = 64

# Bernstein -> power basis, indexed [n, k, i]: coefficient of t^k contributed by b_i.
_B2P = np.zeros((4, 4, 4))
for _n in range(4):
    for _k in range(_n + 1):
        for _i in range(_k + 1):
            _B2P[_n, _k, _i] = math.comb(_n, _k) * math.comb(_k, _i) * (-1.0) ** (_k - _i)


class SingularIsolator(ArithmeticError):
    """The linear system defining the degree-7 isolator polynomials is singular."""


# --------------------------------------------------------------------------
# polynomial kernels (ascending coefficients, explicit degree)


@numba.njit(cache=True)
def peval(c, deg, t):
    acc = c[deg]
    for k in range(deg - 1, -1, -1):
        acc = acc * t + c[k]
    return acc


@numba.njit(cache=True)
def peval_d(c, deg, t):
    """Value and first derivative by Horner's scheme."""
    f = c[deg]
    df = 0.0
    for k in range(deg - 1, -1, -1):
        df = df * t + f
        f = f * t + c[k]
    return f, df


@numba.njit(cache=True)
def pderiv(c, deg, out):
    for k in range(1, deg + 1):
        out[k - 1] = k * c[k]
    return max(deg - 1, 0)


@numba.njit(cache=True)
def max_abs(c, deg):
    m = 0.0
    for k in range(deg + 1):
        a = abs(c[k])
        if a > m:
            m = a
    return m


@numba.njit(cache=True)
def vanishes_at(c, deg, x):
    """True when c(x) is zero up to the rounding error of evaluating it."""
    bound = 0.0
    ax = abs(x)
    for k in range(deg, -1, -1):
        bound = bound * ax + abs(c[k])
    return abs(peval(c, deg, x)) <= MULTIPLE_ROOT_ULPS * 2.220446049250313e-16 * bound


@numba.njit(cache=True)
def trimmed_degree(c, deg):
    """Drop leading coefficients that are negligible relative to the largest."""
    m = max_abs(c, deg)
    if m == 0.0:
        return 0
    while deg > 0 and abs(c[deg]) <= TRIM_RTOL * m:
        deg -= 1
    return deg


@numba.njit(cache=True)
def refine(c, deg, lo, hi):
    """Root of ``c`` in a sign-changing bracket [lo, hi]; NaN if no sign change.

    Newton steps are taken only when they stay strictly inside the current
    bracket and reduce |c|; otherwise the bracket is bisected.
    """
    flo = peval(c, deg, lo)
    fhi = peval(c, deg, hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0.0) == (fhi > 0.0):
        return np.nan
    neg_at_lo = flo < 0.0
    t = 0.5 * (lo + hi)
    f, df = peval_d(c, deg, t)
    for _ in range(REFINE_MAX_ITER):
        if f == 0.0:
            return t
        if (f < 0.0) == neg_at_lo:
            lo = t
        else:
            hi = t
        if hi - lo <= 1e-15:
            break
        moved = False
        if df != 0.0:
            tn = t - f / df
            if lo < tn < hi:
                fn, dfn = peval_d(c, deg, tn)
                if abs(fn) < abs(f):
                    step = abs(tn - t)
                    t, f, df = tn, fn, dfn
                    moved = True
                    if step <= 1e-15:
                        break
        if not moved:
            t = 0.5 * (lo + hi)
            f, df = peval_d(c, deg, t)
    return t


@numba.njit(cache=True)
def _insert_sorted(buf, count, value):
    i = count
    while i > 0 and buf[i - 1] > value:
        buf[i] = buf[i - 1]
        i -= 1
    buf[i] = value
    return count + 1


@numba.njit(cache=True)
def cascade_roots(c, deg, lo, hi, out):
    """All sign-changing roots of ``c`` in [lo, hi], sorted; returns the count.

    Works up the derivative chain: between consecutive critical points the
    polynomial is monotone, so each such interval holds at most one root.
    A critical point where the polynomial itself vanishes is also reported.
    """
    if deg <= 0:
        return 0
    derivs = np.zeros((deg + 1, deg + 1))
    for k in range(deg + 1):
        derivs[0, k] = c[k]
    for lvl in range(1, deg):
        pderiv(derivs[lvl - 1], deg - lvl + 1, derivs[lvl])
    # level deg-1 is linear
    crit = np.empty(deg + 2)
    roots = np.empty(deg + 2)
    ncrit = 0
    for lvl in range(deg - 1, -1, -1):
        d = deg - lvl
        p = derivs[lvl]
        pts = np.empty(ncrit + 2)
        pts[0] = lo
        for k in range(ncrit):
            pts[k + 1] = crit[k]
        pts[ncrit + 1] = hi
        nroots = 0
        for k in range(ncrit + 1):
            a = pts[k]
            b = pts[k + 1]
            if b <= a:
                continue
            r = refine(p, d, a, b)
            if not np.isnan(r):
                if nroots == 0 or r > roots[nroots - 1]:
                    roots[nroots] = r
                    nroots += 1
        # tangential roots sitting on a critical point
        for k in range(ncrit):
            x = crit[k]
            if vanishes_at(p, d, x):
                dup = False
                for j in range(nroots):
                    if abs(roots[j] - x) <= 1e-12:
                        dup = True
                if not dup:
                    nroots = _insert_sorted(roots, nroots, x)
        for k in range(nroots):
            crit[k] = roots[k]
        ncrit = nroots
    for k in range(ncrit):
        out[k] = crit[k]
    return ncrit


@numba.njit(cache=True)
def solve_cubic(c, out):
    """Real roots of c0 + c1 t + c2 t^2 + c3 t^3 in closed form, Newton-polished.

    Lower-degree input (vanishing leading coefficients) is handled.  Returns
    the number of roots written to ``out`` (unsorted).
    """
    deg = trimmed_degree(c, 3)
    if deg == 0:
        return 0
    if deg == 1:
        out[0] = -c[0] / c[1]
        return 1
    if deg == 2:
        a, b, cc = c[2], c[1], c[0]
        disc = b * b - 4.0 * a * cc
        if disc < 0.0:
            return 0
        sq = math.sqrt(disc)
        qq = -0.5 * (b + math.copysign(sq, b))
        n = 0
        if qq != 0.0:
            out[n] = qq / a
            n += 1
            out[n] = cc / qq
            n += 1
        else:
            out[n] = 0.0
            n += 1
        return n
    a = c[2] / c[3]
    b = c[1] / c[3]
    d = c[0] / c[3]
    q = (a * a - 3.0 * b) / 9.0
    r = (2.0 * a * a * a - 9.0 * a * b + 27.0 * d) / 54.0
    n = 0
    if r * r < q * q * q:
        theta = math.acos(min(1.0, max(-1.0, r / math.sqrt(q * q * q))))
        sq = -2.0 * math.sqrt(q)
        out[0] = sq * math.cos(theta / 3.0) - a / 3.0
        out[1] = sq * math.cos((theta + 2.0 * math.pi) / 3.0) - a / 3.0
        out[2] = sq * math.cos((theta - 2.0 * math.pi) / 3.0) - a / 3.0
        n = 3
    else:
        big_a = -math.copysign((abs(r) + math.sqrt(r * r - q * q * q)) ** (1.0 / 3.0), r)
        big_b = q / big_a if big_a != 0.0 else 0.0
        out[0] = big_a + big_b - a / 3.0
        n = 1
    for k in range(n):
        x = out[k]
        for _ in range(3):
            f, df = peval_d(c, 3, x)
            if df == 0.0:
                break
            xn = x - f / df
            if abs(peval(c, 3, xn)) < abs(f):
                x = xn
            else:
                break
        out[k] = x
    return n


@numba.njit(cache=True)
def isolator4(m, a, b):
    """Quadratic ``a`` and linear ``b`` for a monic quartic ``m``."""
    B, C, D, E = m[3], m[2], m[1], m[0]
    a[2] = C / 2.0 - 3.0 * B * B / 16.0
    a[1] = 3.0 * D / 4.0 - C * B / 8.0
    a[0] = E - D * B / 16.0
    a[3] = 0.0
    b[1] = 0.25
    b[0] = B / 16.0
    b[2] = 0.0
    b[3] = 0.0


@numba.njit(cache=True)
def isolator7(m, a, b):
    """Cubic ``a`` and ``b`` for a monic septic ``m``; False if the system is singular.

    With c = 7t^2 + A t + B and b = t^3 + C t^2 + D t + E, the coefficients
    of t^4..t^8 in a = c m - b m' are forced to zero (t^9 cancels already).
    """
    p = np.zeros(12)
    for k in range(8):
        p[k + 2] = m[k]  # shifted so p[j + 2] is the coefficient of t^j
    q = np.zeros(12)
    for j in range(7):
        q[j + 2] = (j + 1) * m[j + 1]
    M = np.zeros((5, 5))
    rhs = np.zeros(5)
    for row in range(5):
        e = row + 4
        M[row, 0] = p[e - 1 + 2]
        M[row, 1] = p[e + 2]
        M[row, 2] = -q[e - 2 + 2]
        M[row, 3] = -q[e - 1 + 2]
        M[row, 4] = -q[e + 2]
        rhs[row] = q[e - 3 + 2] - 7.0 * p[e - 2 + 2]
    # Gaussian elimination with partial pivoting
    mscale = 0.0
    for i in range(5):
        for j in range(5):
            mscale = max(mscale, abs(M[i, j]))
    if mscale == 0.0:
        return False
    for col in range(5):
        piv = col
        for r in range(col + 1, 5):
            if abs(M[r, col]) > abs(M[piv, col]):
                piv = r
        if abs(M[piv, col]) <= 1e-12 * mscale:
            return False
        if piv != col:
            for j in range(5):
                M[col, j], M[piv, j] = M[piv, j], M[col, j]
            rhs[col], rhs[piv] = rhs[piv], rhs[col]
        for r in range(col + 1, 5):
            fct = M[r, col] / M[col, col]
            for j in range(col, 5):
                M[r, j] -= fct * M[col, j]
            rhs[r] -= fct * rhs[col]
    x = np.zeros(5)
    for r in range(4, -1, -1):
        acc = rhs[r]
        for j in range(r + 1, 5):
            acc -= M[r, j] * x[j]
        x[r] = acc / M[r, r]
    cA, cB, cC, cD, cE = x[0], x[1], x[2], x[3], x[4]
    for e in range(4):
        crho = 7.0 * p[e - 2 + 2] + cA * p[e - 1 + 2] + cB * p[e + 2]
        brho = q[e - 3 + 2] + cC * q[e - 2 + 2] + cD * q[e - 1 + 2] + cE * q[e + 2]
        a[e] = crho - brho
    b[0] = cE
    b[1] = cD
    b[2] = cC
    b[3] = 1.0
    return True


@numba.njit(cache=True)
def isolator_points(c, deg, pts):
    """Interval endpoints {0, 1} + isolator roots in (0, 1), sorted.

    ``deg`` must be 4 or 7.  Returns the number of points, or -1 when the
    degree-7 system is singular.
    """
    m = np.empty(deg + 1)
    lead = c[deg]
    for k in range(deg + 1):
        m[k] = c[k] / lead
    a = np.zeros(4)
    b = np.zeros(4)
    if deg == 4:
        isolator4(m, a, b)
    else:
        if not isolator7(m, a, b):
            return -1
    n = 0
    pts[n] = 0.0
    n += 1
    tmp = np.empty(3)
    for poly in (a, b):
        k = solve_cubic(poly, tmp)
        for j in range(k):
            r = tmp[j]
            if 0.0 < r < 1.0:
                n = _insert_sorted(pts, n, r)
    n = _insert_sorted(pts, n, 1.0)
    return n


@numba.njit(cache=True)
def _add_root(buf, count, x):
    """Insert ``x`` keeping ``buf`` sorted, skipping near-duplicates."""
    for j in range(count):
        if abs(buf[j] - x) <= 1e-12:
            return count
    return _insert_sorted(buf, count, x)


@numba.njit(cache=True)
def roots01(c, deg, out, multiple_roots):
    """Real roots of ``c`` in [0, 1], sorted; returns the count.

    With ``multiple_roots`` set, intervals without a sign change are searched
    for tangential (even-multiplicity) roots via the roots of c'.
    """
    deg = trimmed_degree(c, deg)
    if deg == 0:
        return 0
    pts = np.empty(FALLBACK_SUBINTERVALS + 2)
    npts = -1
    if deg == 4 or deg == 7:
        npts = isolator_points(c, deg, pts)
        if npts < 0:
            for k in range(FALLBACK_SUBINTERVALS + 1):
                pts[k] = k / FALLBACK_SUBINTERVALS
            npts = FALLBACK_SUBINTERVALS + 1
    else:
        return cascade_roots(c, deg, 0.0, 1.0, out)
    nroots = 0
    dc = np.empty(deg)
    dtmp = np.empty(deg + 2)
    if multiple_roots:
        pderiv(c, deg, dc)
    for k in range(npts - 1):
        lo = pts[k]
        hi = pts[k + 1]
        if hi <= lo:
            continue
        r = refine(c, deg, lo, hi)
        if not np.isnan(r):
            nroots = _add_root(out, nroots, r)
        elif multiple_roots:
            nd = cascade_roots(dc, deg - 1, lo, hi, dtmp)
            for j in range(nd):
                x = dtmp[j]
                if vanishes_at(c, deg, x):
                    nroots = _add_root(out, nroots, x)
    if multiple_roots:
        # a tangential root can coincide with an isolator root
        for k in range(1, npts - 1):
            x = pts[k]
            if vanishes_at(c, deg, x):
                nroots = _add_root(out, nroots, x)
        nroots = _merge_clusters(c, deg, out, nroots)
    return nroots


@numba.njit(cache=True)
def _merge_clusters(c, deg, roots, count):
    """Collapse roots closer than CLUSTER_GAP between which ``c`` vanishes to rounding.

    Rounding splits a multiple root into a few simple ones about sqrt(eps)
    apart; the member with the smallest |c'| is the best estimate.
    """
    if count < 2:
        return count
    kept = 0
    best = roots[0]
    best_slope = abs(peval_d(c, deg, best)[1])
    for j in range(1, count):
        x = roots[j]
        slope = abs(peval_d(c, deg, x)[1])
        if x - roots[j - 1] <= CLUSTER_GAP and vanishes_at(c, deg, 0.5 * (x + roots[j - 1])):
            if slope < best_slope:
                best = x
                best_slope = slope
        else:
            roots[kept] = best
            kept += 1
            best = x
            best_slope = slope
    roots[kept] = best
    return kept + 1


# --------------------------------------------------------------------------
# stationarity polynomial and closest point


@numba.njit(cache=True)
def stationarity_coeffs(points, weights, n, qx, qy, out):
    """Numerator of d/dt |p(t) - q|^2 / 2 in ascending powers; returns its degree.

    The curve is translated so that q sits at the origin before conversion
    to the power basis.
    """
    D = np.zeros(4)
    Nx = np.zeros(4)
    Ny = np.zeros(4)
    for k in range(n + 1):
        for i in range(k + 1):
            f = _B2P[n, k, i] * weights[i]
            D[k] += f
            Nx[k] += f * (points[i, 0] - qx)
            Ny[k] += f * (points[i, 1] - qy)
    dD = np.zeros(4)
    dNx = np.zeros(4)
    dNy = np.zeros(4)
    pderiv(D, n, dD)
    pderiv(Nx, n, dNx)
    pderiv(Ny, n, dNy)
    # M = N' D - N D' has nominal degree 2n-1 but its top term cancels.
    mdeg = max(2 * n - 2, 0)
    Mx = np.zeros(7)
    My = np.zeros(7)
    for i in range(n + 1):
        for j in range(n + 1):
            if i + j <= mdeg:
                if i < n:
                    Mx[i + j] += dNx[i] * D[j]
                    My[i + j] += dNy[i] * D[j]
                if j < n:
                    Mx[i + j] -= Nx[i] * dD[j]
                    My[i + j] -= Ny[i] * dD[j]
    deg = n + mdeg
    for k in range(deg + 1):
        out[k] = 0.0
    for i in range(n + 1):
        for j in range(mdeg + 1):
            out[i + j] += Nx[i] * Mx[j] + Ny[i] * My[j]
    return deg


@numba.njit(cache=True)
def closest_point_kernel(points, weights, n, qx, qy):
    """(t*, squared distance) of the closest curve point to (qx, qy)."""
    rho = np.empty(10)
    deg = stationarity_coeffs(points, weights, n, qx, qy, rho)
    roots = np.empty(10)
    nr = roots01(rho, deg, roots, False)
    p = np.empty(2)
    eval_pt(points, weights, n, 0.0, p)
    best_t = 0.0
    best = (p[0] - qx) ** 2 + (p[1] - qy) ** 2
    eval_pt(points, weights, n, 1.0, p)
    d = (p[0] - qx) ** 2 + (p[1] - qy) ** 2
    if d < best:
        best, best_t = d, 1.0
    for k in range(nr):
        t = roots[k]
        eval_pt(points, weights, n, t, p)
        d = (p[0] - qx) ** 2 + (p[1] - qy) ** 2
        if d < best:
            best, best_t = d, t
    return best_t, best


@numba.njit(cache=True)
def eval_pt(points, weights, n, t, out):
    s = 1.0 - t
    x = 0.0
    y = 0.0
    den = 0.0
    for i in range(n + 1):
        c = 1.0
        if n == 2 and i == 1:
            c = 2.0
        elif n == 3 and (i == 1 or i == 2):
            c = 3.0
        bw = c * t**i * s ** (n - i) * weights[i]
        den += bw
        x += bw * points[i, 0]
        y += bw * points[i, 1]
    out[0] = x / den
    out[1] = y / den
    return den


# --------------------------------------------------------------------------
# Python-level API


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial with ascending coefficients, trimmed of negligible leading terms."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.array(self.coeffs, dtype=np.float64))
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        deg = int(trimmed_degree(c, len(c) - 1)) if len(c) else 0
        c = c[: deg + 1] if len(c) else np.zeros(1)
        if deg > MAX_POLY_DEGREE:
            raise ValueError(f"degree {deg} exceeds {MAX_POLY_DEGREE}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_roots(cls, roots, leading: float = 1.0) -> "Polynomial":
        c = np.array([leading], dtype=np.float64)
        for r in roots:
            c = np.convolve(c, [-r, 1.0])
        return cls(c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.degree == 0 and self.coeffs[0] == 0.0

    def __call__(self, t):
        return np.polynomial.polynomial.polyval(t, self.coeffs)

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            return Polynomial(np.convolve(self.coeffs, other.coeffs))
        return Polynomial(self.coeffs * other)

    __rmul__ = __mul__

    def derivative(self) -> "Polynomial":
        if self.degree == 0:
            return Polynomial([0.0])
        return Polynomial(self.coeffs[1:] * np.arange(1, self.degree + 1))


@dataclass(frozen=True)
class ClosestPointResult:
    t_star: float
    distance: float


def stationarity_polynomial(curve: RationalBezier2, q) -> Polynomial:
    out = np.zeros(10)
    deg = stationarity_coeffs(curve.points, curve.weights, curve.degree, float(q[0]), float(q[1]), out)
    return Polynomial(out[: deg + 1])


def isolator_polynomials(rho: Polynomial) -> tuple[Polynomial, Polynomial]:
    """The pair (a, b) used to isolate the roots of a quartic or septic."""
    m = rho.coeffs / rho.coeffs[-1]
    a = np.zeros(4)
    b = np.zeros(4)
    if rho.degree == 4:
        isolator4(m, a, b)
    elif rho.degree == 7:
        if not isolator7(m, a, b):
            raise SingularIsolator("degree-7 isolator system is singular")
    else:
        raise ValueError(f"isolators are defined for degree 4 or 7, got {rho.degree}")
    return Polynomial(a), Polynomial(b)


def isolator_intervals(rho: Polynomial) -> list[tuple[float, float]]:
    """Intervals of [0, 1] bounded by 0, 1 and the isolator roots in (0, 1).

    Raises SingularIsolator when the degree-7 system has no solution;
    callers then scan uniform subintervals instead.
    """
    if rho.degree not in (4, 7):
        raise ValueError(f"isolators are defined for degree 4 or 7, got {rho.degree}")
    pts = np.empty(FALLBACK_SUBINTERVALS + 2)
    n = isolator_points(rho.coeffs, rho.degree, pts)
    if n < 0:
        raise SingularIsolator("degree-7 isolator system is singular")
    return [(float(pts[k]), float(pts[k + 1])) for k in range(n - 1) if pts[k + 1] > pts[k]]


def refine_root(rho: Polynomial, interval: tuple[float, float]) -> float | None:
    """Root of ``rho`` in a sign-changing interval, else None."""
    r = refine(rho.coeffs, rho.degree, float(interval[0]), float(interval[1]))
    return None if np.isnan(r) else float(r)


def find_roots(rho: Polynomial) -> np.ndarray:
    """All real roots of ``rho`` in [0, 1], including even-multiplicity ones."""
    if rho.is_zero:
        return np.zeros(0)
    out = np.empty(MAX_POLY_DEGREE + 2)
    n = roots01(rho.coeffs, rho.degree, out, True)
    return out[:n].copy()


def closest_point(curve: RationalBezier2, q) -> ClosestPointResult:
    t, d2 = closest_point_kernel(curve.points, curve.weights, curve.degree, float(q[0]), float(q[1]))
    return ClosestPointResult(float(t), math.sqrt(d2))
