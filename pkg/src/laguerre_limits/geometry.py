"""Planar kernel: power distance, radical lines, paraboloid apices and predicates.

All geometry is two-dimensional.  Sign decisions use floating point with an
error-scaled tie tolerance; values inside the tolerance are reported as ties
and resolved by callers through id-order tie-breaking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple

import numpy as np

from .errors import CoincidentSites, DegenerateSites

TIE_TOL = 1e-12

Point = Tuple[float, float]


@dataclass(frozen=True)
class WeightedPoint:
    """A site ``v`` in the plane carrying the height (weight) ``h``."""

    id: int
    v: Point
    h: float

    def __post_init__(self):
        x, y = self.v
        if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(self.h)):
            raise ValueError(f"non-finite weighted point {self!r}")


@dataclass(frozen=True)
class HalfPlane:
    """The closed half-plane ``{z : 2<z, normal> >= offset}``."""

    normal: Point
    offset: float

    def value(self, z) -> float:
        """Signed slack ``2<z, normal> - offset``; nonnegative inside."""
        return 2.0 * (z[0] * self.normal[0] + z[1] * self.normal[1]) - self.offset

    def contains(self, z, tol: float = 0.0) -> bool:
        return self.value(z) >= -tol


class Sign(Enum):
    DOWN = "down"
    UP = "up"


@dataclass(frozen=True)
class Paraboloid:
    """Translate of the standard paraboloid with apex ``(apex_v, apex_h)``.

    The downward paraboloid is ``h = -||v - apex_v||^2 + apex_h``.
    """

    apex_v: Point
    apex_h: float
    sign: Sign = Sign.DOWN

    def height(self, v) -> float:
        d2 = (v[0] - self.apex_v[0]) ** 2 + (v[1] - self.apex_v[1]) ** 2
        return self.apex_h - d2 if self.sign is Sign.DOWN else self.apex_h + d2


@dataclass(frozen=True)
class Ball:
    center: Point
    radius: float


class Side(Enum):
    STRICTLY_BELOW = "strictly_below"
    ON = "on"
    STRICTLY_ABOVE = "strictly_above"


def power(w, p: WeightedPoint) -> float:
    """Power of the location ``w`` with respect to ``p``: ``||w - v||^2 + h``."""
    return (w[0] - p.v[0]) ** 2 + (w[1] - p.v[1]) ** 2 + p.h


def bisector(p1: WeightedPoint, p2: WeightedPoint) -> HalfPlane:
    """Radical half-plane on the side of ``p1``: points at least as close to p1."""
    nx = p1.v[0] - p2.v[0]
    ny = p1.v[1] - p2.v[1]
    if nx == 0.0 and ny == 0.0:
        raise CoincidentSites(f"sites {p1.id} and {p2.id} share location {p1.v}")
    offset = (p1.v[0] ** 2 + p1.v[1] ** 2) - (p2.v[0] ** 2 + p2.v[1] ** 2) + p1.h - p2.h
    return HalfPlane((nx, ny), offset)


def _solve2(a11, a12, a21, a22, b1, b2):
    det = a11 * a22 - a12 * a21
    scale = math.hypot(a11, a12) * math.hypot(a21, a22)
    if scale == 0.0 or abs(det) <= 1e-12 * scale:
        raise DegenerateSites("spatial coordinates are collinear")
    return (b1 * a22 - a12 * b2) / det, (a11 * b2 - a21 * b1) / det


def apex_paraboloid(x1: WeightedPoint, x2: WeightedPoint, x3: WeightedPoint) -> Paraboloid:
    """The downward paraboloid through three weighted points.

    Solves ``h_i = -||v_i - z||^2 + q``; differences of the three equations give
    ``2<v_j - v_1, z> = (h_j + ||v_j||^2) - (h_1 + ||v_1||^2)``.
    """
    (ax, ay), (bx, by), (cx, cy) = x1.v, x2.v, x3.v
    # work relative to x1 for conditioning
    ux, uy, vx, vy = bx - ax, by - ay, cx - ax, cy - ay
    rb = ux * ux + uy * uy + x2.h - x1.h
    rc = vx * vx + vy * vy + x3.h - x1.h
    zx, zy = _solve2(2 * ux, 2 * uy, 2 * vx, 2 * vy, rb, rc)
    q = x1.h + zx * zx + zy * zy
    return Paraboloid((ax + zx, ay + zy), q, Sign.DOWN)


def circumball(y1, y2, y3) -> Ball:
    """Circumscribed ball of three points: rows ``2(y_j - y_1)``, rhs ``||y_j||^2 - ||y_1||^2``."""
    ux, uy = y2[0] - y1[0], y2[1] - y1[1]
    vx, vy = y3[0] - y1[0], y3[1] - y1[1]
    cx, cy = _solve2(2 * ux, 2 * uy, 2 * vx, 2 * vy, ux * ux + uy * uy, vx * vx + vy * vy)
    return Ball((y1[0] + cx, y1[1] + cy), math.hypot(cx, cy))


def paraboloid_residual(p: WeightedPoint, par: Paraboloid) -> Tuple[float, float]:
    """Return ``(power(apex, p) - q, scale)``; negative means strictly below."""
    dx = p.v[0] - par.apex_v[0]
    dy = p.v[1] - par.apex_v[1]
    d2 = math.fsum((dx * dx, dy * dy))
    res = math.fsum((dx * dx, dy * dy, p.h, -par.apex_h))
    scale = max(1.0, d2, abs(p.h), abs(par.apex_h))
    return res, scale


def below_paraboloid(p: WeightedPoint, par: Paraboloid) -> Side:
    """Classify ``p`` against a downward paraboloid (hypograph test)."""
    if par.sign is not Sign.DOWN:
        raise ValueError("below_paraboloid expects a downward paraboloid")
    res, scale = paraboloid_residual(p, par)
    if abs(res) < TIE_TOL * scale:
        return Side.ON
    return Side.STRICTLY_BELOW if res < 0 else Side.STRICTLY_ABOVE


# ---------------------------------------------------------------------------
# Predicates used by the triangulation.  They return +1, -1 or 0 (tie).


def orient2d(ax, ay, bx, by, cx, cy) -> int:
    """Sign of the signed area of (a, b, c); positive for counter-clockwise."""
    l = (bx - ax) * (cy - ay)
    r = (by - ay) * (cx - ax)
    det = l - r
    if abs(det) <= TIE_TOL * (abs(l) + abs(r)):
        return 0
    return 1 if det > 0 else -1


def lifted_incircle(a, b, c, d) -> Tuple[float, float]:
    """Power test determinant for ``d`` against the triangle ``a, b, c``.

    Each argument is ``(x, y, h)``.  For counter-clockwise ``a, b, c`` the value
    is positive iff ``d`` lies strictly below the downward paraboloid through
    them.  Returns ``(det, permanent)`` so callers can apply the tie tolerance.
    """
    dx, dy, dh = d
    adx, ady = a[0] - dx, a[1] - dy
    bdx, bdy = b[0] - dx, b[1] - dy
    cdx, cdy = c[0] - dx, c[1] - dy
    alift = adx * adx + ady * ady + (a[2] - dh)
    blift = bdx * bdx + bdy * bdy + (b[2] - dh)
    clift = cdx * cdx + cdy * cdy + (c[2] - dh)
    bc = bdx * cdy - bdy * cdx
    ca = cdx * ady - cdy * adx
    ab = adx * bdy - ady * bdx
    det = alift * bc + blift * ca + clift * ab
    perm = (
        (abs(adx * adx + ady * ady) + abs(a[2] - dh)) * (abs(bdx * cdy) + abs(bdy * cdx))
        + (abs(bdx * bdx + bdy * bdy) + abs(b[2] - dh)) * (abs(cdx * ady) + abs(cdy * adx))
        + (abs(cdx * cdx + cdy * cdy) + abs(c[2] - dh)) * (abs(adx * bdy) + abs(ady * bdx))
    )
    return det, perm


def lifted_incircle_partials(a, b, c, d) -> Sequence[float]:
    """Derivatives of :func:`lifted_incircle` with respect to each lifted height.

    They drive the symbolic perturbation that breaks exact ties.
    """
    dx, dy = d[0], d[1]
    adx, ady = a[0] - dx, a[1] - dy
    bdx, bdy = b[0] - dx, b[1] - dy
    cdx, cdy = c[0] - dx, c[1] - dy
    pa = bdx * cdy - bdy * cdx
    pb = cdx * ady - cdy * adx
    pc = adx * bdy - ady * bdx
    return pa, pb, pc, -(pa + pb + pc)


def power_envelope(w: np.ndarray, xy: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Lower power envelope ``min_p pow(w, p)`` at each row of ``w``."""
    w = np.atleast_2d(np.asarray(w, dtype=float))
    d2 = ((w[:, None, :] - xy[None, :, :]) ** 2).sum(axis=2) + h[None, :]
    return d2.min(axis=1)


# ---------------------------------------------------------------------------
# Spatial regions shared by samplers, certificates and skeleton clipping.


@dataclass(frozen=True)
class Disk:
    cx: float
    cy: float
    radius: float

    @property
    def area(self) -> float:
        return math.pi * self.radius ** 2

    def bbox(self):
        r = self.radius
        return (self.cx - r, self.cy - r, self.cx + r, self.cy + r)

    def contains(self, xy: np.ndarray, tol: float = 0.0) -> np.ndarray:
        xy = np.atleast_2d(xy)
        return np.hypot(xy[:, 0] - self.cx, xy[:, 1] - self.cy) <= self.radius + tol

    def uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        rho = self.radius * np.sqrt(rng.random(n))
        phi = 2 * math.pi * rng.random(n)
        return np.column_stack((self.cx + rho * np.cos(phi), self.cy + rho * np.sin(phi)))


@dataclass(frozen=True)
class Annulus:
    cx: float
    cy: float
    inner: float
    outer: float

    @property
    def area(self) -> float:
        return math.pi * (self.outer ** 2 - self.inner ** 2)

    def bbox(self):
        r = self.outer
        return (self.cx - r, self.cy - r, self.cx + r, self.cy + r)

    def contains(self, xy: np.ndarray, tol: float = 0.0) -> np.ndarray:
        xy = np.atleast_2d(xy)
        rho = np.hypot(xy[:, 0] - self.cx, xy[:, 1] - self.cy)
        return (rho > self.inner - tol) & (rho <= self.outer + tol)

    def uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        r0, r1 = self.inner ** 2, self.outer ** 2
        rho = np.sqrt(r0 + (r1 - r0) * rng.random(n))
        phi = 2 * math.pi * rng.random(n)
        return np.column_stack((self.cx + rho * np.cos(phi), self.cy + rho * np.sin(phi)))


@dataclass(frozen=True)
class Box:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x1 >= self.x0 and self.y1 >= self.y0):
            raise ValueError(f"malformed box {self!r}")

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def bbox(self):
        return (self.x0, self.y0, self.x1, self.y1)

    def contains(self, xy: np.ndarray, tol: float = 0.0) -> np.ndarray:
        xy = np.atleast_2d(xy)
        return (
            (xy[:, 0] >= self.x0 - tol)
            & (xy[:, 0] <= self.x1 + tol)
            & (xy[:, 1] >= self.y0 - tol)
            & (xy[:, 1] <= self.y1 + tol)
        )

    def uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        u = rng.random((n, 2))
        return np.column_stack(
            (self.x0 + (self.x1 - self.x0) * u[:, 0], self.y0 + (self.y1 - self.y0) * u[:, 1])
        )

    def expand(self, margin: float) -> "Box":
        return Box(self.x0 - margin, self.y0 - margin, self.x1 + margin, self.y1 + margin)

    def scaled(self, factor: float) -> "Box":
        """Box with the same center and side lengths multiplied by ``factor``."""
        mx, my = (self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2
        hx, hy = (self.x1 - self.x0) / 2 * factor, (self.y1 - self.y0) / 2 * factor
        return Box(mx - hx, my - hy, mx + hx, my + hy)

    def corners(self):
        return [(self.x0, self.y0), (self.x1, self.y0), (self.x1, self.y1), (self.x0, self.y1)]
