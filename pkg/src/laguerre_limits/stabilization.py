"""Stabilization regions, the events H^max / H^min / E, and their analytic bounds.

The lower power envelope ``w -> min_p pow(w, p)`` is piecewise quadratic and
convex on each Laguerre cell, so over a disk its maximum sits at a Laguerre
vertex, on a cell edge where it leaves the disk, or at the boundary point
antipodal to a site.  Over a box the antipodal points are replaced by corners.
Both suprema are therefore exact maxima over finite candidate sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from .densities import HeightDensity, frac_integral, kappa
from .errors import DegenerateConfiguration, EmptyConfiguration, OutOfRange
from .geometry import Box, Disk, WeightedPoint
from .sampling import PointConfiguration
from .tessellation import DualTriangulation, _triangle_meets, build_dual

Region2D = Union[Disk, Box]


class StabKind(Enum):
    K0 = "K0"
    K1 = "K1"
    K2 = "K2"
    K3 = "K3"
    K4 = "K4"
    K5 = "K5"


_PARAMS = {
    StabKind.K0: ("R", "r", "t"),
    StabKind.K1: ("R", "r"),
    StabKind.K2: ("R", "r"),
    StabKind.K3: ("a", "T"),
    StabKind.K4: ("a", "t"),
    StabKind.K5: ("r", "t", "R"),
}


@dataclass(frozen=True)
class StabRegion:
    """One of the regions ``K0 .. K5`` in space x height, centred at the origin."""

    kind: StabKind
    params: Tuple[Tuple[str, float], ...]

    def __post_init__(self):
        names = tuple(k for k, _ in self.params)
        if names != _PARAMS[self.kind]:
            raise ValueError(f"{self.kind.value} takes {_PARAMS[self.kind]}, got {names}")
        p = dict(self.params)
        for key in ("R", "r", "a"):
            if key in p and not p[key] > 0:
                raise ValueError(f"{key} must be positive")
        if self.kind is StabKind.K0 and p["t"] > 0:
            raise ValueError("K0 needs t <= 0")

    @classmethod
    def make(cls, kind: str, **params: float) -> "StabRegion":
        k = StabKind(kind)
        return cls(k, tuple((name, float(params[name])) for name in _PARAMS[k]))

    def __getattr__(self, name):
        for k, v in object.__getattribute__(self, "params"):
            if k == name:
                return v
        raise AttributeError(name)

    def radius(self) -> float:
        """Spatial radius of the projection (for sampling)."""
        p = dict(self.params)
        if self.kind is StabKind.K0:
            return 2 * math.sqrt((p["R"] + p["r"]) ** 2 - p["t"])
        if self.kind is StabKind.K1:
            return 3 * (p["R"] + p["r"])
        if self.kind is StabKind.K2:
            return 2 * (p["R"] + p["r"])
        raise ValueError(f"{self.kind.value} has no bounded projection")

    def heights(self) -> Tuple[float, float]:
        p = dict(self.params)
        if self.kind is StabKind.K0:
            return (p["t"], (p["R"] + p["r"]) ** 2)
        if self.kind is StabKind.K1:
            s = (p["R"] + p["r"]) ** 2
            return (-1.25 * s, s)
        if self.kind is StabKind.K2:
            return (0.0, (p["R"] + p["r"]) ** 2)
        raise ValueError(f"{self.kind.value} has no bounded height range")


def region_contains(K: StabRegion, p: WeightedPoint) -> bool:
    """Literal membership test."""
    x = dict(K.params)
    n = math.hypot(*p.v)
    h = p.h
    if K.kind is StabKind.K0:
        s = (x["R"] + x["r"]) ** 2
        return x["t"] <= h <= s and n <= 2 * math.sqrt(s - x["t"])
    if K.kind is StabKind.K1:
        s = (x["R"] + x["r"]) ** 2
        return -1.25 * s <= h <= s and n <= 3 * (x["R"] + x["r"])
    if K.kind is StabKind.K2:
        return 0 <= h <= (x["R"] + x["r"]) ** 2 and n <= 2 * (x["R"] + x["r"])
    if K.kind is StabKind.K3:
        return h <= x["T"] - x["a"] ** 2 and n <= math.sqrt(x["T"] - h) - x["a"]
    if K.kind is StabKind.K4:
        return h < x["t"] and n < x["a"] + math.sqrt(x["t"] - h)
    # K5 lives in apex space: (w, q)
    return h >= x["r"] ** 2 / 2 + x["t"] and n <= x["R"] + math.sqrt(h - x["t"])


# ---------------------------------------------------------------------------
# envelope extrema


def _require(config: PointConfiguration):
    if len(config) == 0:
        raise EmptyConfiguration("event needs a nonempty configuration")


def _as_region(region) -> Region2D:
    if isinstance(region, (Disk, Box)):
        return region
    return Disk(0.0, 0.0, float(region))


def envelope_inf(config: PointConfiguration, region) -> float:
    """``inf_{w in region} min_p pow(w, p)``: each site's nearest point of the region."""
    _require(config)
    C = _as_region(region)
    if isinstance(C, Disk):
        dist = np.hypot(config.xy[:, 0] - C.cx, config.xy[:, 1] - C.cy)
        gap = np.maximum(dist - C.radius, 0.0)
    else:
        gx = np.maximum(np.maximum(C.x0 - config.xy[:, 0], config.xy[:, 0] - C.x1), 0.0)
        gy = np.maximum(np.maximum(C.y0 - config.xy[:, 1], config.xy[:, 1] - C.y1), 0.0)
        gap = np.hypot(gx, gy)
    return float(np.min(gap * gap + config.h))


class EnvelopeQuery:
    """Exact lower power envelope via a nearest-neighbour search in one more dimension.

    With ``s = sqrt(h - h_min)`` we have ``pow(w, p) = |(w, 0) - (v, s)|^2 + h_min``.
    """

    def __init__(self, xy: np.ndarray, h: np.ndarray):
        self.hmin = float(h.min())
        lift = np.sqrt(np.maximum(h - self.hmin, 0.0))
        self.tree = cKDTree(np.column_stack([xy, lift]))
        self.xy, self.h = xy, h

    def __call__(self, w: np.ndarray) -> np.ndarray:
        w = np.atleast_2d(w)
        if w.shape[0] == 0:
            return np.zeros(0)
        _, idx = self.tree.query(np.column_stack([w, np.zeros(w.shape[0])]))
        d = w - self.xy[idx]
        # recompute directly from the winning site to avoid sqrt round-off
        return np.einsum("ij,ij->i", d, d) + self.h[idx]


def _relevant(config: PointConfiguration, C: Region2D) -> np.ndarray:
    """Sites that can realise the envelope somewhere in ``C``."""
    xy, h = config.xy, config.h
    if isinstance(C, Disk):
        dist = np.hypot(xy[:, 0] - C.cx, xy[:, 1] - C.cy)
        far = (dist + C.radius) ** 2 + h
        near = np.maximum(dist - C.radius, 0.0) ** 2 + h
    else:
        corners = np.array(C.corners())
        d2 = ((xy[:, None, :] - corners[None, :, :]) ** 2).sum(axis=2)
        far = d2.max(axis=1) + h
        gx = np.maximum(np.maximum(C.x0 - xy[:, 0], xy[:, 0] - C.x1), 0.0)
        gy = np.maximum(np.maximum(C.y0 - xy[:, 1], xy[:, 1] - C.y1), 0.0)
        near = gx * gx + gy * gy + h
    return near <= far.min() * (1 + 1e-12) + 1e-12


def _line_circle(nx, ny, c, C: Disk):
    """Points of ``2<z, n> = c`` on the circle ``C``; arrays in, (k x 2) out."""
    nn = nx * nx + ny * ny
    # foot of the perpendicular from the centre
    s = (c / 2 - (nx * C.cx + ny * C.cy)) / nn
    fx, fy = C.cx + s * nx, C.cy + s * ny
    rem = C.radius ** 2 - s * s * nn
    ok = rem >= 0
    t = np.sqrt(np.where(ok, rem, 0.0) / nn)
    px = np.concatenate([fx - t * ny, fx + t * ny])[np.concatenate([ok, ok])]
    py = np.concatenate([fy + t * nx, fy - t * nx])[np.concatenate([ok, ok])]
    return np.column_stack([px, py])


def _line_box(nx, ny, c, C: Box):
    """Points of ``2<z, n> = c`` on the boundary of ``C``."""
    out = []
    for x in (C.x0, C.x1):
        with np.errstate(divide="ignore", invalid="ignore"):
            y = (c / 2 - nx * x) / ny
        ok = np.isfinite(y) & (y >= C.y0) & (y <= C.y1)
        out.append(np.column_stack([np.full(ok.sum(), x), y[ok]]))
    for y in (C.y0, C.y1):
        with np.errstate(divide="ignore", invalid="ignore"):
            x = (c / 2 - ny * y) / nx
        ok = np.isfinite(x) & (x >= C.x0) & (x <= C.x1)
        out.append(np.column_stack([x[ok], np.full(ok.sum(), y)]))
    return np.concatenate(out) if out else np.zeros((0, 2))


def envelope_sup(
    config: PointConfiguration, region, dual: Optional[DualTriangulation] = None
) -> Tuple[float, np.ndarray]:
    """Exact ``sup_{w in region} min_p pow(w, p)`` and a maximiser."""
    _require(config)
    C = _as_region(region)
    mask = _relevant(config, C)
    xy, h = config.xy[mask], config.h[mask]
    sub = PointConfiguration(xy, h)
    pairs = None
    apex = np.zeros((0, 2))
    if dual is not None and mask.all():
        tri = dual
    else:
        try:
            tri = build_dual(sub) if len(sub) >= 3 else None
        except DegenerateConfiguration:
            tri = None
    if tri is not None and tri.simplices:
        apex = tri.apex_xy
        pairs = np.array(sorted({(min(u, w), max(u, w)) for s in tri.triples for u, w in ((s[0], s[1]), (s[1], s[2]), (s[0], s[2]))}))
    else:
        n = len(sub)
        pairs = np.array([(i, j) for i in range(n) for j in range(i + 1, n)], dtype=int).reshape(-1, 2)
    cands = [apex[C.contains(apex)] if apex.size else apex]
    if pairs.size:
        i, j = pairs[:, 0], pairs[:, 1]
        nx, ny = xy[i, 0] - xy[j, 0], xy[i, 1] - xy[j, 1]
        c = (xy[i] ** 2).sum(1) - (xy[j] ** 2).sum(1) + h[i] - h[j]
        keep = (nx != 0) | (ny != 0)
        nx, ny, c = nx[keep], ny[keep], c[keep]
        cands.append(_line_circle(nx, ny, c, C) if isinstance(C, Disk) else _line_box(nx, ny, c, C))
    if isinstance(C, Disk):
        dv = xy - np.array([C.cx, C.cy])
        nrm = np.hypot(dv[:, 0], dv[:, 1])
        pos = nrm > 0
        anti = np.array([C.cx, C.cy]) - C.radius * dv[pos] / nrm[pos, None]
        cands.append(anti)
        cands.append(np.array([[C.cx + C.radius, C.cy]]))
    else:
        cands.append(np.array(C.corners(), dtype=float))
    W = np.concatenate([c for c in cands if c.size])
    env = EnvelopeQuery(xy, h)(W)
    k = int(np.argmax(env))
    return float(env[k]), W[k]


def event_Hmin(config: PointConfiguration, a, t: float) -> bool:
    """``inf`` of the envelope over ``B_a`` (or a region) is at least ``t``."""
    return envelope_inf(config, a) >= t


def event_Hmax(config: PointConfiguration, a, T: float, dual: Optional[DualTriangulation] = None) -> bool:
    """``sup`` of the envelope over ``B_a`` (or a region) is at most ``T``."""
    return envelope_sup(config, a, dual)[0] <= T


def _hull_covers(dual: DualTriangulation, C: Disk) -> bool:
    xy = dual.config.xy
    count: Dict[Tuple[int, int], int] = {}
    directed = {}
    for a, b, c in dual.triples:
        pa, pb, pc = xy[a], xy[b], xy[c]
        ccw = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0]) > 0
        loop = (a, b, c) if ccw else (a, c, b)
        for k in range(3):
            u, w = loop[k], loop[(k + 1) % 3]
            key = (min(u, w), max(u, w))
            count[key] = count.get(key, 0) + 1
            directed[key] = (u, w)
    for key, m in count.items():
        if m == 1:
            u, w = directed[key]
            e = xy[w] - xy[u]
            side = (e[0] * (C.cy - xy[u, 1]) - e[1] * (C.cx - xy[u, 0])) / math.hypot(*e)
            if side < C.radius:
                return False
    return True


def event_E(dual: DualTriangulation, R: float, r: float, require_cover: bool = False) -> bool:
    """Every simplex meeting ``B_R`` has apex ``(z, q)`` with ``q <= (R + r)^2 - |z|^2``.

    With ``require_cover`` the triangulation must also cover ``B_R``; a finite
    sample that leaves part of the ball outside its hull cannot certify it.
    """
    disk = Disk(0.0, 0.0, R)
    bound = (R + r) ** 2
    xy = dual.config.xy
    if require_cover and not (dual.simplices and _hull_covers(dual, disk)):
        return False
    for (a, b, c), par in dual.simplices:
        z = par.apex_v
        if par.apex_h <= bound - (z[0] * z[0] + z[1] * z[1]):
            continue
        if _triangle_meets(disk, xy[[a, b, c]]):
            return False
    return True


# ---------------------------------------------------------------------------
# analytic bounds


def lemma41_bounds(kind: str, f_or_gamma: Union[HeightDensity, float], a: float, x: float, d: int = 2) -> float:
    """Upper bounds on the failure probabilities of H^max / H^min.

    ``kind`` is ``"1a"`` (H^max, density), ``"1b"`` (H^min, density),
    ``"2a"`` (H^max, homogeneous) or ``"2b"`` (H^min, homogeneous).
    """
    if a <= 0:
        raise OutOfRange("a must be positive")
    if kind == "1a":
        if not x > 4 * a * a:
            raise OutOfRange("needs T > 4 a^2")
        I = frac_integral(f_or_gamma, d / 2 + 1, x - 4 * a * a)
        return math.exp(-(math.pi ** (d / 2)) * 2.0 ** (-d) * I) if math.isfinite(I) else 0.0
    if kind == "1b":
        I1 = frac_integral(f_or_gamma, d / 2 + 1, x)
        I0 = frac_integral(f_or_gamma, 1.0, x)
        return 2.0 ** d * kappa(d) * (I1 + a ** d * I0)
    if kind == "2a":
        if not x >= a * a:
            raise OutOfRange("needs T >= a^2")
        return math.exp(-float(f_or_gamma) * kappa(d) * (math.sqrt(x) - a) ** d)
    if kind == "2b":
        if not x < 0:
            raise OutOfRange("needs t < 0")
        return 0.0
    raise ValueError(f"unknown bound '{kind}'")


# ---------------------------------------------------------------------------
# certificates


@dataclass(frozen=True)
class Certificate:
    certified: bool
    failed: Optional[str]
    events: Dict[str, Optional[bool]]


def certify_window(
    config: PointConfiguration,
    mode: str,
    R: float,
    r: float,
    t: float = 0.0,
    dual: Optional[DualTriangulation] = None,
    require_cover: bool = True,
) -> Certificate:
    """Check the event conjunction under which the skeleton in ``B_R`` is final.

    ``mode="dual"`` checks E and H^min; ``mode="laguerre"`` checks H^max and H^min.
    """
    outer = 2 * math.sqrt((R + r) ** 2 - t)
    events: Dict[str, Optional[bool]] = {"Hmax": None, "Hmin": None, "E": None}
    if len(config) == 0:
        events["Hmin"] = True
        if mode == "dual":
            events["E"] = not require_cover
        else:
            events["Hmax"] = False
    else:
        events["Hmin"] = event_Hmin(config, outer, t)
        if mode == "dual":
            if dual is None:
                try:
                    dual = build_dual(config)
                except DegenerateConfiguration:
                    dual = DualTriangulation(config, [], 0, degenerate=True)
            events["E"] = event_E(dual, R, r, require_cover=require_cover)
        elif mode == "laguerre":
            events["Hmax"] = event_Hmax(config, R, (R + r) ** 2)
        else:
            raise ValueError(f"unknown mode '{mode}'")
    order = ("E", "Hmax", "Hmin")
    failed = next((k for k in order if events[k] is False), None)
    return Certificate(failed is None, failed, events)
