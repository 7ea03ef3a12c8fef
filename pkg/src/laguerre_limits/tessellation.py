"""Dual (regular) triangulations, Laguerre diagrams, skeletons and fixtures.

The dual is built by incremental insertion.  Lifting a site ``(v, h)`` to
``(v, |v|^2 + h)`` turns empty downward paraboloids into lower-hull facets, so
inserting a site removes the facets it sees (its conflict region) and cones the
horizon to the new site; sites that see nothing are buried.  Ghost triangles
through a vertex at infinity close the hull so outside insertions need no
special casing.  Exact ties are broken by a symbolic perturbation that raises
larger ids first, which keeps the lexicographically smaller triangles.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .errors import DegenerateConfiguration, NearTieWarning, RegionMismatch
from .geometry import (
    TIE_TOL,
    Box,
    Disk,
    Paraboloid,
    Sign,
    apex_paraboloid,
    lifted_incircle,
    lifted_incircle_partials,
)
from .sampling import PointConfiguration

GHOST = -1
FRAME_LABELS = (-1, -2, -3, -4)
Region2D = Union[Box, Disk]


# ---------------------------------------------------------------------------
# incremental regular triangulation


class _Triangulator:
    def __init__(self, xy: np.ndarray, h: np.ndarray):
        self.x = xy[:, 0].tolist()
        self.y = xy[:, 1].tolist()
        self.h = h.tolist()
        self.tv: List[List[int]] = []
        self.tn: List[List[int]] = []
        self.alive: List[bool] = []
        self.free: List[int] = []
        self.last = -1
        self.ties = 0
        self.walk_seed = 0

    # -- predicates -------------------------------------------------------
    def orient(self, a: int, b: int, c: int) -> int:
        x, y = self.x, self.y
        l = (x[b] - x[a]) * (y[c] - y[a])
        r = (y[b] - y[a]) * (x[c] - x[a])
        det = l - r
        if abs(det) <= TIE_TOL * (abs(l) + abs(r)):
            return 0
        return 1 if det > 0 else -1

    def _pt(self, i):
        return (self.x[i], self.y[i], self.h[i])

    def power_conflict(self, a: int, b: int, c: int, d: int) -> bool:
        """Is ``d`` strictly below the paraboloid through ccw ``a, b, c``?"""
        A, B, C, D = self._pt(a), self._pt(b), self._pt(c), self._pt(d)
        det, perm = lifted_incircle(A, B, C, D)
        if abs(det) > TIE_TOL * perm:
            return det > 0
        self.ties += 1
        partials = lifted_incircle_partials(A, B, C, D)
        scale = max(abs(p) for p in partials) or 1.0
        for vid, part in sorted(zip((a, b, c, d), partials), key=lambda t: -t[0]):
            if abs(part) > TIE_TOL * scale:
                return part > 0
        return False

    def _lift_rel(self, base: int, i: int) -> float:
        dx = self.x[i] - self.x[base]
        dy = self.y[i] - self.y[base]
        return dx * dx + dy * dy + (self.h[i] - self.h[base])

    def _middle_below(self, lo: int, mid: int, hi: int) -> bool:
        """For collinear ``lo, mid, hi`` (mid between): is lifted ``mid`` below the chord?"""
        ex, ey = self.x[hi] - self.x[lo], self.y[hi] - self.y[lo]
        ee = ex * ex + ey * ey
        lam = ((self.x[mid] - self.x[lo]) * ex + (self.y[mid] - self.y[lo]) * ey) / ee
        lm = self._lift_rel(lo, mid)
        lh = self._lift_rel(lo, hi)
        res = lm - lam * lh
        if abs(res) > TIE_TOL * (abs(lm) + abs(lam * lh) + 1e-300):
            return res < 0
        self.ties += 1
        top = max(lo, mid, hi)
        return top != mid

    def ghost_conflict(self, u: int, w: int, p: int) -> bool:
        """Conflict of ``p`` with the ghost over the hull edge ``u -> w`` (outside on the left)."""
        o = self.orient(u, w, p)
        if o != 0:
            return o > 0
        x, y = self.x, self.y
        if x[p] == x[u] and y[p] == y[u]:
            return self._coincident_below(p, u)
        if x[p] == x[w] and y[p] == y[w]:
            return self._coincident_below(p, w)
        ex, ey = x[w] - x[u], y[w] - y[u]
        lam = ((x[p] - x[u]) * ex + (y[p] - y[u]) * ey) / (ex * ex + ey * ey)
        if 0 < lam < 1:
            return self._middle_below(u, p, w)
        if lam >= 1:
            return not self._middle_below(u, w, p)
        return not self._middle_below(p, u, w)

    def _coincident_below(self, p: int, q: int) -> bool:
        if self.h[p] != self.h[q]:
            return self.h[p] < self.h[q]
        self.ties += 1
        return q > p

    def conflict(self, t: int, p: int) -> bool:
        a, b, c = self.tv[t]
        if a == GHOST:
            return self.ghost_conflict(b, c, p)
        if b == GHOST:
            return self.ghost_conflict(c, a, p)
        if c == GHOST:
            return self.ghost_conflict(a, b, p)
        return self.power_conflict(a, b, c, p)

    # -- structure --------------------------------------------------------
    def _new(self, verts: List[int]) -> int:
        if self.free:
            t = self.free.pop()
            self.tv[t] = verts
            self.tn[t] = [-1, -1, -1]
            self.alive[t] = True
        else:
            t = len(self.tv)
            self.tv.append(verts)
            self.tn.append([-1, -1, -1])
            self.alive.append(True)
        return t

    def start(self, a: int, b: int, c: int) -> None:
        if self.orient(a, b, c) < 0:
            b, c = c, b
        tris = [[a, b, c], [b, a, GHOST], [c, b, GHOST], [a, c, GHOST]]
        ids = [self._new(v) for v in tris]
        edge_owner = {}
        for t in ids:
            v = self.tv[t]
            for i in range(3):
                edge_owner[(v[(i + 1) % 3], v[(i + 2) % 3])] = (t, i)
        for (u, w), (t, i) in edge_owner.items():
            self.tn[t][i] = edge_owner[(w, u)][0]
        self.last = ids[0]

    def locate(self, p: int) -> int:
        t = self.last
        if t < 0 or not self.alive[t] or GHOST in self.tv[t]:
            t = next(i for i, v in enumerate(self.tv) if self.alive[i] and GHOST not in v)
        limit = 4 * len(self.tv) + 64
        for _ in range(limit):
            v = self.tv[t]
            if GHOST in v:
                return t
            self.walk_seed = (self.walk_seed * 1103515245 + 12345) & 0x7FFFFFFF
            s = self.walk_seed % 3
            for k in range(3):
                i = (s + k) % 3
                if self.orient(v[(i + 1) % 3], v[(i + 2) % 3], p) < 0:
                    t = self.tn[t][i]
                    break
            else:
                return t
        # fall back to a scan (only reached on pathological inputs)
        for i, v in enumerate(self.tv):
            if self.alive[i] and GHOST not in v and all(
                self.orient(v[(k + 1) % 3], v[(k + 2) % 3], p) >= 0 for k in range(3)
            ):
                return i
        for i, v in enumerate(self.tv):
            if self.alive[i] and GHOST in v and self.conflict(i, p):
                return i
        raise DegenerateConfiguration("point location failed")

    def insert(self, p: int) -> bool:
        t0 = self.locate(p)
        if not self.conflict(t0, p):
            return False
        cavity = {t0}
        stack = [t0]
        rejected = set()
        while stack:
            s = stack.pop()
            for nb in self.tn[s]:
                if nb in cavity or nb in rejected:
                    continue
                if self.conflict(nb, p):
                    cavity.add(nb)
                    stack.append(nb)
                else:
                    rejected.add(nb)
        horizon = []
        for s in cavity:
            v = self.tv[s]
            for i in range(3):
                nb = self.tn[s][i]
                if nb not in cavity:
                    horizon.append((v[(i + 1) % 3], v[(i + 2) % 3], nb, self.tn[nb].index(s)))
        starts = {}
        for u, w, nb, s in horizon:
            if u in starts:
                raise DegenerateConfiguration("conflict region is not a disk")
            starts[u] = None
            if u != GHOST and w != GHOST and self.orient(u, w, p) <= 0:
                raise DegenerateConfiguration("degenerate horizon edge")
        for s in cavity:
            self.alive[s] = False
            self.free.append(s)
        start_of, end_of = {}, {}
        created = []
        for u, w, nb, slot in horizon:
            t = self._new([u, w, p])
            self.tn[nb][slot] = t
            self.tn[t][2] = nb
            start_of[u] = t
            end_of[w] = t
            created.append((t, u, w))
        for t, u, w in created:
            self.tn[t][0] = start_of[w]
            self.tn[t][1] = end_of[u]
            if u != GHOST and w != GHOST:
                self.last = t
        return True

    def triangles(self) -> List[Tuple[int, int, int]]:
        return [tuple(v) for i, v in enumerate(self.tv) if self.alive[i] and GHOST not in v]


# ---------------------------------------------------------------------------
# dual triangulation


@dataclass
class DualTriangulation:
    """Simplices of the dual tessellation with their empty downward paraboloids."""

    config: PointConfiguration
    simplices: List[Tuple[Tuple[int, int, int], Paraboloid]]
    ties: int = 0
    degenerate: bool = False

    @property
    def triples(self) -> List[Tuple[int, int, int]]:
        return [s for s, _ in self.simplices]

    @property
    def apex_xy(self) -> np.ndarray:
        return np.array([p.apex_v for _, p in self.simplices], dtype=float).reshape(-1, 2)

    @property
    def apex_q(self) -> np.ndarray:
        return np.array([p.apex_h for _, p in self.simplices], dtype=float)

    def extreme(self) -> np.ndarray:
        mask = np.zeros(len(self.config), dtype=bool)
        for s in self.triples:
            mask[list(s)] = True
        if self.degenerate:
            mask[:] = True
        return mask

    def neighbors(self) -> Dict[int, set]:
        nbrs: Dict[int, set] = {i: set() for i in range(len(self.config))}
        for a, b, c in self.triples:
            nbrs[a].update((b, c))
            nbrs[b].update((a, c))
            nbrs[c].update((a, b))
        return nbrs


def _insertion_order(xy: np.ndarray) -> List[int]:
    """Coarse spatial order (cell-major, serpentine) so walks stay short."""
    n = xy.shape[0]
    if n < 64:
        return list(range(n))
    lo, hi = xy.min(axis=0), xy.max(axis=0)
    k = max(1, int(math.sqrt(n / 4)))
    span = np.maximum(hi - lo, 1e-300)
    cx = np.minimum((k * (xy[:, 0] - lo[0]) / span[0]).astype(int), k - 1)
    cy = np.minimum((k * (xy[:, 1] - lo[1]) / span[1]).astype(int), k - 1)
    cxs = np.where(cy % 2 == 0, cx, k - 1 - cx)
    return [int(i) for i in np.lexsort((np.arange(n), cxs, cy))]


def build_dual(config: PointConfiguration) -> DualTriangulation:
    """Regular triangulation: all triples whose downward paraboloid has an empty open hypograph."""
    n = len(config)
    if n < 3:
        raise DegenerateConfiguration(f"need at least 3 points, got {n}")
    tri = _Triangulator(config.xy, config.h)
    order = _insertion_order(config.xy)
    a, b = order[0], None
    for j in order[1:]:
        if config.xy[j, 0] != config.xy[a, 0] or config.xy[j, 1] != config.xy[a, 1]:
            b = j
            break
    c = None
    if b is not None:
        for j in order:
            if j not in (a, b) and tri.orient(a, b, j) != 0:
                c = j
                break
    if c is None:
        raise DegenerateConfiguration("all points are spatially collinear")
    tri.start(a, b, c)
    for j in order:
        if j not in (a, b, c):
            tri.insert(j)
    simplices = []
    pts = config.points
    for t in sorted(tuple(sorted(v)) for v in tri.triangles()):
        simplices.append((t, apex_paraboloid(pts[t[0]], pts[t[1]], pts[t[2]])))
    if tri.ties:
        warnings.warn(f"{tri.ties} near-tie predicate(s) resolved by id order", NearTieWarning, stacklevel=2)
    return DualTriangulation(config, simplices, tri.ties)


# ---------------------------------------------------------------------------
# cells


@dataclass
class Cell:
    """Convex polygon (counter-clockwise) with per-edge and per-vertex labels.

    ``labels[k]`` names the neighbour across the edge from vertex ``k`` to
    ``k + 1`` (negative values are frame sides); ``tags[k]`` is the sorted id
    triple of the dual simplex generating vertex ``k`` when it is a tessellation
    vertex, and contains negative entries for frame vertices.
    """

    id: int
    vertices: np.ndarray
    labels: List[int]
    tags: List[Tuple[int, ...]]
    exact: Optional[List[Tuple[Fraction, Fraction]]] = None

    @property
    def empty(self) -> bool:
        return self.vertices.shape[0] < 3

    def area(self) -> float:
        if self.empty:
            return 0.0
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def perimeter(self) -> float:
        if self.empty:
            return 0.0
        return float(np.sum(np.hypot(*(np.roll(self.vertices, -1, axis=0) - self.vertices).T)))

    def center(self):
        """Lexicographically smallest vertex (exact coordinates when available)."""
        if self.exact is not None:
            return min(self.exact)
        k = min(range(self.vertices.shape[0]), key=lambda i: (self.vertices[i, 0], self.vertices[i, 1]))
        return (float(self.vertices[k, 0]), float(self.vertices[k, 1]))


@dataclass
class CellComplex:
    """A finite family of convex cells clipped to ``frame``."""

    cells: Dict[int, Cell]
    frame: Box

    def skeleton_segments(self):
        """Interior edges once each, as ``(p, q, (i, j))`` with ``i < j``."""
        out = []
        for i in sorted(self.cells):
            cell = self.cells[i]
            m = cell.vertices.shape[0]
            for k in range(m):
                j = cell.labels[k]
                if j >= 0 and i < j:
                    out.append((cell.vertices[k], cell.vertices[(k + 1) % m], (i, j)))
        return out

    def vertex_points(self) -> np.ndarray:
        """Distinct tessellation vertices (frame vertices excluded)."""
        seen = {}
        for cell in self.cells.values():
            for k, tag in enumerate(cell.tags):
                if all(t >= 0 for t in tag):
                    if cell.exact is not None:
                        key = cell.exact[k]
                    else:
                        key = tuple(np.round(cell.vertices[k], 9))
                    seen.setdefault(key, cell.vertices[k])
        if not seen:
            return np.zeros((0, 2))
        return np.array([seen[k] for k in sorted(seen, key=str)], dtype=float)


@dataclass
class LaguerreDiagram(CellComplex):
    dual: Optional[DualTriangulation] = None

    @property
    def config(self) -> PointConfiguration:
        return self.dual.config


def _clip_polygon(verts, labels, nx, ny, c, newlabel):
    """Keep ``2(x nx + y ny) >= c``; labels follow the edges."""
    m = len(verts)
    vals = [2.0 * (vx * nx + vy * ny) - c for vx, vy in verts]
    mag = max(abs(c), max(2.0 * (abs(vx * nx) + abs(vy * ny)) for vx, vy in verts))
    tol = 1e-12 * mag
    if all(v >= -tol for v in vals):
        return verts, labels
    if all(v <= tol for v in vals):
        return [], []
    out, lab = [], []
    for k in range(m):
        P, vP, L = verts[k], vals[k], labels[k]
        Q, vQ = verts[(k + 1) % m], vals[(k + 1) % m]
        if vP >= -tol:
            out.append(P)
            lab.append(L)
            if vQ < -tol:
                if vP > tol:
                    t = vP / (vP - vQ)
                    out.append((P[0] + t * (Q[0] - P[0]), P[1] + t * (Q[1] - P[1])))
                    lab.append(newlabel)
                else:
                    lab[-1] = newlabel
        elif vQ > tol:
            t = vP / (vP - vQ)
            out.append((P[0] + t * (Q[0] - P[0]), P[1] + t * (Q[1] - P[1])))
            lab.append(L)
    # drop zero-length edges
    k = 0
    while len(out) > 1 and k < len(out):
        P, Q = out[k], out[(k + 1) % len(out)]
        if abs(P[0] - Q[0]) <= 1e-14 * (1 + abs(P[0])) and abs(P[1] - Q[1]) <= 1e-14 * (1 + abs(P[1])):
            j = (k + 1) % len(out)
            lab[k] = lab[j]
            del out[j]
            del lab[j]
            if j < k:
                k -= 1
        else:
            k += 1
    if len(out) < 3:
        return [], []
    return out, lab


def _frame_polygon(frame: Box):
    return list(frame.corners()), list(FRAME_LABELS)


def default_frame(config: PointConfiguration) -> Box:
    """Bounding box of the sampling window (or of the points), enlarged by 20%."""
    if config.region is not None:
        x0, y0, x1, y1 = config.region.spatial.bbox()
        box = Box(x0, y0, x1, y1)
    elif len(config):
        lo, hi = config.xy.min(axis=0), config.xy.max(axis=0)
        box = Box(lo[0], lo[1], hi[0], hi[1])
    else:
        box = Box(-1.0, -1.0, 1.0, 1.0)
    if box.area == 0:
        box = box.expand(1.0)
    return box.scaled(1.2)


def _cell_from_clip(i, verts, labels, apex_of) -> Cell:
    m = len(verts)
    tags = []
    arr = np.array(verts, dtype=float).reshape(-1, 2)
    for k in range(m):
        tag = tuple(sorted((i, labels[k - 1], labels[k])))
        tags.append(tag)
        if tag in apex_of:
            arr[k] = apex_of[tag]
    return Cell(i, arr, list(labels), tags)


def build_laguerre(dual: DualTriangulation, frame: Optional[Box] = None, ids=None) -> LaguerreDiagram:
    """Laguerre cells as frame-clipped intersections of radical half-planes of dual neighbours.

    ``ids`` limits construction to the listed generators; other cells are omitted.
    """
    config = dual.config
    frame = default_frame(config) if frame is None else frame
    n = len(config)
    if dual.degenerate:
        nbrs = {i: set(range(n)) - {i} for i in range(n)}
        extreme = np.ones(n, dtype=bool)
    else:
        nbrs = dual.neighbors()
        extreme = dual.extreme()
    apex_of = {s: par.apex_v for s, par in dual.simplices}
    x, y, h = config.xy[:, 0], config.xy[:, 1], config.h
    cells = {}
    for i in (range(n) if ids is None else sorted(int(k) for k in ids)):
        if not extreme[i]:
            cells[i] = Cell(i, np.zeros((0, 2)), [], [])
            continue
        verts, labels = _frame_polygon(frame)
        for j in sorted(nbrs[i]):
            nx, ny = x[i] - x[j], y[i] - y[j]
            if nx == 0 and ny == 0:
                if h[i] > h[j] or (h[i] == h[j] and i > j):
                    verts, labels = [], []
                    break
                continue
            c = (x[i] ** 2 + y[i] ** 2) - (x[j] ** 2 + y[j] ** 2) + h[i] - h[j]
            verts, labels = _clip_polygon(verts, labels, float(nx), float(ny), float(c), int(j))
            if not verts:
                break
        if verts:
            cells[i] = _cell_from_clip(i, verts, labels, apex_of)
        else:
            cells[i] = Cell(i, np.zeros((0, 2)), [], [])
    return LaguerreDiagram(cells, frame, dual)


def laguerre_diagram(config: PointConfiguration, frame: Optional[Box] = None) -> LaguerreDiagram:
    """Convenience wrapper accepting fewer than three or collinear sites."""
    try:
        dual = build_dual(config)
    except DegenerateConfiguration:
        dual = DualTriangulation(config, [], 0, degenerate=True)
    return build_laguerre(dual, frame)


# ---------------------------------------------------------------------------
# segment geometry


def _clip_segment_disk(P, Q, disk: Disk):
    dx, dy = Q[0] - P[0], Q[1] - P[1]
    fx, fy = P[0] - disk.cx, P[1] - disk.cy
    a = dx * dx + dy * dy
    b = 2 * (fx * dx + fy * dy)
    c = fx * fx + fy * fy - disk.radius ** 2
    if a == 0:
        return (0.0, 1.0) if c <= 0 else None
    disc = b * b - 4 * a * c
    if disc < 0:
        return None
    sq = math.sqrt(disc)
    t0 = max(0.0, (-b - sq) / (2 * a))
    t1 = min(1.0, (-b + sq) / (2 * a))
    return (t0, t1) if t0 <= t1 else None


def _clip_segment_box(P, Q, box: Box):
    t0, t1 = 0.0, 1.0
    dx, dy = Q[0] - P[0], Q[1] - P[1]
    for p, q in ((-dx, P[0] - box.x0), (dx, box.x1 - P[0]), (-dy, P[1] - box.y0), (dy, box.y1 - P[1])):
        if p == 0:
            if q < 0:
                return None
            continue
        r = q / p
        if p < 0:
            t0 = max(t0, r)
        else:
            t1 = min(t1, r)
        if t0 > t1:
            return None
    return (t0, t1)


def clip_segment(P, Q, region: Region2D):
    """Parameter interval of the segment ``P -> Q`` inside ``region`` (or ``None``)."""
    if isinstance(region, Disk):
        return _clip_segment_disk(P, Q, region)
    return _clip_segment_box(P, Q, region)


def point_segment_distance(X: np.ndarray, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Distances between each point of ``X`` (k x 2) and each segment ``A_j B_j`` -> (k x m)."""
    X = np.atleast_2d(X)
    E = B - A
    ee = np.einsum("ij,ij->i", E, E)
    W = X[:, None, :] - A[None, :, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(ee > 0, np.einsum("kij,ij->ki", W, E) / np.where(ee > 0, ee, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    D = W - t[:, :, None] * E[None, :, :]
    return np.sqrt(np.einsum("kij,kij->ki", D, D))


def _segments_intersect(P, Q, A, B) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(A, B, P), orient(A, B, Q)
    d3, d4 = orient(P, Q, A), orient(P, Q, B)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 * d2 < 0 and d3 * d4 < 0


def segment_set_distance(P, Q, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Distance between segment ``PQ`` and each segment ``A_j B_j``."""
    P, Q = np.asarray(P, float), np.asarray(Q, float)
    d = np.minimum(
        point_segment_distance(np.array([P, Q]), A, B).min(axis=0),
        np.minimum(
            point_segment_distance(A, P[None], Q[None])[:, 0],
            point_segment_distance(B, P[None], Q[None])[:, 0],
        ),
    )
    for j in np.nonzero(d > 0)[0]:
        if _segments_intersect(P, Q, A[j], B[j]):
            d[j] = 0.0
    return d


# ---------------------------------------------------------------------------
# skeletons


@dataclass
class Skeleton:
    """Segments ``P[k] -> Q[k]`` owned by the id pair ``owners[k]``, restricted to ``region``."""

    P: np.ndarray
    Q: np.ndarray
    owners: List[Tuple[int, int]]
    region: Optional[Region2D]
    mode: str = "clip"

    def __len__(self) -> int:
        return len(self.owners)

    @property
    def segments(self):
        return [(tuple(p), tuple(q), o) for p, q, o in zip(self.P, self.Q, self.owners)]


def _segment_scale(P, Q) -> float:
    return 1.0 + max(abs(P[0]), abs(P[1]), abs(Q[0]), abs(Q[1]))


def _make_skeleton(raw, region, mode):
    P = np.array([r[0] for r in raw], dtype=float).reshape(-1, 2)
    Q = np.array([r[1] for r in raw], dtype=float).reshape(-1, 2)
    return Skeleton(P, Q, [tuple(int(v) for v in r[2]) for r in raw], region, mode)


def _triangle_meets(region: Region2D, pts: np.ndarray) -> bool:
    if isinstance(region, Disk):
        c = np.array([region.cx, region.cy])
        a, b, d = pts
        inside = True
        for u, w in ((a, b), (b, d), (d, a)):
            cross = (w[0] - u[0]) * (c[1] - u[1]) - (w[1] - u[1]) * (c[0] - u[0])
            area = (b[0] - a[0]) * (d[1] - a[1]) - (b[1] - a[1]) * (d[0] - a[0])
            if cross * area < 0:
                inside = False
        if inside:
            return True
        dist = point_segment_distance(c, pts, np.roll(pts, -1, axis=0))
        return bool(dist.min() <= region.radius)
    verts, labels = _frame_polygon(region)
    poly = [tuple(p) for p in pts]
    # intersect the box with the triangle by clipping against its edge lines
    area = (poly[1][0] - poly[0][0]) * (poly[2][1] - poly[0][1]) - (poly[1][1] - poly[0][1]) * (poly[2][0] - poly[0][0])
    if area < 0:
        poly = poly[::-1]
    for k in range(3):
        u, w = poly[k], poly[(k + 1) % 3]
        # keep the left side of u -> w:  cross(w - u, z - u) >= 0
        nx, ny = -(w[1] - u[1]), w[0] - u[0]
        c = 2 * (nx * u[0] + ny * u[1])
        verts, labels = _clip_polygon(verts, labels, nx, ny, c, 0) if verts else ([], [])
        if not verts:
            return _touching_box(region, pts)
    return True


def _touching_box(box: Box, pts) -> bool:
    for k in range(3):
        if _clip_segment_box(pts[k], pts[(k + 1) % 3], box) is not None:
            return True
    return False


def skeleton_restrict(obj, region: Region2D, mode: Optional[str] = None) -> Skeleton:
    """Skeleton of a cell complex or dual restricted to ``region``.

    Cell complexes are clipped.  Duals default to ``touching``: full edges of
    every simplex meeting the region; ``mode="clip"`` clips dual edges instead.
    """
    if isinstance(obj, DualTriangulation):
        mode = mode or "touching"
        xy = obj.config.xy
        edges = {}
        for (a, b, c), _ in obj.simplices:
            pts = xy[[a, b, c]]
            if mode == "touching":
                if not _triangle_meets(region, pts):
                    continue
            for u, w in ((a, b), (b, c), (a, c)):
                edges[(u, w)] = (xy[u], xy[w])
        raw = []
        for (u, w) in sorted(edges):
            P, Q = edges[(u, w)]
            if mode == "touching":
                raw.append((P, Q, (u, w)))
            else:
                iv = clip_segment(P, Q, region)
                if iv is not None and (iv[1] - iv[0]) * math.hypot(*(Q - P)) > 1e-12 * _segment_scale(P, Q):
                    raw.append((P + iv[0] * (Q - P), P + iv[1] * (Q - P), (u, w)))
        return _make_skeleton(raw, region, mode)
    raw = []
    for P, Q, owner in obj.skeleton_segments():
        iv = clip_segment(P, Q, region)
        if iv is None:
            continue
        if (iv[1] - iv[0]) * math.hypot(Q[0] - P[0], Q[1] - P[1]) <= 1e-12 * _segment_scale(P, Q):
            continue
        raw.append((P + iv[0] * (Q - P), P + iv[1] * (Q - P), owner))
    return _make_skeleton(raw, region, "clip")


def skeleton_equal(a: Skeleton, b: Skeleton, tol: float = 1e-9) -> bool:
    """Owner-aware equality of two skeletons restricted to the same region."""
    if a.region != b.region or a.mode != b.mode:
        raise RegionMismatch(f"{a.region}/{a.mode} vs {b.region}/{b.mode}")
    if len(a) != len(b):
        return False

    def table(s: Skeleton):
        out: Dict[Tuple[int, int], list] = {}
        for P, Q, o in zip(s.P, s.Q, s.owners):
            ends = sorted([tuple(P), tuple(Q)])
            out.setdefault(o, []).append(ends)
        return {k: sorted(v) for k, v in out.items()}

    ta, tb = table(a), table(b)
    if ta.keys() != tb.keys():
        return False
    for k in ta:
        if len(ta[k]) != len(tb[k]):
            return False
        for sa, sb in zip(ta[k], tb[k]):
            for pa, pb in zip(sa, sb):
                scale = 1.0 + max(abs(pa[0]), abs(pa[1]))
                if abs(pa[0] - pb[0]) > tol * scale or abs(pa[1] - pb[1]) > tol * scale:
                    return False
    return True


def _restrict_to(s: Skeleton, C: Region2D):
    P, Q = [], []
    for p, q in zip(s.P, s.Q):
        iv = clip_segment(p, q, C)
        if iv is None:
            continue
        P.append(p + iv[0] * (q - p))
        Q.append(p + iv[1] * (q - p))
    return np.array(P, float).reshape(-1, 2), np.array(Q, float).reshape(-1, 2)


def _quad_pieces(P, D, A, B):
    """Piecewise-quadratic squared distance from ``P + t D`` to segment ``AB``.

    Returns rows ``(a2, a1, a0, t_lo, t_hi)`` covering the real line.
    """
    E = B - A
    ee = float(E @ E)
    W = P - A
    rows = []
    quad_pt = lambda R: (float(D @ D), 2 * float((P - R) @ D), float((P - R) @ (P - R)))
    if ee == 0:
        return [quad_pt(A) + (-math.inf, math.inf)]
    mu0, mu1 = float(W @ E) / ee, float(D @ E) / ee
    c0 = E[0] * W[1] - E[1] * W[0]
    c1 = E[0] * D[1] - E[1] * D[0]
    perp = (c1 * c1 / ee, 2 * c0 * c1 / ee, c0 * c0 / ee)
    if mu1 == 0:
        if mu0 < 0:
            return [quad_pt(A) + (-math.inf, math.inf)]
        if mu0 > 1:
            return [quad_pt(B) + (-math.inf, math.inf)]
        return [perp + (-math.inf, math.inf)]
    t_a, t_b = -mu0 / mu1, (1 - mu0) / mu1
    lo, hi = min(t_a, t_b), max(t_a, t_b)
    first, last = (A, B) if mu1 > 0 else (B, A)
    rows.append(quad_pt(first) + (-math.inf, lo))
    rows.append(perp + (lo, hi))
    rows.append(quad_pt(last) + (hi, math.inf))
    return rows


def _directed_sup(P, Q, TA: np.ndarray, TB: np.ndarray) -> float:
    """``sup_{x in PQ} dist(x, union of segments T)`` (exact up to rounding)."""
    if TA.shape[0] == 0:
        return math.inf
    ends = point_segment_distance(np.array([P, Q]), TA, TB)
    ub = float(np.min(np.max(ends, axis=0)))
    near = segment_set_distance(P, Q, TA, TB) <= ub * (1 + 1e-12) + 1e-15
    A, B = TA[near], TB[near]
    D = Q - P
    cands = [0.0, 1.0]
    pieces = [(j, row) for j in range(A.shape[0]) for row in _quad_pieces(P, D, A[j], B[j])]
    for x in range(len(pieces)):
        j, (a2, a1, a0, lo, hi) = pieces[x]
        for y in range(x + 1, len(pieces)):
            k, (b2, b1, b0, lo2, hi2) = pieces[y]
            if k == j:
                continue
            l, r = max(lo, lo2, 0.0), min(hi, hi2, 1.0)
            if l > r:
                continue
            c2, c1, c0 = a2 - b2, a1 - b1, a0 - b0
            if abs(c2) > 1e-14 * (abs(a2) + abs(b2) + 1e-300):
                disc = c1 * c1 - 4 * c2 * c0
                if disc < 0:
                    continue
                sq = math.sqrt(disc)
                roots = ((-c1 - sq) / (2 * c2), (-c1 + sq) / (2 * c2))
            elif c1 != 0:
                roots = (-c0 / c1,)
            else:
                continue
            for t in roots:
                if l - 1e-12 <= t <= r + 1e-12:
                    cands.append(min(max(t, 0.0), 1.0))
    T = np.array(cands)
    X = P[None, :] + T[:, None] * D[None, :]
    return float(point_segment_distance(X, A, B).min(axis=1).max())


def envelope_separation(a: Skeleton, b: Skeleton, C: Region2D) -> float:
    """Smallest ``eps`` such that the two skeletons agree on ``C`` up to ``eps``-envelopes."""
    worst = 0.0
    for s, t in ((a, b), (b, a)):
        P, Q = _restrict_to(s, C)
        for p, q in zip(P, Q):
            worst = max(worst, _directed_sup(p, q, t.P, t.Q))
            if worst == math.inf:
                return worst
    return worst


def capacity_hit(s: Skeleton, C: Region2D) -> bool:
    """Does any skeleton segment meet ``C``?"""
    for p, q in zip(s.P, s.Q):
        if isinstance(C, Disk) and C.radius == 0:
            d = point_segment_distance(np.array([[C.cx, C.cy]]), p[None], q[None])[0, 0]
            if d <= 1e-12 * _segment_scale(p, q):
                return True
        elif clip_segment(p, q, C) is not None:
            return True
    return False


# ---------------------------------------------------------------------------
# deterministic fixtures


TWO_TILINGS = {
    1: (Fraction(0), Fraction(1, 6), Fraction(1, 3), Fraction(2, 3)),
    2: (Fraction(0), Fraction(1, 3), Fraction(1, 2), Fraction(5, 6)),
}


def _grid_complex(xs: List[Fraction], ys: List[Fraction]) -> CellComplex:
    nx, ny = len(xs) - 1, len(ys) - 1
    cells = {}
    fx = [float(v) for v in xs]
    fy = [float(v) for v in ys]
    cid = lambda i, j: i * ny + j
    for i in range(nx):
        for j in range(ny):
            exact = [(xs[i], ys[j]), (xs[i + 1], ys[j]), (xs[i + 1], ys[j + 1]), (xs[i], ys[j + 1])]
            verts = np.array([[fx[i], fy[j]], [fx[i + 1], fy[j]], [fx[i + 1], fy[j + 1]], [fx[i], fy[j + 1]]])
            labels = [
                cid(i, j - 1) if j > 0 else -1,
                cid(i + 1, j) if i + 1 < nx else -2,
                cid(i, j + 1) if j + 1 < ny else -3,
                cid(i - 1, j) if i > 0 else -4,
            ]
            tags = []
            for k in range(4):
                inc, out = labels[k - 1], labels[k]
                tags.append(tuple(sorted((cid(i, j), inc, out))))
            cells[cid(i, j)] = Cell(cid(i, j), verts, labels, tags, exact)
    frame = Box(fx[0], fy[0], fx[-1], fy[-1])
    return CellComplex(cells, frame)


def _breaks(offsets, shift: Fraction, scale: Fraction, lo: int, hi: int) -> List[Fraction]:
    out = []
    for z in range(lo, hi):
        for o in offsets:
            out.append(shift + scale * (z + o))
    out.append(shift + scale * hi)
    return out


def lattice_fixture(kind: str, n: int = 0, variant: int = 1, shift=(0, 0), extent: int = 3) -> CellComplex:
    """Exact rectangular tessellations.

    ``shifted_lattice``: the lattice ``2^-n Z^2`` translated by ``shift``.
    ``two_tilings``: unit squares split by the variant's interval endpoints.
    Cells cover ``[-extent, extent]^2`` (in lattice units for the shifted lattice).
    """
    sx, sy = (Fraction(v) if not isinstance(v, float) else Fraction(v).limit_denominator(10 ** 12) for v in shift)
    if kind == "shifted_lattice":
        scale = Fraction(1, 2 ** n)
        m = extent * 2 ** n
        xs = _breaks((Fraction(0),), sx, scale, -m, m)
        ys = _breaks((Fraction(0),), sy, scale, -m, m)
    elif kind == "two_tilings":
        offs = TWO_TILINGS[variant]
        xs = _breaks(offs, sx, Fraction(1), -extent, extent)
        ys = _breaks(offs, sy, Fraction(1), -extent, extent)
    else:
        raise ValueError(f"unknown fixture kind '{kind}'")
    return _grid_complex(xs, ys)


# ---------------------------------------------------------------------------
# serialization and rendering


def complex_to_json(diagram: LaguerreDiagram) -> Dict[str, object]:
    cfg = diagram.config
    pts = [
        {"id": i, "x": float(cfg.xy[i, 0]), "y": float(cfg.xy[i, 1]), "h": float(cfg.h[i])}
        for i in range(len(cfg))
    ]
    simplices = [
        {"ids": list(t), "apex": [float(p.apex_v[0]), float(p.apex_v[1]), float(p.apex_h)]}
        for t, p in diagram.dual.simplices
    ]
    cells = []
    for i in sorted(diagram.cells):
        c = diagram.cells[i]
        cells.append(
            {
                "id": i,
                "vertices": [[float(a), float(b)] for a, b in c.vertices],
                "labels": [int(v) for v in c.labels],
                "tags": [list(t) for t in c.tags],
            }
        )
    f = diagram.frame
    return {"points": pts, "simplices": simplices, "cells": cells, "frame": [f.x0, f.y0, f.x1, f.y1]}


def write_complex_json(diagram: LaguerreDiagram, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(complex_to_json(diagram), fh, indent=1, sort_keys=True)
        fh.write("\n")


def complex_from_json(data: Dict[str, object]) -> LaguerreDiagram:
    pts = sorted(data["points"], key=lambda p: p["id"])
    xy = np.array([[p["x"], p["y"]] for p in pts], dtype=float).reshape(-1, 2)
    h = np.array([p["h"] for p in pts], dtype=float)
    cfg = PointConfiguration(xy, h)
    simplices = [
        (tuple(s["ids"]), Paraboloid((s["apex"][0], s["apex"][1]), s["apex"][2], Sign.DOWN))
        for s in data["simplices"]
    ]
    cells = {}
    for c in data["cells"]:
        verts = np.array(c["vertices"], dtype=float).reshape(-1, 2)
        cells[c["id"]] = Cell(c["id"], verts, list(c["labels"]), [tuple(t) for t in c["tags"]])
    frame = Box(*data["frame"])
    return LaguerreDiagram(cells, frame, DualTriangulation(cfg, simplices))


def read_complex_json(path: str) -> LaguerreDiagram:
    with open(path) as fh:
        return complex_from_json(json.load(fh))


def render_svg(complex_: CellComplex, path: str, skeleton: Optional[Skeleton] = None, width: int = 800) -> None:
    """Stroke-only SVG: one group per cell, plus an optional highlighted skeleton."""
    f = complex_.frame
    sx = width / max(f.x1 - f.x0, 1e-300)
    height = int(round((f.y1 - f.y0) * sx))
    tx = lambda x: (x - f.x0) * sx
    ty = lambda y: (f.y1 - y) * sx
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
    ]
    for i in sorted(complex_.cells):
        c = complex_.cells[i]
        if c.empty:
            continue
        d = " ".join(
            ("M" if k == 0 else "L") + f"{tx(x):.4f},{ty(y):.4f}" for k, (x, y) in enumerate(c.vertices)
        )
        lines.append(
            f'<g id="cell-{i}"><path d="{d} Z" fill="none" stroke="black" stroke-width="0.8"/></g>'
        )
    if skeleton is not None:
        lines.append('<g id="skeleton">')
        for p, q in zip(skeleton.P, skeleton.Q):
            lines.append(
                f'<path d="M{tx(p[0]):.4f},{ty(p[1]):.4f} L{tx(q[0]):.4f},{ty(q[1]):.4f}" '
                'fill="none" stroke="red" stroke-width="1.5"/>'
            )
        lines.append("</g>")
    lines.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
