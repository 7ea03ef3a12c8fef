"""Monte Carlo estimators: coincidence, envelopes, capacities, intensities, typical cells.

Every replicate draws from its own stream ``child_seed(seed, label, n, rep)`` and
results are aggregated in replicate order, so outputs do not depend on the
number of worker processes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import warnings
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .coupling import CoupledPair, couple_densities, couple_voronoi_limit, rn_schedule
from .densities import (
    ConvergenceFamily,
    Beta,
    HeightDensity,
    Homogeneous,
    beta_to_pv_family,
    constant_family,
    family_index_value,
    frac_integral,
    gamma_d,
    kappa,
    marked_family,
    rescaled_beta_family,
    rescaled_betaprime_family,
)
from .errors import DegenerateConfiguration, LaguerreError, UncertifiedWindow
from .geometry import Box, Disk
from .rng import child_seed, stream
from .sampling import PointConfiguration, Region, sample_density, sample_homogeneous
from .stabilization import certify_window, envelope_sup, event_Hmin
from .tessellation import (
    CellComplex,
    DualTriangulation,
    build_dual,
    build_laguerre,
    capacity_hit,
    envelope_separation,
    lattice_fixture,
    skeleton_equal,
    skeleton_restrict,
)

Z95 = 1.959963984540054
MODES = ("C1_dual", "C1_laguerre", "C2_dual", "C2_laguerre_envelope")


def wilson(k: int, n: int, z: float = Z95) -> Tuple[float, float]:
    """Wilson score interval for ``k`` successes in ``n`` trials."""
    if n <= 0:
        return (0.0, 1.0)
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if k == 0 else max(0.0, mid - half)
    hi = 1.0 if k == n else min(1.0, mid + half)
    return (lo, hi)


def _map(fn: Callable, tasks: Sequence, workers: int = 1) -> list:
    if workers <= 1 or len(tasks) < 2:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks, chunksize=chunk))


def _in_box(xy: np.ndarray, W: Box) -> np.ndarray:
    """Half-open membership ``[x0, x1) x [y0, y1)`` so tilings count each point once."""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    return (xy[:, 0] >= W.x0) & (xy[:, 0] < W.x1) & (xy[:, 1] >= W.y0) & (xy[:, 1] < W.y1)


# ---------------------------------------------------------------------------
# plans


@dataclass
class ExperimentPlan:
    """One convergence experiment over an index grid.

    ``r`` fixes the stabilization radius; otherwise it is
    ``max(schedule r_n, r_min)`` with ``r_min = 2 max(R, 1)`` unless given.
    ``t`` is the H^min level for C1 modes (default ``-2 (R + r)^2``, or 0 when
    both densities live on ``[0, inf)`` and H^min holds trivially).
    """

    family: ConvergenceFamily
    mode: str
    R: float = 2.0
    n_grid: Tuple[int, ...] = (1, 10, 100)
    replicates: int = 100
    seed: int = 0
    window: Box = field(default_factory=lambda: Box(0.0, 0.0, 10.0, 10.0))
    scenario: str = ""
    r: Optional[float] = None
    r_min: Optional[float] = None
    t: Optional[float] = None
    eps_cap: float = 0.5

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode '{self.mode}'")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if not self.R > 0:
            raise ValueError("R must be positive")
        if not self.scenario:
            self.scenario = self.family.name
        c2 = self.mode.startswith("C2")
        if c2 != isinstance(self.family.limit, Homogeneous):
            raise ValueError(f"mode {self.mode} does not match the limit {self.family.limit.label()}")

    def radii(self) -> Dict[int, float]:
        if self.r is not None:
            return {n: float(self.r) for n in self.n_grid}
        floor = self.r_min if self.r_min is not None else 2.0 * max(self.R, 1.0)
        if self.mode == "C2_laguerre_envelope":
            floor = max(floor, 2.0 * (self.R + self.eps_cap))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            sched = rn_schedule(self.family, self.mode[:2], n_grid=list(self.n_grid), seed=self.seed)
        return {n: max(sched.r(n), floor) for n in self.n_grid}

    def level(self, r: float, f_n: Optional[HeightDensity] = None) -> float:
        if self.t is not None:
            return self.t
        lows = [self.family.limit.lo] + ([f_n.lo] if f_n is not None else [])
        return 0.0 if min(lows) >= 0 else -2.0 * (self.R + r) ** 2


# ---------------------------------------------------------------------------
# coupled pairs on the stabilization region


def _tail_floor(densities: Sequence[HeightDensity], t: float, radius: float, tol: float = 1e-9) -> float:
    """Height below which the expected number of points under ``B_{radius + sqrt(t - h)}`` is below ``tol``."""
    lo = min(f.lo for f in densities)
    if lo >= t:
        return t
    step = 1.0
    L = t - step
    while L > lo:
        m = sum(float(f.mass(L)) for f in densities)
        if m * math.pi * (radius + math.sqrt(t - L)) ** 2 < tol:
            return L
        step *= 2
        L = t - step
    return lo


def c1_regions(f: HeightDensity, g: HeightDensity, R: float, r: float, t: float) -> List[Region]:
    """``K0(R, r, t)`` plus the deep layer ``B_{a + sqrt(t - L)} x [L, t)`` that H^min inspects."""
    top = (R + r) ** 2
    a = 2.0 * math.sqrt(top - t)
    lo = min(f.lo, g.lo)
    regions = [Region(Disk(0.0, 0.0, a), (max(t, lo), top))]
    if lo < t:
        L = _tail_floor((f, g), t, a)
        regions.append(Region(Disk(0.0, 0.0, a + math.sqrt(t - L)), (L, t)))
    return regions


def _merge_pairs(pairs: Sequence[CoupledPair]) -> CoupledPair:
    def part(cfg, lo, hi):
        return PointConfiguration(cfg.xy[lo:hi], cfg.h[lo:hi])

    shared = [part(p.left, 0, len(p.shared_ids)) for p in pairs]
    left = PointConfiguration.concat(shared + [part(p.left, len(p.shared_ids), len(p.left)) for p in pairs])
    right = PointConfiguration.concat(shared + [part(p.right, len(p.shared_ids), len(p.right)) for p in pairs])
    n_shared = sum(len(p.shared_ids) for p in pairs)
    diag = {
        "l1_bound": sum(p.diagnostics["l1_bound"] for p in pairs),
        "disagreed": any(p.disagreed for p in pairs),
        "n_shared": n_shared,
        "regions": [p.diagnostics["region"] for p in pairs],
    }
    diag["p_disagree"] = -math.expm1(-diag["l1_bound"])
    return CoupledPair(left, right, np.arange(n_shared), diag)


def coupled_pair(limit: HeightDensity, f_n: HeightDensity, R: float, r: float, t: float, seed: int) -> CoupledPair:
    """The coupled pair used by the coincidence estimators."""
    if isinstance(limit, Homogeneous):
        return couple_voronoi_limit(limit.gamma, f_n, r, seed)
    regions = c1_regions(limit, f_n, R, r, t)
    return _merge_pairs([couple_densities(limit, f_n, reg, child_seed(seed, "region", k)) for k, reg in enumerate(regions)])


def _dual_or_none(config: PointConfiguration) -> Optional[DualTriangulation]:
    try:
        return build_dual(config)
    except DegenerateConfiguration:
        return None


def _laguerre_near(dual: DualTriangulation, disk: Disk, cap: float):
    """Laguerre diagram holding every cell that can meet ``disk`` when the envelope there is at most ``cap``."""
    cfg = dual.config
    reach = disk.radius + math.sqrt(max(cap - float(cfg.h.min()), 0.0)) + 1e-9
    dist = np.hypot(cfg.xy[:, 0] - disk.cx, cfg.xy[:, 1] - disk.cy)
    ids = np.nonzero((dist <= reach) & dual.extreme())[0]
    half = reach + disk.radius + 1.0
    frame = Box(disk.cx - half, disk.cy - half, disk.cx + half, disk.cy + half)
    return build_laguerre(dual, frame, ids=ids)


def _side(config, mode: str, R: float, r: float, t: float, skel_radius: float):
    """Certify one side and return ``(certified, failed, skeleton)``."""
    dual = _dual_or_none(config)
    if dual is None:
        return False, "degenerate", None
    if mode == "dual":
        cert = certify_window(config, "dual", R, r, t, dual=dual)
        skel = skeleton_restrict(dual, Disk(0.0, 0.0, skel_radius), mode="clip")
        return cert.certified, cert.failed, skel
    outer = 2 * math.sqrt((R + r) ** 2 - t)
    if not event_Hmin(config, outer, t):
        return False, "Hmin", None
    disk = Disk(0.0, 0.0, skel_radius)
    sup, _ = envelope_sup(config, disk, dual)
    if sup > (skel_radius + r) ** 2:
        return False, "Hmax", None
    lag = _laguerre_near(dual, disk, sup)
    return True, None, skeleton_restrict(lag, disk)


def _coincidence_task(task) -> Dict[str, object]:
    limit, f_n, mode, R, r, t, seed, n, rep = task
    rec: Dict[str, object] = {"n": n, "rep": rep, "certified": False, "equal": False, "failed": None, "error": None}
    try:
        pair = coupled_pair(limit, f_n, R, r, t, seed)
        rec["disagreed"] = pair.disagreed
        rec["n_left"], rec["n_right"] = len(pair.left), len(pair.right)
        kind = "dual" if mode.endswith("dual") else "laguerre"
        ok_l, fail_l, sk_l = _side(pair.left, kind, R, r, t, R)
        ok_r, fail_r, sk_r = _side(pair.right, kind, R, r, t, R)
        rec["certified"] = ok_l and ok_r
        rec["failed"] = fail_l or fail_r
        if sk_l is not None and sk_r is not None:
            rec["equal"] = skeleton_equal(sk_l, sk_r)
    except (LaguerreError, ValueError, ArithmeticError) as exc:
        rec["error"] = f"{type(exc).__name__}: {exc}"
    return rec


@dataclass
class CoincidenceRow:
    scenario: str
    n: int
    r_n: float
    R: float
    replicates: int
    p_hat: float
    ci_lo: float
    ci_hi: float
    cert_rate: float


@dataclass
class CoincidenceResult:
    rows: List[CoincidenceRow]
    records: List[Dict[str, object]]


def estimate_coincidence(plan: ExperimentPlan, workers: int = 1) -> CoincidenceResult:
    """Fraction of replicates whose certified skeletons coincide on ``B_R``.

    A replicate counts as a coincidence only when both sides are certified and
    their restricted skeletons are equal; uncertified replicates stay in the
    denominator and are reported through ``cert_rate``.
    """
    if plan.mode == "C2_laguerre_envelope":
        raise ValueError("use estimate_envelope for C2_laguerre_envelope")
    radii = plan.radii()
    tasks = []
    for n in plan.n_grid:
        r = radii[n]
        f_n = plan.family(n)
        t = plan.level(r, f_n) if plan.mode.startswith("C1") else 0.0
        for rep in range(plan.replicates):
            seed = child_seed(plan.seed, plan.scenario, plan.mode, n, rep)
            tasks.append((plan.family.limit, f_n, plan.mode, plan.R, r, t, seed, n, rep))
    records = _map(_coincidence_task, tasks, workers)
    rows = []
    for n in plan.n_grid:
        recs = [x for x in records if x["n"] == n]
        k = sum(1 for x in recs if x["certified"] and x["equal"])
        c = sum(1 for x in recs if x["certified"])
        lo, hi = wilson(k, len(recs))
        rows.append(CoincidenceRow(plan.scenario, n, radii[n], plan.R, len(recs), k / len(recs), lo, hi, c / len(recs)))
    return CoincidenceResult(rows, records)


# ---------------------------------------------------------------------------
# envelope convergence


def _envelope_task(task) -> Dict[str, object]:
    limit, f_n, R, Rt, r, seed, n, rep = task
    rec: Dict[str, object] = {"n": n, "rep": rep, "certified": False, "separation": math.inf, "error": None}
    try:
        pair = couple_voronoi_limit(limit.gamma, f_n, r, seed)
        rec["disagreed"] = pair.disagreed
        ok_l, fail_l, sk_l = _side(pair.left, "laguerre", Rt, r, 0.0, Rt)
        ok_r, fail_r, sk_r = _side(pair.right, "laguerre", Rt, r, 0.0, Rt)
        rec["certified"] = ok_l and ok_r
        rec["failed"] = fail_l or fail_r
        if rec["certified"]:
            rec["separation"] = envelope_separation(sk_l, sk_r, Disk(0.0, 0.0, R))
    except (LaguerreError, ValueError, ArithmeticError) as exc:
        rec["error"] = f"{type(exc).__name__}: {exc}"
    return rec


@dataclass
class EnvelopeRow:
    scenario: str
    n: int
    eps: float
    exceed_freq: float
    ci_lo: float
    ci_hi: float


@dataclass
class EnvelopeResult:
    rows: List[EnvelopeRow]
    records: List[Dict[str, object]]
    cert_rate: Dict[int, float]


def estimate_envelope(plan: ExperimentPlan, eps_grid: Sequence[float], workers: int = 1) -> EnvelopeResult:
    """Frequency of ``envelope_separation > eps`` on ``B_R`` between the coupled Laguerre skeletons.

    Target skeletons are taken on ``B_{R + eps_cap}``, which makes the decision
    exact for every ``eps < eps_cap``; larger ``eps`` use the same (lower-bound)
    separation.  Uncertified replicates count as exceedances.
    """
    if plan.mode != "C2_laguerre_envelope":
        raise ValueError("estimate_envelope needs mode C2_laguerre_envelope")
    eps_grid = sorted(float(e) for e in eps_grid)
    radii = plan.radii()
    Rt = plan.R + plan.eps_cap
    tasks = []
    for n in plan.n_grid:
        r = max(radii[n], 2.0 * Rt)
        f_n = plan.family(n)
        for rep in range(plan.replicates):
            seed = child_seed(plan.seed, plan.scenario, plan.mode, n, rep)
            tasks.append((plan.family.limit, f_n, plan.R, Rt, r, seed, n, rep))
    records = _map(_envelope_task, tasks, workers)
    rows, cert = [], {}
    for n in plan.n_grid:
        recs = [x for x in records if x["n"] == n]
        cert[n] = sum(1 for x in recs if x["certified"]) / len(recs)
        for eps in eps_grid:
            k = sum(1 for x in recs if x["separation"] > eps)
            lo, hi = wilson(k, len(recs))
            rows.append(EnvelopeRow(plan.scenario, n, eps, k / len(recs), lo, hi))
    return EnvelopeResult(rows, records, cert)


# ---------------------------------------------------------------------------
# stationary windows


def _expected_in_paraboloid(f: HeightDensity, x: float) -> float:
    """Mean number of points of ``eta_f`` in ``{(v, h): |v|^2 + h <= x}``."""
    d = f.d
    return kappa(d) * math.gamma(d / 2 + 1) * frac_integral(f, d / 2 + 1, x)


def _level(f: HeightDensity, target: float) -> float:
    """Smallest ``x`` with ``_expected_in_paraboloid(f, x) >= target``."""
    g = lambda x: _expected_in_paraboloid(f, x)
    a = f.lo if math.isfinite(f.lo) else -1.0
    while not math.isfinite(f.lo) and g(a) >= target:
        a = 2 * a - 1
    b = a + 1.0
    while g(b) < target:
        b = a + 2 * (b - a)
    for _ in range(80):
        m = 0.5 * (a + b)
        if g(m) >= target:
            b = m
        else:
            a = m
    return b


@dataclass(frozen=True)
class WindowParams:
    """Envelope cap ``H`` over ``W + inner``, sampling floor ``L``; sampling box is ``W + margin``."""

    H: float
    L: float
    inner: float

    @property
    def margin(self) -> float:
        return self.inner + math.sqrt(self.H - self.L)


def window_params(f: HeightDensity, window: Box, cap: float = 20.0, thin: float = 0.01, tail: float = 1e-6) -> WindowParams:
    """Heuristic sizes; the per-replicate certificate makes them safe rather than exact.

    ``H`` is the level where an empty paraboloid has probability ``exp(-cap)``;
    the inner margin is twice the span between ``H`` and the level where points
    become sparse (``thin`` expected points per paraboloid).
    """
    H = _level(f, cap)
    h_thin = _level(f, thin)
    inner = 2.0 * math.sqrt(max(H - h_thin, 1e-12))
    if math.isfinite(f.lo):
        return WindowParams(H, f.lo, inner)
    L = h_thin - 1.0
    while True:
        side = max(window.x1 - window.x0, window.y1 - window.y0) + 2 * (inner + math.sqrt(H - L))
        if float(f.mass(L)) * side * side < tail:
            return WindowParams(H, L, inner)
        L = h_thin - 2 * (h_thin - L)


@dataclass
class WindowSample:
    config: PointConfiguration
    dual: Optional[DualTriangulation]
    box: Box
    inner: Box
    sup: float
    certified: bool


def sample_window(f: HeightDensity, window: Box, seed: int, params: Optional[WindowParams] = None) -> WindowSample:
    """Sample ``eta_f`` on ``W + margin`` and certify the envelope cap over ``W + inner``."""
    params = params or window_params(f, window)
    box = window.expand(params.margin)
    rng = stream(seed, "window")
    if isinstance(f, Homogeneous):
        config = sample_homogeneous(f.gamma, box, rng)
    else:
        config = sample_density(f, Region(box, (params.L, params.H)), rng)
    inner = window.expand(params.inner)
    dual = _dual_or_none(config)
    if dual is None:
        return WindowSample(config, None, box, inner, math.inf, False)
    sup, _ = envelope_sup(config, inner, dual)
    return WindowSample(config, dual, box, inner, sup, sup <= params.H)


def _cells_near_window(ws: WindowSample, W: Box, cap: float):
    """Laguerre cells of generators that can own a point of ``W`` (envelope at most ``cap``)."""
    cfg = ws.config
    dx = np.maximum(np.maximum(W.x0 - cfg.xy[:, 0], cfg.xy[:, 0] - W.x1), 0.0)
    dy = np.maximum(np.maximum(W.y0 - cfg.xy[:, 1], cfg.xy[:, 1] - W.y1), 0.0)
    ids = np.nonzero((dx * dx + dy * dy + cfg.h <= cap) & ws.dual.extreme())[0]
    return build_laguerre(ws.dual, ws.box.scaled(1.2), ids=ids)


def _inside(verts: np.ndarray, box: Box) -> bool:
    return bool(np.all((verts[:, 0] >= box.x0) & (verts[:, 0] <= box.x1) & (verts[:, 1] >= box.y0) & (verts[:, 1] <= box.y1)))


@dataclass
class CellRecord:
    area: float
    perimeter: float
    n_vertices: int
    vertices: Tuple[Tuple[object, object], ...]


def _record(cell, center) -> CellRecord:
    if cell.exact is not None:
        verts = tuple((x - center[0], y - center[1]) for x, y in cell.exact)
    else:
        verts = tuple((float(x - center[0]), float(y - center[1])) for x, y in cell.vertices)
    return CellRecord(cell.area(), cell.perimeter(), int(cell.vertices.shape[0]), verts)


def _window_task(task) -> Dict[str, object]:
    f, W, params, seed, want_cells = task
    ws = sample_window(f, W, seed, params)
    rec: Dict[str, object] = {"certified": ws.certified, "n_points": len(ws.config)}
    if ws.dual is None:
        rec.update(vertices=0, centers=0, extreme=0, cells=[])
        return rec
    apex_in = _in_box(ws.dual.apex_xy, W) if ws.dual.simplices else np.zeros(0, dtype=bool)
    rec["vertices"] = int(apex_in.sum())
    rec["extreme"] = int((_in_box(ws.config.xy, W) & ws.dual.extreme()).sum())
    owners = sorted({i for k, tri in enumerate(ws.dual.triples) if apex_in[k] for i in tri})
    lag = build_laguerre(ws.dual, ws.box.scaled(1.2), ids=owners)
    cells = []
    for i in owners:
        cell = lag.cells[i]
        if cell.empty:
            continue
        c = cell.center()
        if not _in_box(np.array([c]), W)[0]:
            continue
        if not _inside(cell.vertices, ws.inner):
            rec["certified"] = False
        cells.append(_record(cell, c) if want_cells else None)
    rec["centers"] = len(cells)
    rec["cells"] = cells if want_cells else []
    return rec


@dataclass
class IntensityEstimate:
    density: str
    window_area: float
    replicates: int
    gamma_d_hat: float
    gamma_0_hat: float
    se: float
    se_d: float
    gamma_0_dual_hat: float
    se_dual: float
    certified: int

    def row(self) -> Dict[str, object]:
        return {
            "density": self.density,
            "window_area": self.window_area,
            "replicates": self.replicates,
            "gamma_d_hat": self.gamma_d_hat,
            "gamma_0_hat": self.gamma_0_hat,
            "se": self.se,
        }


def _mean_se(values: Sequence[float]) -> Tuple[float, float]:
    a = np.asarray(values, dtype=float)
    if a.size == 0:
        return (math.nan, math.nan)
    se = float(a.std(ddof=1) / math.sqrt(a.size)) if a.size > 1 else math.nan
    return float(a.mean()), se


def _window_records(f, W, replicates, seed, workers, want_cells, params=None, label="window"):
    params = params or (None if isinstance(f, CellComplex) else window_params(f, W))
    tasks = [(f, W, params, child_seed(seed, label, f.label(), rep), want_cells) for rep in range(replicates)]
    records = _map(_window_task, tasks, workers)
    bad = sum(1 for r in records if not r["certified"])
    if bad > 0.01 * replicates:
        warnings.warn(f"{bad} of {replicates} windows uncertified for {f.label()}", UncertifiedWindow, stacklevel=3)
    return records


def fixture_intensities(complex_: CellComplex, window: Box) -> Tuple[Fraction, Fraction]:
    """Exact ``(gamma_d, gamma_0)`` of a deterministic complex over a half-open window."""
    area = Fraction(window.x1 - window.x0) * Fraction(window.y1 - window.y0)
    lo = (Fraction(window.x0), Fraction(window.y0))
    hi = (Fraction(window.x1), Fraction(window.y1))
    inside = lambda p: lo[0] <= p[0] < hi[0] and lo[1] <= p[1] < hi[1]
    centers = sum(1 for c in complex_.cells.values() if not c.empty and inside(c.center()))
    verts = set()
    for c in complex_.cells.values():
        pts = c.exact if c.exact is not None else [tuple(v) for v in c.vertices]
        for p in pts:
            if inside(p):
                verts.add(p)
    return Fraction(centers) / area, Fraction(len(verts)) / area


def estimate_intensities(
    f: Union[HeightDensity, CellComplex],
    window: Box,
    replicates: int = 100,
    seed: int = 0,
    workers: int = 1,
    params: Optional[WindowParams] = None,
) -> IntensityEstimate:
    """Cell-centre and vertex counts per unit area over ``window`` (certified replicates only)."""
    area = (window.x1 - window.x0) * (window.y1 - window.y0)
    if isinstance(f, CellComplex):
        gd, g0 = fixture_intensities(f, window)
        return IntensityEstimate("fixture", area, 1, float(gd), float(g0), 0.0, 0.0, float(gd), 0.0, 1)
    records = _window_records(f, window, replicates, seed, workers, False, params, "intensity")
    ok = [r for r in records if r["certified"]]
    gd, se_d = _mean_se([r["centers"] / area for r in ok])
    g0, se0 = _mean_se([r["vertices"] / area for r in ok])
    ge, se_e = _mean_se([r["extreme"] / area for r in ok])
    return IntensityEstimate(f.label(), area, replicates, gd, g0, se0, se_d, ge, se_e, len(ok))


@dataclass
class TypicalCellSample:
    """Cells with centre (lexicographically smallest vertex) in the window, recentred at that vertex."""

    records: List[CellRecord]
    window_area: float
    replicates: int
    certified: int
    center: str = "lexmin"

    def summary(self) -> Dict[str, object]:
        if not self.records:
            return {"cells": 0}
        areas = np.array([r.area for r in self.records])
        nv = Counter(r.n_vertices for r in self.records)
        hist, edges = np.histogram(areas, bins=10)
        return {
            "cells": len(self.records),
            "mean_area": float(areas.mean()),
            "se_area": float(areas.std(ddof=1) / math.sqrt(areas.size)) if areas.size > 1 else math.nan,
            "mean_vertices": float(np.mean([r.n_vertices for r in self.records])),
            "vertex_histogram": {str(k): nv[k] for k in sorted(nv)},
            "area_histogram": {"counts": [int(c) for c in hist], "edges": [float(e) for e in edges]},
        }

    def multiset(self) -> Counter:
        """Recentred cells as canonical vertex tuples (rotation of the vertex list normalised)."""
        out: Counter = Counter()
        for r in self.records:
            v = list(r.vertices)
            k = min(range(len(v)), key=lambda i: v[i])
            out[tuple(v[k:] + v[:k])] += 1
        return out


def typical_cell(
    f: Union[HeightDensity, CellComplex],
    window: Box,
    replicates: int = 100,
    seed: int = 0,
    workers: int = 1,
    params: Optional[WindowParams] = None,
) -> TypicalCellSample:
    area = (window.x1 - window.x0) * (window.y1 - window.y0)
    if isinstance(f, CellComplex):
        lo = (Fraction(window.x0), Fraction(window.y0))
        hi = (Fraction(window.x1), Fraction(window.y1))
        recs = []
        for i in sorted(f.cells):
            c = f.cells[i]
            if c.empty:
                continue
            z = c.center()
            if lo[0] <= z[0] < hi[0] and lo[1] <= z[1] < hi[1]:
                recs.append(_record(c, z))
        return TypicalCellSample(recs, area, 1, 1)
    records = _window_records(f, window, replicates, seed, workers, True, params, "typical")
    ok = [r for r in records if r["certified"]]
    return TypicalCellSample([c for r in ok for c in r["cells"]], area, replicates, len(ok))


def mixture_intensity(n: int, d: int = 2) -> Fraction:
    """Cell intensity of the lattice mixture: scale ``2^-n`` with probability ``2^(-nd/2)``, else unit scale.

    Both components are counted on their exact fixtures over ``[0, 1)^2``.
    """
    if d != 2:
        raise NotImplementedError("fixtures are planar")
    p = Fraction(1, 2 ** n)
    W = Box(0.0, 0.0, 1.0, 1.0)
    coarse, _ = fixture_intensities(lattice_fixture("shifted_lattice", 0, shift=(Fraction(1, 3), Fraction(1, 7)), extent=2), W)
    fine, _ = fixture_intensities(lattice_fixture("shifted_lattice", n, shift=(Fraction(1, 3 * 2 ** n), 0), extent=2), W)
    return (1 - p) * coarse + p * fine


def mixture_typical_cell(n: int) -> Dict[str, Fraction]:
    """Palm weights of the two cell shapes in the lattice mixture."""
    p = Fraction(1, 2 ** n)
    total = mixture_intensity(n)
    return {"fine": p * 4 ** n / total, "unit": (1 - p) / total}


# ---------------------------------------------------------------------------
# capacity functionals


def _capacity_task(task) -> Dict[str, object]:
    f, W, params, seed, tests = task
    ws = sample_window(f, W, seed, params)
    if ws.dual is None:
        return {"certified": False, "hits": [False] * len(tests)}
    lag = _cells_near_window(ws, W, min(ws.sup, params.H))
    skel = skeleton_restrict(lag, W)
    return {"certified": ws.certified, "hits": [capacity_hit(skel, C) for C in tests]}


@dataclass
class CapacityEstimate:
    tests: List[object]
    hits: List[int]
    replicates: int
    certified: int
    per_replicate: List[List[bool]]

    @property
    def T_hat(self) -> List[float]:
        return [h / self.replicates for h in self.hits]

    def ci(self) -> List[Tuple[float, float]]:
        return [wilson(h, self.replicates) for h in self.hits]


def estimate_capacity(
    f: Union[HeightDensity, CellComplex],
    tests: Sequence[Union[Disk, Box]],
    window: Box,
    replicates: int = 100,
    seed: int = 0,
    workers: int = 1,
    params: Optional[WindowParams] = None,
) -> CapacityEstimate:
    """``T(C) = P(skeleton meets C)`` for test sets inside ``window``."""
    tests = list(tests)
    if isinstance(f, CellComplex):
        skel = skeleton_restrict(f, f.frame)
        hits = [capacity_hit(skel, C) for C in tests]
        return CapacityEstimate(tests, [int(h) for h in hits], 1, 1, [hits])
    params = params or window_params(f, window)
    label = f.label()
    tasks = [(f, window, params, child_seed(seed, "capacity", label, rep), tests) for rep in range(replicates)]
    records = _map(_capacity_task, tasks, workers)
    bad = sum(1 for r in records if not r["certified"])
    if bad > 0.01 * replicates:
        warnings.warn(f"{bad} of {replicates} windows uncertified for {label}", UncertifiedWindow, stacklevel=2)
    per = [r["hits"] for r in records]
    hits = [sum(1 for row in per if row[j]) for j in range(len(tests))]
    return CapacityEstimate(tests, hits, replicates, replicates - bad, per)


# ---------------------------------------------------------------------------
# two-sample comparisons


def z_test(m1: float, se1: float, m2: float, se2: float) -> Dict[str, float]:
    """Two-sided z-test for equal means."""
    from scipy.stats import norm

    s = math.hypot(se1, se2)
    z = (m1 - m2) / s if s > 0 else (0.0 if m1 == m2 else math.inf)
    return {"z": z, "p_value": float(2 * norm.sf(abs(z)))}


# ---------------------------------------------------------------------------
# scenario suites


@dataclass
class Scenario:
    name: str
    family: Callable[[], ConvergenceFamily]
    mode: str
    R: float
    n_grid: Tuple[int, ...]
    envelope: bool = False
    intensity_window: float = 10.0


SCENARIOS: Dict[str, Scenario] = {
    "beta_to_pv": Scenario("beta_to_pv", beta_to_pv_family, "C2_dual", 2.0, (1, 9, 99), envelope=True),
    "beta_to_gaussian": Scenario("beta_to_gaussian", rescaled_beta_family, "C1_dual", 1.0, (4, 16, 64), intensity_window=5.0),
    "betaprime_to_gaussian": Scenario(
        "betaprime_to_gaussian", rescaled_betaprime_family, "C1_dual", 1.0, (4, 16, 64), intensity_window=5.0
    ),
    "marked_to_pv": Scenario("marked_to_pv", marked_family, "C2_dual", 2.0, (1, 10, 100), envelope=True, intensity_window=5.0),
    "constant": Scenario("constant", lambda: constant_family(Beta(0.5)), "C1_dual", 1.0, (1, 2, 3)),
}


@dataclass
class SuiteReport:
    scenario: str
    seed: int
    coincidence: List[CoincidenceRow]
    envelope: List[EnvelopeRow]
    intensities: List[IntensityEstimate]
    summary: Dict[str, object]

    def coincidence_csv(self) -> str:
        return _csv(["scenario", "n", "r_n", "R", "replicates", "p_hat", "ci_lo", "ci_hi", "cert_rate"], [asdict(r) for r in self.coincidence])

    def envelope_csv(self) -> str:
        return _csv(["scenario", "n", "eps", "exceed_freq", "ci_lo", "ci_hi"], [asdict(r) for r in self.envelope])

    def intensities_csv(self) -> str:
        return _csv(["density", "window_area", "replicates", "gamma_d_hat", "gamma_0_hat", "se"], [r.row() for r in self.intensities])

    def to_json(self) -> str:
        data = {
            "scenario": self.scenario,
            "seed": self.seed,
            "coincidence": [asdict(r) for r in self.coincidence],
            "envelope": [asdict(r) for r in self.envelope],
            "intensities": [asdict(r) for r in self.intensities],
            "summary": self.summary,
        }
        return json.dumps(_jsonable(data), indent=1, sort_keys=True) + "\n"

    def write(self, directory: str, force: bool = False) -> List[str]:
        files = {
            "coincidence.csv": self.coincidence_csv(),
            "envelope.csv": self.envelope_csv(),
            "intensities.csv": self.intensities_csv(),
            "report.json": self.to_json(),
        }
        os.makedirs(directory, exist_ok=True)
        paths = [os.path.join(directory, name) for name in files]
        if not force:
            clash = [p for p in paths if os.path.exists(p)]
            if clash:
                raise FileExistsError(f"refusing to overwrite {clash[0]} (use --force)")
        for p, text in zip(paths, files.values()):
            with open(p, "w", newline="") as fh:
                fh.write(text)
        return paths


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv(header: List[str], rows: List[Dict[str, object]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r[k]) for k in header])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, Fraction):
        return float(x)
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else str(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def convergence_suite(
    scenario: str,
    replicates: int = 100,
    intensity_replicates: int = 50,
    seed: int = 0,
    workers: int = 1,
    n_grid: Optional[Sequence[int]] = None,
    eps_grid: Sequence[float] = (0.05, 0.1, 0.2),
    window: Optional[float] = None,
) -> SuiteReport:
    """Run the coincidence, envelope, intensity, typical-cell and capacity steps of a scenario.

    For the Gaussian scenarios the members are already the rescaled densities,
    whose tessellations have the law of ``sqrt(2 beta) L(eta_beta)``, so they
    are compared with the Gaussian limit directly.
    """
    if scenario not in SCENARIOS:
        raise KeyError(f"unknown scenario '{scenario}'")
    sc = SCENARIOS[scenario]
    fam = sc.family()
    grid = tuple(n_grid) if n_grid is not None else sc.n_grid
    plan = ExperimentPlan(fam, sc.mode, sc.R, grid, replicates, seed, scenario=scenario)
    summary: Dict[str, object] = {"mode": sc.mode, "R": sc.R, "n_grid": list(grid), "errors": []}
    coin = estimate_coincidence(plan, workers)
    summary["coincidence_errors"] = sum(1 for r in coin.records if r["error"])
    p = [r.p_hat for r in coin.rows]
    summary["p_hat_nondecreasing"] = all(b >= a for a, b in zip(p, p[1:]))
    env_rows: List[EnvelopeRow] = []
    if sc.envelope:
        eplan = ExperimentPlan(fam, "C2_laguerre_envelope", sc.R, grid, replicates, seed, scenario=scenario)
        env = estimate_envelope(eplan, eps_grid, workers)
        env_rows = env.rows
        summary["envelope_cert_rate"] = {str(k): v for k, v in env.cert_rate.items()}
    side = window if window is not None else sc.intensity_window
    W = Box(0.0, 0.0, side, side)
    limit, last = fam.limit, fam(grid[-1])
    intens = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", UncertifiedWindow)
        for f in (limit, last) if limit != last else (limit,):
            intens.append(estimate_intensities(f, W, intensity_replicates, seed, workers))
        cells = [typical_cell(f, W, intensity_replicates, seed, workers).summary() for f in (limit, last)]
        small = Disk(side / 2, side / 2, 0.05)
        caps = [estimate_capacity(f, [small], W, intensity_replicates, seed, workers) for f in (limit, last)]
    summary["warnings"] = sorted({str(w.message) for w in caught})
    summary["typical_cell"] = {"limit": cells[0], "member": cells[1]}
    summary["capacity_small_disk"] = {"limit": caps[0].T_hat[0], "member": caps[1].T_hat[0]}
    if len(intens) == 2:
        a, b = intens
        summary["gamma_0_comparison"] = z_test(b.gamma_0_hat, b.se, a.gamma_0_hat, a.se)
        if "mean_area" in cells[0] and "mean_area" in cells[1]:
            summary["mean_area_comparison"] = z_test(cells[1]["mean_area"], cells[1]["se_area"], cells[0]["mean_area"], cells[0]["se_area"])
    if scenario == "beta_to_pv":
        target = gamma_d(2)
        b = intens[-1]
        summary["gamma_d_target"] = target
        summary["gamma_d_member"] = {"index": family_index_value(fam, grid[-1]), "estimate": b.gamma_d_hat, "se": b.se_d}
    return SuiteReport(scenario, seed, coin.rows, env_rows, intens, summary)
