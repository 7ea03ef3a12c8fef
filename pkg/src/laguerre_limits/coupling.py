"""Couplings of weighted Poisson processes and the r_n schedules that drive them.

Both constructions use superposition: the common part is a Poisson process
with the pointwise minimum of the two intensities, and each side adds an
independent residual process.  The two sides then disagree exactly when a
residual is nonempty, which happens with probability ``1 - exp(-L1)``.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .densities import (
    ConvergenceFamily,
    HeightDensity,
    Homogeneous,
    gns_sample,
    l1_distance,
    split_min_excess,
)
from .errors import ScheduleStall, ZeroMass
from .geometry import Annulus, Disk
from .rng import stream
from .sampling import PointConfiguration, Region, sample_density, sample_homogeneous, write_points_csv


@dataclass
class CoupledPair:
    """Two configurations on a common probability space.

    Ids in ``shared_ids`` index the same point in both members.  For the
    density coupling those points are identical; for the Voronoi-limit coupling
    they share positions while heights come from the independent marking.
    """

    left: PointConfiguration
    right: PointConfiguration
    shared_ids: np.ndarray
    diagnostics: Dict[str, object] = field(default_factory=dict)

    @property
    def disagreed(self) -> bool:
        return bool(self.diagnostics.get("disagreed", False))


def exterior_regions(radius: float, heights, outer: float, floor: float, ceil: float) -> List[Region]:
    """Cylinders covering ``(B_outer x [floor, ceil])`` minus ``B_radius x heights``."""
    lo, hi = heights
    parts = []
    if outer > radius:
        parts.append(Region(Annulus(0.0, 0.0, radius, outer), (floor, ceil)))
    if floor < lo:
        parts.append(Region(Disk(0.0, 0.0, radius), (floor, lo)))
    if ceil > hi:
        parts.append(Region(Disk(0.0, 0.0, radius), (hi, ceil)))
    return parts


@lru_cache(maxsize=64)
def _split(f: HeightDensity, f_n: HeightDensity, lo: float, hi: float):
    return split_min_excess(f, f_n, lo, hi)


def _sample_exterior(f: HeightDensity, regions: Sequence[Region], rng) -> PointConfiguration:
    return PointConfiguration.concat([sample_density(f, reg, rng) for reg in regions])


def couple_densities(
    f: HeightDensity,
    f_n: HeightDensity,
    region: Region,
    seed: int,
    exterior: Sequence[Region] = (),
) -> CoupledPair:
    """Maximal coupling of ``eta_f`` and ``eta_{f_n}`` on ``region`` plus independent exteriors."""
    lo, hi = region.heights
    common, f_res, g_res = _split(f, f_n, lo, hi)
    area = region.spatial.area
    l1 = area * (f_res.total + g_res.total)
    shared = sample_density(common, region, stream(seed, "couple", "common"))
    left_res = sample_density(f_res, region, stream(seed, "couple", "left"))
    right_res = sample_density(g_res, region, stream(seed, "couple", "right"))
    parts_l = [shared, left_res]
    parts_r = [shared, right_res]
    if exterior:
        parts_l.append(_sample_exterior(f, exterior, stream(seed, "couple", "left-ext")))
        parts_r.append(_sample_exterior(f_n, exterior, stream(seed, "couple", "right-ext")))
    left = PointConfiguration.concat(parts_l, region, {"seed": seed, "density": f.describe()})
    right = PointConfiguration.concat(parts_r, region, {"seed": seed, "density": f_n.describe()})
    diag = {
        "coupling": "densities",
        "l1_bound": l1,
        "p_disagree": -math.expm1(-l1),
        "disagreed": bool(len(left_res) or len(right_res)),
        "n_shared": len(shared),
        "n_left_only": len(left_res),
        "n_right_only": len(right_res),
        "region": _region_record(region),
    }
    return CoupledPair(left, right, np.arange(len(shared)), diag)


def couple_voronoi_limit(
    gamma: float,
    f_n: HeightDensity,
    r_n: float,
    seed: int,
    exterior: Sequence[Region] = (),
) -> CoupledPair:
    """Couple ``eta^gamma`` with ``eta_{f_n}`` on ``K2(r_n/2, r_n)``.

    The right side's spatial process on ``B_{3 r_n}`` has intensity
    ``(I^1 f_n)(9 r_n^2 / 4)`` and is maximally coupled with the homogeneous
    left side; heights on the right are i.i.d. from ``f_n`` restricted to
    ``[0, 9 r_n^2 / 4]``.
    """
    top = 9.0 * r_n * r_n / 4.0
    lam = float(f_n.mass(top)) - float(f_n.mass(0.0)) if f_n.lo < 0 else float(f_n.mass(top))
    if not lam > 0:
        raise ZeroMass(f"(I^1 f_n)({top}) = 0")
    disk = Disk(0.0, 0.0, 3.0 * r_n)
    both = sample_homogeneous(min(gamma, lam), disk, stream(seed, "voronoi", "common"))
    extra_l = sample_homogeneous(max(gamma - lam, 0.0), disk, stream(seed, "voronoi", "left"))
    extra_r = sample_homogeneous(max(lam - gamma, 0.0), disk, stream(seed, "voronoi", "right"))
    region = Region(disk, (0.0, top))
    left = PointConfiguration.concat([both, extra_l], Region(disk, (0.0, 0.0)), {"seed": seed, "gamma": gamma})
    base = PointConfiguration.concat([both, extra_r])
    rng = stream(seed, "voronoi", "marks")
    h = f_n.quantiles(0.0, top, rng.random(len(base))) if len(base) else np.zeros(0)
    parts_r = [PointConfiguration(base.xy, np.asarray(h, float))]
    if exterior:
        parts_r.append(_sample_exterior(f_n, exterior, stream(seed, "voronoi", "right-ext")))
        # the homogeneous side only lives at height 0, outside the disk
        parts_l = [left]
        for k, reg in enumerate(exterior):
            if isinstance(reg.spatial, Annulus) and reg.heights[0] <= 0.0 <= reg.heights[1]:
                parts_l.append(sample_homogeneous(gamma, reg.spatial, stream(seed, "voronoi", "left-ext", k)))
        left = PointConfiguration.concat(parts_l, left.region, left.provenance)
    right = PointConfiguration.concat(parts_r, region, {"seed": seed, "density": f_n.describe()})
    area = disk.area
    diag = {
        "coupling": "voronoi_limit",
        "intensity_left": gamma,
        "intensity_right": lam,
        "l1_bound": abs(gamma - lam) * area,
        "p_disagree": -math.expm1(-abs(gamma - lam) * area),
        "disagreed": bool(len(extra_l) or len(extra_r)),
        "n_shared": len(both),
        "n_left_only": len(extra_l),
        "n_right_only": len(extra_r),
        "shared_fields": "xy",
        "region": _region_record(region),
    }
    return CoupledPair(left, right, np.arange(len(both)), diag)


def _region_record(region: Region) -> Dict[str, object]:
    sp = region.spatial
    rec = {"kind": type(sp).__name__}
    rec.update({k: float(v) for k, v in sp.__dict__.items()})
    rec["heights"] = [float(region.heights[0]), float(region.heights[1])]
    return rec


def write_pair(pair: CoupledPair, directory: str, stem: str = "pair") -> List[str]:
    """Two CSV files and a JSON diagnostics record."""
    os.makedirs(directory, exist_ok=True)
    paths = [os.path.join(directory, f"{stem}_{side}.csv") for side in ("left", "right")]
    write_points_csv(pair.left, paths[0])
    write_points_csv(pair.right, paths[1])
    diag_path = os.path.join(directory, f"{stem}_diagnostics.json")
    record = dict(pair.diagnostics)
    record["shared_ids"] = [int(i) for i in pair.shared_ids]
    with open(diag_path, "w") as fh:
        json.dump(record, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return paths + [diag_path]


# ---------------------------------------------------------------------------
# r_n schedules


def _circumcentres(Y: np.ndarray):
    """Circumcentres and radii for triples ``Y`` of shape (m, 3, 2)."""
    a, b, c = Y[:, 0], Y[:, 1], Y[:, 2]
    bx, by = b[:, 0] - a[:, 0], b[:, 1] - a[:, 1]
    cx, cy = c[:, 0] - a[:, 0], c[:, 1] - a[:, 1]
    det = 2 * (bx * cy - by * cx)
    bb, cc = bx * bx + by * by, cx * cx + cy * cy
    with np.errstate(divide="ignore", invalid="ignore"):
        ux = (cy * bb - by * cc) / det
        uy = (bx * cc - cx * bb) / det
    rho = np.hypot(ux, uy)
    centre = np.column_stack([a[:, 0] + ux, a[:, 1] + uy])
    return centre, rho


def voronoi_defect_terms(f_n: HeightDensity, s: float, eps: float, rng, samples: int = 4000):
    """Monte-Carlo ``(F1(s), F2(s))`` for the Voronoi-limit defect (d = 2)."""
    d = f_n.d
    if d != 2:
        raise NotImplementedError("Voronoi-limit defect implemented for d = 2")
    m = float(f_n.mass(s * s))
    if not m > 0 or s == 0:
        return 0.0, 0.0
    Y = gns_sample(f_n, s, rng, 3 * samples).reshape(samples, 3, 2)
    centre, rho = _circumcentres(Y)
    ok = np.isfinite(rho)
    cn = np.hypot(centre[ok, 0], centre[ok, 1])
    hval = 1.0 - np.maximum(rho[ok] - cn, 0.0) ** d
    F1 = s ** (2 * d + 1) * m ** (d + 1) * m * float(np.mean(hval))
    F2 = s ** (d + 1) * m ** (d + 1) * float(np.mean(cn > eps / s))
    return F1, F2


def _default_grid(n_max: int) -> List[int]:
    geo = np.unique(np.round(np.geomspace(1, n_max, 48)).astype(int))
    return sorted(set(range(1, min(n_max, 16) + 1)) | set(int(v) for v in geo))


@dataclass
class Schedule:
    """Piecewise-constant ``r_n`` with block starts ``N_k``."""

    mode: str
    blocks: Dict[int, int]
    n_grid: List[int]
    defects: Dict[int, List[float]]
    stall: Optional[str] = None

    def block(self, n: int) -> int:
        k = 0
        for kk in sorted(self.blocks):
            if self.blocks[kk] <= n:
                k = kk
        return k

    def r(self, n: int) -> float:
        k = self.block(n)
        if k == 0:
            return 0.5
        return math.sqrt(k) / 2 if self.mode == "C1" else 2.0 * k / 3.0

    def __call__(self, n: int) -> float:
        return self.r(n)


def rn_schedule(
    family: ConvergenceFamily,
    mode: str,
    n_max: int = 1000,
    k_max: int = 12,
    n_grid: Optional[Sequence[int]] = None,
    eps: float = 0.1,
    seed: int = 0,
    mc_samples: int = 2000,
    strict: bool = False,
) -> Schedule:
    """Block thresholds ``N_k``: the first grid ``n`` whose defect falls below the target.

    C1: defect ``int_{-inf}^k |f_n - f|``, target ``2^-k k^(-d/2)``.
    C2: defect ``int_0^k (F1 + F2) + |gamma - (I^1 f_n)(k^2)|``, target ``2^-k k^(-d)``.
    """
    if mode not in ("C1", "C2"):
        raise ValueError("mode must be C1 or C2")
    grid = sorted(n_grid) if n_grid is not None else _default_grid(n_max)
    d = family.d
    defects: Dict[int, List[float]] = {}
    for n in grid:
        f_n = family.member(n)
        if mode == "C1":
            row = [l1_distance(f_n, family.limit, -math.inf, float(k)) for k in range(1, k_max + 1)]
        else:
            gamma = family.limit.gamma if isinstance(family.limit, Homogeneous) else float(family.limit.mass(math.inf))
            rng = stream(seed, "schedule", family.name, n)
            s_grid = np.linspace(0.0, k_max, 8 * k_max + 1)
            vals = np.array([sum(voronoi_defect_terms(f_n, s, eps, rng, mc_samples)) for s in s_grid])
            cum = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(s_grid))])
            row = [float(cum[8 * k]) + abs(gamma - float(f_n.mass(k * k))) for k in range(1, k_max + 1)]
        defects[n] = row
    blocks: Dict[int, int] = {}
    prev = 0
    stall = None
    for k in range(1, k_max + 1):
        target = 2.0 ** (-k) * (k ** (-d / 2) if mode == "C1" else k ** (-d))
        hit = next((n for n in grid if n > prev and defects[n][k - 1] <= target), None)
        if hit is None:
            stall = f"no n <= {grid[-1]} reaches the block-{k} defect target {target:.3g}"
            break
        blocks[k] = hit
        prev = hit
    sched = Schedule(mode, blocks, list(grid), defects, stall)
    if stall is not None:
        if strict:
            raise ScheduleStall(stall)
        warnings.warn(stall, RuntimeWarning, stacklevel=2)
    return sched
