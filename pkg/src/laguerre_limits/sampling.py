"""Seeded Poisson samplers for homogeneous and weighted point processes."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .densities import HeightDensity, Homogeneous, Piecewise
from .errors import InfiniteMass
from .geometry import Annulus, Box, Disk, WeightedPoint
from .rng import stream

Spatial = Union[Box, Disk, Annulus]
RngLike = Union[int, np.random.Generator]


def _rng(seed: RngLike, label: str) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return stream(int(seed), label)


@dataclass(frozen=True)
class Region:
    """A spatial set times a closed height interval."""

    spatial: Spatial
    heights: Tuple[float, float] = (-math.inf, math.inf)

    def mass(self, f: HeightDensity) -> float:
        lo, hi = self.heights
        if hi < lo:
            return 0.0
        if isinstance(f, Homogeneous):
            return self.spatial.area * f.mass_between(lo, hi)
        m = f.mass_between(lo, hi)
        if not math.isfinite(m):
            raise InfiniteMass(f"{f.label()} has infinite mass on heights {self.heights}")
        return self.spatial.area * m

    def contains(self, xy: np.ndarray, h: np.ndarray) -> np.ndarray:
        lo, hi = self.heights
        return self.spatial.contains(xy) & (h >= lo) & (h <= hi)


@dataclass
class PointConfiguration:
    """A finite weighted configuration with ids ``0..n-1`` in storage order."""

    xy: np.ndarray
    h: np.ndarray
    region: Optional[Region] = None
    provenance: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        self.xy = np.asarray(self.xy, dtype=float).reshape(-1, 2)
        self.h = np.asarray(self.h, dtype=float).reshape(-1)
        if self.xy.shape[0] != self.h.shape[0]:
            raise ValueError("xy and h lengths differ")

    def __len__(self) -> int:
        return self.h.shape[0]

    @property
    def ids(self) -> np.ndarray:
        return np.arange(len(self))

    @property
    def points(self) -> List[WeightedPoint]:
        return [WeightedPoint(i, (float(x), float(y)), float(h)) for i, ((x, y), h) in enumerate(zip(self.xy, self.h))]

    def point(self, i: int) -> WeightedPoint:
        return WeightedPoint(int(i), (float(self.xy[i, 0]), float(self.xy[i, 1])), float(self.h[i]))

    def subset(self, mask) -> "PointConfiguration":
        """Restriction to ``mask``; ids are renumbered."""
        return PointConfiguration(self.xy[mask], self.h[mask], self.region, dict(self.provenance))

    @staticmethod
    def concat(parts: List["PointConfiguration"], region: Optional[Region] = None, provenance=None) -> "PointConfiguration":
        if not parts:
            return PointConfiguration(np.zeros((0, 2)), np.zeros(0), region, provenance or {})
        xy = np.concatenate([p.xy for p in parts])
        h = np.concatenate([p.h for p in parts])
        return PointConfiguration(xy, h, region, provenance or {})

    def equals(self, other: "PointConfiguration") -> bool:
        return np.array_equal(self.xy, other.xy) and np.array_equal(self.h, other.h)


def sample_homogeneous(gamma: float, spatial: Spatial, seed: RngLike) -> PointConfiguration:
    """Homogeneous Poisson process of intensity ``gamma``; every height is 0."""
    rng = _rng(seed, "homogeneous")
    lam = gamma * spatial.area
    n = int(rng.poisson(lam)) if lam > 0 else 0
    xy = spatial.uniform(rng, n)
    prov = {"sampler": "homogeneous", "gamma": gamma}
    if not isinstance(seed, np.random.Generator):
        prov["seed"] = int(seed)
    return PointConfiguration(xy, np.zeros(n), Region(spatial, (0.0, 0.0)), prov)


def sample_density(f: HeightDensity, region: Region, seed: RngLike) -> PointConfiguration:
    """Poisson process with intensity ``dv f(h) dh`` restricted to ``region``."""
    rng = _rng(seed, "density")
    lam = region.mass(f)
    n = int(rng.poisson(lam)) if lam > 0 else 0
    xy = region.spatial.uniform(rng, n)
    lo, hi = region.heights
    if n and isinstance(f, Homogeneous):
        h = np.zeros(n)
    elif n and isinstance(f, Piecewise) and lo <= f.lo and hi >= f.hi:
        h = f.sample_heights(rng, n)
    elif n:
        h = f.quantiles(lo, hi, rng.random(n))
    else:
        h = np.zeros(0)
    prov = {"sampler": "density", "density": f.describe()}
    if not isinstance(seed, np.random.Generator):
        prov["seed"] = int(seed)
    return PointConfiguration(xy, np.asarray(h, dtype=float), region, prov)


def sample_marking(base: PointConfiguration, law: HeightDensity, seed: RngLike) -> PointConfiguration:
    """Attach i.i.d. marks drawn from the probability law ``law`` to ``base``."""
    if len(base) and np.any(base.h != 0):
        raise ValueError("marking expects an unweighted base configuration")
    rng = _rng(seed, "marking")
    lo, hi = law.support
    total = law.mass_between(lo, hi)
    h = law.quantiles(lo, hi, rng.random(len(base))) if len(base) else np.zeros(0)
    if abs(total - 1.0) > 1e-9:
        raise ValueError("mark law must be a probability density")
    prov = dict(base.provenance)
    prov["marks"] = law.describe()
    return PointConfiguration(base.xy.copy(), np.asarray(h, dtype=float), base.region, prov)


def write_points_csv(config: PointConfiguration, path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "x", "y", "h"])
        for i in range(len(config)):
            w.writerow([i, repr(float(config.xy[i, 0])), repr(float(config.xy[i, 1])), repr(float(config.h[i]))])


def read_points_csv(path: str) -> PointConfiguration:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and set(rows[0]) != {"id", "x", "y", "h"}:
        raise ValueError(f"{path}: expected header id,x,y,h")
    rows.sort(key=lambda r: int(r["id"]))
    if [int(r["id"]) for r in rows] != list(range(len(rows))):
        raise ValueError(f"{path}: ids must be 0..n-1")
    xy = np.array([[float(r["x"]), float(r["y"])] for r in rows]).reshape(-1, 2)
    h = np.array([float(r["h"]) for r in rows])
    return PointConfiguration(xy, h, None, {"source": path})
