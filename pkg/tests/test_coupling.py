import json
import math

import numpy as np
import pytest

from laguerre_limits.coupling import (
    Schedule,
    couple_densities,
    couple_voronoi_limit,
    exterior_regions,
    rn_schedule,
    write_pair,
)
from laguerre_limits.densities import (
    Beta,
    Gaussian,
    ShiftedBeta,
    beta_to_pv_family,
    gamma_d,
    l1_distance,
    rescaled_beta_family,
)
from laguerre_limits.geometry import Disk
from laguerre_limits.sampling import Region


def test_schedule_radii():
    s = Schedule("C1", {1: 1, 2: 3, 3: 5, 4: 8}, [1, 3, 5, 8], {})
    assert s.block(8) == 4 and s.r(8) == pytest.approx(1.0)
    assert s.block(4) == 2 and s.r(4) == pytest.approx(math.sqrt(2) / 2)
    assert s.r(0) == 0.5
    c2 = Schedule("C2", {1: 1, 2: 3}, [1, 3], {})
    assert c2.r(3) == pytest.approx(4 / 3)


def test_rn_schedule_c1_rescaled_beta():
    s = rn_schedule(rescaled_beta_family(), "C1", k_max=3, n_grid=[2, 4, 8, 16, 32, 64, 128, 256])
    assert s.stall is None
    starts = [s.blocks[k] for k in (1, 2, 3)]
    assert starts == sorted(starts)
    # each block start meets its defect target
    for k, n in s.blocks.items():
        assert s.defects[n][k - 1] <= 2.0 ** (-k) / k


def test_rn_schedule_stall_warns():
    with pytest.warns(RuntimeWarning):
        s = rn_schedule(rescaled_beta_family(), "C1", k_max=6, n_grid=[1, 2])
    assert s.stall is not None


def test_identical_densities_never_disagree():
    f = Beta(0.5)
    reg = Region(Disk(0.0, 0.0, 2.0), (0.0, 4.0))
    for seed in range(20):
        pair = couple_densities(f, f, reg, seed)
        assert not pair.disagreed
        assert pair.left.equals(pair.right)
        assert pair.diagnostics["l1_bound"] == pytest.approx(0.0, abs=1e-12)


def test_disagreement_frequency():
    f, g = Gaussian(), ShiftedBeta(4.0)
    reg = Region(Disk(0.0, 0.0, 1.0), (-2.0, 1.0))
    l1 = reg.spatial.area * l1_distance(f, g, -2.0, 1.0)
    reps = 2000
    freq = np.mean([couple_densities(f, g, reg, s).disagreed for s in range(reps)])
    p = -math.expm1(-l1)
    assert abs(freq - p) <= 3 * math.sqrt(p * (1 - p) / reps)


def test_shared_points_are_identical():
    pair = couple_densities(Gaussian(), ShiftedBeta(4.0), Region(Disk(0, 0, 2.0), (-2.0, 2.0)), 3)
    k = len(pair.shared_ids)
    assert np.array_equal(pair.left.xy[:k], pair.right.xy[:k])
    assert np.array_equal(pair.left.h[:k], pair.right.h[:k])


def test_exterior_regions_cover_shell():
    parts = exterior_regions(1.0, (0.0, 2.0), 3.0, -1.0, 4.0)
    vol = sum(p.spatial.area * (p.heights[1] - p.heights[0]) for p in parts)
    assert vol == pytest.approx(9 * math.pi * 5 - math.pi * 2)


def test_voronoi_limit_coupling():
    f = beta_to_pv_family()(9)
    pair = couple_voronoi_limit(gamma_d(2), f, 1.0, 5)
    k = len(pair.shared_ids)
    assert np.array_equal(pair.left.xy[:k], pair.right.xy[:k])
    assert np.all(pair.left.h == 0)
    top = 9 / 4
    assert pair.right.h.max() <= top and pair.right.h.min() >= 0
    lam = float(f.mass(top))
    assert pair.diagnostics["intensity_right"] == pytest.approx(lam)
    assert pair.diagnostics["l1_bound"] == pytest.approx(abs(gamma_d(2) - lam) * 9 * math.pi)


def test_write_pair(tmp_path):
    pair = couple_densities(Beta(0.5), Beta(0.6), Region(Disk(0, 0, 1.0), (0.0, 1.0)), 1)
    paths = write_pair(pair, str(tmp_path))
    assert len(paths) == 3
    rec = json.loads(open(paths[2]).read())
    assert rec["shared_ids"] == list(range(len(pair.shared_ids)))
