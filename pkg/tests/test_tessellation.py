from fractions import Fraction

import numpy as np
import pytest

from laguerre_limits.errors import DegenerateConfiguration, RegionMismatch
from laguerre_limits.geometry import Box, Disk
from laguerre_limits.sampling import PointConfiguration
from laguerre_limits.tessellation import (
    Skeleton,
    build_dual,
    build_laguerre,
    capacity_hit,
    complex_from_json,
    complex_to_json,
    envelope_separation,
    laguerre_diagram,
    lattice_fixture,
    read_complex_json,
    render_svg,
    skeleton_equal,
    skeleton_restrict,
    write_complex_json,
)

from helpers import cases, random_configuration
from oracles import dedupe, exhaustive_dual, halfplane_cell


def config(rows):
    a = np.asarray(rows, float)
    return PointConfiguration(a[:, :2], a[:, 2])


def test_three_points_one_simplex():
    d = build_dual(config([[0, 0, 0], [1, 0, 0], [0, 1, 0]]))
    assert d.triples == [(0, 1, 2)]
    assert d.simplices[0][1].apex_v == pytest.approx((0.5, 0.5))


def test_buried_point():
    # a quadrilateral at height 0 in general position; the centre sits far above
    c = config([[0, 0, 0], [2, 0, 0], [2.2, 2, 0], [0, 1.9, 0], [1, 1, 5]])
    d = build_dual(c)
    assert len(d.triples) == 2
    assert not d.extreme()[4]
    lag = build_laguerre(d, Box(-1, -1, 3, 3))
    assert 4 not in lag.cells or lag.cells[4].empty


def test_degenerate_inputs():
    with pytest.raises(DegenerateConfiguration):
        build_dual(config([[0, 0, 0], [1, 1, 0]]))
    with pytest.raises(DegenerateConfiguration):
        build_dual(config([[0, 0, 0], [1, 1, 3], [2, 2, -1], [5, 5, 0]]))


@pytest.mark.parametrize("seed,kind,n", cases(24))
def test_dual_matches_exhaustive_oracle(seed, kind, n):
    c = random_configuration(seed, kind, n)
    assert sorted(build_dual(c).triples) == exhaustive_dual(c.xy, c.h)


@pytest.mark.parametrize("seed,kind,n", cases(12))
def test_cells_match_halfplane_oracle(seed, kind, n):
    c = random_configuration(seed, kind, n)
    frame = (-1.0, -1.0, 5.0, 5.0)
    lag = build_laguerre(build_dual(c), Box(*frame))
    for i in range(n):
        want = dedupe(halfplane_cell(c.xy, c.h, i, frame))
        cell = lag.cells.get(i)
        got = [] if cell is None or cell.empty else dedupe([tuple(v) for v in cell.vertices])
        assert len(got) == len(want)
        for p in got:
            assert min(np.hypot(p[0] - q[0], p[1] - q[1]) for q in want) <= 1e-9


def test_cells_partition_frame():
    c = random_configuration(5, "gaussian", 30)
    lag = laguerre_diagram(c, Box(-1, -1, 5, 5))
    assert sum(cell.area() for cell in lag.cells.values()) == pytest.approx(36.0)


def test_power_vertices_are_equidistant():
    c = random_configuration(9, "beta05", 25)
    d = build_dual(c)
    for (a, b, k), par in d.simplices:
        pw = [((np.array(par.apex_v) - c.xy[i]) ** 2).sum() + c.h[i] for i in (a, b, k)]
        assert np.allclose(pw, par.apex_h)


def test_unit_lattice_skeleton_count():
    lat = lattice_fixture("shifted_lattice", 0)
    assert len(skeleton_restrict(lat, Box(0, 0, 2, 2))) == 12


def test_envelope_separation_examples():
    a = Skeleton(np.array([[0.0, 0.0]]), np.array([[1.0, 0.0]]), [(0, 1)], None)
    b = Skeleton(np.array([[0.0, 0.3]]), np.array([[1.0, 0.3]]), [(0, 1)], None)
    assert envelope_separation(a, b, Box(-5, -5, 5, 5)) == pytest.approx(0.3)
    C = Box(-1.5, -1.5, 1.5, 1.5)
    lat = lattice_fixture("shifted_lattice", 0)
    moved = lattice_fixture("shifted_lattice", 0, shift=(0.1, 0))
    sep = envelope_separation(skeleton_restrict(lat, C), skeleton_restrict(moved, C), C)
    assert sep == pytest.approx(0.1)


def test_skeleton_equal_and_mismatch():
    c = random_configuration(3, "beta0", 30)
    lag = laguerre_diagram(c)
    s1 = skeleton_restrict(lag, Disk(2, 2, 1))
    s2 = skeleton_restrict(laguerre_diagram(c), Disk(2, 2, 1))
    assert skeleton_equal(s1, s2)
    with pytest.raises(RegionMismatch):
        skeleton_equal(s1, skeleton_restrict(lag, Disk(2, 2, 1.5)))
    moved = PointConfiguration(c.xy + 1e-3, c.h)
    assert not skeleton_equal(s1, skeleton_restrict(laguerre_diagram(moved), Disk(2, 2, 1)))


def test_capacity_hit():
    lat = lattice_fixture("shifted_lattice", 0)
    s = skeleton_restrict(lat, Box(-2, -2, 2, 2))
    assert capacity_hit(s, Disk(1.0, 0.5, 0.0))
    assert not capacity_hit(s, Disk(0.5, 0.5, 0.2))
    assert capacity_hit(s, Disk(0.5, 0.5, 0.6))


def test_two_tilings_exact():
    for variant in (1, 2):
        fx = lattice_fixture("two_tilings", variant=variant, extent=1)
        # 4 cells per unit length in each direction over [-1, 1]^2
        assert len(fx.cells) == 64
        areas = sorted(Fraction(c.exact[1][0] - c.exact[0][0]) * (c.exact[2][1] - c.exact[1][1]) for c in fx.cells.values())
        assert sum(areas) == 4


def test_json_round_trip(tmp_path):
    c = random_configuration(1, "beta05", 20)
    lag = laguerre_diagram(c)
    p = tmp_path / "c.json"
    write_complex_json(lag, str(p))
    back = read_complex_json(str(p))
    assert complex_to_json(back) == complex_to_json(lag)
    assert complex_to_json(complex_from_json(complex_to_json(lag))) == complex_to_json(lag)
    q = tmp_path / "d.json"
    write_complex_json(back, str(q))
    assert p.read_bytes() == q.read_bytes()


def test_svg_deterministic(tmp_path):
    lag = laguerre_diagram(random_configuration(2, "gaussian", 15))
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    render_svg(lag, str(a), skeleton_restrict(lag, Disk(2, 2, 1)))
    render_svg(lag, str(b), skeleton_restrict(lag, Disk(2, 2, 1)))
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().startswith("<svg") or "<svg" in a.read_text()
