import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from laguerre_limits.errors import CoincidentSites, DegenerateSites
from laguerre_limits.geometry import (
    Box,
    Disk,
    Side,
    WeightedPoint,
    apex_paraboloid,
    below_paraboloid,
    bisector,
    circumball,
    power,
    power_envelope,
)

W = WeightedPoint


def test_power_examples():
    assert power((0, 0), W(0, (0, 0), 0)) == 0
    assert power((1, 0), W(0, (0, 0), 1)) == 2
    assert power((3, 4), W(0, (0, 0), -25)) == 0


def test_bisector_equal_weights_is_midline():
    hp = bisector(W(0, (0, 0), 0), W(1, (2, 0), 0))
    assert hp.value((1.0, 5.0)) == pytest.approx(0.0)
    assert hp.contains((0.0, 0.0)) and not hp.contains((2.0, 0.0))


def test_bisector_weighted_moves_towards_heavier():
    # pow equality: x^2 = (x - 2)^2 + 2  ->  x = 3/2
    hp = bisector(W(0, (0, 0), 0), W(1, (2, 0), 2))
    assert hp.value((1.5, -3.0)) == pytest.approx(0.0)
    assert hp.contains((1.4, 0.0)) and not hp.contains((1.6, 0.0))


def test_bisector_coincident_sites():
    with pytest.raises(CoincidentSites):
        bisector(W(0, (1, 1), 0), W(1, (1, 1), 3))


def test_apex_example():
    par = apex_paraboloid(W(0, (0, 0), 0), W(1, (1, 0), 0), W(2, (0, 1), 0))
    assert par.apex_v == pytest.approx((0.5, 0.5))
    assert par.apex_h == pytest.approx(0.5)


def test_apex_collinear():
    with pytest.raises(DegenerateSites):
        apex_paraboloid(W(0, (0, 0), 0), W(1, (1, 1), 2), W(2, (2, 2), -1))


def test_circumball_example():
    b = circumball((0, 0), (1, 0), (0, 1))
    assert b.center == pytest.approx((0.5, 0.5))
    assert b.radius == pytest.approx(math.sqrt(2) / 2)


def test_below_paraboloid_examples():
    par = apex_paraboloid(W(0, (1, 0), -1), W(1, (-1, 0), -1), W(2, (0, 1), -1))
    assert par.apex_v == pytest.approx((0, 0)) and par.apex_h == pytest.approx(0)
    assert below_paraboloid(W(9, (0, 0), -1), par) is Side.STRICTLY_BELOW
    assert below_paraboloid(W(9, (0.5, 0.5), -0.5), par) is Side.ON
    par1 = apex_paraboloid(W(0, (1, 0), 0), W(1, (-1, 0), 0), W(2, (0, 1), 0))
    assert par1.apex_h == pytest.approx(1)
    assert below_paraboloid(W(9, (2, 0), 0), par1) is Side.STRICTLY_ABOVE


coord = st.floats(-10, 10, allow_nan=False)
height = st.floats(-5, 5, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(coord, coord, height), min_size=3, max_size=3))
def test_apex_passes_through_generators(pts):
    ws = [W(i, (x, y), h) for i, (x, y, h) in enumerate(pts)]
    if min(math.dist(a.v, b.v) for a, b in ((ws[0], ws[1]), (ws[0], ws[2]), (ws[1], ws[2]))) < 1e-6:
        return
    try:
        par = apex_paraboloid(*ws)
    except DegenerateSites:
        return
    for w in ws:
        assert below_paraboloid(w, par) is Side.ON or abs(par.height(w.v) - w.h) < 1e-6 * (1 + abs(par.apex_h))
        # equal power at the apex location
        assert power(par.apex_v, w) == pytest.approx(par.apex_h, rel=1e-6, abs=1e-6)


@settings(max_examples=200, deadline=None)
@given(coord, coord, height, coord, coord, height, coord, coord)
def test_bisector_matches_power_difference(x1, y1, h1, x2, y2, h2, zx, zy):
    p, q = W(0, (x1, y1), h1), W(1, (x2, y2), h2)
    if (x1, y1) == (x2, y2):
        return
    hp = bisector(p, q)
    diff = power((zx, zy), q) - power((zx, zy), p)
    assert hp.value((zx, zy)) == pytest.approx(diff, abs=1e-8 * (1 + abs(diff) + 400))


def test_power_envelope_is_pointwise_min():
    rng = np.random.default_rng(3)
    xy = rng.uniform(-1, 1, (7, 2))
    h = rng.uniform(-1, 1, 7)
    w = rng.uniform(-2, 2, (50, 2))
    env = power_envelope(w, xy, h)
    brute = np.array([min(((z - v) ** 2).sum() + hh for v, hh in zip(xy, h)) for z in w])
    assert np.allclose(env, brute)


def test_regions():
    d = Disk(0.0, 0.0, 2.0)
    assert d.area == pytest.approx(4 * math.pi)
    b = Box(0.0, 0.0, 2.0, 3.0)
    assert b.area == 6.0
    pts = b.uniform(np.random.default_rng(0), 200)
    assert b.contains(pts).all()
    assert b.expand(1.0) == Box(-1.0, -1.0, 3.0, 4.0)
    with pytest.raises(ValueError):
        Box(1.0, 0.0, 0.0, 1.0)
