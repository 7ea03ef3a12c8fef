import math

import numpy as np
import pytest

from laguerre_limits.densities import (
    Beta,
    BetaPrime,
    Custom,
    Gaussian,
    Homogeneous,
    Marked,
    Scaled,
    ShiftedBeta,
    ShiftedBetaPrime,
    Uniform,
    beta_index,
    beta_to_pv_family,
    check_C1,
    check_C2,
    constant_family,
    density_from_spec,
    frac_integral,
    frac_integral_quad,
    gamma_d,
    gns_density,
    gns_radial_cdf,
    gns_sample,
    is_admissible,
    kappa,
    l1_distance,
    marked_family,
    rescaled_beta_family,
    semigroup_check,
)
from laguerre_limits.errors import InvalidDensity

from oracles import frac_quadrature


def test_constants():
    assert kappa(2) == pytest.approx(math.pi)
    assert gamma_d(2) == pytest.approx(1 / math.pi ** 2)
    assert gamma_d(2) == pytest.approx(0.101321, abs=1e-6)


def test_pdf_examples():
    # c_{3,0} = Gamma(3) / pi^2 = (beta + 2)(beta + 1) / pi^2 at beta = 0
    assert Beta(0.0).pdf(1.0) == pytest.approx(2 / math.pi ** 2)
    assert Beta(0.0).pdf(1.0) == pytest.approx(0.202642, abs=1e-6)
    assert Gaussian().pdf(0.0) == pytest.approx((2 * math.pi) ** -2)
    assert Gaussian().pdf(0.0) == pytest.approx(0.0253303, abs=1e-7)
    assert Beta(0.5).pdf(-1.0) == 0.0


def test_beta_constant_recurrence():
    for b in (-0.5, 0.0, 0.5, 2.0):
        assert Beta(b).pdf(1.0) == pytest.approx((b + 2) * (b + 1) / math.pi ** 2)


def test_invalid_parameters():
    with pytest.raises(InvalidDensity):
        Beta(-1.5)
    with pytest.raises(InvalidDensity):
        BetaPrime(2.0)
    with pytest.raises(InvalidDensity):
        density_from_spec({"density": "beta", "beta": "-1.5"})
    with pytest.raises(InvalidDensity):
        density_from_spec({"density": "nope"})


def test_frac_integral_examples():
    assert frac_integral(Beta(0.0), 1, 1.0) == pytest.approx(2 / math.pi ** 2)
    assert frac_integral(Gaussian(), 1, 0.0) == pytest.approx(2 * (2 * math.pi) ** -2)
    assert frac_integral(Beta(0.5), 2.0, -1.0) == 0.0


CATALOG = [
    Beta(0.0),
    Beta(0.5),
    Beta(-0.9),
    BetaPrime(3.0),
    Gaussian(),
    ShiftedBeta(4.0),
    ShiftedBetaPrime(6.0),
    Uniform(0.0, 1.0),
    Marked(1.0, Uniform(0.0, 1.0), 10.0),
    Scaled(Beta(0.5), 4.0),
    Custom((0.0, 1.0, 2.5, 3.0), (0.2, 1.0, 0.3, 0.5), 0.0, 5.0),
]


@pytest.mark.parametrize("f", CATALOG, ids=lambda f: f.label())
@pytest.mark.parametrize("alpha", [1.0, 2.0, 3.0])
def test_frac_integral_against_oracle(f, alpha):
    for x in (-2.5, -0.3, 0.2, 0.7, 1.9):
        if x >= f.hi:
            continue
        got = frac_integral(f, alpha, x)
        if isinstance(f, BetaPrime) and alpha >= f.beta:
            # (-t)^(-beta) (x - t)^(alpha - 1) is not integrable at -inf
            assert got == math.inf
            continue
        lo = f.lo if math.isfinite(f.lo) else -np.inf
        want = frac_quadrature(f.pdf, lo, alpha, x)
        assert got == pytest.approx(want, rel=1e-8, abs=1e-300)


def test_mass_is_first_order_integral():
    for f in CATALOG:
        for x in (-0.5, 0.5, 1.5):
            if x < f.hi:
                assert float(f.mass(x)) == pytest.approx(frac_integral_quad(f, 1.0, x), rel=1e-8, abs=1e-14)


def test_semigroup_example():
    assert semigroup_check(Beta(0.5), 1.0, 1.0, [0.5, 1.0, 2.0]) <= 1e-6


def test_quantiles_invert_mass():
    u = np.linspace(0.01, 0.99, 9)
    for f in (Beta(0.5), Gaussian(), BetaPrime(3.0), ShiftedBeta(4.0)):
        a, b = -3.0, min(2.0, f.hi)
        h = f.quantiles(a, b, u)
        ma, mb = float(f.mass(max(a, f.lo))), float(f.mass(b))
        assert np.allclose(f.mass(h), ma + u * (mb - ma), rtol=1e-9, atol=1e-12)


def test_admissibility():
    assert is_admissible(Beta(0.5))
    assert is_admissible(BetaPrime(3.0))
    grid = np.linspace(-30.0, 0.0, 3001)
    f = Custom(tuple(grid), tuple(np.exp(grid)), -math.inf, 0.0)
    res = is_admissible(f)
    assert not res and res.reason == "growth"


def test_check_C1_rescaled_beta():
    fam = rescaled_beta_family()
    rep = check_C1(fam, [4, 16, 64], [0.0, 1.0])
    for x in (0.0, 1.0):
        errs = [rep.l1[(n, x)] for n in (4, 16, 64)]
        assert errs[0] > errs[1] > errs[2]
    bound = ((2 / 2 + 2) / math.pi) ** (2 / 2 + 1) * math.gamma(2 / 2)
    assert rep.moment_bound == pytest.approx(bound)
    assert max(rep.tail_moments.values()) <= bound
    assert not rep.violation


def test_check_C1_constant_family():
    rep = check_C1(constant_family(Gaussian()), [1, 2], [0.0, 2.0])
    assert all(v == 0 for v in rep.l1.values())


def test_check_C2_beta_family():
    fam = beta_to_pv_family()
    rep = check_C2(fam, [1, 9, 99], [1.0, 2.0])
    for n in (1, 9, 99):
        b = -1 + 1 / (n + 1)
        for x in (1.0, 2.0):
            assert rep.values[(n, x)] == pytest.approx((b + 2) / math.pi ** 2 * x ** (b + 1))
    assert rep.deviations[(99, 1.0)] < rep.deviations[(9, 1.0)] < rep.deviations[(1, 1.0)]
    assert [beta_index(b) for b in (-0.5, -0.9, -0.99)] == [1, 9, 99]


def test_check_C2_marked_family():
    rep = check_C2(marked_family(1.0), [1, 10], [0.05, 0.5])
    # gamma * int_0^{n x} q with q uniform on [0, 1]
    assert rep.values[(1, 0.05)] == pytest.approx(0.05)
    assert rep.values[(10, 0.05)] == pytest.approx(0.5)
    assert rep.values[(10, 0.5)] == pytest.approx(1.0)


def test_l1_distance_identical_is_zero():
    assert l1_distance(Beta(0.5), Beta(0.5), 0.0, 5.0) == pytest.approx(0.0, abs=1e-14)


def test_gns_normalization_and_moment():
    f = Beta(0.5)
    # integrate the density over the unit disk in polar coordinates
    r = np.linspace(0.0, 1.0, 20001)
    vals = gns_density(f, 1.0, np.column_stack([r, np.zeros_like(r)]))
    total = np.trapezoid(2 * math.pi * r * vals, r)
    assert total == pytest.approx(1.0, abs=1e-6)
    # Beta(0): E|Y|^2 = int_0^1 u d(u) = 1/2 since |Y|^2 is uniform
    f0 = Beta(0.0)
    u = np.linspace(0, 1, 11)
    assert np.allclose(gns_radial_cdf(f0, 1.0, u), u)
    Y = gns_sample(f0, 1.0, np.random.default_rng(1), 200000)
    assert float((Y ** 2).sum(1).mean()) == pytest.approx(0.5, abs=0.005)


def test_gns_requires_nonnegative_support():
    with pytest.raises(InvalidDensity):
        gns_density(Gaussian(), 1.0, [[0.0, 0.0]])


def test_homogeneous_masses():
    g = Homogeneous(2.0)
    assert g.mass_between(-1.0, 1.0) == 2.0
    assert g.mass_between(0.5, 1.0) == 0.0
