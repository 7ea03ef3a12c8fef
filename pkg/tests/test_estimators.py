import math
from fractions import Fraction

import pytest

from laguerre_limits.densities import Beta, Gaussian, Homogeneous, beta_to_pv_family, constant_family, marked_family
from laguerre_limits.estimators import (
    ExperimentPlan,
    convergence_suite,
    estimate_capacity,
    estimate_coincidence,
    estimate_envelope,
    estimate_intensities,
    fixture_intensities,
    mixture_intensity,
    mixture_typical_cell,
    typical_cell,
    wilson,
    z_test,
)
from laguerre_limits.geometry import Box, Disk
from laguerre_limits.tessellation import lattice_fixture

UNIT = Box(0.0, 0.0, 1.0, 1.0)


def test_wilson_interval():
    lo, hi = wilson(50, 100)
    assert lo < 0.5 < hi
    assert wilson(0, 10)[0] == 0.0 and wilson(10, 10)[1] == 1.0
    assert wilson(0, 0) == (0.0, 1.0)


def test_z_test():
    res = z_test(1.0, 0.1, 1.0, 0.1)
    assert res["z"] == 0 and res["p_value"] == pytest.approx(1.0)
    assert z_test(1.0, 0.0, 2.0, 0.5)["z"] == pytest.approx(-2.0)


def test_plan_validation():
    with pytest.raises(ValueError):
        ExperimentPlan(beta_to_pv_family(), "C1_dual")
    with pytest.raises(ValueError):
        ExperimentPlan(constant_family(Beta(0.5)), "C2_dual")
    with pytest.raises(ValueError):
        ExperimentPlan(constant_family(Beta(0.5)), "bogus")
    plan = ExperimentPlan(constant_family(Beta(0.5)), "C1_dual", R=1.0, n_grid=(1,), r=3.0)
    assert plan.radii() == {1: 3.0}
    assert plan.level(3.0, Beta(0.5)) == 0.0
    assert ExperimentPlan(constant_family(Gaussian()), "C1_dual", R=1.0).level(2.0) == -18.0


def test_two_tilings_fixture_values():
    for variant in (1, 2):
        gd, g0 = fixture_intensities(lattice_fixture("two_tilings", variant=variant), UNIT)
        assert gd == 16 and g0 == 16
    a = typical_cell(lattice_fixture("two_tilings", variant=1), UNIT).multiset()
    b = typical_cell(lattice_fixture("two_tilings", variant=2), UNIT).multiset()
    assert a == b and sum(a.values()) == 16


def test_mixture_intensity_formula():
    for n in (1, 2, 3, 4):
        assert mixture_intensity(n) == 1 - Fraction(1, 2 ** n) + 2 ** n
    w = mixture_typical_cell(2)
    assert w["fine"] + w["unit"] == 1


def test_fixture_intensity_of_fine_lattice():
    gd, g0 = fixture_intensities(lattice_fixture("shifted_lattice", 2, shift=(Fraction(1, 12), 0)), UNIT)
    assert gd == 16 and g0 == 16


def test_poisson_voronoi_intensities():
    est = estimate_intensities(Homogeneous(1.0), Box(0, 0, 6, 6), replicates=60, seed=3)
    assert est.certified == 60
    assert abs(est.gamma_d_hat - 1.0) <= 4 * est.se_d
    # planar normal tessellations: two vertices per cell on average
    assert abs(est.gamma_0_hat - 2.0) <= 4 * est.se
    assert est.row()["se"] == est.se


def test_beta_vertex_intensity_matches_cell_relation():
    est = estimate_intensities(Beta(0.5), Box(0, 0, 4, 4), replicates=40, seed=5)
    assert est.certified >= 39
    # extreme generators and lexmin centres both count cells
    assert abs(est.gamma_0_dual_hat - est.gamma_d_hat) <= 4 * math.hypot(est.se_dual, est.se_d)
    assert abs(est.gamma_0_hat - 2 * est.gamma_d_hat) <= 4 * math.hypot(est.se, 2 * est.se_d)


def test_capacity():
    fx = lattice_fixture("shifted_lattice", 0)
    cap = estimate_capacity(fx, [Disk(0.5, 0.5, 0.1), Disk(1.0, 0.5, 0.0)], Box(-2, -2, 2, 2))
    assert cap.hits == [0, 1]
    W = Box(0, 0, 4, 4)
    est = estimate_capacity(Homogeneous(1.0), [Disk(2, 2, 0.001), Disk(2, 2, 1.5)], W, replicates=30, seed=1)
    assert est.T_hat[0] < 0.2 and est.T_hat[1] == 1.0


def test_constant_family_always_coincides():
    plan = ExperimentPlan(constant_family(Beta(0.5)), "C1_dual", R=1.0, n_grid=(1, 2), replicates=6, seed=4)
    res = estimate_coincidence(plan)
    assert [r.p_hat for r in res.rows] == [1.0, 1.0]
    assert all(r.cert_rate == 1.0 for r in res.rows)


def test_coincidence_workers_agree():
    plan = ExperimentPlan(beta_to_pv_family(), "C2_dual", R=2.0, n_grid=(9, 99), replicates=4, seed=2)
    a = estimate_coincidence(plan, workers=1)
    b = estimate_coincidence(plan, workers=2)
    assert a.rows == b.rows


def test_envelope_rows():
    plan = ExperimentPlan(marked_family(), "C2_laguerre_envelope", R=2.0, n_grid=(100,), replicates=3, seed=1)
    res = estimate_envelope(plan, [0.2, 0.05])
    assert [r.eps for r in res.rows] == [0.05, 0.2]
    assert res.rows[0].exceed_freq >= res.rows[1].exceed_freq
    with pytest.raises(ValueError):
        estimate_envelope(ExperimentPlan(marked_family(), "C2_dual"), [0.1])


def test_suite_unknown_scenario():
    with pytest.raises(KeyError):
        convergence_suite("nope")


def test_suite_report_files(tmp_path):
    rep = convergence_suite("constant", replicates=3, intensity_replicates=3, seed=1, n_grid=(1,), window=3.0)
    paths = rep.write(str(tmp_path))
    assert [p.split("/")[-1] for p in paths] == ["coincidence.csv", "envelope.csv", "intensities.csv", "report.json"]
    assert open(paths[0]).read().splitlines()[0] == "scenario,n,r_n,R,replicates,p_hat,ci_lo,ci_hi,cert_rate"
    with pytest.raises(FileExistsError):
        rep.write(str(tmp_path))
    rep.write(str(tmp_path), force=True)
