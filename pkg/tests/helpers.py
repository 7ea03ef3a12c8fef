"""Seeded random configurations shared by the unit and acceptance tests."""

import numpy as np

from laguerre_limits.densities import Beta, Gaussian, Uniform
from laguerre_limits.sampling import PointConfiguration

KINDS = ("beta0", "beta05", "gaussian", "marked")


def random_configuration(seed: int, kind: str, n: int) -> PointConfiguration:
    """``n`` uniform sites in ``[0, 4]^2`` with i.i.d. heights of the given kind."""
    rng = np.random.default_rng([seed, KINDS.index(kind)])
    xy = rng.uniform(0.0, 4.0, (n, 2))
    u = rng.random(n)
    if kind == "beta0":
        h = Beta(0.0).quantiles(0.0, 4.0, u)
    elif kind == "beta05":
        h = Beta(0.5).quantiles(0.0, 4.0, u)
    elif kind == "gaussian":
        h = Gaussian().quantiles(-3.0, 1.0, u)
    else:
        h = Uniform(0.0, 1.0).quantiles(0.0, 1.0, u) / 4.0
    return PointConfiguration(xy, np.asarray(h, float))


def cases(count: int):
    """``count`` (seed, kind, n) triples cycling over the kinds with n in 3..40."""
    rng = np.random.default_rng(2024)
    return [(s, KINDS[s % len(KINDS)], int(rng.integers(3, 41))) for s in range(count)]
