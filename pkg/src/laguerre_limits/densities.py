"""Height densities, Riemann-Liouville fractional integrals and condition checks.

A height density ``f`` on an interval ``E`` defines the intensity measure
``dv x f(h) dh`` of a weighted Poisson process.  Every density exposes its
cumulative mass ``M(x) = (I^1 f)(x)`` in closed form together with the inverse
of ``M``; samplers use these for inverse-CDF height draws.  Fractional
integrals of other orders use closed forms where known and adaptive
Gauss-Kronrod quadrature otherwise.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize, special

from .errors import DivergentIntegral, InvalidDensity, ZeroMass

INF = math.inf
QUAD_RTOL = 1e-11
INVERSION_TOL = 1e-12


def kappa(d: float) -> float:
    """Volume of the unit ball in dimension ``d``."""
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def gamma_d(d: float) -> float:
    """Limit intensity ``Gamma(d/2 + 1) / pi^(d/2 + 1)`` of the beta-to-Voronoi limit."""
    return math.gamma(d / 2 + 1) / math.pi ** (d / 2 + 1)


def c_beta(d: float, beta: float) -> float:
    return math.exp(
        special.gammaln(d / 2 + beta + 2) - (d / 2 + 1) * math.log(math.pi) - special.gammaln(beta + 1)
    )


def c_betaprime(d: float, beta: float) -> float:
    return math.exp(
        special.gammaln(beta) - (d / 2 + 1) * math.log(math.pi) - special.gammaln(beta - d / 2 - 1)
    )


def _arr(x):
    return np.asarray(x, dtype=float)


def _ret(x, out):
    return float(out) if np.ndim(x) == 0 else out


class HeightDensity:
    """Base class.  Subclasses set ``lo``/``hi`` and implement the closed forms."""

    kind = "abstract"
    d: int = 2
    lo: float = -INF
    hi: float = INF

    # -- required by subclasses -------------------------------------------
    def pdf(self, h):
        raise NotImplementedError

    def mass(self, x):
        """Cumulative mass ``(I^1 f)(x) = int_{-inf}^x f``; ``inf`` if divergent."""
        raise NotImplementedError

    def closed_frac(self, alpha: float, x: float) -> Optional[float]:
        return None

    def params(self) -> Dict[str, object]:
        return {}

    # -- shared machinery ---------------------------------------------------
    @property
    def support(self) -> Tuple[float, float]:
        return (self.lo, self.hi)

    def breakpoints(self) -> List[float]:
        return [p for p in (self.lo, self.hi) if math.isfinite(p)]

    def describe(self) -> Dict[str, object]:
        out = {"kind": self.kind, "d": self.d}
        out.update(self.params())
        return out

    def label(self) -> str:
        ps = ",".join(f"{k}={v}" for k, v in self.params().items() if not isinstance(v, dict))
        return f"{self.kind}({ps})" if ps else self.kind

    def mass_between(self, a: float, b: float) -> float:
        """Mass of the height interval ``[a, b]``."""
        if not b > a:
            return 0.0
        a = max(a, self.lo)
        b = min(b, self.hi)
        if not b > a:
            return 0.0
        mb = self.mass(b)
        ma = self.mass(a) if a > -INF else 0.0
        return float(mb - ma)

    def mass_inv(self, m):
        """Smallest ``x`` with ``M(x) >= m``, by bracketed bisection on ``M``."""
        m = _arr(m)
        return _ret(m, _bisect_inverse(self.mass, m, self.lo, self.hi))

    def quantiles(self, a: float, b: float, u) -> np.ndarray:
        """Heights with law ``f`` restricted to ``[a, b]`` at uniform levels ``u``."""
        u = _arr(u)
        a = max(a, self.lo)
        b = min(b, self.hi)
        ma = self.mass(a) if a > -INF else 0.0
        mb = self.mass(b)
        h = self.mass_inv(ma + u * (mb - ma))
        return np.clip(h, a, b)


def _bisect_inverse(mass: Callable, m: np.ndarray, lo: float, hi: float) -> np.ndarray:
    m = np.atleast_1d(m).astype(float)
    if m.size == 0:
        return m.copy()
    a = lo if math.isfinite(lo) else None
    b = hi if math.isfinite(hi) else None
    # bracket infinite ends by doubling steps
    if b is None:
        b = (a if a is not None else 0.0) + 1.0
        step = 1.0
        while np.any(mass(np.array([b]))[0] < m.max()):
            step *= 2
            b += step
    if a is None:
        a = b - 1.0
        step = 1.0
        while mass(np.array([a]))[0] > m.min():
            step *= 2
            a -= step
            if step > 1e12:
                break
    left = np.full(m.shape, float(a))
    right = np.full(m.shape, float(b))
    for _ in range(200):
        mid = 0.5 * (left + right)
        below = mass(mid) < m
        left = np.where(below, mid, left)
        right = np.where(below, right, mid)
        if np.all(right - left <= INVERSION_TOL * np.maximum(1.0, np.abs(mid))):
            break
    return 0.5 * (left + right)


# ---------------------------------------------------------------------------
# catalogue


@dataclass(frozen=True)
class Beta(HeightDensity):
    """``c_{d+1,beta} h^beta`` on ``h >= 0``."""

    beta: float
    d: int = 2
    kind = "beta"

    def __post_init__(self):
        if not self.beta > -1:
            raise InvalidDensity(f"Beta requires beta > -1, got {self.beta}")

    lo = 0.0
    hi = INF

    @property
    def const(self) -> float:
        return c_beta(self.d, self.beta)

    def params(self):
        return {"beta": self.beta}

    def pdf(self, h):
        h = _arr(h)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(h > 0, self.const * np.abs(h) ** self.beta, 0.0)
        return _ret(h, out)

    def mass(self, x):
        x = _arr(x)
        out = np.where(x > 0, self.const / (self.beta + 1) * np.maximum(x, 0.0) ** (self.beta + 1), 0.0)
        return _ret(x, out)

    def mass_inv(self, m):
        m = _arr(m)
        out = (np.maximum(m, 0.0) * (self.beta + 1) / self.const) ** (1.0 / (self.beta + 1))
        return _ret(m, out)

    def closed_frac(self, alpha, x):
        if x <= 0:
            return 0.0
        b = self.beta
        return self.const * math.exp(
            special.gammaln(b + 1) - special.gammaln(b + alpha + 1) + (b + alpha) * math.log(x)
        )


@dataclass(frozen=True)
class BetaPrime(HeightDensity):
    """``c'_{d+1,beta} (-h)^(-beta)`` on ``h < 0``."""

    beta: float
    d: int = 2
    kind = "betaprime"
    lo = -INF
    hi = 0.0

    def __post_init__(self):
        if not self.beta > self.d / 2 + 1:
            raise InvalidDensity(f"BetaPrime requires beta > d/2 + 1, got {self.beta}")

    @property
    def const(self) -> float:
        return c_betaprime(self.d, self.beta)

    def params(self):
        return {"beta": self.beta}

    def pdf(self, h):
        h = _arr(h)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(h < 0, self.const * np.abs(h) ** (-self.beta), 0.0)
        return _ret(h, out)

    def mass(self, x):
        x = _arr(x)
        with np.errstate(divide="ignore"):
            out = np.where(
                x < 0, self.const / (self.beta - 1) * np.abs(x) ** (1 - self.beta), INF
            )
        return _ret(x, out)

    def mass_inv(self, m):
        m = _arr(m)
        with np.errstate(divide="ignore"):
            out = -((np.maximum(m, 0.0) * (self.beta - 1) / self.const) ** (1.0 / (1 - self.beta)))
        return _ret(m, out)

    def closed_frac(self, alpha, x):
        if x >= 0:
            return INF
        if alpha >= self.beta:
            return INF
        b = self.beta
        return self.const * math.exp(
            special.gammaln(b - alpha) - special.gammaln(b) + (alpha - b) * math.log(-x)
        )


@dataclass(frozen=True)
class Gaussian(HeightDensity):
    """``(2 pi)^(-d/2-1) e^(h/2)`` on the whole line."""

    d: int = 2
    kind = "gaussian"

    @property
    def const(self) -> float:
        return (2 * math.pi) ** (-self.d / 2 - 1)

    def pdf(self, h):
        h = _arr(h)
        return _ret(h, self.const * np.exp(h / 2))

    def mass(self, x):
        x = _arr(x)
        return _ret(x, 2 * self.const * np.exp(x / 2))

    def mass_inv(self, m):
        m = _arr(m)
        with np.errstate(divide="ignore"):
            return _ret(m, 2 * np.log(m / (2 * self.const)))

    def closed_frac(self, alpha, x):
        return self.const * 2 ** alpha * math.exp(x / 2)


@dataclass(frozen=True)
class ShiftedBeta(HeightDensity):
    """Rescaled beta density ``c (2b)^(-d/2-1) (1 + h/(2b))^b`` on ``h >= -2b``.

    ``sqrt(2b)`` times the beta tessellation has the law of the tessellation of
    this density; it converges to :class:`Gaussian` as ``b`` grows.
    """

    beta: float
    d: int = 2
    kind = "shifted_beta"

    def __post_init__(self):
        if not self.beta > 0:
            raise InvalidDensity(f"ShiftedBeta requires beta > 0, got {self.beta}")

    @property
    def lo(self):
        return -2.0 * self.beta

    hi = INF

    @property
    def const(self) -> float:
        b, d = self.beta, self.d
        return math.exp(
            special.gammaln(d / 2 + b + 2)
            - special.gammaln(b + 1)
            - (d / 2 + 1) * math.log(2 * b * math.pi)
        )

    def params(self):
        return {"beta": self.beta}

    def pdf(self, h):
        h = _arr(h)
        base = np.maximum(1 + h / (2 * self.beta), 0.0)
        return _ret(h, np.where(h >= self.lo, self.const * base ** self.beta, 0.0))

    def mass(self, x):
        x = _arr(x)
        b = self.beta
        base = np.maximum(1 + x / (2 * b), 0.0)
        return _ret(x, self.const * 2 * b / (b + 1) * base ** (b + 1))

    def mass_inv(self, m):
        m = _arr(m)
        b = self.beta
        base = (np.maximum(m, 0.0) * (b + 1) / (2 * b * self.const)) ** (1 / (b + 1))
        return _ret(m, 2 * b * (base - 1))

    def closed_frac(self, alpha, x):
        b = self.beta
        if x <= -2 * b:
            return 0.0
        # substitute u = h + 2b: a beta density of order b in u
        return self.const * math.exp(
            -b * math.log(2 * b)
            + special.gammaln(b + 1)
            - special.gammaln(b + alpha + 1)
            + (b + alpha) * math.log(x + 2 * b)
        )


@dataclass(frozen=True)
class ShiftedBetaPrime(HeightDensity):
    """Rescaled beta-prime density ``c' (2b)^(-d/2-1) (1 - h/(2b))^(-b)`` on ``h < 2b``."""

    beta: float
    d: int = 2
    kind = "shifted_betaprime"
    lo = -INF

    def __post_init__(self):
        if not self.beta > self.d / 2 + 1:
            raise InvalidDensity(f"ShiftedBetaPrime requires beta > d/2 + 1, got {self.beta}")

    @property
    def hi(self):
        return 2.0 * self.beta

    @property
    def const(self) -> float:
        b, d = self.beta, self.d
        return math.exp(
            special.gammaln(b)
            - special.gammaln(b - d / 2 - 1)
            - (d / 2 + 1) * math.log(2 * b * math.pi)
        )

    def params(self):
        return {"beta": self.beta}

    def pdf(self, h):
        h = _arr(h)
        b = self.beta
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(h < 2 * b, self.const * np.abs(1 - h / (2 * b)) ** (-b), 0.0)
        return _ret(h, out)

    def mass(self, x):
        x = _arr(x)
        b = self.beta
        with np.errstate(divide="ignore"):
            out = np.where(
                x < 2 * b, self.const * 2 * b / (b - 1) * np.abs(1 - x / (2 * b)) ** (1 - b), INF
            )
        return _ret(x, out)

    def mass_inv(self, m):
        m = _arr(m)
        b = self.beta
        base = (np.maximum(m, 0.0) * (b - 1) / (2 * b * self.const)) ** (1 / (1 - b))
        return _ret(m, 2 * b * (1 - base))

    def closed_frac(self, alpha, x):
        b = self.beta
        if x >= 2 * b or alpha >= b:
            return INF
        return self.const * math.exp(
            b * math.log(2 * b)
            + special.gammaln(b - alpha)
            - special.gammaln(b)
            + (alpha - b) * math.log(2 * b - x)
        )


@dataclass(frozen=True)
class Uniform(HeightDensity):
    """Probability density of the uniform law on ``[a, b]`` (a mark law ``q``)."""

    a: float = 0.0
    b: float = 1.0
    d: int = 2
    kind = "uniform"

    def __post_init__(self):
        if not self.b > self.a:
            raise InvalidDensity("Uniform requires b > a")

    @property
    def lo(self):
        return self.a

    @property
    def hi(self):
        return self.b

    def params(self):
        return {"a": self.a, "b": self.b}

    def pdf(self, h):
        h = _arr(h)
        return _ret(h, np.where((h >= self.a) & (h <= self.b), 1.0 / (self.b - self.a), 0.0))

    def mass(self, x):
        x = _arr(x)
        return _ret(x, np.clip((x - self.a) / (self.b - self.a), 0.0, 1.0))

    def mass_inv(self, m):
        m = _arr(m)
        return _ret(m, self.a + np.clip(m, 0.0, 1.0) * (self.b - self.a))

    def closed_frac(self, alpha, x):
        k = 1.0 / ((self.b - self.a) * math.gamma(alpha + 1))
        return k * (max(x - self.a, 0.0) ** alpha - max(x - self.b, 0.0) ** alpha)


@dataclass(frozen=True)
class Marked(HeightDensity):
    """``gamma n q(n h)``: intensity-``gamma`` sites with marks ``Q_n = q(n .)`` scaled.

    ``q`` must be a probability density supported in ``[0, inf)``.
    """

    gamma: float
    q: HeightDensity
    n: float
    d: int = 2
    kind = "marked"

    def __post_init__(self):
        if not (self.gamma > 0 and self.n > 0):
            raise InvalidDensity("Marked requires gamma > 0 and n > 0")
        if self.q.lo < 0:
            raise InvalidDensity("Marked requires q supported in [0, inf)")
        total = self.q.mass(self.q.hi if math.isfinite(self.q.hi) else 1e300)
        if not abs(total - 1.0) < 1e-9:
            raise InvalidDensity(f"mark law q must have unit mass, got {total}")

    @property
    def lo(self):
        return self.q.lo / self.n

    @property
    def hi(self):
        return self.q.hi / self.n

    def params(self):
        return {"gamma": self.gamma, "n": self.n, "q": self.q.describe()}

    def mark_law(self) -> HeightDensity:
        """The probability law ``Q_n`` of a single mark."""
        return Scaled(self.q, lam=self.n, shift=0.0, power=1.0)

    def pdf(self, h):
        h = _arr(h)
        return _ret(h, self.gamma * self.n * _arr(self.q.pdf(self.n * h)))

    def mass(self, x):
        x = _arr(x)
        return _ret(x, self.gamma * _arr(self.q.mass(self.n * x)))

    def mass_inv(self, m):
        m = _arr(m)
        return _ret(m, _arr(self.q.mass_inv(m / self.gamma)) / self.n)

    def closed_frac(self, alpha, x):
        if isinstance(self.q, Uniform):
            inner = self.q.closed_frac(alpha, self.n * x)
            return self.gamma * self.n ** (1 - alpha) * inner
        return None


@dataclass(frozen=True)
class Homogeneous(HeightDensity):
    """Point mass ``gamma delta_0``: the unweighted (Voronoi) limit."""

    gamma: float
    d: int = 2
    kind = "homogeneous"
    lo = 0.0
    hi = 0.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise InvalidDensity("Homogeneous requires gamma > 0")

    def params(self):
        return {"gamma": self.gamma}

    def pdf(self, h):
        h = _arr(h)
        return _ret(h, np.zeros_like(h))

    def mass(self, x):
        x = _arr(x)
        return _ret(x, np.where(x >= 0, self.gamma, 0.0))

    def mass_between(self, a, b):
        return self.gamma if a <= 0 <= b else 0.0

    def mass_inv(self, m):
        m = _arr(m)
        return _ret(m, np.zeros_like(m))

    def quantiles(self, a, b, u):
        return np.zeros_like(_arr(u))

    def closed_frac(self, alpha, x):
        if x <= 0:
            return 0.0
        return self.gamma * x ** (alpha - 1) / math.gamma(alpha)


@dataclass(frozen=True, eq=False)
class Custom(HeightDensity):
    """Tabulated density, linearly interpolated on ``grid`` and zero off the table.

    ``support`` records the declared interval ``E`` (endpoints may be infinite);
    the table must lie inside it.
    """

    grid: Tuple[float, ...]
    values: Tuple[float, ...]
    support_lo: float = -INF
    support_hi: float = INF
    d: int = 2
    kind = "custom"
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.size < 2 or g.shape != v.shape:
            raise InvalidDensity("custom table needs matching grid/value columns (>= 2 rows)")
        if np.any(np.diff(g) <= 0):
            raise InvalidDensity("custom grid must be strictly increasing")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise InvalidDensity("custom values must be finite and nonnegative")
        if g[0] < self.support_lo or g[-1] > self.support_hi:
            raise InvalidDensity("custom table extends outside its declared support")
        cum = np.concatenate(([0.0], np.cumsum(np.diff(g) * (v[1:] + v[:-1]) / 2)))
        object.__setattr__(self, "_cum", cum)

    @property
    def lo(self):
        return self.support_lo

    @property
    def hi(self):
        return self.support_hi

    def params(self):
        return {"support": [self.support_lo, self.support_hi], "rows": len(self.grid)}

    def breakpoints(self):
        return [self.grid[0], self.grid[-1]]

    def pdf(self, h):
        h = _arr(h)
        g = np.asarray(self.grid)
        out = np.interp(h, g, np.asarray(self.values), left=0.0, right=0.0)
        return _ret(h, out)

    def mass(self, x):
        x = _arr(x)
        g = np.asarray(self.grid)
        v = np.asarray(self.values)
        xc = np.clip(x, g[0], g[-1])
        i = np.clip(np.searchsorted(g, xc, side="right") - 1, 0, g.size - 2)
        dx = xc - g[i]
        slope = (v[i + 1] - v[i]) / (g[i + 1] - g[i])
        out = self._cum[i] + v[i] * dx + 0.5 * slope * dx * dx
        return _ret(x, out)

    def mass_inv(self, m):
        m = _arr(m)
        g = np.asarray(self.grid)
        v = np.asarray(self.values)
        mc = np.clip(m, 0.0, self._cum[-1])
        i = np.clip(np.searchsorted(self._cum, mc, side="right") - 1, 0, g.size - 2)
        rem = mc - self._cum[i]
        slope = (v[i + 1] - v[i]) / (g[i + 1] - g[i])
        # solve v_i t + slope t^2 / 2 = rem for t in [0, width]
        with np.errstate(divide="ignore", invalid="ignore"):
            disc = np.sqrt(np.maximum(v[i] ** 2 + 2 * slope * rem, 0.0))
            t_quad = 2 * rem / (v[i] + disc)
            t_lin = np.where(v[i] > 0, rem / v[i], 0.0)
        t = np.where(np.abs(slope) > 0, t_quad, t_lin)
        t = np.nan_to_num(t, nan=0.0)
        return _ret(m, g[i] + np.clip(t, 0.0, g[i + 1] - g[i]))

    def closed_frac(self, alpha, x):
        # exact on each linear piece: with u = x - t, f = A - s u
        g = np.asarray(self.grid)
        v = np.asarray(self.values)
        keep = g[:-1] < x
        if not keep.any():
            return 0.0
        g0, g1, v0 = g[:-1][keep], g[1:][keep], v[:-1][keep]
        s = ((v[1:] - v[:-1]) / (g[1:] - g[:-1]))[keep]
        u0 = x - g0
        u1 = np.maximum(x - g1, 0.0)
        A = v0 + s * u0
        total = A * (u0 ** alpha - u1 ** alpha) / alpha - s * (u0 ** (alpha + 1) - u1 ** (alpha + 1)) / (alpha + 1)
        return float(math.fsum(total)) / math.gamma(alpha)


@dataclass(frozen=True)
class Scaled(HeightDensity):
    """``lam^power f(lam h + shift)``; ``power = d/2 + 1`` gives the linear-transformation law.

    With ``power = d/2 + 1`` the tessellation of this density, scaled by
    ``sqrt(lam)``, has the law of the tessellation of ``f`` translated in height.
    """

    base: HeightDensity
    lam: float
    shift: float = 0.0
    power: Optional[float] = None
    kind = "scaled"

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidDensity("Scaled requires lam > 0")

    @property
    def d(self):
        return self.base.d

    @property
    def exponent(self) -> float:
        return self.d / 2 + 1 if self.power is None else self.power

    @property
    def lo(self):
        return (self.base.lo - self.shift) / self.lam

    @property
    def hi(self):
        return (self.base.hi - self.shift) / self.lam

    def params(self):
        return {"lam": self.lam, "shift": self.shift, "power": self.exponent, "base": self.base.describe()}

    def breakpoints(self):
        return [(p - self.shift) / self.lam for p in self.base.breakpoints()]

    def pdf(self, h):
        h = _arr(h)
        return _ret(h, self.lam ** self.exponent * _arr(self.base.pdf(self.lam * h + self.shift)))

    def mass(self, x):
        x = _arr(x)
        return _ret(x, self.lam ** (self.exponent - 1) * _arr(self.base.mass(self.lam * x + self.shift)))

    def mass_inv(self, m):
        m = _arr(m)
        inner = _arr(self.base.mass_inv(m / self.lam ** (self.exponent - 1)))
        return _ret(m, (inner - self.shift) / self.lam)

    def closed_frac(self, alpha, x):
        inner = self.base.closed_frac(alpha, self.lam * x + self.shift)
        if inner is None:
            return None
        return self.lam ** (self.exponent - alpha) * inner


# ---------------------------------------------------------------------------
# pieces used by the maximal coupling


def crossings(f: HeightDensity, g: HeightDensity, a: float, b: float, grid: int = 2049) -> List[float]:
    """Points in ``(a, b)`` where ``f - g`` changes sign (grid scan plus Brent refinement)."""
    xs = np.linspace(a, b, grid)
    diff = _arr(f.pdf(xs)) - _arr(g.pdf(xs))
    sgn = np.sign(diff)
    out = []
    for i in range(grid - 1):
        if sgn[i] == 0:
            if i > 0:
                out.append(float(xs[i]))
            continue
        if sgn[i] * sgn[i + 1] < 0:
            fn = lambda t: float(f.pdf(t) - g.pdf(t))
            out.append(optimize.brentq(fn, xs[i], xs[i + 1], xtol=1e-14, rtol=1e-15))
    return out


@dataclass(frozen=True, eq=False)
class Piecewise(HeightDensity):
    """Density equal to ``f - g`` (``g`` may be ``None`` for zero) on listed pieces.

    Pieces are ``(a, b, f, g)`` with ``f >= g`` on ``[a, b]``; the density is 0
    elsewhere.  Used for ``min(f, f_n)`` and the residuals ``(f - f_n)_+``.
    """

    pieces: Tuple[Tuple[float, float, HeightDensity, Optional[HeightDensity]], ...]
    d: int = 2
    kind = "piecewise"
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        masses = []
        for a, b, f, g in self.pieces:
            m = f.mass_between(a, b) - (g.mass_between(a, b) if g is not None else 0.0)
            masses.append(max(m, 0.0))
        object.__setattr__(self, "_cum", np.concatenate(([0.0], np.cumsum(masses))))

    @property
    def lo(self):
        return self.pieces[0][0] if self.pieces else 0.0

    @property
    def hi(self):
        return self.pieces[-1][1] if self.pieces else 0.0

    @property
    def total(self) -> float:
        return float(self._cum[-1])

    def pdf(self, h):
        h = _arr(h)
        out = np.zeros_like(h)
        for a, b, f, g in self.pieces:
            sel = (h >= a) & (h <= b)
            val = _arr(f.pdf(h)) - (_arr(g.pdf(h)) if g is not None else 0.0)
            out = np.where(sel, np.maximum(val, 0.0), out)
        return _ret(h, out)

    def mass(self, x):
        x = _arr(x)
        out = np.zeros_like(x)
        for k, (a, b, f, g) in enumerate(self.pieces):
            xc = np.clip(x, a, b)
            part = _piece_mass(f, a, xc) - (_piece_mass(g, a, xc) if g is not None else 0.0)
            out = np.where(x >= a, self._cum[k] + np.maximum(part, 0.0), out)
        return _ret(x, out)

    def mass_inv(self, m):
        m = _arr(m)
        flat = np.atleast_1d(m)
        out = np.empty_like(flat)
        k = np.clip(np.searchsorted(self._cum, flat, side="right") - 1, 0, max(len(self.pieces) - 1, 0))
        for j, (a, b, f, g) in enumerate(self.pieces):
            sel = k == j
            if not np.any(sel):
                continue
            target = flat[sel] - self._cum[j]
            if g is None:
                base = f.mass(a) if a > -INF else 0.0
                out[sel] = np.clip(f.mass_inv(base + target), a, b)
            else:
                fn = lambda x, a=a, f=f, g=g: _piece_mass(f, a, x) - _piece_mass(g, a, x)
                out[sel] = _bisect_inverse(fn, target, a, b)
        return _ret(m, out.reshape(np.shape(m)))


    def sample_heights(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` draws from the normalized density; difference pieces use rejection from ``f``."""
        if n == 0:
            return np.zeros(0)
        w = np.diff(self._cum)
        counts = rng.multinomial(n, w / w.sum())
        out = []
        for (a, b, f, g), m in zip(self.pieces, counts):
            if m == 0:
                continue
            if g is None:
                out.append(f.quantiles(a, b, rng.random(m)))
                continue
            got = []
            need = m
            while need > 0:
                x = f.quantiles(a, b, rng.random(2 * need + 8))
                fx = _arr(f.pdf(x))
                keep = x[rng.random(x.shape[0]) * fx < fx - _arr(g.pdf(x))]
                got.append(keep[:need])
                need -= got[-1].shape[0]
            out.append(np.concatenate(got))
        h = np.concatenate(out)
        return h[rng.permutation(n)]


def _piece_mass(f: HeightDensity, a: float, x):
    base = f.mass(a) if a > -INF else 0.0
    return _arr(f.mass(x)) - base


def split_min_excess(f: HeightDensity, g: HeightDensity, a: float, b: float):
    """Decompose ``f`` and ``g`` on ``[a, b]`` into ``min(f, g)`` and the two excesses.

    Returns ``(common, f_excess, g_excess)`` as :class:`Piecewise` densities.
    """
    lo, hi = max(a, min(f.lo, g.lo)), min(b, max(f.hi, g.hi))
    if not hi > lo or not math.isfinite(lo) or not math.isfinite(hi):
        raise ValueError("coupling height interval must be finite")
    cuts = [lo] + [c for c in crossings(f, g, lo, hi) if lo < c < hi]
    for p in f.breakpoints() + g.breakpoints():
        if lo < p < hi:
            cuts.append(p)
    cuts = sorted(set(cuts)) + [hi]
    common, fx, gx = [], [], []
    for u, v in zip(cuts[:-1], cuts[1:]):
        if not v > u:
            continue
        mid = 0.5 * (u + v)
        fv, gv = float(f.pdf(mid)), float(g.pdf(mid))
        if fv <= gv:
            common.append((u, v, f, None))
            if gv > fv:
                gx.append((u, v, g, f))
        else:
            common.append((u, v, g, None))
            fx.append((u, v, f, g))
    d = f.d
    return Piecewise(tuple(common), d=d), Piecewise(tuple(fx), d=d), Piecewise(tuple(gx), d=d)


# ---------------------------------------------------------------------------
# fractional integrals


def evaluate(f: HeightDensity, h: float) -> float:
    """Density value ``f(h)``; zero off the support."""
    return float(f.pdf(h))


def frac_integral(f: HeightDensity, alpha: float, x: float) -> float:
    """``(I^alpha f)(x) = Gamma(alpha)^-1 int_{-inf}^x f(t) (x - t)^(alpha - 1) dt``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if x <= f.lo:
        return 0.0
    closed = f.closed_frac(alpha, x)
    if closed is not None:
        return float(closed)
    return frac_integral_quad(f, alpha, x)


def _quad(fn, a, b, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        val, err, info = integrate.quad(
            fn, a, b, epsabs=0.0, epsrel=QUAD_RTOL, limit=500, full_output=1, **kw
        )[:3]
    if not math.isfinite(val) or (err > 1e-5 * max(abs(val), 1e-300) and err > 1e-300):
        raise DivergentIntegral(f"quadrature failed on [{a}, {b}] (value {val}, error {err})")
    return val


def frac_integral_quad(f: HeightDensity, alpha: float, x: float) -> float:
    """Quadrature path for the fractional integral (no closed forms used)."""
    if x <= f.lo:
        return 0.0
    top = min(x, f.hi)
    if not math.isfinite(float(f.mass(top))):
        raise DivergentIntegral(f"{f.label()} has infinite mass below {top}")
    kernel_singular = alpha != 1 and top == x
    inner = sorted({p for p in f.breakpoints() if f.lo < p < top})
    edges = [f.lo] + inner + [top]
    if not math.isfinite(edges[0]):
        edges[0] = min(edges[1], top) - 1.0 if len(edges) > 1 else top - 1.0
        head = True
    else:
        head = False
    if kernel_singular and edges[-1] - edges[-2] > 1.0:
        edges.insert(-1, edges[-1] - 1.0)

    integrand = lambda t: float(f.pdf(t)) * (x - t) ** (alpha - 1)
    total = 0.0
    if head:
        total += _quad(integrand, -INF, edges[0])
    for u, v in zip(edges[:-1], edges[1:]):
        if not v > u:
            continue
        if kernel_singular and v == x:
            total += _quad(lambda t: float(f.pdf(t)), u, v, weight="alg", wvar=(0.0, alpha - 1))
        else:
            total += _quad(integrand, u, v)
    return total / math.gamma(alpha)


def semigroup_check(f: HeightDensity, alpha: float, beta: float, xs: Sequence[float]) -> float:
    """Max relative gap between ``I^alpha(I^beta f)`` (outer by quadrature) and ``I^(alpha+beta) f``."""
    worst = 0.0
    for x in xs:
        rhs = frac_integral(f, alpha + beta, x)
        inner = lambda t: frac_integral(f, beta, t)
        if x <= f.lo:
            lhs = 0.0
        else:
            g = _InnerDensity(inner, f.lo, x, f.d)
            lhs = frac_integral_quad(g, alpha, x)
        worst = max(worst, abs(lhs - rhs) / (1 + abs(rhs)))
    return worst


class _InnerDensity(HeightDensity):
    """Adapter exposing ``t -> (I^beta f)(t)`` to the quadrature routine."""

    kind = "inner"

    def __init__(self, fn, lo, hi, d):
        self._fn, self.lo, self.hi, self.d = fn, lo, hi, d

    def pdf(self, h):
        return self._fn(float(h))

    def mass(self, x):
        top = min(float(x), self.hi)
        return _quad(lambda t: self._fn(t), self.lo, top) if top > self.lo else 0.0


# ---------------------------------------------------------------------------
# admissibility and convergence conditions


@dataclass
class Admissibility:
    admissible: bool
    reason: str = ""
    slopes: Tuple[float, float] = (math.nan, math.nan)

    def __bool__(self):
        return self.admissible


def is_admissible(f: HeightDensity, probes: Sequence[float] = (-4.0, -1.0, 0.0, 1.0, 4.0)) -> Admissibility:
    """Numerical admissibility diagnostic (finite ``I^(d/2+1) f`` and growth at a finite top)."""
    if isinstance(f, (Beta, Gaussian, ShiftedBeta, Homogeneous, Marked, Uniform)):
        return Admissibility(True, "support unbounded above")
    if isinstance(f, (BetaPrime, ShiftedBetaPrime)):
        return Admissibility(True, "beta-prime family with beta > d/2 + 1")
    order = f.d / 2 + 1
    for t in probes:
        if t >= f.hi:
            continue
        try:
            v = frac_integral(f, order, t)
        except DivergentIntegral:
            return Admissibility(False, f"I^(d/2+1) f diverges at {t}")
        if not math.isfinite(v):
            return Admissibility(False, f"I^(d/2+1) f infinite at {t}")
    if not math.isfinite(f.hi):
        return Admissibility(True, "support unbounded above")
    ns = np.arange(2, 65)
    vals = np.array([frac_integral(f, order, f.hi - 1.0 / n) for n in ns])
    if np.any(vals <= 0):
        return Admissibility(False, "growth: vanishing integral near the top of the support")
    logn, logv = np.log(ns), np.log(vals)
    overall = float(np.polyfit(logn, logv, 1)[0])
    tail = ns >= 32
    last = float(np.polyfit(logn[tail], logv[tail], 1)[0])
    slopes = (overall, last)
    if last > 1e-3 and last >= 0.5 * overall:
        return Admissibility(True, "power growth near the top of the support", slopes)
    return Admissibility(False, "growth", slopes)


@dataclass
class ConvergenceFamily:
    """A sequence ``n -> f_n`` with its limit (a density or ``Homogeneous(gamma)``)."""

    name: str
    member: Callable[[int], HeightDensity]
    limit: HeightDensity
    x0: Optional[float] = None
    delta: Optional[float] = None
    moment_bound: Optional[float] = None
    index_label: str = "n"

    def __call__(self, n: int) -> HeightDensity:
        return self.member(n)

    @property
    def d(self) -> int:
        return self.limit.d


def rescaled_beta_family(d: int = 2) -> ConvergenceFamily:
    """beta_n = n; limit is the Gaussian density (x0 = 0, delta = 1)."""
    bound = ((d / 2 + 2) / math.pi) ** (d / 2 + 1) * math.gamma(d / 2)
    return ConvergenceFamily(
        "rescaled_beta", lambda n: ShiftedBeta(float(n), d), Gaussian(d), 0.0, 1.0, bound, "beta"
    )


def rescaled_betaprime_family(d: int = 2) -> ConvergenceFamily:
    """beta_n = n + d/2 + 1; limit is the Gaussian density."""
    return ConvergenceFamily(
        "rescaled_betaprime",
        lambda n: ShiftedBetaPrime(float(n) + d / 2 + 1, d),
        Gaussian(d),
        0.0,
        1.0,
        None,
        "beta",
    )


def beta_to_pv_family(d: int = 2) -> ConvergenceFamily:
    """beta_n = -1 + 1/(n + 1), so n = 1, 9, 99 give beta = -0.5, -0.9, -0.99."""
    return ConvergenceFamily(
        "beta_to_pv", lambda n: Beta(-1.0 + 1.0 / (n + 1), d), Homogeneous(gamma_d(d), d), index_label="beta"
    )


def beta_index(beta: float) -> int:
    """Index ``n`` of :func:`beta_to_pv_family` with ``beta_n = beta``."""
    return int(round(1.0 / (beta + 1.0) - 1.0))


def marked_family(gamma: float = 1.0, q: Optional[HeightDensity] = None, d: int = 2) -> ConvergenceFamily:
    q = Uniform(0.0, 1.0, d) if q is None else q
    return ConvergenceFamily("marked_to_pv", lambda n: Marked(gamma, q, float(n), d), Homogeneous(gamma, d))


def constant_family(f: HeightDensity) -> ConvergenceFamily:
    return ConvergenceFamily("constant", lambda n: f, f)


def family_index_value(family: ConvergenceFamily, n: int) -> float:
    """Human-facing parameter of member ``n`` (beta for beta families, else n)."""
    f = family(n)
    return float(getattr(f, "beta", n)) if family.index_label == "beta" else float(n)


def l1_distance(f: HeightDensity, g: HeightDensity, a: float, b: float) -> float:
    """``int_a^b |f - g|`` with splitting at sign changes (finite or infinite ends)."""
    lo = a if math.isfinite(a) else max(min(f.lo, g.lo), a)
    if not math.isfinite(lo):
        # start where both densities are negligible relative to the window
        lo = b - 1.0
        while max(float(f.mass(lo)), float(g.mass(lo))) > 1e-16 and lo > -1e6:
            lo -= max(1.0, abs(lo))
    hi = b if math.isfinite(b) else None
    if hi is None:
        raise ValueError("upper limit must be finite")
    if not hi > lo:
        return 0.0
    common, fx, gx = split_min_excess(f, g, lo, hi)
    tail = abs(float(f.mass(lo)) - float(g.mass(lo))) if not math.isfinite(a) else 0.0
    return fx.total + gx.total + tail


@dataclass
class C1Report:
    n_grid: List[int]
    x_grid: List[float]
    l1: Dict[Tuple[int, float], float]
    tail_moments: Dict[int, float]
    moment_bound: Optional[float]
    violation: bool


def check_C1(family: ConvergenceFamily, n_grid: Sequence[int], x_grid: Sequence[float]) -> C1Report:
    """L1 distances ``int_{-inf}^x |f_n - f|`` and tail moments ``int_{-inf}^{x0} |h|^(d/2+delta) f_n``."""
    f = family.limit
    l1 = {}
    moments = {}
    x0 = 0.0 if family.x0 is None else family.x0
    delta = 1.0 if family.delta is None else family.delta
    p = family.d / 2 + delta
    for n in n_grid:
        fn = family(n)
        for x in x_grid:
            l1[(n, x)] = l1_distance(fn, f, -INF, x)
        lo = fn.lo if math.isfinite(fn.lo) else -INF
        if x0 <= fn.lo:
            moments[n] = 0.0
        else:
            moments[n] = _moment(fn, lo, x0, p)
    vals = [moments[n] for n in n_grid]
    grows = len(vals) >= 3 and all(b > 1.5 * a for a, b in zip(vals, vals[1:]))
    over = family.moment_bound is not None and max(vals) > family.moment_bound
    return C1Report(list(n_grid), list(x_grid), l1, moments, family.moment_bound, grows or over)


def _moment(f: HeightDensity, lo: float, x0: float, p: float) -> float:
    fn = lambda h: abs(h) ** p * float(f.pdf(h))
    pts = sorted({q for q in f.breakpoints() if lo < q < x0})
    edges = [lo] + pts + [x0]
    total = 0.0
    for u, v in zip(edges[:-1], edges[1:]):
        total += _quad(fn, u, v)
    return total


@dataclass
class C2Report:
    gamma: float
    values: Dict[Tuple[int, float], float]
    deviations: Dict[Tuple[int, float], float]


def check_C2(family: ConvergenceFamily, n_grid: Sequence[int], x_grid: Sequence[float]) -> C2Report:
    """Values of ``(I^1 f_n)(x)`` and their deviation from the limit intensity."""
    gamma = family.limit.gamma if isinstance(family.limit, Homogeneous) else math.nan
    vals, devs = {}, {}
    for n in n_grid:
        fn = family(n)
        for x in x_grid:
            v = frac_integral(fn, 1.0, x)
            vals[(n, x)] = v
            devs[(n, x)] = abs(v - gamma)
    return C2Report(gamma, vals, devs)


@dataclass
class TailRow:
    n: int
    x: float
    scaled_mass: float
    top_order: float


def tail_diagnostic(family: ConvergenceFamily, xs: Sequence[Tuple[int, float]]) -> Tuple[List[TailRow], bool]:
    """Rows ``x^(d/2) (I^1 f_n)(-x)`` and ``(I^(d/2+1) f_n)(-x)``; flag if either fails to decrease."""
    rows = []
    d = family.d
    for n, x in xs:
        fn = family(n)
        rows.append(
            TailRow(n, x, x ** (d / 2) * frac_integral(fn, 1.0, -x), frac_integral(fn, d / 2 + 1, -x))
        )
    flag = any(
        b.scaled_mass > a.scaled_mass or b.top_order > a.top_order for a, b in zip(rows, rows[1:])
    )
    return rows, flag


# ---------------------------------------------------------------------------
# the radial law g_{n,s} on the unit ball


def _require_nonnegative_support(f: HeightDensity):
    if f.lo < 0:
        raise InvalidDensity("g_{n,s} requires a density supported in [0, inf)")


def gns_density(f: HeightDensity, s: float, x) -> np.ndarray:
    """``s^d f(s^2 - s^2 |x|^2) / (pi^(d/2) (I^(d/2) f)(s^2))`` on the unit ball."""
    _require_nonnegative_support(f)
    d = f.d
    norm = frac_integral(f, d / 2, s * s)
    if not norm > 0:
        raise ZeroMass("(I^(d/2) f)(s^2) = 0")
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    vals = _arr(f.pdf(s * s * (1 - r2)))
    out = np.where(r2 <= 1, s ** d / (math.pi ** (d / 2) * norm) * vals, 0.0)
    return out


def gns_radial_cdf(f: HeightDensity, s: float, u) -> np.ndarray:
    """``P(|Y|^2 <= u)`` for ``Y ~ g_{n,s}``."""
    _require_nonnegative_support(f)
    u = np.clip(_arr(u), 0.0, 1.0)
    d = f.d
    s2 = s * s
    if d == 2:
        top = float(f.mass(s2))
        if not top > 0:
            raise ZeroMass("(I^1 f)(s^2) = 0")
        return (top - _arr(f.mass(s2 * (1 - u)))) / top
    total = math.gamma(d / 2) * frac_integral(f, d / 2, s2)

    def one(v):
        lo = s2 * (1 - v)
        return _quad(lambda t: float(f.pdf(t)) * (s2 - t) ** (d / 2 - 1), lo, s2) / total

    return np.vectorize(one)(u)


def gns_sample(f: HeightDensity, s: float, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` points from ``g_{n,s}`` by radial inverse-CDF and a uniform direction."""
    _require_nonnegative_support(f)
    d = f.d
    v = rng.random(size)
    if d == 2:
        s2 = s * s
        top = float(f.mass(s2))
        if not top > 0:
            raise ZeroMass("(I^1 f)(s^2) = 0")
        t = _arr(f.mass_inv(top * (1 - v)))
        u = np.clip(1 - t / s2, 0.0, 1.0)
    else:
        u = _bisect_inverse(lambda w: gns_radial_cdf(f, s, w), v, 0.0, 1.0)
    r = np.sqrt(u)
    direction = rng.standard_normal((size, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return direction * r[:, None]


# ---------------------------------------------------------------------------
# specification parsing and custom tables


def load_custom(path: str, d: int = 2) -> Custom:
    """Read a ``# support a b`` header followed by ``h value`` rows."""
    lo, hi = -INF, INF
    grid, vals = [], []
    with open(path) as fh:
        for line in fh:
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                parts = s[1:].split()
                if parts and parts[0] == "support":
                    if len(parts) != 3:
                        raise InvalidDensity("support header needs two endpoints")
                    lo, hi = float(parts[1]), float(parts[2])
                continue
            a, b = s.split()[:2]
            grid.append(float(a))
            vals.append(float(b))
    return Custom(tuple(grid), tuple(vals), lo, hi, d)


def density_from_spec(spec: Dict[str, str], d: int = 2) -> HeightDensity:
    """Build a density from flat config keys (``density = beta``, ``beta = 0.5`` ...)."""
    kind = spec.get("density", "").strip().lower()
    get = lambda k: float(spec[k])
    try:
        if kind == "beta":
            return Beta(get("beta"), d)
        if kind == "betaprime":
            return BetaPrime(get("beta"), d)
        if kind == "gaussian":
            return Gaussian(d)
        if kind == "shifted_beta":
            return ShiftedBeta(get("beta"), d)
        if kind == "shifted_betaprime":
            return ShiftedBetaPrime(get("beta"), d)
        if kind == "marked":
            return Marked(get("gamma"), Uniform(0.0, 1.0, d), get("n"), d)
        if kind == "homogeneous":
            return Homogeneous(get("gamma"), d)
        if kind == "custom":
            return load_custom(spec["table"], d)
    except KeyError as exc:
        raise InvalidDensity(f"density '{kind}' is missing parameter {exc}") from None
    raise InvalidDensity(f"unknown density kind '{kind}'")
