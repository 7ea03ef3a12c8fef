"""Independent reference implementations used to freeze expected values.

Nothing here imports the package's construction code; the oracles are brute
force and deliberately simple.
"""

import itertools
import math

import numpy as np
from scipy import integrate


def exhaustive_dual(xy, h, tol=1e-9):
    """All triples whose downward paraboloid has no point strictly below it."""
    xy = np.asarray(xy, float)
    h = np.asarray(h, float)
    out = []
    for a, b, c in itertools.combinations(range(len(h)), 3):
        M = 2 * np.array([xy[b] - xy[a], xy[c] - xy[a]])
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        rhs = np.array([xy[b] @ xy[b] + h[b] - xy[a] @ xy[a] - h[a], xy[c] @ xy[c] + h[c] - xy[a] @ xy[a] - h[a]])
        z = np.linalg.solve(M, rhs)
        q = h[a] + ((xy[a] - z) ** 2).sum()
        surface = q - ((xy - z) ** 2).sum(axis=1)
        if np.all(h >= surface - tol * (1 + abs(q))):
            out.append((a, b, c))
    return sorted(out)


def _clip(poly, a, b, c):
    """Keep ``a x + b y <= c`` (Sutherland-Hodgman against one line)."""
    out = []
    n = len(poly)
    for k in range(n):
        P, Q = poly[k], poly[(k + 1) % n]
        fp = a * P[0] + b * P[1] - c
        fq = a * Q[0] + b * Q[1] - c
        if fp <= 0:
            out.append(P)
        if (fp < 0 < fq) or (fq < 0 < fp):
            s = fp / (fp - fq)
            out.append((P[0] + s * (Q[0] - P[0]), P[1] + s * (Q[1] - P[1])))
    return out


def halfplane_cell(xy, h, i, frame):
    """Laguerre cell of site ``i`` as the frame polygon cut by every other site's half-plane."""
    x0, y0, x1, y1 = frame
    poly = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
    for j in range(len(h)):
        if j == i:
            continue
        # ||w - v_i||^2 + h_i <= ||w - v_j||^2 + h_j
        a = 2 * (xy[j][0] - xy[i][0])
        b = 2 * (xy[j][1] - xy[i][1])
        c = xy[j][0] ** 2 + xy[j][1] ** 2 + h[j] - xy[i][0] ** 2 - xy[i][1] ** 2 - h[i]
        poly = _clip(poly, a, b, c)
        if len(poly) < 3:
            return []
    area = 0.5 * sum(poly[k][0] * poly[(k + 1) % len(poly)][1] - poly[(k + 1) % len(poly)][0] * poly[k][1] for k in range(len(poly)))
    return poly if area > 1e-14 else []


def dedupe(points, tol=1e-9):
    out = []
    for p in points:
        if all(math.hypot(p[0] - q[0], p[1] - q[1]) > tol for q in out):
            out.append(p)
    return out


def envelope_grid_max(xy, h, cx, cy, radius, steps=6, n=121):
    """Zooming grid search for the sup of the lower power envelope over a disk."""
    xy = np.asarray(xy, float)
    h = np.asarray(h, float)

    def env(W):
        d = ((W[:, None, :] - xy[None, :, :]) ** 2).sum(axis=2) + h[None, :]
        return d.min(axis=1)

    def disk_grid(cx_, cy_, half):
        g = np.linspace(-half, half, n)
        X, Y = np.meshgrid(cx_ + g, cy_ + g)
        W = np.column_stack([X.ravel(), Y.ravel()])
        keep = (W[:, 0] - cx) ** 2 + (W[:, 1] - cy) ** 2 <= radius ** 2
        ang = np.linspace(0, 2 * np.pi, 4 * n, endpoint=False)
        rim = np.column_stack([cx + radius * np.cos(ang), cy + radius * np.sin(ang)])
        return np.vstack([W[keep], rim])

    W = disk_grid(cx, cy, radius)
    best = float(env(W).max())
    centre = W[int(np.argmax(env(W)))]
    half = radius
    for _ in range(steps):
        half *= 0.1
        W = disk_grid(centre[0], centre[1], half)
        vals = env(W)
        if vals.max() >= best:
            best = float(vals.max())
            centre = W[int(np.argmax(vals))]
    return best


def envelope_inf_closed(xy, h, a):
    """``min_p (max(|v| - a, 0))^2 + h`` for the disk of radius ``a`` at the origin."""
    r = np.hypot(np.asarray(xy, float)[:, 0], np.asarray(xy, float)[:, 1])
    return float((np.maximum(r - a, 0.0) ** 2 + np.asarray(h, float)).min())


def frac_quadrature(pdf, lo, alpha, x):
    """Riemann-Liouville integral by plain scipy quadrature, split at the support start."""
    if x <= lo:
        return 0.0
    fn = lambda t: pdf(t) * (x - t) ** (alpha - 1)
    cut = max(lo, x - 1.0)
    val = integrate.quad(fn, cut, x, limit=400, epsabs=0, epsrel=1e-12)[0]
    if cut > lo:
        val += integrate.quad(fn, lo, cut, limit=400, epsabs=0, epsrel=1e-12)[0]
    return val / math.gamma(alpha)


def poisson_counts_ok(counts, mean, alpha=0.01):
    """Chi-square goodness-of-fit of replicate counts to Poisson(mean)."""
    from scipy import stats

    counts = np.asarray(counts)
    top = int(stats.poisson.ppf(0.999, mean)) + 1
    edges = list(range(0, top + 1))
    obs = np.array([np.sum(counts == k) for k in edges[:-1]] + [np.sum(counts >= edges[-1])], float)
    probs = np.array([stats.poisson.pmf(k, mean) for k in edges[:-1]] + [stats.poisson.sf(edges[-1] - 1, mean)])
    exp = probs * len(counts)
    # merge sparse bins
    o, e = [], []
    acc_o = acc_e = 0.0
    for oi, ei in zip(obs, exp):
        acc_o += oi
        acc_e += ei
        if acc_e >= 5:
            o.append(acc_o)
            e.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0:
        o[-1] += acc_o
        e[-1] += acc_e
    chi2 = sum((a - b) ** 2 / b for a, b in zip(o, e))
    return stats.chi2.sf(chi2, len(o) - 1) > alpha
