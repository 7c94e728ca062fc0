"""Numerical integration against scalar laws.

Two tools are provided.  :func:`expectation` wraps adaptive Gauss-Kronrod
quadrature (``scipy.integrate.quad``) over the support with kink points,
plus exact sums over atoms.  :func:`quantile_nodes` returns a fixed
tanh-sinh rule in quantile space, ``E g(X) = int_0^1 g(F^{-1}(u)) du``,
which handles unbounded supports and endpoint singularities and lets many
integrands share one set of nodes.
"""

import math
import warnings

import numpy as np
from scipy import integrate

from .errors import IntegrationFailed


def breakpoints_of(dist):
    """Interior points where the density of `dist` is not smooth."""
    fn = getattr(dist, "breakpoints", None)
    pts = list(fn()) if fn is not None else []
    lo, hi = dist.interval()
    return sorted(p for p in pts if lo < p < hi)


def integrate_1d(f, lo, hi, tol=1e-10, points=(), limit=400):
    """Adaptive quadrature of a scalar function on ``[lo, hi]``.

    Infinite limits are allowed.  The interval is split at `points` so
    that kinks sit on panel boundaries.

    Raises
    ------
    IntegrationFailed
        When the estimated error exceeds ``max(tol, 1e3*tol*|value|)``.
    """
    cuts = [lo] + sorted(p for p in points if lo < p < hi) + [hi]
    total, err = 0.0, 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if a == b:
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, e = integrate.quad(f, a, b, epsabs=tol / len(cuts), epsrel=tol,
                                    limit=limit)
        total += val
        err += e
    if not math.isfinite(total) or err > max(tol, 1e3 * tol * abs(total)):
        raise IntegrationFailed("quadrature did not converge", achieved=err)
    return total


def integrate_density(dist, tol=1e-10):
    """Mass of the absolutely continuous part of `dist`."""
    lo, hi = dist.interval()
    return integrate_1d(lambda x: float(dist.pdf(x)), lo, hi, tol,
                        breakpoints_of(dist))


def expectation(dist, g, tol=1e-10, points=()):
    """``E g(X)`` by exact atom sums plus adaptive quadrature.

    Parameters
    ----------
    dist : ScalarDistribution
    g : callable
        Scalar function of a float.
    points : sequence of float
        Extra kinks of `g`.
    """
    total = 0.0
    for loc, mass in dist.atoms:
        if mass > 0:
            total += mass * float(g(loc))
    if dist.kind == "discrete":
        return total
    lo, hi = dist.interval()
    pts = breakpoints_of(dist) + list(points)

    def integrand(x):
        d = float(dist.pdf(x))
        return d * float(g(x)) if d > 0 else 0.0

    return total + integrate_1d(integrand, lo, hi, tol, pts)


def tanh_sinh(level=6, a=0.0, b=1.0):
    """Tanh-sinh nodes on ``(a, b)``.

    Returns
    -------
    x : ndarray
        Nodes.
    dist_to_b : ndarray
        ``b - x`` computed without cancellation.
    w : ndarray
        Weights summing to ``b - a``.
    """
    h = 2.0 ** (-level)
    t_max = 3.3
    t = np.arange(-t_max, t_max + h / 2, h)
    z = 0.5 * math.pi * np.sinh(t)
    half = 0.5 * (b - a)
    # 1 - tanh(z) = 2 / (1 + exp(2z)) avoids cancellation near b
    one_minus = 2.0 / (1.0 + np.exp(2.0 * z))
    one_plus = 2.0 - one_minus
    x = a + half * one_plus
    to_b = half * one_minus
    w = h * half * 0.5 * math.pi * np.cosh(t) / np.cosh(z) ** 2
    keep = (w > 1e-300) & (x > a) & (to_b > 0)
    return x[keep], to_b[keep], w[keep]


def quantile_nodes(dist, level=6):
    """Quadrature rule ``(x, w)`` with ``sum w g(x) ~ E g(X)``.

    Atoms appear as single nodes carrying their mass; continuous stretches
    of the quantile function get a tanh-sinh rule on the corresponding
    subinterval of ``(0, 1)``, split at the levels of density kinks so that
    each panel integrates a smooth function.
    """
    xs, ws = [], []
    jumps = []
    for loc, mass in dist.atoms:
        if mass <= 0:
            continue
        xs.append(np.array([float(loc)]))
        ws.append(np.array([float(mass)]))
        top = float(dist.cdf(loc))
        jumps.append((top - mass, top))
    if dist.kind != "discrete":
        jumps.sort()
        edges, cur = [], 0.0
        for a, b in jumps:
            if a > cur + 1e-15:
                edges.append((cur, a))
            cur = max(cur, b)
        if cur < 1 - 1e-15:
            edges.append((cur, 1.0))
        kinks = [float(dist.cdf(p)) for p in breakpoints_of(dist)]
        split = []
        for a, b in edges:
            inner = sorted(k for k in kinks if a + 1e-12 < k < b - 1e-12)
            split.extend(zip([a] + inner, inner + [b]))
        for a, b in split:
            u, to_b, w = tanh_sinh(level, a, b)
            upper = u > 0.5
            x = np.empty_like(u)
            x[~upper] = dist.ppf(u[~upper])
            if upper.any():
                if b == 1.0:
                    x[upper] = dist.isf(to_b[upper])
                else:
                    x[upper] = dist.ppf(u[upper])
            ok = np.isfinite(x)
            xs.append(x[ok])
            ws.append(w[ok])
    x = np.concatenate(xs) if xs else np.zeros(0)
    w = np.concatenate(ws) if ws else np.zeros(0)
    return x, w
