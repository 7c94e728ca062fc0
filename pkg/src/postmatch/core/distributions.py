"""Scalar probability laws with c.d.f., inverse c.d.f. and density access.

Every law offers two interfaces:

* vectorized float64 methods (``cdf``, ``sf``, ``ppf``, ``isf``, ``pdf``,
  ``logpdf``, ``pmf``) used by Monte Carlo and quadrature code;
* scalar ``mpfr`` methods (``cdf_mp``, ``sf_mp``, ``ppf_mp``, ``pdf_mp``)
  evaluated at the current gmpy2 context precision, used by the
  extended precision recursions.

The inverse c.d.f. follows the right-continuous convention
``ppf(t) = inf{x : F(x) > t}``, so at a jump the quantile is the atom.
"""

import math

import gmpy2
import numpy as np
from gmpy2 import mpfr
from scipy import special

from .errors import OutOfSupport
from .precision import current_precision, to_mp, working_precision

CONTINUOUS = "continuous"
DISCRETE = "discrete"
MIXED = "mixed"

_LN2 = math.log(2.0)


def _arr(x):
    return np.asarray(x, dtype=float)


def _mp_bracket_newton(f, fprime, t, x0, lo, hi, scale, max_iter=200):
    """Solve ``f(x) = t`` for increasing `f` by safeguarded Newton steps.

    Works at the current context precision.  `lo` and `hi` bracket the root
    (either may be infinite); Newton proposals that leave the bracket are
    replaced by bisection, or by doubling steps when one side is infinite.
    """
    prec = current_precision()
    tol = mpfr(2) ** (6 - prec)
    x = mpfr(x0)
    for _ in range(max_iter):
        fx = f(x) - t
        if fx == 0:
            return x
        if fx > 0:
            hi = x
        else:
            lo = x
        d = fprime(x)
        step = fx / d if d > 0 else None
        cand = x - step if step is not None else None
        if cand is None or not (lo < cand < hi) or gmpy2.is_nan(cand):
            if gmpy2.is_infinite(lo):
                cand = hi - scale * max(1, abs(hi))
            elif gmpy2.is_infinite(hi):
                cand = lo + scale * max(1, abs(lo))
            else:
                cand = (lo + hi) / 2
            step = x - cand
        if abs(step) <= tol * max(abs(cand), scale * tol * tol * tol):
            return cand
        x = cand
    return x


class ScalarDistribution:
    """Base class for univariate laws.

    Subclasses set ``kind``, ``support`` (a closed interval ``(lo, hi)``
    possibly infinite, or the tuple of atom locations for discrete laws)
    and ``atoms`` (tuple of ``(location, mass)`` pairs).
    """

    kind = CONTINUOUS
    label = "distribution"
    atoms = ()

    # float interface -------------------------------------------------
    def cdf(self, x):
        raise NotImplementedError

    def sf(self, x):
        return 1.0 - self.cdf(x)

    def pdf(self, x):
        """Density of the absolutely continuous part (zero for atoms)."""
        return np.zeros_like(_arr(x))

    def logpdf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(x))

    def pmf(self, x):
        """Point mass at `x` (zero off the atoms)."""
        x = _arr(x)
        out = np.zeros_like(x)
        for loc, mass in self.atoms:
            out = np.where(x == loc, mass, out)
        return out

    def ppf(self, t):
        return self._ppf_bisect(_arr(t))

    def isf(self, s):
        return self.ppf(1.0 - _arr(s))

    # mpfr interface --------------------------------------------------
    def cdf_mp(self, x):
        raise NotImplementedError

    def sf_mp(self, x):
        return 1 - self.cdf_mp(x)

    def pdf_mp(self, x):
        return mpfr(float(self.pdf(float(x))))

    def mass_mp(self, x):
        """Point mass at `x` at working precision."""
        for loc, mass in self.atoms:
            if x == loc:
                return to_mp(mass)
        return mpfr(0)

    def ppf_mp(self, t):
        """Right-continuous inverse c.d.f. at working precision."""
        t = mpfr(t)
        lo, hi = self.interval()
        seed = float(self.ppf(float(t)))
        if not math.isfinite(seed):
            seed = 0.0
        return _mp_bracket_newton(self.cdf_mp, self.pdf_mp, t, seed,
                                  mpfr(lo), mpfr(hi), mpfr(self.scale()))

    # structure -------------------------------------------------------
    def interval(self):
        """Smallest closed interval containing the support."""
        s = self.support
        return (float(s[0]), float(s[-1]))

    def scale(self):
        """Typical length scale, used for tolerances and grids."""
        return 1.0

    def in_support(self, x):
        lo, hi = self.interval()
        return lo <= x <= hi

    @property
    def continuous_mass(self):
        return 1.0 - sum(m for _, m in self.atoms)

    def mean(self):
        raise NotImplementedError

    def var(self):
        raise NotImplementedError

    def entropy(self):
        """Differential entropy in bits (continuous laws only)."""
        raise NotImplementedError

    def _ppf_bisect(self, t, iters=200):
        lo, hi = self.interval()
        lo = np.full_like(t, lo if math.isfinite(lo) else -1.0, dtype=float)
        hi = np.full_like(t, hi if math.isfinite(hi) else 1.0, dtype=float)
        s = self.scale()
        # expand infinite ends until they bracket
        for _ in range(2000):
            bad = self.cdf(lo) > t
            if not bad.any():
                break
            lo = np.where(bad, lo - s * np.maximum(1, np.abs(lo)), lo)
        for _ in range(2000):
            bad = self.cdf(hi) <= t
            if not bad.any():
                break
            hi = np.where(bad, hi + s * np.maximum(1, np.abs(hi)), hi)
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            up = self.cdf(mid) > t
            hi = np.where(up, mid, hi)
            lo = np.where(up, lo, mid)
            if np.all(hi - lo <= 4e-16 * np.maximum(1, np.abs(hi))):
                break
        return hi

    def __repr__(self):
        return f"<{type(self).__name__} {self.label}>"


class Uniform(ScalarDistribution):
    """Uniform law on ``(lo, hi)``."""

    def __init__(self, lo=0.0, hi=1.0):
        if not hi > lo:
            raise ValueError("need hi > lo")
        self.lo, self.hi = float(lo), float(hi)
        self.support = (self.lo, self.hi)
        self.label = f"uniform({lo:g},{hi:g})"

    def cdf(self, x):
        return np.clip((_arr(x) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def pdf(self, x):
        x = _arr(x)
        inside = (x > self.lo) & (x < self.hi)
        return np.where(inside, 1.0 / (self.hi - self.lo), 0.0)

    def ppf(self, t):
        return self.lo + _arr(t) * (self.hi - self.lo)

    def cdf_mp(self, x):
        lo, hi = to_mp(self.lo), to_mp(self.hi)
        if x <= lo:
            return mpfr(0)
        if x >= hi:
            return mpfr(1)
        return (x - lo) / (hi - lo)

    def pdf_mp(self, x):
        lo, hi = to_mp(self.lo), to_mp(self.hi)
        return 1 / (hi - lo) if lo < x < hi else mpfr(0)

    def ppf_mp(self, t):
        lo, hi = to_mp(self.lo), to_mp(self.hi)
        return lo + mpfr(t) * (hi - lo)

    def scale(self):
        return self.hi - self.lo

    def mean(self):
        return 0.5 * (self.lo + self.hi)

    def var(self):
        return (self.hi - self.lo) ** 2 / 12.0

    def entropy(self):
        return math.log2(self.hi - self.lo)


class Exponential(ScalarDistribution):
    """Exponential law with the given mean, shifted to start at `loc`."""

    def __init__(self, mean=1.0, loc=0.0):
        if not mean > 0:
            raise ValueError("mean must be positive")
        self.mu, self.loc = float(mean), float(loc)
        self.support = (self.loc, math.inf)
        self.label = f"exponential(mean={mean:g})"

    def cdf(self, x):
        z = np.maximum(_arr(x) - self.loc, 0.0) / self.mu
        return -np.expm1(-z)

    def sf(self, x):
        z = np.maximum(_arr(x) - self.loc, 0.0) / self.mu
        return np.exp(-z)

    def pdf(self, x):
        z = (_arr(x) - self.loc) / self.mu
        return np.where(z >= 0, np.exp(-np.maximum(z, 0)) / self.mu, 0.0)

    def logpdf(self, x):
        z = (_arr(x) - self.loc) / self.mu
        return np.where(z >= 0, -z - math.log(self.mu), -np.inf)

    def ppf(self, t):
        return self.loc - self.mu * np.log1p(-_arr(t))

    def isf(self, s):
        return self.loc - self.mu * np.log(_arr(s))

    def cdf_mp(self, x):
        z = (x - to_mp(self.loc)) / to_mp(self.mu)
        return -gmpy2.expm1(-z) if z > 0 else mpfr(0)

    def sf_mp(self, x):
        z = (x - to_mp(self.loc)) / to_mp(self.mu)
        return gmpy2.exp(-z) if z > 0 else mpfr(1)

    def pdf_mp(self, x):
        m = to_mp(self.mu)
        z = (x - to_mp(self.loc)) / m
        return gmpy2.exp(-z) / m if z >= 0 else mpfr(0)

    def ppf_mp(self, t):
        return to_mp(self.loc) - to_mp(self.mu) * gmpy2.log1p(-mpfr(t))

    def scale(self):
        return self.mu

    def mean(self):
        return self.loc + self.mu

    def var(self):
        return self.mu ** 2

    def entropy(self):
        return math.log2(math.e * self.mu)


class Gaussian(ScalarDistribution):
    """Normal law ``N(mean, var)``."""

    def __init__(self, mean=0.0, var=1.0):
        if not var > 0:
            raise ValueError("variance must be positive")
        self.mu, self.v = float(mean), float(var)
        self.sigma = math.sqrt(self.v)
        self.support = (-math.inf, math.inf)
        self.label = f"gaussian({mean:g},{var:g})"

    def _z(self, x):
        return (_arr(x) - self.mu) / self.sigma

    def cdf(self, x):
        return special.ndtr(self._z(x))

    def sf(self, x):
        return special.ndtr(-self._z(x))

    def logcdf(self, x):
        return special.log_ndtr(self._z(x))

    def logsf(self, x):
        return special.log_ndtr(-self._z(x))

    def pdf(self, x):
        z = self._z(x)
        return np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2 * math.pi))

    def logpdf(self, x):
        z = self._z(x)
        return -0.5 * z * z - math.log(self.sigma * math.sqrt(2 * math.pi))

    def ppf(self, t):
        return self.mu + self.sigma * special.ndtri(_arr(t))

    def isf(self, s):
        return self.mu - self.sigma * special.ndtri(_arr(s))

    def _consts(self):
        return to_mp(self.mu), gmpy2.sqrt(to_mp(self.v))

    def cdf_mp(self, x):
        mu, sd = self._consts()
        return gmpy2.erfc(-(x - mu) / (sd * gmpy2.sqrt(mpfr(2)))) / 2

    def sf_mp(self, x):
        mu, sd = self._consts()
        return gmpy2.erfc((x - mu) / (sd * gmpy2.sqrt(mpfr(2)))) / 2

    def pdf_mp(self, x):
        mu, sd = self._consts()
        z = (x - mu) / sd
        return gmpy2.exp(-z * z / 2) / (sd * gmpy2.sqrt(2 * gmpy2.const_pi()))

    def ppf_mp(self, t):
        t = mpfr(t)
        if t <= 0:
            return mpfr("-inf")
        if t >= 1:
            return mpfr("inf")
        prec = current_precision()
        with working_precision(prec + 16):
            upper = t > mpfr("0.5")
            tail = 1 - t if upper else mpfr(t)
            z = _std_normal_lower_quantile(tail)
            if upper:
                z = -z
            mu, sd = self._consts()
            x = mu + sd * z
        return mpfr(x, prec)

    def scale(self):
        return self.sigma

    def mean(self):
        return self.mu

    def var(self):
        return self.v

    def entropy(self):
        return 0.5 * math.log2(2 * math.pi * math.e * self.v)


def _std_normal_lower_quantile(tail):
    """Standard normal quantile for ``tail <= 1/2`` at working precision."""
    if tail == mpfr("0.5"):
        return mpfr(0)
    tf = float(tail)
    if tf > 1e-300:
        z0 = float(special.ndtri(tf))
    else:
        ln_t = float(gmpy2.log(tail))
        z0 = -math.sqrt(-2 * ln_t - math.log(-2 * ln_t) - math.log(2 * math.pi))
    sqrt2 = gmpy2.sqrt(mpfr(2))
    norm = gmpy2.sqrt(2 * gmpy2.const_pi())
    log_t = gmpy2.log(tail)
    tol = mpfr(2) ** (8 - current_precision())
    z = mpfr(z0)
    for _ in range(100):
        cdf = gmpy2.erfc(-z / sqrt2) / 2
        dens = gmpy2.exp(-z * z / 2) / norm
        # Newton on log F keeps the far tail well conditioned
        step = (gmpy2.log(cdf) - log_t) * cdf / dens
        z -= step
        if abs(step) <= tol * max(1, abs(z)):
            break
    return z


class Laplace(ScalarDistribution):
    """Laplace law with location `mean` and scale `scale` (variance 2 scale^2)."""

    def __init__(self, mean=0.0, scale=None, var=None):
        if (scale is None) == (var is None):
            raise ValueError("give exactly one of scale, var")
        if scale is None:
            scale = math.sqrt(var / 2.0)
        if not scale > 0:
            raise ValueError("scale must be positive")
        self.mu, self.b = float(mean), float(scale)
        self.support = (-math.inf, math.inf)
        self.label = f"laplace({mean:g},b={self.b:g})"

    def cdf(self, x):
        z = (_arr(x) - self.mu) / self.b
        return np.where(z < 0, 0.5 * np.exp(np.minimum(z, 0)), 1 - 0.5 * np.exp(-np.maximum(z, 0)))

    def sf(self, x):
        z = (_arr(x) - self.mu) / self.b
        return np.where(z > 0, 0.5 * np.exp(-np.maximum(z, 0)), 1 - 0.5 * np.exp(np.minimum(z, 0)))

    def pdf(self, x):
        z = np.abs(_arr(x) - self.mu) / self.b
        return 0.5 * np.exp(-z) / self.b

    def logpdf(self, x):
        return -np.abs(_arr(x) - self.mu) / self.b - math.log(2 * self.b)

    def ppf(self, t):
        t = _arr(t)
        with np.errstate(divide="ignore"):
            return np.where(t < 0.5, self.mu + self.b * np.log(2 * t),
                            self.mu - self.b * np.log(2 * (1 - t)))

    def cdf_mp(self, x):
        z = (x - to_mp(self.mu)) / to_mp(self.b)
        return gmpy2.exp(z) / 2 if z < 0 else 1 - gmpy2.exp(-z) / 2

    def pdf_mp(self, x):
        b = to_mp(self.b)
        return gmpy2.exp(-abs(x - to_mp(self.mu)) / b) / (2 * b)

    def ppf_mp(self, t):
        t = mpfr(t)
        mu, b = to_mp(self.mu), to_mp(self.b)
        if t < mpfr("0.5"):
            return mu + b * gmpy2.log(2 * t)
        return mu - b * gmpy2.log(2 * (1 - t))

    def scale(self):
        return self.b

    def breakpoints(self):
        return (self.mu,)

    def mean(self):
        return self.mu

    def var(self):
        return 2 * self.b ** 2

    def entropy(self):
        return math.log2(2 * math.e * self.b)


class Cauchy(ScalarDistribution):
    """Cauchy law with location `loc` and scale `scale`."""

    def __init__(self, loc=0.0, scale=1.0):
        if not scale > 0:
            raise ValueError("scale must be positive")
        self.loc, self.g = float(loc), float(scale)
        self.support = (-math.inf, math.inf)
        self.label = f"cauchy({loc:g},{scale:g})"

    def cdf(self, x):
        return 0.5 + np.arctan((_arr(x) - self.loc) / self.g) / math.pi

    def pdf(self, x):
        z = (_arr(x) - self.loc) / self.g
        return 1.0 / (math.pi * self.g * (1 + z * z))

    def ppf(self, t):
        return self.loc + self.g * np.tan(math.pi * (_arr(t) - 0.5))

    def cdf_mp(self, x):
        return mpfr("0.5") + gmpy2.atan((x - to_mp(self.loc)) / to_mp(self.g)) / gmpy2.const_pi()

    def pdf_mp(self, x):
        g = to_mp(self.g)
        z = (x - to_mp(self.loc)) / g
        return 1 / (gmpy2.const_pi() * g * (1 + z * z))

    def ppf_mp(self, t):
        return to_mp(self.loc) + to_mp(self.g) * gmpy2.tan(gmpy2.const_pi() * (mpfr(t) - mpfr("0.5")))

    def scale(self):
        return self.g

    def mean(self):
        return math.nan

    def var(self):
        return math.inf

    def entropy(self):
        return math.log2(4 * math.pi * self.g)


class Triangular(ScalarDistribution):
    """Triangular law on ``(lo, hi)`` with peak at `mode`."""

    def __init__(self, lo=0.0, mode=1.0, hi=2.0):
        if not lo <= mode <= hi or not hi > lo:
            raise ValueError("need lo <= mode <= hi, lo < hi")
        self.a, self.c, self.b = float(lo), float(mode), float(hi)
        self.support = (self.a, self.b)
        self.label = f"triangular({lo:g},{mode:g},{hi:g})"

    def cdf(self, x):
        a, b, c = self.a, self.b, self.c
        x = np.clip(_arr(x), a, b)
        left = np.where(c > a, (x - a) ** 2 / ((b - a) * max(c - a, 1e-300)), 0.0)
        right = 1 - (b - x) ** 2 / ((b - a) * max(b - c, 1e-300))
        return np.where(x <= c, left, right)

    def pdf(self, x):
        a, b, c = self.a, self.b, self.c
        x = _arr(x)
        up = 2 * (x - a) / ((b - a) * max(c - a, 1e-300))
        down = 2 * (b - x) / ((b - a) * max(b - c, 1e-300))
        out = np.where(x <= c, up, down)
        return np.where((x > a) & (x < b), out, 0.0)

    def ppf(self, t):
        a, b, c = self.a, self.b, self.c
        t = _arr(t)
        split = (c - a) / (b - a)
        return np.where(t < split, a + np.sqrt(t * (b - a) * (c - a)),
                        b - np.sqrt((1 - t) * (b - a) * (b - c)))

    def cdf_mp(self, x):
        a, b, c = to_mp(self.a), to_mp(self.b), to_mp(self.c)
        if x <= a:
            return mpfr(0)
        if x >= b:
            return mpfr(1)
        if x <= c:
            return (x - a) ** 2 / ((b - a) * (c - a))
        return 1 - (b - x) ** 2 / ((b - a) * (b - c))

    def pdf_mp(self, x):
        a, b, c = to_mp(self.a), to_mp(self.b), to_mp(self.c)
        if not a < x < b:
            return mpfr(0)
        if x <= c:
            return 2 * (x - a) / ((b - a) * (c - a))
        return 2 * (b - x) / ((b - a) * (b - c))

    def ppf_mp(self, t):
        a, b, c = to_mp(self.a), to_mp(self.b), to_mp(self.c)
        t = mpfr(t)
        if t < (c - a) / (b - a):
            return a + gmpy2.sqrt(t * (b - a) * (c - a))
        return b - gmpy2.sqrt((1 - t) * (b - a) * (b - c))

    def scale(self):
        return self.b - self.a

    def breakpoints(self):
        return (self.c,)

    def mean(self):
        return (self.a + self.b + self.c) / 3

    def var(self):
        a, b, c = self.a, self.b, self.c
        return (a * a + b * b + c * c - a * b - a * c - b * c) / 18

    def entropy(self):
        return (0.5 + math.log(0.5 * (self.b - self.a))) / _LN2


class Erlang(ScalarDistribution):
    """Gamma law with integer shape `k` and scale `scale`."""

    def __init__(self, k=2, scale=1.0):
        if int(k) != k or k < 1:
            raise ValueError("shape must be a positive integer")
        if not scale > 0:
            raise ValueError("scale must be positive")
        self.k, self.s = int(k), float(scale)
        self.support = (0.0, math.inf)
        self.label = f"erlang({self.k},{scale:g})"

    def cdf(self, x):
        return special.gammainc(self.k, np.maximum(_arr(x), 0) / self.s)

    def sf(self, x):
        return special.gammaincc(self.k, np.maximum(_arr(x), 0) / self.s)

    def pdf(self, x):
        x = _arr(x)
        z = np.maximum(x, 0) / self.s
        out = z ** (self.k - 1) * np.exp(-z) / (math.factorial(self.k - 1) * self.s)
        return np.where(x > 0, out, 0.0)

    def logpdf(self, x):
        x = _arr(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = x / self.s
            out = (self.k - 1) * np.log(z) - z - math.lgamma(self.k) - math.log(self.s)
        return np.where(x > 0, out, -np.inf)

    def ppf(self, t):
        return self.s * special.gammaincinv(self.k, _arr(t))

    def isf(self, s):
        return self.s * special.gammainccinv(self.k, _arr(s))

    def _poly(self, z):
        term, acc = mpfr(1), mpfr(1)
        for j in range(1, self.k):
            term = term * z / j
            acc += term
        return acc

    def cdf_mp(self, x):
        if x <= 0:
            return mpfr(0)
        z = x / to_mp(self.s)
        if self.k == 1:
            return -gmpy2.expm1(-z)
        if z < self.k:
            # lower series exp(-z) sum_{j>=k} z^j/j! avoids cancellation
            term = mpfr(1)
            for j in range(1, self.k + 1):
                term = term * z / j
            acc, j = term, self.k
            eps = mpfr(2) ** (-current_precision() - 4)
            while term > eps * acc:
                j += 1
                term = term * z / j
                acc += term
            return gmpy2.exp(-z) * acc
        return 1 - gmpy2.exp(-z) * self._poly(z)

    def sf_mp(self, x):
        if x <= 0:
            return mpfr(1)
        z = x / to_mp(self.s)
        return gmpy2.exp(-z) * self._poly(z)

    def pdf_mp(self, x):
        if x <= 0:
            return mpfr(0)
        s = to_mp(self.s)
        z = x / s
        return z ** (self.k - 1) * gmpy2.exp(-z) / (math.factorial(self.k - 1) * s)

    def ppf_mp(self, t):
        t = mpfr(t)
        if t <= 0:
            return mpfr(0)
        if t >= 1:
            return mpfr("inf")
        prec = current_precision()
        with working_precision(prec + 16):
            upper = t > mpfr("0.5")
            if upper:
                tail = 1 - t
                seed = float(self.isf(float(tail)))
                # solve log sf(x) = log tail; sf is decreasing
                target = gmpy2.log(tail)
                x = _mp_bracket_newton(lambda v: -gmpy2.log(self.sf_mp(v)),
                                       lambda v: self.pdf_mp(v) / self.sf_mp(v),
                                       -target, seed, mpfr(0), mpfr("inf"),
                                       to_mp(self.s))
            else:
                seed = float(self.ppf(float(t)))
                if not seed > 0:
                    seed = self.s * math.exp(math.log(max(float(t), 1e-300) * math.factorial(self.k)) / self.k)
                target = gmpy2.log(t)
                x = _mp_bracket_newton(lambda v: gmpy2.log(self.cdf_mp(v)) if v > 0 else mpfr("-inf"),
                                       lambda v: self.pdf_mp(v) / self.cdf_mp(v),
                                       target, seed, mpfr(0), mpfr("inf"),
                                       to_mp(self.s))
        return mpfr(x, prec)

    def scale(self):
        return self.s * self.k

    def mean(self):
        return self.k * self.s

    def var(self):
        return self.k * self.s ** 2

    def entropy(self):
        k = self.k
        nats = k + math.log(self.s) + math.lgamma(k) + (1 - k) * float(special.digamma(k))
        return nats / _LN2


class Discrete(ScalarDistribution):
    """Finite law on sorted real atoms.

    Parameters
    ----------
    values : sequence of real
        Atom locations (distinct).
    probs : sequence
        Masses; floats, decimal strings, Fractions or ``mpfr``.  They must
        sum to one within 1e-12.
    """

    kind = DISCRETE

    def __init__(self, values, probs, label=None):
        values = list(values)
        probs = list(probs)
        if len(values) != len(probs) or not values:
            raise ValueError("values and probs must be nonempty and aligned")
        order = sorted(range(len(values)), key=lambda i: values[i])
        self.values = tuple(values[i] for i in order)
        self._exact = tuple(probs[i] for i in order)
        self.probs = np.array([float(p) for p in self._exact])
        if len(set(self.values)) != len(self.values):
            raise ValueError("atom locations must be distinct")
        if np.any(self.probs < 0):
            raise ValueError("negative mass")
        if abs(self.probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"masses sum to {self.probs.sum():.15g}, not 1")
        self._v = np.array(self.values, dtype=float)
        self._cum = np.cumsum(self.probs)
        self._cum[-1] = 1.0
        self.support = self.values
        self.atoms = tuple(zip(self.values, self.probs))
        self.label = label or f"discrete({len(self.values)})"
        self._mp_cache = {}

    @classmethod
    def bernoulli(cls, p=0.5):
        return cls([0, 1], [1 - p, p], label=f"bernoulli({p:g})")

    @classmethod
    def from_samples(cls, samples):
        """Empirical law of `samples` (ties merged)."""
        vals, counts = np.unique(np.asarray(samples, dtype=float), return_counts=True)
        probs = counts / counts.sum()
        return cls(vals.tolist(), probs.tolist(), label=f"empirical({counts.sum()})")

    @property
    def continuous_mass(self):
        return 0.0

    def index(self, x):
        return self.values.index(x)

    def cdf(self, x):
        i = np.searchsorted(self._v, _arr(x), side="right")
        cum = np.concatenate([[0.0], self._cum])
        return cum[i]

    def pmf(self, x):
        x = _arr(x)
        i = np.searchsorted(self._v, x, side="left")
        i = np.clip(i, 0, len(self._v) - 1)
        return np.where(self._v[i] == x, self.probs[i], 0.0)

    def ppf(self, t):
        i = np.searchsorted(self._cum, _arr(t), side="right")
        return self._v[np.clip(i, 0, len(self._v) - 1)]

    def _mp_table(self):
        prec = current_precision()
        tab = self._mp_cache.get(prec)
        if tab is None:
            probs = [to_mp(p) for p in self._exact]
            total = sum(probs, mpfr(0))
            probs = [p / total for p in probs]
            cum, acc = [], mpfr(0)
            for p in probs:
                acc += p
                cum.append(acc)
            cum[-1] = mpfr(1)
            tab = (probs, cum)
            self._mp_cache[prec] = tab
        return tab

    def cdf_mp(self, x):
        probs, cum = self._mp_table()
        i = int(np.searchsorted(self._v, float(x), side="right"))
        # float search is exact for the stored float atoms
        return cum[i - 1] if i > 0 else mpfr(0)

    def mass_mp(self, x):
        probs, _ = self._mp_table()
        try:
            return probs[self.values.index(x)]
        except ValueError:
            return mpfr(0)

    def ppf_mp(self, t):
        _, cum = self._mp_table()
        for v, c in zip(self.values, cum):
            if c > t:
                return v
        return self.values[-1]

    def interval(self):
        return (float(self.values[0]), float(self.values[-1]))

    def in_support(self, x):
        return x in self.values

    def scale(self):
        return max(float(self.values[-1] - self.values[0]), 1.0)

    def mean(self):
        return float(np.dot(self._v, self.probs))

    def var(self):
        m = self.mean()
        return float(np.dot((self._v - m) ** 2, self.probs))

    def entropy(self):
        p = self.probs[self.probs > 0]
        return float(-(p * np.log2(p)).sum())


class AtomPlusExponential(ScalarDistribution):
    """Mixture of an atom at `loc` and an exponential law above it.

    ``atom_mass * delta(x - loc) + (1 - atom_mass) * Exponential(mean)``.
    """

    kind = MIXED

    def __init__(self, atom_mass, mean, loc=0.0):
        if not 0 < atom_mass < 1:
            raise ValueError("atom mass must lie in (0, 1)")
        self.w, self.mu, self.loc = float(atom_mass), float(mean), float(loc)
        self._exact_w = atom_mass
        self.support = (self.loc, math.inf)
        self.atoms = ((self.loc, self.w),)
        self.label = f"atom({atom_mass:g})+exponential({mean:g})"

    def cdf(self, x):
        x = _arr(x)
        z = np.maximum(x - self.loc, 0) / self.mu
        return np.where(x >= self.loc, self.w + (1 - self.w) * (-np.expm1(-z)), 0.0)

    def sf(self, x):
        x = _arr(x)
        z = np.maximum(x - self.loc, 0) / self.mu
        return np.where(x >= self.loc, (1 - self.w) * np.exp(-z), 1.0)

    def pdf(self, x):
        x = _arr(x)
        z = (x - self.loc) / self.mu
        return np.where(z > 0, (1 - self.w) * np.exp(-np.maximum(z, 0)) / self.mu, 0.0)

    def ppf(self, t):
        t = _arr(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            cont = self.loc + self.mu * np.log((1 - self.w) / (1 - t))
        return np.where(t >= self.w, cont, self.loc)

    def cdf_mp(self, x):
        loc = to_mp(self.loc)
        if x < loc:
            return mpfr(0)
        w = to_mp(self._exact_w)
        return w + (1 - w) * (-gmpy2.expm1(-(x - loc) / to_mp(self.mu)))

    def sf_mp(self, x):
        loc = to_mp(self.loc)
        if x < loc:
            return mpfr(1)
        w = to_mp(self._exact_w)
        return (1 - w) * gmpy2.exp(-(x - loc) / to_mp(self.mu))

    def pdf_mp(self, x):
        loc, m = to_mp(self.loc), to_mp(self.mu)
        if x <= loc:
            return mpfr(0)
        w = to_mp(self._exact_w)
        return (1 - w) * gmpy2.exp(-(x - loc) / m) / m

    def mass_mp(self, x):
        return to_mp(self._exact_w) if x == to_mp(self.loc) else mpfr(0)

    def ppf_mp(self, t):
        t = mpfr(t)
        w = to_mp(self._exact_w)
        if t < w:
            return to_mp(self.loc)
        return to_mp(self.loc) + to_mp(self.mu) * gmpy2.log((1 - w) / (1 - t))

    def scale(self):
        return self.mu

    def mean(self):
        return self.loc + (1 - self.w) * self.mu

    def var(self):
        m1 = (1 - self.w) * self.mu
        m2 = (1 - self.w) * 2 * self.mu ** 2
        return m2 - m1 ** 2


class AtomPlusTruncatedExponential(ScalarDistribution):
    """Atom at zero plus a density proportional to ``exp(kappa*u)`` on (0, upper).

    Arises as a posterior of an atom-plus-exponential input observed
    through additive exponential noise.
    """

    kind = MIXED

    def __init__(self, atom_mass, kappa, upper):
        if not 0 <= atom_mass < 1:
            raise ValueError("atom mass must lie in [0, 1)")
        if not upper > 0:
            raise ValueError("upper must be positive")
        self.w, self.kappa, self.h = atom_mass, kappa, upper
        self.support = (0.0, float(upper))
        self.atoms = ((0.0, float(atom_mass)),) if atom_mass > 0 else ()
        self.kind = MIXED if atom_mass > 0 else CONTINUOUS
        self.label = "atom+truncated-exponential"

    def _cont_cdf_mp(self, x):
        k, h = to_mp(self.kappa), to_mp(self.h)
        if k == 0:
            return x / h
        return gmpy2.expm1(k * x) / gmpy2.expm1(k * h)

    def cdf_mp(self, x):
        if x < 0:
            return mpfr(0)
        h = to_mp(self.h)
        if x >= h:
            return mpfr(1)
        w = to_mp(self.w)
        return w + (1 - w) * self._cont_cdf_mp(x)

    def pdf_mp(self, x):
        k, h = to_mp(self.kappa), to_mp(self.h)
        if not 0 < x < h:
            return mpfr(0)
        w = to_mp(self.w)
        if k == 0:
            return (1 - w) / h
        return (1 - w) * k * gmpy2.exp(k * x) / gmpy2.expm1(k * h)

    def ppf_mp(self, t):
        t = mpfr(t)
        w = to_mp(self.w)
        if t < w:
            return mpfr(0)
        k, h = to_mp(self.kappa), to_mp(self.h)
        r = (t - w) / (1 - w)
        if k == 0:
            return r * h
        return gmpy2.log1p(r * gmpy2.expm1(k * h)) / k

    def cdf(self, x):
        x = _arr(x)
        w, k, h = float(self.w), float(self.kappa), float(self.h)
        xc = np.clip(x, 0, h)
        cont = xc / h if k == 0 else np.expm1(k * xc) / math.expm1(k * h)
        return np.where(x < 0, 0.0, w + (1 - w) * cont)

    def pdf(self, x):
        x = _arr(x)
        w, k, h = float(self.w), float(self.kappa), float(self.h)
        dens = (1 - w) / h if k == 0 else (1 - w) * k * np.exp(k * x) / math.expm1(k * h)
        return np.where((x > 0) & (x < h), dens, 0.0)

    def ppf(self, t):
        t = _arr(t)
        w, k, h = float(self.w), float(self.kappa), float(self.h)
        r = np.clip((t - w) / (1 - w), 0, 1)
        cont = r * h if k == 0 else np.log1p(r * math.expm1(k * h)) / k
        return np.where(t < w, 0.0, cont)

    def scale(self):
        return float(self.h)


class Shifted(ScalarDistribution):
    """Law of ``base + shift``."""

    def __init__(self, base, shift):
        self.base, self.shift = base, shift
        self.kind = base.kind
        lo, hi = base.interval()
        sh = float(shift)
        if base.kind == DISCRETE:
            self.support = tuple(v + sh for v in base.values)
        else:
            self.support = (lo + sh, hi + sh)
        self.atoms = tuple((loc + sh, m) for loc, m in base.atoms)
        self.label = f"{base.label}+{sh:g}"

    def cdf(self, x):
        return self.base.cdf(_arr(x) - float(self.shift))

    def sf(self, x):
        return self.base.sf(_arr(x) - float(self.shift))

    def pdf(self, x):
        return self.base.pdf(_arr(x) - float(self.shift))

    def logpdf(self, x):
        return self.base.logpdf(_arr(x) - float(self.shift))

    def ppf(self, t):
        return self.base.ppf(t) + float(self.shift)

    def isf(self, s):
        return self.base.isf(s) + float(self.shift)

    def cdf_mp(self, x):
        return self.base.cdf_mp(x - to_mp(self.shift))

    def sf_mp(self, x):
        return self.base.sf_mp(x - to_mp(self.shift))

    def pdf_mp(self, x):
        return self.base.pdf_mp(x - to_mp(self.shift))

    def ppf_mp(self, t):
        return self.base.ppf_mp(t) + to_mp(self.shift)

    def scale(self):
        return self.base.scale()

    def breakpoints(self):
        fn = getattr(self.base, "breakpoints", None)
        return tuple(p + float(self.shift) for p in (fn() if fn else ()))

    def mean(self):
        return self.base.mean() + float(self.shift)

    def var(self):
        return self.base.var()

    def entropy(self):
        return self.base.entropy()


class Tabulated(ScalarDistribution):
    """Continuous law given by density samples on an increasing grid.

    The c.d.f. is the cumulative trapezoid rule, linearly interpolated; the
    inverse c.d.f. interpolates the c.d.f. table.  Float precision only.
    """

    def __init__(self, grid, density, label="tabulated"):
        x = np.asarray(grid, dtype=float)
        f = np.asarray(density, dtype=float)
        if x.ndim != 1 or x.shape != f.shape or np.any(np.diff(x) <= 0):
            raise ValueError("need an increasing grid and matching densities")
        if np.any(f < 0):
            raise ValueError("negative density")
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(x))])
        total = cum[-1]
        if not total > 0:
            raise ValueError("density integrates to zero")
        self._x, self._f, self._c = x, f / total, cum / total
        self.mass_error = abs(total - 1.0)
        self.support = (float(x[0]), float(x[-1]))
        self.label = label

    def cdf(self, x):
        return np.interp(_arr(x), self._x, self._c, left=0.0, right=1.0)

    def pdf(self, x):
        return np.interp(_arr(x), self._x, self._f, left=0.0, right=0.0)

    def ppf(self, t):
        return np.interp(_arr(t), self._c, self._x)

    def cdf_mp(self, x):
        return mpfr(float(self.cdf(float(x))))

    def ppf_mp(self, t):
        return mpfr(float(self.ppf(float(t))))

    def scale(self):
        return float(np.sqrt(self.var()))

    def mean(self):
        return float(np.trapz(self._x * self._f, self._x))

    def var(self):
        m = self.mean()
        return float(np.trapz((self._x - m) ** 2 * self._f, self._x))


class Transformed(ScalarDistribution):
    """Law of ``rho(X)`` for a strictly monotone `rho` with known inverse.

    Parameters
    ----------
    base : ScalarDistribution
        Law of X (continuous).
    rho, rho_inv : callable
        Vectorized map and its inverse.
    increasing : bool
        Direction of monotonicity.
    """

    def __init__(self, base, rho, rho_inv, increasing=True, label=None):
        if base.kind != CONTINUOUS:
            raise ValueError("only continuous laws can be transformed")
        self.base, self.rho, self.rho_inv = base, rho, rho_inv
        self.increasing = bool(increasing)
        lo, hi = base.interval()
        with np.errstate(all="ignore"):
            ends = sorted(float(v) for v in (rho(np.array(lo)), rho(np.array(hi))))
        self.support = (ends[0], ends[1])
        self.label = label or f"rho({base.label})"

    def cdf(self, s):
        x = self.rho_inv(_arr(s))
        return self.base.cdf(x) if self.increasing else self.base.sf(x)

    def sf(self, s):
        x = self.rho_inv(_arr(s))
        return self.base.sf(x) if self.increasing else self.base.cdf(x)

    def ppf(self, t):
        t = _arr(t)
        return self.rho(self.base.ppf(t) if self.increasing else self.base.isf(t))

    def pdf(self, s, h=1e-6):
        s = _arr(s)
        step = h * np.maximum(1.0, np.abs(s))
        return np.maximum(self.cdf(s + step) - self.cdf(s - step), 0.0) / (2 * step)

    def cdf_mp(self, s):
        return mpfr(float(self.cdf(float(s))))

    def scale(self):
        q = self.ppf(np.array([0.25, 0.75]))
        return float(abs(q[1] - q[0])) or 1.0


def check_valid(dist, tol=1e-9):
    """Reject laws whose atoms plus continuous part do not sum to one.

    For laws with a continuous part the density is integrated numerically.
    """
    from .quadrature import integrate_density

    atoms = sum(m for _, m in dist.atoms)
    if dist.kind == DISCRETE:
        if abs(atoms - 1.0) > 1e-12:
            raise ValueError("atom masses do not sum to one")
        return True
    mass = integrate_density(dist, tol=tol)
    if abs(mass + atoms - 1.0) > max(10 * tol, 1e-9):
        raise ValueError(f"law is not proper: total mass {mass + atoms:.12g}; "
                         "singular parts are not supported")
    return True


def inverse_cdf_sample(dist, t):
    """Quantile ``inf{x : F(x) > t}`` at ``t`` in [0, 1].

    `t` may be a UnitValue or ``mpfr`` (extended precision result) or a
    float / float array (float result).
    """
    from .precision import UnitValue

    if isinstance(t, UnitValue):
        with working_precision(t.precision):
            return dist.ppf_mp(t.value)
    if isinstance(t, type(mpfr(0))):
        return dist.ppf_mp(t)
    ta = _arr(t)
    if np.any((ta < 0) | (ta > 1)):
        raise ValueError("quantile level outside [0, 1]")
    out = dist.ppf(ta)
    return out if out.ndim else float(out)


def uniformize(dist, x, lam, precision=None):
    """Randomized c.d.f. ``F(x) - lam * P({x})``.

    For a law without atoms this is ``F(x)``; with an independent uniform
    `lam` the result is uniform on (0, 1).  Returns a UnitValue.
    """
    from .precision import DEFAULT_PRECISION, UnitValue, raw_value

    if precision is None:
        precision = getattr(lam, "precision", DEFAULT_PRECISION)
    if not dist.in_support(x):
        raise OutOfSupport(f"{x!r} outside the support of {dist.label}")
    with working_precision(precision):
        xv = x if isinstance(x, (int, type(mpfr(0)))) else to_mp(x)
        lv = raw_value(lam, precision)
        if not 0 <= lv <= 1:
            raise ValueError("lam must lie in [0, 1]")
        v = dist.cdf_mp(xv) - dist.mass_mp(xv) * lv
    return UnitValue(v, precision)


def sample(dist, rng, size=None):
    """Inverse-transform draws from `dist`.

    Returns
    -------
    value : float or ndarray
    rng : RngStream
        The advanced stream.
    """
    n = 1 if size is None else int(size)
    u, rng = rng.uniforms(n)
    x = dist.ppf(u)
    return (float(x[0]) if size is None else x), rng
