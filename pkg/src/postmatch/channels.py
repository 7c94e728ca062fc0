"""Memoryless channels, input/channel pairs and their information quantities.

A pair couples an input law ``P_X`` with a channel ``P_{Y|X}``.  The zoo
constructors at the bottom return pairs that also know their output law,
inverse channel and mutual information in closed form; the module level
functions :func:`output_distribution`, :func:`inverse_channel` and
:func:`mutual_information` compute the same objects generically (exact sums
for discrete channels, adaptive quadrature otherwise) and are used to
cross-check the closed forms.
"""

import math
from fractions import Fraction
from functools import cached_property

import numpy as np
from gmpy2 import mpfr
from scipy.interpolate import CubicHermiteSpline

from .core import distributions as dists
from .core.errors import NotDiscrete, OutOfSupport, UnsupportedOutput
from .core.precision import to_mp
from .core.quadrature import expectation, integrate_1d

EULER_GAMMA = 0.5772156649015329


def _frac(x):
    """Exact rational value of a decimal-like number."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(repr(float(x)))


def binary_entropy(p):
    if p <= 0 or p >= 1:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


# ---------------------------------------------------------------------------
# channels


class MemorylessChannel:
    """Base class for ``P_{Y|X}``.

    Subclasses implement :meth:`conditional` and the vectorized
    :meth:`density`; :meth:`sample` maps a uniform draw to an output via the
    conditional inverse c.d.f.
    """

    label = "channel"
    discrete = False

    def conditional(self, x):
        raise NotImplementedError

    def density(self, y, x):
        """Conditional density (or pmf) of `y` given `x`, vectorized."""
        raise NotImplementedError

    def log_density(self, y, x):
        with np.errstate(divide="ignore"):
            return np.log(self.density(y, x))

    def sample(self, x, u):
        """Output for input `x` and uniform draw `u` (extended precision)."""
        raise NotImplementedError

    def sample_array(self, x, u):
        """Float64 vectorized counterpart of :meth:`sample`."""
        raise NotImplementedError

    def kinks_in_x(self, y):
        """Input values where ``density(y, .)`` is not smooth."""
        return ()

    def __repr__(self):
        return f"<{type(self).__name__} {self.label}>"


class DiscreteChannel(MemorylessChannel):
    """Finite-alphabet channel given by a row-stochastic matrix.

    Alphabets are canonicalized to ``{0, ..., |X|-1}`` and
    ``{0, ..., |Y|-1}``.  Entries are stored as exact rationals read from
    their decimal representation.
    """

    discrete = True

    def __init__(self, matrix, label=None):
        rows = [[_frac(v) for v in row] for row in matrix]
        if not rows or len({len(r) for r in rows}) != 1:
            raise ValueError("transition matrix must be rectangular")
        for r in rows:
            if any(v < 0 for v in r):
                raise ValueError("negative transition probability")
            if abs(float(sum(r)) - 1.0) > 1e-12:
                raise ValueError("transition matrix rows must sum to one")
        # exact renormalization keeps rows stochastic in rational arithmetic
        self.exact = tuple(tuple(v / sum(r) for v in r) for r in rows)
        self.matrix = np.array([[float(v) for v in r] for r in self.exact])
        self.nx, self.ny = self.matrix.shape
        self.input_alphabet = tuple(range(self.nx))
        self.output_alphabet = tuple(range(self.ny))
        self._cum = np.cumsum(self.matrix, axis=1)
        self._cum[:, -1] = 1.0
        self.label = label or "dmc{" + ";".join(
            ",".join(f"{v:g}" for v in row) for row in self.matrix) + "}"

    def conditional(self, x):
        return dists.Discrete(range(self.ny), self.exact[int(x)])

    def density(self, y, x):
        return self.matrix[np.asarray(x, dtype=int), np.asarray(y, dtype=int)]

    def sample(self, x, u):
        return int(np.searchsorted(self._cum[int(x)], u, side="right").clip(0, self.ny - 1))

    def sample_array(self, x, u):
        x = np.asarray(x, dtype=int)
        cum = self._cum[x]
        return np.minimum((cum <= np.asarray(u)[..., None]).sum(axis=-1), self.ny - 1)


class AdditiveNoiseChannel(MemorylessChannel):
    """``Y = g(X) + Z`` with `Z` independent of `X`.

    Parameters
    ----------
    noise : ScalarDistribution
        Continuous noise law.
    transform : {"identity", "square"}
        The input map `g`.
    """

    def __init__(self, noise, transform="identity", label=None):
        if noise.kind != dists.CONTINUOUS:
            raise ValueError("noise must be continuous")
        if transform not in ("identity", "square"):
            raise ValueError(f"unknown transform {transform!r}")
        self.noise = noise
        self.transform = transform
        self.input_alphabet = (-math.inf, math.inf)
        base = "add" if transform == "identity" else "square-add"
        self.label = label or f"{base}{{{noise.label}}}"

    def _g(self, x):
        return x * x if self.transform == "square" else x

    def conditional(self, x):
        return dists.Shifted(self.noise, self._g(x))

    def density(self, y, x):
        x = np.asarray(x, dtype=float)
        return self.noise.pdf(np.asarray(y, dtype=float) - self._g(x))

    def log_density(self, y, x):
        x = np.asarray(x, dtype=float)
        return self.noise.logpdf(np.asarray(y, dtype=float) - self._g(x))

    def sample(self, x, u):
        z = float(self.noise.ppf(u))
        return self._g(x) + mpfr(z) if isinstance(x, type(mpfr(0))) else self._g(x) + z

    def sample_array(self, x, u):
        return self._g(np.asarray(x, dtype=float)) + self.noise.ppf(u)

    def kinks_in_x(self, y):
        lo, hi = self.noise.interval()
        pts = [p for p in (lo, hi) if math.isfinite(p)]
        fn = getattr(self.noise, "breakpoints", None)
        pts += list(fn()) if fn else []
        if self.transform == "identity":
            return tuple(y - p for p in pts)
        out = [0.0]
        for p in pts:
            if y - p > 0:
                r = math.sqrt(y - p)
                out += [-r, r]
        return tuple(out)


def gaussian_noise(var=1.0):
    return AdditiveNoiseChannel(dists.Gaussian(0.0, var), label=f"awgn{{{var:g}}}")


def laplace_noise(var=1.0):
    return AdditiveNoiseChannel(dists.Laplace(0.0, var=var), label=f"add_laplace{{{var:g}}}")


def cauchy_noise(scale=1.0):
    return AdditiveNoiseChannel(dists.Cauchy(0.0, scale), label=f"add_cauchy{{{scale:g}}}")


def uniform_noise(width=1.0):
    return AdditiveNoiseChannel(dists.Uniform(0.0, width), label="add_uniform")


def exponential_noise(mean=1.0):
    return AdditiveNoiseChannel(dists.Exponential(mean), label=f"add_exp{{{mean:g}}}")


# ---------------------------------------------------------------------------
# generic numeric laws


class MixtureLaw(dists.ScalarDistribution):
    """Output law ``int P_{Y|X}(.|x) dP_X(x)`` of a continuous channel.

    The c.d.f. and density are tabulated on a grid by adaptive quadrature
    and the c.d.f. is interpolated by the cubic Hermite spline through both;
    the density itself is evaluated on demand.
    """

    def __init__(self, input_law, channel, tol=1e-9, grid=801):
        self.input, self.channel, self.tol = input_law, channel, tol
        lo, hi = self._range()
        self.support = (lo, hi)
        self.label = f"mixture({input_law.label},{channel.label})"
        self._grid = grid
        self._table = None

    def _range(self):
        eps = 1e-12
        xs = []
        for loc, _ in self.input.atoms:
            xs.append(float(loc))
        if self.input.kind != dists.DISCRETE:
            q = self.input.ppf(np.array([eps, 0.5, 1.0 - eps]))
            ilo, ihi = self.input.interval()
            xs += [v for v in q.tolist() if math.isfinite(v)]
            xs += [v for v in (ilo, ihi) if math.isfinite(v)]
        ys = []
        for x in xs:
            c = self.channel.conditional(x)
            clo, chi = c.interval()
            qq = c.ppf(np.array([eps, 1.0 - eps]))
            ys += [clo if math.isfinite(clo) else qq[0], chi if math.isfinite(chi) else qq[1]]
        return (float(min(ys)), float(max(ys)))

    def _kinks(self, y):
        return list(self.channel.kinks_in_x(y))

    def pdf(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.array([expectation(self.input, lambda x, yy=yy: float(self.channel.density(yy, x)),
                                    self.tol, self._kinks(yy)) for yy in y])
        return out

    def _cdf_exact(self, y):
        return expectation(self.input, lambda x: float(self.channel.conditional(x).cdf(y)),
                           self.tol, self._kinks(y))

    def _tabulate(self):
        if self._table is None:
            lo, hi = self.support
            g = np.linspace(lo, hi, self._grid)
            bps = []
            noise = getattr(self.channel, "noise", None)
            if noise is not None:
                for loc, _ in self.input.atoms:
                    bps += [loc + p for p in noise.interval() if math.isfinite(p)]
            g = np.unique(np.concatenate([g, [b for b in bps if lo < b < hi]]))
            c = np.array([self._cdf_exact(v) for v in g])
            c = np.maximum.accumulate(np.clip(c, 0.0, 1.0))
            d = self.pdf(g)
            self._table = (g, c, CubicHermiteSpline(g, c, d, extrapolate=False))
        return self._table

    def cdf(self, y):
        g, c, interp = self._tabulate()
        y = np.asarray(y, dtype=float)
        out = np.clip(interp(np.clip(y, g[0], g[-1])), 0.0, 1.0)
        return np.where(y <= g[0], 0.0, np.where(y >= g[-1], 1.0, out))

    def ppf(self, t):
        g, c, _ = self._tabulate()
        t = np.asarray(t, dtype=float)
        keep = np.concatenate([[True], np.diff(c) > 0])
        return np.interp(t, c[keep], g[keep])

    def cdf_mp(self, y):
        return mpfr(float(self._cdf_exact(float(y))))

    def pdf_mp(self, y):
        return mpfr(float(self.pdf(float(y))[0]))

    def scale(self):
        lo, hi = self.support
        return (hi - lo) / 10


class BayesPosterior(dists.ScalarDistribution):
    """Inverse channel ``P_{X|Y}(.|y)`` by Bayes' rule and quadrature."""

    def __init__(self, pair, y, tol=1e-10):
        self.pair, self.y, self.tol = pair, float(y), tol
        fy = self._evidence()
        if not fy > 0:
            raise UnsupportedOutput(f"output {y!r} has zero density")
        self.fy = fy
        px = pair.input
        self.atoms = tuple((loc, m * float(pair.channel.density(self.y, loc)) / fy)
                           for loc, m in px.atoms)
        self.kind = px.kind
        self.support = px.support
        self.label = f"posterior(y={self.y:g})"

    def _evidence(self):
        ch = self.pair.channel
        return expectation(self.pair.input, lambda x: float(ch.density(self.y, x)),
                           self.tol, ch.kinks_in_x(self.y))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return self.pair.input.pdf(x) * self.pair.channel.density(self.y, x) / self.fy

    def _cdf_scalar(self, x):
        atoms = sum(m for loc, m in self.atoms if loc <= x)
        if self.kind == dists.DISCRETE:
            return atoms
        lo, _ = self.pair.input.interval()
        if x <= lo:
            return atoms
        pts = [p for p in self.pair.channel.kinks_in_x(self.y) if lo < p < x]
        cont = integrate_1d(lambda u: float(self.pdf(u)), lo, x, self.tol, pts)
        return min(1.0, atoms + cont)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.vectorize(self._cdf_scalar, otypes=[float])(x)

    def cdf_mp(self, x):
        return mpfr(self._cdf_scalar(float(x)))

    def scale(self):
        return self.pair.input.scale()


# ---------------------------------------------------------------------------
# pairs


class ConstraintFunction:
    """Per-symbol cost ``eta`` with average bound ``bound``."""

    def __init__(self, eta, bound, label="eta"):
        self.eta, self.bound, self.label = eta, float(bound), label

    def check(self, dist, tol=1e-8):
        """Return ``E|eta(X)|`` under `dist`, raising if it is not finite."""
        val = expectation(dist, lambda x: abs(float(self.eta(x))), tol)
        if not math.isfinite(val):
            raise ValueError("constraint has infinite expectation")
        return val


def empirical_constraint(xs, cf):
    """Average cost ``n^{-1} sum eta(x_k)`` of an input sequence."""
    xs = [float(x) for x in xs]
    if not xs:
        raise ValueError("empty input sequence")
    vals = np.asarray(cf.eta(np.asarray(xs)), dtype=float)
    return float(vals.mean())


class InputChannelPair:
    """Input law together with a memoryless channel.

    Parameters
    ----------
    input : ScalarDistribution
        ``P_X``.
    channel : MemorylessChannel
        ``P_{Y|X}``.
    output : ScalarDistribution, optional
        Closed-form ``P_Y``; computed numerically when omitted.
    label : str, optional
    """

    family = "generic"

    def __init__(self, input, channel, output=None, label=None, tol=1e-9):
        self.input = input
        self.channel = channel
        self.tol = tol
        self._check_alphabet()
        self.output = output if output is not None else output_distribution(self, tol)
        self.label = label or f"{channel.label}|{input.label}"

    def _check_alphabet(self):
        if self.channel.discrete:
            if self.input.kind != dists.DISCRETE:
                raise ValueError("a discrete channel needs a discrete input")
            if set(self.input.values) - set(self.channel.input_alphabet):
                raise ValueError("input support exceeds the channel alphabet")

    @property
    def discrete(self):
        return self.channel.discrete and self.input.kind == dists.DISCRETE

    @property
    def proper(self):
        """True when both ``F_X`` and ``F_Y`` are continuous."""
        return self.input.kind == dists.CONTINUOUS and self.output.kind == dists.CONTINUOUS

    def inverse_channel(self, y):
        return BayesPosterior(self, y, self.tol)

    def closed_form_information(self):
        """Mutual information in bits from a closed form, if known."""
        return None

    @cached_property
    def mutual_information(self):
        """``I(X;Y)`` in bits (closed form when available)."""
        cf = self.closed_form_information()
        return cf if cf is not None else mutual_information(self, self.tol)

    def log2_ratio(self, x, y):
        """``log2 f_{Y|X}(y|x) / f_Y(y)``, the normalized channel log-density."""
        num = self.channel.log_density(y, x)
        den = self._output_logdensity(y)
        return (num - den) / math.log(2.0)

    def _output_logdensity(self, y):
        if self.output.kind == dists.DISCRETE:
            with np.errstate(divide="ignore"):
                return np.log(self.output.pmf(y))
        return self.output.logpdf(y)

    def __repr__(self):
        return f"<{type(self).__name__} {self.label}>"


class DmcPair(InputChannelPair):
    """Discrete input on a discrete memoryless channel.

    All probabilities are carried as exact rationals so that extended
    precision kernels can be built at any precision.
    """

    family = "dmc"

    def __init__(self, matrix, input_pmf, label=None, family=None):
        channel = matrix if isinstance(matrix, DiscreteChannel) else DiscreteChannel(matrix)
        px = [_frac(p) for p in input_pmf]
        if len(px) != channel.nx:
            raise ValueError("input pmf length must match the input alphabet")
        if any(p <= 0 for p in px):
            raise ValueError("all input masses must be positive")
        total = sum(px)
        if abs(float(total) - 1) > 1e-12:
            raise ValueError("input pmf must sum to one")
        self.px_exact = tuple(p / total for p in px)
        self.py_exact = tuple(sum(self.px_exact[x] * channel.exact[x][y] for x in range(channel.nx))
                              for y in range(channel.ny))
        # drop nothing: outputs with zero probability keep zero mass
        self.post_exact = tuple(
            tuple((self.px_exact[x] * channel.exact[x][y] / self.py_exact[y]) if self.py_exact[y] > 0
                  else self.px_exact[x] for x in range(channel.nx))
            for y in range(channel.ny))
        if family is not None:
            self.family = family
        input_law = dists.Discrete(range(channel.nx), self.px_exact)
        output = dists.Discrete(range(channel.ny), self.py_exact)
        super().__init__(input_law, channel, output=output, label=label)

    @property
    def matrix(self):
        return self.channel.matrix

    @property
    def px(self):
        return np.array([float(p) for p in self.px_exact])

    @property
    def py(self):
        return np.array([float(p) for p in self.py_exact])

    def posterior_matrix(self):
        """``P_{X|Y}`` as an array indexed ``[y, x]``."""
        return np.array([[float(v) for v in row] for row in self.post_exact])

    def inverse_channel(self, y):
        y = int(y)
        if not 0 <= y < self.channel.ny:
            raise OutOfSupport(f"output {y} outside the alphabet")
        if self.py_exact[y] == 0:
            raise UnsupportedOutput(f"output {y} has zero probability")
        return dists.Discrete(range(self.channel.nx), self.post_exact[y])

    def log2_ratio(self, x, y):
        x = np.asarray(x, dtype=int)
        y = np.asarray(y, dtype=int)
        with np.errstate(divide="ignore"):
            return np.log2(self.channel.matrix[x, y] / self.py[y])

    def permuted(self, perm):
        """Equivalent pair with inputs reordered: new input j is old ``perm[j]``."""
        perm = list(perm)
        rows = [self.channel.exact[i] for i in perm]
        px = [self.px_exact[i] for i in perm]
        return DmcPair(rows, px, label=f"{self.label}[perm={perm}]")


class AwgnPair(InputChannelPair):
    """Gaussian input ``N(0, P)`` over additive ``N(0, N)`` noise."""

    family = "awgn"

    def __init__(self, snr=3.0, noise_var=1.0):
        self.snr, self.noise_var = float(snr), float(noise_var)
        self.power = self.snr * self.noise_var
        super().__init__(dists.Gaussian(0.0, self.power), gaussian_noise(self.noise_var),
                         output=dists.Gaussian(0.0, self.power + self.noise_var),
                         label=f"awgn{{snr={snr:g},N={noise_var:g}}}")

    def inverse_channel(self, y):
        g = self.snr / (1 + self.snr)
        return dists.Gaussian(g * float(y), self.power / (1 + self.snr))

    def closed_form_information(self):
        return 0.5 * math.log2(1 + self.snr)


class UniformPair(InputChannelPair):
    """Uniform(0,1) input over additive Uniform(0,1) noise."""

    family = "uniform"

    def __init__(self):
        super().__init__(dists.Uniform(0.0, 1.0), uniform_noise(1.0),
                         output=dists.Triangular(0.0, 1.0, 2.0), label="uniform")

    def inverse_channel(self, y):
        y = float(y)
        if not 0 < y < 2:
            raise UnsupportedOutput(f"output {y} outside (0, 2)")
        return dists.Uniform(0.0, y) if y <= 1 else dists.Uniform(y - 1.0, 1.0)

    def closed_form_information(self):
        return 0.5 * math.log2(math.e)


class ExponentialPair(InputChannelPair):
    """Exponential(1) input over additive Exponential(1) noise."""

    family = "exponential"

    def __init__(self):
        super().__init__(dists.Exponential(1.0), exponential_noise(1.0),
                         output=dists.Erlang(2, 1.0), label="exponential")

    def inverse_channel(self, y):
        y = float(y)
        if not y > 0:
            raise UnsupportedOutput("output must be positive")
        return dists.Uniform(0.0, y)

    def closed_form_information(self):
        return EULER_GAMMA / math.log(2.0)


class ExpMeanPair(InputChannelPair):
    """Capacity-achieving input for exponential noise under a mean constraint.

    Noise ``Exponential(mean b)``; input is an atom at zero of mass
    ``b/(a+b)`` plus ``a/(a+b) * Exponential(mean a+b)``, so that
    ``E X = a`` and ``Y ~ Exponential(mean a+b)``.
    """

    family = "exp_mean"

    def __init__(self, a=1.0, b=1.0):
        self.a, self.b = float(a), float(b)
        self.a_exact, self.b_exact = _frac(a), _frac(b)
        w = self.b_exact / (self.a_exact + self.b_exact)
        inp = dists.AtomPlusExponential(float(w), self.a + self.b)
        inp._exact_w = w
        super().__init__(inp, exponential_noise(self.b),
                         output=dists.Exponential(self.a + self.b),
                         label=f"exp_mean{{a={a:g},b={b:g}}}")

    def inverse_channel(self, y):
        y = float(y)
        if not y > 0:
            raise UnsupportedOutput("output must be positive")
        a, b = self.a, self.b
        # posterior: atom at 0 and density prop. to exp(u (1/b - 1/(a+b))) on (0, y)
        kappa = 1.0 / b - 1.0 / (a + b)
        atom = (b / (a + b)) * math.exp(-y / b) / b
        cont = (a / (a + b) ** 2) * math.exp(-y / b) * (math.expm1(kappa * y) / kappa)
        return dists.AtomPlusTruncatedExponential(atom / (atom + cont), kappa, y)

    def closed_form_information(self):
        return math.log2(1 + self.a / self.b)

    def mean_constraint(self):
        return ConstraintFunction(lambda x: x, self.a, label="mean")


# ---------------------------------------------------------------------------
# generic computations


def output_distribution(pair, tol=1e-9):
    """Output law ``P_Y`` of a pair.

    Exact for discrete channels (rational arithmetic); for continuous
    channels the c.d.f. is tabulated by adaptive quadrature of the
    conditional c.d.f. against ``P_X``.
    """
    ch = pair.channel
    if ch.discrete:
        inp = pair.input
        py = [Fraction(0)] * ch.ny
        for x, px in zip(inp.values, inp._exact):
            for y in range(ch.ny):
                py[y] += _frac(px) * ch.exact[int(x)][y]
        return dists.Discrete(range(ch.ny), py)
    return MixtureLaw(pair.input, ch, tol)


def inverse_channel(pair, y):
    """``P_{X|Y}(.|y)``: closed form for zoo pairs, Bayes' rule otherwise."""
    return pair.inverse_channel(y)


def _conditional_divergence(pair, x, tol):
    ch, out = pair.channel, pair.output
    cond = ch.conditional(x)
    lo, hi = cond.interval()
    pts = list(dists.Shifted(ch.noise, 0.0).breakpoints()) if hasattr(ch, "noise") else []
    shift = float(cond.shift) if hasattr(cond, "shift") else 0.0
    pts = [p + shift for p in pts]
    fn = getattr(out, "breakpoints", None)
    pts += list(fn()) if fn else []

    def integrand(y):
        p = float(cond.pdf(y))
        if p <= 0:
            return 0.0
        return p * (math.log(p) - float(out.logpdf(y)))

    return integrate_1d(integrand, lo, hi, tol, pts) / math.log(2.0)


def mutual_information(pair, tol=1e-9):
    """``I(X;Y)`` in bits.

    Exact finite sum for discrete pairs; otherwise the nested integral
    ``E_X D(P_{Y|X} || P_Y)`` by adaptive quadrature.
    """
    if pair.discrete:
        w = pair.channel.matrix
        px = np.array([float(p) for p in pair.input.probs])
        py = px @ w
        total = 0.0
        for x in range(w.shape[0]):
            for y in range(w.shape[1]):
                if w[x, y] > 0:
                    total += px[x] * w[x, y] * math.log2(w[x, y] / py[y])
        return total
    return expectation(pair.input, lambda x: _conditional_divergence(pair, x, tol), tol)


def capacity_dmc(channel, tol=1e-9, max_iter=100000):
    """Capacity of a DMC by Blahut-Arimoto.

    Iterates until the standard upper and lower capacity bounds differ by at
    most `tol`.

    Returns
    -------
    capacity : float
        Bits per use.
    input : Discrete
        Capacity achieving input law.
    """
    if not getattr(channel, "discrete", False):
        raise NotDiscrete("capacity_dmc needs a discrete channel")
    w = channel.matrix
    p = np.full(w.shape[0], 1.0 / w.shape[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        logw = np.where(w > 0, np.log2(w), 0.0)
    lower = upper = 0.0
    for _ in range(max_iter):
        q = p @ w
        with np.errstate(divide="ignore", invalid="ignore"):
            logq = np.where(q > 0, np.log2(q), 0.0)
        d = (w * (logw - logq)).sum(axis=1)
        c = np.exp2(d)
        lower = math.log2(float(p @ c))
        upper = float(d.max())
        if upper - lower <= tol:
            break
        p = p * c
        p /= p.sum()
    return 0.5 * (lower + upper), dists.Discrete(range(w.shape[0]), p.tolist())


# ---------------------------------------------------------------------------
# zoo


def bsc(p=0.2, input_p=0.5):
    """Binary symmetric channel with crossover `p` and Bernoulli input."""
    q = _frac(p)
    pair = DmcPair([[1 - q, q], [q, 1 - q]], [1 - _frac(input_p), _frac(input_p)],
                   label=f"bsc{{{float(p):g}}}", family="bsc")
    pair.p = float(p)
    return pair


def bec(erasure=None, p=None):
    """Binary erasure channel with uniform input.

    Give either the erasure probability `erasure` or the probability `p`
    that the output equals the input; capacity is ``1 - erasure = p``.
    Outputs are ``0, 1`` and ``2`` for the erasure.
    """
    if (erasure is None) == (p is None):
        raise ValueError("give exactly one of erasure, p")
    eps = _frac(erasure) if erasure is not None else 1 - _frac(p)
    pair = DmcPair([[1 - eps, 0, eps], [0, 1 - eps, eps]], [Fraction(1, 2)] * 2,
                   label=f"bec{{erasure={float(eps):g}}}", family="bec")
    pair.erasure = float(eps)
    return pair


def dmc(matrix, input_pmf=None, label=None):
    """General DMC pair; the input defaults to uniform."""
    rows = list(matrix)
    if input_pmf is None:
        input_pmf = [Fraction(1, len(rows))] * len(rows)
    return DmcPair(rows, input_pmf, label=label)


def useless_dmc(row=(0.3, 0.7), n_inputs=2):
    """DMC whose output law does not depend on the input."""
    return DmcPair([list(row)] * n_inputs, [Fraction(1, n_inputs)] * n_inputs,
                   label="useless")


def awgn(snr=3.0, noise_var=1.0):
    return AwgnPair(snr, noise_var)


def uniform_pair():
    return UniformPair()


def exponential_pair():
    return ExponentialPair()


def exp_mean_pair(a=1.0, b=1.0):
    return ExpMeanPair(a, b)


def square_law_pair(noise_var=0.25, input_var=1.0, tol=1e-9):
    """``Y = X^2 + Z`` with symmetric Gaussian input (numeric kernels)."""
    return InputChannelPair(dists.Gaussian(0.0, input_var),
                            AdditiveNoiseChannel(dists.Gaussian(0.0, noise_var), "square"),
                            label=f"square_law{{N={noise_var:g}}}", tol=tol)


def square_law_dmc(levels=(-2, -1, 1, 2), noise_levels=3, flip=Fraction(1, 5)):
    """Discretized ``Y = X^2 + Z``: outputs depend on the input only through ``|X|``.

    Inputs are the symmetric `levels` with uniform law; the output is the
    index of ``X^2`` among the distinct squares, moved to a neighbouring
    index with total probability `flip`.
    """
    squares = sorted({v * v for v in levels})
    ny = max(len(squares), noise_levels)
    rows = []
    for v in levels:
        k = squares.index(v * v)
        row = [Fraction(0)] * ny
        nbrs = [j for j in (k - 1, k + 1) if 0 <= j < ny]
        row[k] = 1 - _frac(flip)
        for j in nbrs:
            row[j] += _frac(flip) / len(nbrs)
        rows.append(row)
    n = len(levels)
    return DmcPair(rows, [Fraction(1, n)] * n, label="square_law_dmc")
