"""Contraction analysis of the reverse iterated function system (RIFS).

The decoders pull intervals back through the inverse kernels
``omega_y``.  How fast such intervals shrink is governed by averaged
Lipschitz constants of ``omega_y``, and this module evaluates the two
resulting rate thresholds numerically:

* :func:`r_dagger`, the weighted local-slope threshold, valid for any pair;
* :func:`r_star`, the shaped two-point threshold for continuous inputs,
  together with the closed form :func:`r_star_separable`.

Tail functions turn a threshold into a target error schedule for the
variable rate decoder.  All computations are float64; suprema over
continuous arguments are taken on quantile grids followed by local
refinement, and the maximising locations are reported.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .core import distributions as dists
from .core.errors import NotSeparable, RateAboveThreshold
from .core.quadrature import expectation, quantile_nodes
from .matching.kernels import DmcKernel, kernel_for

R_DAGGER = "r_dagger"
R_STAR = "r_star"
R_STAR_SEPARABLE = "r_star_separable"

DEFAULT_Q_SCHEDULE = tuple(2.0 ** -k for k in range(9))


# ---------------------------------------------------------------------------
# weight and shaping functions


class WeightFunction:
    """Continuous weight ``rho: (0, 1) -> [1, inf)``.

    Parameters
    ----------
    rho : callable
        Vectorized over float arrays.
    label : str
    check : bool
        Verify ``rho >= 1`` on a 1e4-point grid.
    """

    def __init__(self, rho, label="rho", check=True):
        self.rho = rho
        self.label = label
        if check:
            self.validate()

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return np.broadcast_to(np.asarray(self.rho(s), dtype=float), s.shape)

    def validate(self, n=10_000):
        s = (np.arange(n) + 0.5) / n
        v = self(s)
        if not np.all(np.isfinite(v)):
            raise ValueError(f"weight {self.label} is not finite on (0, 1)")
        if np.any(v < 1.0):
            raise ValueError(f"weight {self.label} drops below one")
        return True

    def sup_between(self, a, b, points=65):
        """``sup rho`` over the segment between `a` and `b`."""
        lo, hi = min(a, b), max(a, b)
        return float(np.max(self(np.linspace(lo, hi, points))))

    @classmethod
    def constant(cls, c=1.0):
        return cls(lambda s: np.full_like(s, float(c)), label=f"const({c:g})")

    @classmethod
    def power(cls, beta):
        """``s^-beta``, at least one on (0, 1) for beta >= 0."""
        return cls(lambda s: s ** -float(beta), label=f"s^-{beta:g}")

    @classmethod
    def symmetric(cls, beta):
        """``(2 min(s, 1-s))^-beta``, blowing up at both ends."""
        return cls(lambda s: (2 * np.minimum(s, 1 - s)) ** -float(beta),
                   label=f"sym^-{beta:g}")

    def __repr__(self):
        return f"WeightFunction({self.label})"


class ShapingFunction:
    """Strictly monotone differentiable map of the input support.

    Parameters
    ----------
    rho, inverse, derivative : callable
        Vectorized map, its inverse and its derivative.
    increasing : bool
    label : str
    """

    def __init__(self, rho, inverse, derivative, increasing=True, label="rho"):
        self.rho, self.inverse, self.derivative = rho, inverse, derivative
        self.increasing = bool(increasing)
        self.label = label

    def __call__(self, x):
        return self.rho(np.asarray(x, dtype=float))

    def validate(self, input_dist, n=2001, density_bound=1e8):
        """Check monotonicity, the inverse and boundedness of the shaped density.

        Raises
        ------
        ValueError
            On the first failed check.
        """
        x = _grid_points(input_dist, _levels(n, 25.0))
        x = x[np.isfinite(x)]
        with np.errstate(all="ignore"):
            s = self(x)
            back = self.inverse(s)
            slope = self.derivative(x)
            dens = input_dist.pdf(x) / np.abs(slope)
        steps = np.diff(s)
        if not (np.all(steps > 0) if self.increasing else np.all(steps < 0)):
            raise ValueError(f"shaping {self.label} is not strictly monotone on the support")
        err = np.abs(back - x) / np.maximum(1.0, np.abs(x))
        if np.max(err) > 1e-12:
            raise ValueError(f"inverse of {self.label} is off by {np.max(err):.3g}")
        dens = dens[np.isfinite(x)]
        if not np.all(np.isfinite(dens)) or np.max(dens) > density_bound:
            raise ValueError(f"density of {self.label}(X) is unbounded")
        return True

    def shaped_law(self, input_dist):
        """Law of ``rho(X)``."""
        return dists.Transformed(input_dist, self.rho, self.inverse,
                                 increasing=self.increasing,
                                 label=f"{self.label}({input_dist.label})")

    @classmethod
    def identity(cls):
        return cls(lambda x: x, lambda s: s, lambda x: np.ones_like(x), True, "identity")

    @classmethod
    def power(cls, beta):
        """``x^-beta`` on a positive support (decreasing)."""
        beta = float(beta)

        def pw(v, e):
            with np.errstate(divide="ignore", over="ignore"):
                return np.asarray(v, dtype=float) ** e

        return cls(lambda x: pw(x, -beta), lambda s: pw(s, -1.0 / beta),
                   lambda x: -beta * pw(x, -beta - 1.0), False, f"x^-{beta:g}")

    @classmethod
    def inverse_sqrt(cls):
        sh = cls.power(0.5)
        sh.label = "x^-1/2"
        return sh

    def __repr__(self):
        return f"ShapingFunction({self.label})"


WEIGHTS = {"constant": WeightFunction.constant, "power": WeightFunction.power,
           "symmetric": WeightFunction.symmetric}
SHAPINGS = {"identity": ShapingFunction.identity, "power": ShapingFunction.power,
            "inverse_sqrt": ShapingFunction.inverse_sqrt}


# ---------------------------------------------------------------------------
# reports


@dataclass
class ThresholdReport:
    """Numeric rate threshold with its extremal certificate.

    Attributes
    ----------
    value : float
        Threshold in bits; ``-inf`` when the defining expectation diverges.
    kind : str
        One of ``r_dagger``, ``r_star``, ``r_star_separable``.
    rho_label : str
    q_schedule, q_values : tuple of float
        Two-point thresholds per exponent (``r_star`` only).
    argmax : tuple of float
        Location of the supremum.
    grid : dict
        Grid sizes and refinement rounds.
    flags : tuple of str
        ``nonpositive``, ``diverged``, ``non_monotone``.
    diagnostics : dict
    """

    value: float
    kind: str
    rho_label: str
    q_schedule: tuple = ()
    q_values: tuple = ()
    argmax: tuple = ()
    grid: dict = field(default_factory=dict)
    flags: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    @property
    def nonpositive(self):
        return not self.value > 0

    def to_text(self):
        """Key-value block, one ``key: value`` per line."""
        def nums(v):
            return ",".join(repr(float(x)) for x in v)

        lines = [f"kind: {self.kind}", f"rho: {self.rho_label}",
                 f"value_bits: {float(self.value)!r}", f"argmax_s: {nums(self.argmax)}",
                 f"q_schedule: {nums(self.q_schedule)}", f"q_values: {nums(self.q_values)}",
                 "grid: " + ",".join(f"{k}={v}" for k, v in sorted(self.grid.items())),
                 f"flags: {','.join(self.flags)}"]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        kv = {}
        for line in text.strip().splitlines():
            key, _, val = line.partition(":")
            kv[key.strip()] = val.strip()

        def nums(v):
            return tuple(float(x) for x in v.split(",")) if v else ()

        grid = {}
        for item in filter(None, kv.get("grid", "").split(",")):
            k, _, v = item.partition("=")
            grid[k] = int(v) if v.lstrip("-").isdigit() else v
        return cls(value=float(kv["value_bits"]), kind=kv["kind"], rho_label=kv["rho"],
                   q_schedule=nums(kv.get("q_schedule", "")),
                   q_values=nums(kv.get("q_values", "")),
                   argmax=nums(kv.get("argmax_s", "")), grid=grid,
                   flags=tuple(filter(None, kv.get("flags", "").split(","))))


# ---------------------------------------------------------------------------
# Lipschitz operators


def lipschitz_global(f, s, t):
    """Two-point Lipschitz ratio ``|f(s) - f(t)| / |s - t|``."""
    if s == t:
        raise ValueError("need s != t")
    return abs(float(f(s)) - float(f(t))) / abs(s - t)


def lipschitz_local(f, s, lo=-math.inf, hi=math.inf, h=None, tol=1e-9, max_iter=30):
    """Local slope of `f` at `s` by finite differences with step halving.

    The step starts at ``1e-3 max(1, |s|)`` and is halved until two
    consecutive estimates agree to `tol` (relative) or the step reaches
    the rounding floor.  Symmetric differences are used away from the ends
    of ``(lo, hi)`` and one-sided differences pointing inward near them.
    At a kink the symmetric estimate is the mean of the one-sided slopes.
    """
    s = float(s)
    if not lo < s < hi:
        raise ValueError("s must lie inside (lo, hi)")
    scale = max(1.0, abs(s))
    if h is None:
        h = 1e-3 * scale
    floor = 1e-7 * scale
    prev = None
    for _ in range(max_iter):
        if s - h > lo and s + h < hi:
            d = abs(float(f(s + h)) - float(f(s - h))) / (2 * h)
        elif s + 2 * h < hi:
            d = abs(float(f(s + h)) - float(f(s))) / h
        elif s - 2 * h > lo:
            d = abs(float(f(s)) - float(f(s - h))) / h
        else:
            d = None
        if d is not None:
            if prev is not None and abs(d - prev) <= tol * max(1.0, abs(d)):
                return d
            prev = d
        if h < floor and prev is not None:
            return prev
        h *= 0.5
    return prev


def _local_slopes(values, s, lo, hi, rel=1e-6):
    """Symmetric-difference slopes of a family ``values(s) -> (len(s), K)``."""
    s = np.asarray(s, dtype=float)
    h = rel * np.maximum(1.0, np.abs(s))
    h = np.minimum(h, 0.5 * np.minimum(s - lo, hi - s))
    h = np.where(h > 0, h, np.finfo(float).tiny)
    up = values(s + h)
    down = values(s - h)
    return np.abs(up - down) / (2 * h)[:, None]


# ---------------------------------------------------------------------------
# inverse kernel families


class InverseFamily:
    """Inverse kernels on a quadrature set of outputs, in float64.

    Attributes
    ----------
    domain : {"normalized", "input"}
        Coordinates of the argument ``s``.
    weights : ndarray
        Quadrature or Monte Carlo weights of the outputs (sum to one).
    lo, hi : float
        Interval of admissible arguments.
    """

    def __init__(self, pair, domain="auto", level=5, mc_samples=None, seed=0):
        self.pair = pair
        self.kernel = kernel_for(pair)
        k = self.kernel
        closed_x = hasattr(k, "inv_x_array")
        if domain == "auto":
            domain = "input" if closed_x else "normalized"
        if domain == "input" and not closed_x:
            raise ValueError(f"no input-domain inverse kernel for {pair.label}")
        self.domain = domain
        self.discrete = isinstance(k, DmcKernel)
        out = pair.output
        if self.discrete:
            if mc_samples:
                rng = np.random.default_rng(seed)
                cells = np.searchsorted(k._fcy[1:], rng.random(int(mc_samples)), side="right")
                self.nodes = np.minimum(cells, k.ny - 1)
                self.weights = np.full(len(self.nodes), 1.0 / len(self.nodes))
            else:
                self.nodes = np.arange(k.ny)
                self.weights = np.asarray(pair.py, dtype=float)
        elif mc_samples:
            rng = np.random.default_rng(seed)
            phi = rng.random(int(mc_samples))
            self.nodes = np.asarray(out.ppf(phi), dtype=float)
            self.weights = np.full(len(phi), 1.0 / len(phi))
        else:
            self.nodes, self.weights = quantile_nodes(out, level)
        self.phis = None if self.discrete else np.clip(np.asarray(out.cdf(self.nodes), float), 0, 1)
        if domain == "input":
            self.lo, self.hi = pair.input.interval()
        else:
            self.lo, self.hi = 0.0, 1.0

    def points(self, levels):
        """Arguments at quantile `levels` of the input law (or the levels)."""
        if self.domain == "normalized":
            return np.asarray(levels, dtype=float)
        return _grid_points(self.pair.input, levels)

    def theta(self, s):
        """Normalized coordinate of `s`."""
        s = np.asarray(s, dtype=float)
        return s if self.domain == "normalized" else np.asarray(self.pair.input.cdf(s), float)

    def values(self, s):
        """Matrix ``omega_{y_k}(s_i)``."""
        s = np.asarray(s, dtype=float)
        k = self.kernel
        if self.discrete:
            return np.stack([k.inverse_array_y(s, int(y)) for y in self.nodes], axis=1)
        y = self.nodes[None, :]
        with np.errstate(all="ignore"):
            if self.domain == "input":
                return k.inv_x_array(s[:, None], y)
            if hasattr(k, "inv_x_array"):
                px = self.pair.input
                x = np.asarray(px.ppf(s), float)[:, None]
                return np.asarray(px.cdf(k.inv_x_array(x, y)), float)
        return np.stack([k.inverse_array(s, ph) for ph in self.phis], axis=1)

    def slopes(self, s):
        """Matrix of local slopes ``D_s(omega_{y_k})``."""
        s = np.asarray(s, dtype=float)
        if self.discrete:
            k = self.kernel
            return np.stack([np.broadcast_to(k.inverse_slope_y(s, int(y))[1], s.shape)
                             for y in self.nodes], axis=1)
        return _local_slopes(self.values, s, self.lo, self.hi)


def _levels(n, span):
    """Logit-spaced quantile levels reaching ``expit(-span)`` at the ends."""
    return special.expit(np.linspace(-span, span, n))


def _grid_points(dist, levels):
    """Quantiles of `dist` at `levels`, using the upper tail above one half."""
    levels = np.asarray(levels, dtype=float)
    out = np.empty_like(levels)
    low = levels <= 0.5
    out[low] = dist.ppf(levels[low])
    if (~low).any():
        out[~low] = dist.isf(1.0 - levels[~low])
    return out


def _grid_points_logit(dist, x):
    """Quantiles at ``expit(x)`` with the upper tail taken as ``expit(-x)``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    low = x <= 0
    out[low] = dist.ppf(special.expit(x[low]))
    if (~low).any():
        out[~low] = dist.isf(special.expit(-x[~low]))
    return out


# ---------------------------------------------------------------------------
# R dagger


def r_dagger(pair, rho=None, s_grid=512, mc_samples=None, domain="auto", level=6,
             refine=3, span=12.0, seed=0):
    """Weighted contraction threshold ``-log2 sup_s E[rho(w(s))/rho(s) D_s(w)]``.

    Parameters
    ----------
    pair : InputChannelPair
    rho : WeightFunction, optional
        Defaults to the constant weight one.
    s_grid : int
        Points of the logit-spaced grid of arguments.
    mc_samples : int, optional
        Monte Carlo draws of the output instead of quadrature.
    domain : {"auto", "normalized", "input"}
        ``input`` runs the inverse kernel on the input support, where
        linear Gaussian kernels have constant slope; the weight is then
        evaluated at ``F_X`` of its argument.  ``auto`` picks ``input``
        for closed-form continuous kernels.
    level : int
        Tanh-sinh level of the output quadrature.

    Returns
    -------
    ThresholdReport
        ``value = -inf`` with flag ``diverged`` when the expectation is not
        finite at some argument.
    """
    rho = rho or WeightFunction.constant(1.0)
    fam = InverseFamily(pair, domain, level, mc_samples, seed)

    def objective(x):
        s = fam.points(special.expit(x))
        th = fam.theta(s)
        with np.errstate(all="ignore"):
            ratio = rho(fam.theta(fam.values(s))) / rho(th)[:, None]
            terms = ratio * fam.slopes(s)
        terms = np.where(fam.weights[None, :] > 0, terms, 0.0)
        return terms @ fam.weights

    grid = np.linspace(-span, span, s_grid)
    best_x, best = _refine_max(objective, grid, refine)
    s_best = float(fam.points(special.expit(np.array([best_x])))[0])
    flags = []
    if not math.isfinite(best):
        value = -math.inf
        flags.append("diverged")
    else:
        value = -math.log2(best)
    if not value > 0:
        flags.append("nonpositive")
    diag = {"sup_expectation": best, "domain": fam.domain}
    try:
        with np.errstate(all="ignore"):
            sl = fam.slopes(np.array([s_best]))[0]
        diag["integrand_samples"] = tuple(float(v) for v in sl[:: max(1, len(sl) // 8)])
    except Exception:  # diagnostics only
        pass
    return ThresholdReport(value=value, kind=R_DAGGER, rho_label=rho.label, argmax=(s_best,),
                           grid={"s_grid": s_grid, "refine": refine, "nodes": len(fam.weights)},
                           flags=tuple(flags), diagnostics=diag)


def _refine_max(objective, grid, rounds, points=33):
    """Grid maximum of a vectorized objective with local refinement."""
    vals = np.asarray(objective(grid), dtype=float)
    if np.any(np.isnan(vals)) or np.any(np.isinf(vals)):
        bad = ~np.isfinite(vals)
        i = int(np.argmax(bad))
        return float(grid[i]), math.inf
    i = int(np.argmax(vals))
    x, best = float(grid[i]), float(vals[i])
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    for _ in range(rounds):
        sub = np.linspace(lo, hi, points)
        v = np.asarray(objective(sub), dtype=float)
        j = int(np.nanargmax(v))
        if v[j] > best:
            x, best = float(sub[j]), float(v[j])
        step = (hi - lo) / (points - 1)
        lo, hi = x - step, x + step
    return x, best


# ---------------------------------------------------------------------------
# R star


def _shaping_family(pair, level, mc_samples=None, seed=0):
    if pair.discrete:
        raise ValueError("the shaped threshold needs a continuous input")
    return InverseFamily(pair, "auto", level, mc_samples, seed)


def r_star(pair, rho=None, q_schedule=DEFAULT_Q_SCHEDULE, grid=512, level=5, refine=3,
           span=30.0, tol=0.02, chunk_bytes=32 << 20):
    """Shaped two-point threshold approximated on a finite exponent schedule.

    For each exponent ``q`` the value ``-(1/q) log2 sup_{s != t} E D_{s,t}^q``
    of the map ``rho o omega_Y o rho^{-1}`` is computed on a grid of pairs
    in the range of `rho` (quantiles of ``rho(X)`` at logit-spaced levels),
    then refined around the maximising pair.

    Parameters
    ----------
    pair : InputChannelPair
        Continuous input required.
    rho : ShapingFunction, optional
        Identity by default.
    q_schedule : sequence of float
        Decreasing positive exponents; the value at the last one is reported.
    grid : int
        Grid points per axis.
    tol : float
        Allowed violation (bits) of monotonicity in ``q`` before the
        ``non_monotone`` flag is raised.

    Returns
    -------
    ThresholdReport
    """
    rho = rho or ShapingFunction.identity()
    qs = np.asarray(q_schedule, dtype=float)
    if qs.ndim != 1 or len(qs) == 0 or np.any(qs <= 0) or np.any(np.diff(qs) >= 0):
        raise ValueError("q_schedule must be strictly decreasing positives")
    fam = _shaping_family(pair, level)
    w = fam.weights

    def shaped(xlogit):
        x = fam.points(special.expit(xlogit)) if fam.domain == "normalized" \
            else _grid_points_logit(pair.input, xlogit)
        with np.errstate(all="ignore"):
            s = rho(x)
            h = rho(fam.values(x))
        return s, h

    xg = np.linspace(-span, span, grid)
    s, h = shaped(xg)
    ok = np.isfinite(s) & np.all(np.isfinite(h), axis=1)
    xg, s, h = xg[ok], s[ok], h[ok]

    best = np.full(len(qs), -np.inf)
    where = [(0, 0)] * len(qs)
    rows = max(1, int(chunk_bytes // (8 * len(xg) * len(w) * 2)))
    for i0 in range(0, len(xg), rows):
        i1 = min(i0 + rows, len(xg))
        logd = _log_ratios(s[i0:i1], h[i0:i1], s, h)
        for k, q in enumerate(qs):
            with np.errstate(all="ignore"):
                ev = np.exp(q * logd) @ w
            ev = np.where(np.isnan(ev), -np.inf, ev)
            j = int(np.argmax(ev))
            r, c = divmod(j, ev.shape[1])
            if ev[r, c] > best[k]:
                best[k] = ev[r, c]
                where[k] = (xg[i0 + r], xg[c])

    # local refinement in logit coordinates around each maximising pair
    step = (xg[1] - xg[0]) if len(xg) > 1 else 1.0
    refined = []
    for k, q in enumerate(qs):
        a, b = where[k]
        val, loc = best[k], (a, b)
        st = step
        for _ in range(refine):
            sa, ha = shaped(np.linspace(a - st, a + st, 17))
            sb, hb = shaped(np.linspace(b - st, b + st, 17))
            logd = _log_ratios(sa, ha, sb, hb)
            with np.errstate(all="ignore"):
                ev = np.exp(q * logd) @ w
            ev = np.where(np.isnan(ev), -np.inf, ev)
            r, c = np.unravel_index(int(np.argmax(ev)), ev.shape)
            if ev[r, c] > val:
                val = float(ev[r, c])
                a = float(np.linspace(a - st, a + st, 17)[r])
                b = float(np.linspace(b - st, b + st, 17)[c])
                loc = (a, b)
            st /= 8
        refined.append((val, loc))

    values, locs = [], []
    for k, q in enumerate(qs):
        val, loc = refined[k]
        values.append(-math.log2(val) / q if val > 0 and math.isfinite(val) else -math.inf)
        sa, _ = shaped(np.array(loc))
        locs.append(tuple(float(v) for v in sa))
    flags = []
    if any(values[k + 1] < values[k] - tol for k in range(len(values) - 1)):
        flags.append("non_monotone")
    value = values[-1]
    if not math.isfinite(value):
        flags.append("diverged")
    if not value > 0:
        flags.append("nonpositive")
    return ThresholdReport(
        value=value, kind=R_STAR, rho_label=rho.label, q_schedule=tuple(float(q) for q in qs),
        q_values=tuple(values), argmax=locs[-1],
        grid={"grid": grid, "refine": refine, "nodes": len(w), "domain": fam.domain},
        flags=tuple(flags), diagnostics={"argmax_per_q": locs, "sup_expectations": [r[0] for r in refined]})


def _log_ratios(s1, h1, s2, h2, min_sep=1e-7):
    """``log D_{s,t}`` for all pairs.

    Pairs closer than `min_sep` relative to their magnitude are set to NaN:
    their difference quotients are dominated by rounding.
    """
    ds = s2[None, :] - s1[:, None]
    dh = h2[None, :, :] - h1[:, None, :]
    with np.errstate(all="ignore"):
        out = np.log(np.abs(dh)) - np.log(np.abs(ds))[:, :, None]
    mag = np.maximum(1.0, np.maximum(np.abs(s1)[:, None], np.abs(s2)[None, :]))
    out[np.abs(ds) <= min_sep * mag] = np.nan
    return out


def rate_shortfall_bound(report, rate, n, span=1.0):
    """Chernoff bound on ``P(R_n < rate)`` from the two-point thresholds.

    Uses ``|s - t|^q 2^(n q (rate - value_q))`` minimised over the report's
    exponents, with `span` bounding the initial interval length in the
    range of the shaping function.
    """
    best = 1.0
    for q, v in zip(report.q_schedule, report.q_values):
        if v > rate:
            best = min(best, span ** q * 2.0 ** (n * q * (rate - v)))
    return best


def known_separable(pair, rho):
    """Factors ``(u, v)`` of a separable shaped inverse kernel, if catalogued.

    Raises
    ------
    NotSeparable
        When no closed form is known for the combination.
    """
    fam = getattr(pair, "family", "")
    if rho.label == "identity" and fam == "awgn":
        g = 1.0 / math.sqrt(1.0 + pair.snr)
        return (lambda s: s), (lambda y: np.full_like(np.asarray(y, float), g))
    if rho.label == "identity" and fam == "uniform":
        return (lambda s: s), (lambda y: pair.output.pdf(y))
    if rho.label == "identity" and fam == "exponential":
        return (lambda s: -np.expm1(-np.asarray(s, float))), (lambda y: np.asarray(y, float))
    if rho.label == "x^-1/2" and fam == "exponential":
        return ((lambda s: (-np.expm1(-np.asarray(s, float) ** -2.0)) ** -0.5),
                (lambda y: np.asarray(y, float) ** -0.5))
    raise NotSeparable(f"no catalogued factorization for {rho.label} on {pair.label}")


def r_star_separable(pair, rho, u=None, v=None, check_grid=32, tol=1e-9, quad_tol=1e-11,
                     grid=512, span=30.0):
    """Closed-form shaped threshold ``-E log2|v(Y)| - log2 sup_s |u'(s)|``.

    The factorization ``rho(omega_y(rho^{-1}(s))) = u(s) v(y) + q(y)`` is
    verified on a ``check_grid`` square grid first, with ``q`` recovered
    from the middle column.

    Raises
    ------
    NotSeparable
        When the identity fails by more than `tol` (relative).
    """
    if u is None or v is None:
        u, v = known_separable(pair, rho)
    fam = _shaping_family(pair, 4)
    mid = (np.arange(check_grid) + 0.5) / check_grid
    x = fam.points(mid)
    ys = np.asarray(pair.output.ppf(mid), dtype=float)
    k = fam.kernel
    with np.errstate(all="ignore"):
        if fam.domain == "input":
            om = k.inv_x_array(x[:, None], ys[None, :])
        else:
            om = np.stack([k.inverse_array(x, ph) for ph in mid], axis=1)
        h = rho(om)
        s = rho(x)
        us = np.asarray(u(s), dtype=float)
        vy = np.asarray(v(ys), dtype=float)
    c = check_grid // 2
    qy = h[c] - us[c] * vy
    resid = np.abs(h - (us[:, None] * vy[None, :] + qy[None, :]))
    scale = np.maximum(1.0, np.abs(h))
    worst = float(np.nanmax(resid / scale)) if np.all(np.isfinite(resid)) else math.inf
    if not worst <= tol:
        raise NotSeparable(f"separable form fails by {worst:.3g} for {rho.label} on {pair.label}")

    def logv(y):
        with np.errstate(divide="ignore"):
            return math.log2(abs(float(v(np.array([y]))[0])))

    e_logv = expectation(pair.output, logv, tol=quad_tol)

    # sup |u'| over the range of rho
    lo_s, hi_s = sorted(float(t) for t in rho.shaped_law(pair.input).interval())

    def du(xl):
        pts = _grid_points_logit(pair.input, np.atleast_1d(xl)) if fam.domain == "input" \
            else special.expit(np.atleast_1d(xl))
        sv = rho(pts)
        return np.array([lipschitz_local(lambda t: float(u(np.array([t]))[0]), float(t), lo_s, hi_s)
                         if lo_s < t < hi_s else 0.0 for t in sv])

    xg = np.linspace(-span, span, grid)
    x_best, sup_du = _refine_max(du, xg, 3, points=17)
    s_best = float(rho(_grid_points_logit(pair.input, np.array([x_best])))[0]) \
        if fam.domain == "input" else float(rho(special.expit(x_best)))
    value = -e_logv - math.log2(sup_du)
    flags = () if value > 0 else ("nonpositive",)
    return ThresholdReport(value=value, kind=R_STAR_SEPARABLE, rho_label=rho.label,
                           argmax=(s_best,), grid={"check_grid": check_grid, "grid": grid},
                           flags=flags, diagnostics={"e_log2_v": e_logv, "sup_du": sup_du,
                                                     "separability_error": worst})


# ---------------------------------------------------------------------------
# tail functions and schedules


def _symmetric_centre(dist):
    """Centre of a symmetric unimodal law, or None."""
    if isinstance(dist, (dists.Gaussian, dists.Laplace)):
        return dist.mu
    if isinstance(dist, dists.Cauchy):
        return dist.loc
    if isinstance(dist, dists.Uniform):
        return 0.5 * (dist.lo + dist.hi)
    if isinstance(dist, dists.Triangular) and abs(dist.c - 0.5 * (dist.a + dist.b)) < 1e-15:
        return dist.c
    return None


def _outside(dist, x, ell):
    """``1 - P(x < X < x + ell)``."""
    x = np.asarray(x, dtype=float)
    return np.asarray(dist.cdf(x), float) + np.asarray(dist.sf(x + ell), float) \
        + np.asarray(dist.pmf(x + ell), float)


def tail_function(dist, ell, grid=512, refine=3):
    """Smallest probability left outside an open interval of length `ell`.

    Symmetric unimodal laws use the centred window; other laws minimise
    ``F(x) + P(X >= x + ell)`` over a quantile grid of window starts,
    followed by bounded scalar refinement.
    """
    ell = float(ell)
    if ell < 0:
        raise ValueError("ell must be nonnegative")
    if ell == 0:
        return 1.0
    lo, hi = dist.interval()
    if ell >= hi - lo and not dist.atoms:
        return 0.0
    m = _symmetric_centre(dist)
    if m is not None:
        val = float(_outside(dist, m - 0.5 * ell, ell))
        return min(max(val, 0.0), 1.0)
    levels = _levels(grid, 30.0)
    with np.errstate(all="ignore"):
        q = _grid_points(dist, levels) if dist.kind != dists.DISCRETE \
            else np.array([a for a, _ in dist.atoms], dtype=float)
    q = q[np.isfinite(q)]
    starts = np.unique(np.concatenate([q, q - ell, [a for a, _ in dist.atoms]]))
    if math.isfinite(lo):
        starts = np.append(starts, lo)
    starts = starts[np.isfinite(starts)]
    cand = [float(v) for v in _outside(dist, starts, ell)]
    # left limits at atoms: the window may start just below an atom
    for a, mass in dist.atoms:
        cand.append(float(dist.cdf(a)) - mass + float(dist.sf(a + ell)) + float(dist.pmf(a + ell)))
    best = min(cand)
    if dist.kind != dists.DISCRETE and len(starts) > 2:
        vals = _outside(dist, starts, ell)
        i = int(np.argmin(vals))
        a, b = starts[max(i - 1, 0)], starts[min(i + 1, len(starts) - 1)]
        if b > a:
            res = optimize.minimize_scalar(lambda t: float(_outside(dist, t, ell)),
                                           bounds=(a, b), method="bounded",
                                           options={"xatol": 1e-12 * max(1.0, abs(a))})
            best = min(best, float(res.fun))
    return min(max(best, 0.0), 1.0)


def tail_function_log2(dist, ell):
    """``log2`` of :func:`tail_function`, accurate far into the tail.

    Symmetric laws with log-survival functions are evaluated in the log
    domain; otherwise the linear value is used.
    """
    m = _symmetric_centre(dist)
    if m is not None and ell > 0 and hasattr(dist, "logsf") and not isinstance(dist, dists.Uniform):
        try:
            left = float(dist.logcdf(m - 0.5 * ell))
            right = float(dist.logsf(m + 0.5 * ell))
            return float(np.logaddexp(left, right)) / math.log(2.0)
        except NotImplementedError:
            pass
    t = tail_function(dist, ell)
    return math.log2(t) if t > 0 else -math.inf


def target_error_schedule(rate, report, shaped_dist, n, margin=0.1, log2=False):
    """Target error ``T(2^(n (threshold - rate)(1 - margin)))`` for the variable rate decoder.

    Parameters
    ----------
    rate : float
        Operating rate in bits, below ``report.value``.
    report : ThresholdReport
    shaped_dist : ScalarDistribution
        Law of ``rho(X)``.
    n : int
    margin : float
        Fraction of the exponent given up to the unspecified little-o term.
    log2 : bool
        Return ``log2`` of the target instead.

    Raises
    ------
    RateAboveThreshold
    """
    if not rate < report.value:
        raise RateAboveThreshold(
            f"rate {rate} is not below the threshold {report.value:.6g} of {report.rho_label}")
    if not 0 <= margin < 1:
        raise ValueError("margin must lie in [0, 1)")
    expo = n * (report.value - rate) * (1.0 - margin)
    ell = 2.0 ** expo if expo < 1020 else math.inf
    if log2:
        if math.isinf(ell):
            return -math.inf
        return tail_function_log2(shaped_dist, ell)
    return tail_function(shaped_dist, ell) if math.isfinite(ell) else 0.0


# ---------------------------------------------------------------------------
# Psi diagnostic


def psi_diagnostic(pair, rho, s, t, r, samples=4096, seed=0):
    """Constant multiplying ``r^n`` in the weighted contraction bound.

    ``(K_s + K_t)/(1 - r) + 2 J(s; t)`` with ``J(s; t)`` the largest weight
    between `s` and `t` and ``K_s = E J(s; omega_Phi(s))`` estimated by
    Monte Carlo over a uniform ``Phi`` (normalized domain).

    Returns
    -------
    dict
        ``psi``, ``k_s``, ``k_t`` and ``j``.
    """
    if not 0 <= r < 1:
        raise ValueError("need a contraction factor r in [0, 1)")
    fam = InverseFamily(pair, "normalized", mc_samples=samples, seed=seed)
    om = fam.values(np.array([s, t], dtype=float))

    def k_of(row, a):
        return float(np.mean([rho.sup_between(a, b, 17) for b in row]))

    k_s, k_t = k_of(om[0], s), k_of(om[1], t)
    j = rho.sup_between(s, t)
    return {"psi": (k_s + k_t) / (1 - r) + 2 * j, "k_s": k_s, "k_t": k_t, "j": j}
