"""Decoders: fixed rate, optimal variable rate and rolled-back variable rate.

Three evaluation routes are used, chosen by the structure of the posterior:

* ``exact``: discrete pairs and the uniform pair, whose posterior c.d.f. and
  quantile are piecewise affine.  The objective of either optimization is
  then piecewise linear and its optimum lies on a breakpoint, so scanning
  the breakpoints is exact.
* ``gaussian``: the Gaussian pair, where the first input is Gaussian given
  the outputs.  The density of the message posterior is log-quadratic in
  input coordinates, so both optimal windows are symmetric there about a
  known centre and reduce to a one dimensional root.
* ``search``: everything else; a grid in quantile space followed by
  golden-section refinement around the best cell.

Each decoder accepts ``n_used`` to decode from a prefix of the outputs.
"""

import math
from dataclasses import dataclass, field

import gmpy2
from gmpy2 import mpfr

from ..core import distributions as dists
from ..core.precision import UnitValue, check_horizon, to_mp
from .posterior import AWGN, PosteriorMap

FIXED_RATE = "fixed_rate"
VARIABLE_RATE = "variable_rate_posterior"
ROLLBACK = "variable_rate_rollback"

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_STD = dists.Gaussian(0.0, 1.0)


@dataclass(frozen=True)
class DecodedInterval:
    """Decoded message interval ``[lo, hi]``.

    Attributes
    ----------
    lo, hi : UnitValue
    rate : float
        ``-(1/n) log2(hi - lo)`` in bits per channel use.
    contains_message : bool
    decoder : str
    params : dict
    mass : float
        Posterior probability of the interval.
    n : int
        Number of outputs used.
    """

    lo: UnitValue
    hi: UnitValue
    rate: float
    contains_message: bool
    decoder: str
    params: dict = field(default_factory=dict)
    mass: float = float("nan")
    n: int = 0

    @property
    def length(self):
        return self.hi.value - self.lo.value


def _interval(tr, post, lo, hi, decoder, params, m):
    prec = tr.precision
    lo, hi = max(mpfr(lo), mpfr(0)), min(mpfr(hi), mpfr(1))
    if not hi > lo:
        hi = min(lo + mpfr(2) ** (-prec // 2), mpfr(1))
    mass = float(post.forward(hi) - post.forward(lo))
    rate = float(-gmpy2.log2(hi - lo) / m) if m > 0 else 0.0
    th = tr.theta0.value
    return DecodedInterval(UnitValue._raw(mpfr(lo, prec), prec), UnitValue._raw(mpfr(hi, prec), prec),
                           rate, bool(lo <= th <= hi), decoder, params, mass, m)


def _prefix(tr, n_used):
    m = tr.n if n_used is None else int(n_used)
    if not 0 <= m <= tr.n:
        raise ValueError(f"n_used must lie in [0, {tr.n}]")
    return m


def _pick(cands, best, tol, maximize):
    """Leftmost candidate within a relative `tol` of the optimum."""
    for key, val, payload in cands:
        if (maximize and val >= best - tol * abs(best)) or (not maximize and val <= best + tol * abs(best)):
            return key, val, payload
    return cands[0]


def _golden(f, a, b, maximize, iters=90):
    """Golden-section search for an optimum of a unimodal `f` on ``[a, b]``."""
    sign = -1 if maximize else 1
    g = mpfr(_GOLDEN)
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = sign * f(c), sign * f(d)
    for _ in range(iters):
        if not b > a:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = sign * f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = sign * f(d)
    return (c, sign * fc) if fc <= fd else (d, sign * fd)


def _tie_tol(prec):
    return mpfr(2) ** (16 - prec)


# ---------------------------------------------------------------------------
# variable rate


def decode_variable_rate(transcript, delta, n_used=None, method="auto", grid=256):
    """Shortest interval with posterior mass at least ``1 - delta``.

    Minimizes ``Q(t + 1 - delta) - Q(t)`` over ``t`` in ``[0, delta]`` where
    ``Q`` is the posterior quantile.  ``delta = 0`` returns the support of
    the posterior, ``[Q(0), Q(1)]``.

    Parameters
    ----------
    delta : float
        In ``[0, 1)``.
    method : {"auto", "exact", "gaussian", "search"}
    grid : int
        Grid size of the search route.
    """
    delta = float(delta)
    if not 0 <= delta < 1:
        raise ValueError("delta must lie in [0, 1)")
    m = _prefix(transcript, n_used)
    post = PosteriorMap(transcript, m + 1)
    method = _route(post, method)
    params = {"delta": delta, "method": method}
    with post.context():
        d = to_mp(delta)
        if m == 0:
            # prior: every window of length 1 - delta is optimal, take the leftmost
            lo, hi = mpfr(0), 1 - d
        elif delta == 0:
            lo, hi = post.quantile(mpfr(0)), post.quantile(mpfr(1))
        elif method == "exact":
            lo, hi = _variable_exact(post, d, transcript.precision)
        elif method == "gaussian":
            lo, hi = _variable_gaussian(post, d)
        else:
            lo, hi = _variable_search(post, d, grid, transcript.precision)
        return _interval(transcript, post, lo, hi, VARIABLE_RATE, params, m)


def _route(post, method):
    if method == "auto":
        if post.exact_segments:
            return "exact"
        return "gaussian" if post.kind == AWGN else "search"
    if method == "exact" and not post.exact_segments:
        raise ValueError("exact route needs a discrete or uniform pair")
    if method == "gaussian" and post.kind != AWGN:
        raise ValueError("gaussian route needs the Gaussian pair")
    if method not in ("exact", "gaussian", "search"):
        raise ValueError(f"unknown method {method!r}")
    return method


def _variable_exact(post, d, prec):
    one_minus = 1 - d
    # any feasible window bounds the optimum, which confines both endpoints
    # to the neighbourhood of the posterior bulk
    half = d / 2
    bound = post.quantile(half + one_minus) - post.quantile(half)
    lo_min = post.quantile(one_minus) - bound
    hi_max = post.quantile(d) + bound
    t_min = max(post.forward(lo_min), mpfr(0)) if lo_min > 0 else mpfr(0)
    t_max = min(post.forward(hi_max) - one_minus, d)
    t_min, t_max = min(t_min, half), max(t_max, half)
    s0 = post.quantile_segments(t_min, t_max)
    s1 = post.quantile_segments(t_min + one_minus, t_max + one_minus)
    pts = {}
    for c in s0.cuts:
        pts[c] = c + one_minus
    for c in s1.cuts:
        t = c - one_minus
        if t_min <= t <= t_max:
            pts.setdefault(t, c)
    cands = []
    for t in sorted(pts):
        s = pts[t]
        lo = s0(t, side="right")
        hi = s1(s, side="left")
        cands.append((t, hi - lo, (lo, hi)))
    best = min(c[1] for c in cands)
    _, _, (lo, hi) = _pick(cands, best, _tie_tol(prec), maximize=False)
    return lo, hi


def _gaussian_frame(post):
    """Centre and scale of the symmetric windows, in standardized units."""
    mean, sd = post.gaussian_posterior()
    power = mpfr(post.kernel.pair.power)
    centre = mean / (1 - sd * sd / power)
    return mean, sd, centre, (centre - mean) / sd


def _variable_gaussian(post, d):
    mean, sd, centre, u = _gaussian_frame(post)
    # solve sf(u + v) + cdf(u - v) = delta for the half width v
    v = -_STD.ppf_mp(d / 2)
    prev = mpfr("inf")
    for _ in range(60):
        g = _STD.sf_mp(u + v) + _STD.cdf_mp(u - v) - d
        dg = -(_STD.pdf_mp(u + v) + _STD.pdf_mp(u - v))
        step = g / dg
        v -= step
        if abs(step) <= abs(v) * mpfr(2) ** (8 - gmpy2.get_context().precision):
            break
        # rounding noise in the tail sums dominates once steps stop shrinking
        if abs(step) >= prev:
            break
        prev = abs(step)
    px = post.kernel.pair.input
    return px.cdf_mp(centre - sd * v), px.cdf_mp(centre + sd * v)


def _variable_search(post, d, grid, prec):
    one_minus = 1 - d

    def length(t):
        return post.quantile(t + one_minus) - post.quantile(t)

    ts = [d * i / grid for i in range(grid + 1)]
    cands = [(t, length(t), None) for t in ts]
    best = min(c[1] for c in cands)
    t_best, l_best, _ = _pick(cands, best, _tie_tol(prec), maximize=False)
    i = ts.index(t_best)
    a, b = ts[max(i - 1, 0)], ts[min(i + 1, grid)]
    t_ref, l_ref = _golden(length, a, b, maximize=False)
    if l_ref < l_best:
        t_best = t_ref
    return post.quantile(t_best), post.quantile(t_best + one_minus)


# ---------------------------------------------------------------------------
# rollback


def decode_rollback(transcript, delta, alpha=0.5, n_used=None):
    """Interval ``(Q((1 - alpha) delta), Q(1 - alpha delta))``.

    The endpoints are rolled back through the inverse kernels, so the
    posterior mass of the interval is ``1 - delta`` exactly.
    """
    delta, alpha = float(delta), float(alpha)
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    m = _prefix(transcript, n_used)
    post = PosteriorMap(transcript, m + 1)
    with post.context():
        d, a = to_mp(delta), to_mp(alpha)
        lo = post.quantile((1 - a) * d)
        hi = post.quantile(1 - a * d)
        return _interval(transcript, post, lo, hi, ROLLBACK, {"delta": delta, "alpha": alpha}, m)


# ---------------------------------------------------------------------------
# fixed rate


def decode_fixed_rate(transcript, rate, n_used=None, method="auto", grid=1024):
    """Interval of length ``2**(-n R)`` with maximal posterior mass.

    Raises
    ------
    PrecisionExhausted
        When ``n R`` exceeds the resolution of the session precision.
    """
    rate = float(rate)
    if not rate > 0:
        raise ValueError("rate must be positive")
    m = _prefix(transcript, n_used)
    if m < 1:
        raise ValueError("fixed-rate decoding needs at least one output")
    check_horizon(m, rate, transcript.precision)
    post = PosteriorMap(transcript, m + 1)
    method = _route(post, method)
    params = {"rate": rate, "method": method}
    with post.context():
        w = gmpy2.exp2(-to_mp(m) * to_mp(rate))
        if method == "exact":
            lo = _fixed_exact(post, w, transcript.precision)
        elif method == "gaussian":
            lo = _fixed_gaussian(post, w)
        else:
            lo = _fixed_search(post, w, grid, transcript.precision)
        lo = min(max(lo, mpfr(0)), 1 - w)
        return _interval(transcript, post, lo, lo + w, FIXED_RATE, params, m)


def _coarse_mass(post, w, points=64):
    best = mpfr(0)
    for i in range(points):
        th = min(post.quantile(mpfr(i) / points), 1 - w)
        best = max(best, post.forward(th + w) - post.forward(th))
    return best


def _fixed_exact(post, w, prec):
    # mass of a few windows centred on posterior quantiles bounds the optimum
    m0 = mpfr(0)
    for q in ("0.5", "0.25", "0.75"):
        th = min(max(post.quantile(mpfr(q)) - w / 2, mpfr(0)), 1 - w)
        m0 = max(m0, post.forward(th + w) - post.forward(th))
    # an optimal start has G(start) <= 1 - m0 and G(start + w) >= m0
    top = min(post.quantile(1 - m0), 1 - w)
    bottom = max(post.quantile(m0 * (1 - mpfr(2) ** (-prec // 2))) - w, mpfr(0))
    if top < bottom:
        top = bottom
    s1 = post.forward_segments(bottom, top)
    s2 = post.forward_segments(bottom + w, top + w)
    pts = set(s1.cuts)
    pts.update(c - w for c in s2.cuts if bottom <= c - w <= top)
    cands = [(th, s2(th + w) - s1(th), None) for th in sorted(pts)]
    best = max(c[1] for c in cands)
    th, _, _ = _pick(cands, best, _tie_tol(prec), maximize=True)
    return th


def _fixed_gaussian(post, w):
    mean, sd, centre, _ = _gaussian_frame(post)
    px = post.kernel.pair.input
    # half width h with F(centre + h) - F(centre - h) = w
    h = w / (2 * px.pdf_mp(centre))
    prev = mpfr("inf")
    for _ in range(60):
        g = px.cdf_mp(centre + h) - px.cdf_mp(centre - h) - w
        dg = px.pdf_mp(centre + h) + px.pdf_mp(centre - h)
        step = g / dg
        h -= step
        if abs(step) <= abs(h) * mpfr(2) ** (8 - gmpy2.get_context().precision):
            break
        if abs(step) >= prev:
            break
        prev = abs(step)
    return px.cdf_mp(centre - h)


def _fixed_search(post, w, grid, prec):
    def start(t):
        return min(post.quantile(t), 1 - w)

    def mass(t):
        th = start(t)
        return post.forward(th + w) - post.forward(th)

    m0 = _coarse_mass(post, w)
    span = 1 - m0
    ts = [span * i / grid for i in range(grid + 1)]
    cands = [(t, mass(t), None) for t in ts]
    best = max(c[1] for c in cands)
    t_best, v_best, _ = _pick(cands, best, _tie_tol(prec), maximize=True)
    i = ts.index(t_best)
    a, b = ts[max(i - 1, 0)], ts[min(i + 1, grid)]
    if b > a:
        t_ref, v_ref = _golden(mass, a, b, maximize=True)
        if v_ref > v_best:
            t_best = t_ref
    return start(t_best)
