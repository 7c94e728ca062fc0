"""Posterior of the message point along a transcript.

The posterior c.d.f. after ``k - 1`` outputs is the forward composition of
the normalized kernels, ``G_k = K_{k-1} o ... o K_1``, and its quantile is the
inverse composition ``omega_1 o ... o omega_{k-1}`` with ``omega_{k-1}``
applied first.  Both are evaluated pointwise in O(k).  Discrete pairs and the
uniform pair additionally expose exact piecewise-affine restrictions of
either map to an interval, which the decoders use for exact searches.
"""

import math
from dataclasses import dataclass

import gmpy2
from gmpy2 import mpfr

from ..core.errors import DensityUnderflow
from ..core.precision import UnitValue, working_precision
from ..matching.kernels import (AwgnKernel, DmcKernel, ExpMeanKernel, ExponentialKernel,
                                TableKernel, UniformKernel)
from ..matching.upf import _mu_inner
from .piecewise import Segments, compose

DMC, UNIFORM, AWGN, X_POINTWISE, THETA_POINTWISE, TABLE, MU = (
    "dmc", "uniform", "awgn", "x_pointwise", "theta_pointwise", "table", "mu")


def _clip(v):
    if v <= 0:
        return mpfr(0)
    if v >= 1:
        return mpfr(1)
    return v


class PosteriorMap:
    """Posterior c.d.f. ``G_k`` of the message from the first ``k - 1`` outputs.

    Parameters
    ----------
    transcript : Transcript
    k : int, optional
        Between 1 and ``n + 1``; defaults to ``n + 1`` (all outputs).

    Notes
    -----
    All methods take and return ``mpfr`` and must be called inside
    ``working_precision(transcript.precision)``; :meth:`context` provides it.
    """

    def __init__(self, transcript, k=None):
        n = transcript.n
        k = n + 1 if k is None else int(k)
        if not 1 <= k <= n + 1:
            raise ValueError(f"k must lie in [1, {n + 1}]")
        self.tr, self.k = transcript, k
        self.kernel = kern = transcript.kernel
        self.ys = transcript.ys[: k - 1]
        if transcript.mu is not None:
            self.kind = MU
        elif isinstance(kern, DmcKernel):
            self.kind = DMC
        elif isinstance(kern, UniformKernel):
            self.kind = UNIFORM
        elif isinstance(kern, AwgnKernel):
            self.kind = AWGN
        elif isinstance(kern, ExponentialKernel):
            self.kind = X_POINTWISE
        elif isinstance(kern, TableKernel):
            self.kind = TABLE
        else:
            self.kind = THETA_POINTWISE
        self._affine = None
        self._phis = None

    def context(self):
        return working_precision(self.tr.precision)

    @property
    def exact_segments(self):
        """True when :meth:`forward_segments`/:meth:`quantile_segments` are available."""
        return self.kind in (DMC, UNIFORM)

    @property
    def phis(self):
        if self._phis is None:
            self._phis = self.tr.phis[: self.k - 1]
        return self._phis

    # -- affine x-domain compositions -----------------------------------------
    def affine(self):
        """``(A, B)`` with ``x_k = A x_1 + B`` and ``(A', B')`` for the inverse map."""
        if self._affine is None:
            kern = self.kernel
            a, b = mpfr(1), mpfr(0)
            for y in self.ys:
                s, c = kern.affine_x(y)
                a, b = s * a, s * b + c
            ia, ib = mpfr(1), mpfr(0)
            for y in reversed(self.ys):
                s, c = kern.inverse_affine_x(y)
                # apply the inverse of the latest step first
                ia, ib = s * ia, s * ib + c
            self._affine = (a, b, ia, ib)
        return self._affine

    def gaussian_posterior(self):
        """Mean and standard deviation of the first input given the outputs (AWGN)."""
        a, b, _, _ = self.affine()
        return -b / a, gmpy2.sqrt(mpfr(self.kernel.pair.power)) / a

    # -- pointwise evaluation ---------------------------------------------------
    def forward(self, theta):
        """``G_k(theta)``."""
        theta = mpfr(theta)
        kern, kind = self.kernel, self.kind
        if theta <= 0:
            return mpfr(0)
        if theta >= 1:
            return mpfr(1)
        if kind == DMC:
            for y in self.ys:
                theta = kern.fwd_y(theta, y)
            return theta
        if kind in (UNIFORM, AWGN):
            a, b, _, _ = self.affine()
            x = kern.input_of(theta)
            return _clip(kern.theta_of(a * x + b))
        if kind == X_POINTWISE:
            x = kern.input_of(theta)
            for y in self.ys:
                if x >= y:
                    return mpfr(1)
                x = kern.fwd_x(x, y)
            return _clip(kern.theta_of(x))
        if kind == THETA_POINTWISE:
            for ph in self.phis:
                theta = kern.fwd(theta, ph)
            return _clip(theta)
        if kind == TABLE:
            for y in self.ys:
                if 0 < theta < 1:
                    theta = kern.fwd_y(theta, y)
            return _clip(theta)
        mu = self.tr.mu
        for y, ph in zip(self.ys, self.phis):
            theta = _clip(_mu_inner(kern, mu, theta, self._base_step(y, ph)))
        return theta

    def _base_step(self, y, ph):
        kern = self.kernel
        if isinstance(kern, DmcKernel):
            return lambda t: kern.fwd_y(t, y)
        if isinstance(kern, ExponentialKernel):
            def step(t):
                if t <= 0 or t >= 1:
                    return mpfr(t)
                x = kern.input_of(t)
                return mpfr(1) if x >= y else kern.theta_of(kern.fwd_x(x, y))
            return step
        if isinstance(kern, ExpMeanKernel):
            return lambda t: kern.fwd(t, ph)
        return lambda t: _clip(kern.fwd_y(t, y))

    def quantile(self, t):
        """``inf{theta : G_k(theta) > t}`` by inverse composition."""
        t = mpfr(t)
        kern, kind = self.kernel, self.kind
        t = _clip(t)
        if kind == DMC:
            for y in reversed(self.ys):
                t = kern.inv_y(t, y)
            return _clip(t)
        if kind in (UNIFORM, AWGN):
            _, _, ia, ib = self.affine()
            if kind == UNIFORM:
                return _clip(ia * t + ib)
            if t <= 0 or t >= 1:
                return t
            return _clip(kern.theta_of(ia * kern.input_of(t) + ib))
        if kind == X_POINTWISE:
            x = kern.input_of(t)
            for y in reversed(self.ys):
                x = kern.inv_x(x, y)
            return _clip(kern.theta_of(x))
        if kind == THETA_POINTWISE:
            for ph in reversed(self.phis):
                t = kern.inv(t, ph)
            return _clip(t)
        return self._quantile_bisect(t)

    def _quantile_bisect(self, t):
        """Bisection on the monotone forward map (numeric and mu kernels)."""
        if len(self.ys) == 0:
            return t
        lo, hi = mpfr(0), mpfr(1)
        bits = 60 if self.kind == TABLE else self.tr.precision
        for _ in range(bits):
            mid = (lo + hi) / 2
            if self.forward(mid) > t:
                hi = mid
            else:
                lo = mid
        return hi

    def forward_path(self, theta):
        """``[G_1(theta), ..., G_k(theta)]`` in one pass."""
        theta = mpfr(theta)
        kern, kind = self.kernel, self.kind
        out = [theta]
        if kind in (UNIFORM, AWGN, X_POINTWISE) and 0 < theta < 1:
            x = kern.input_of(theta)
            done = False
            for y in self.ys:
                if done:
                    out.append(out[-1])
                    continue
                if kind == X_POINTWISE and x >= y:
                    out.append(mpfr(1))
                    done = True
                    continue
                x = kern.fwd_x(x, y)
                v = _clip(kern.theta_of(x))
                out.append(v)
                done = v <= 0 or v >= 1
            return out
        for i, y in enumerate(self.ys):
            th = out[-1]
            if th <= 0 or th >= 1:
                out.append(th)
            elif kind == DMC:
                out.append(kern.fwd_y(th, y))
            elif kind == THETA_POINTWISE:
                out.append(_clip(kern.fwd(th, self.phis[i])))
            elif kind == TABLE:
                out.append(_clip(kern.fwd_y(th, y)))
            else:
                out.append(_clip(_mu_inner(kern, self.tr.mu, th, self._base_step(y, self.phis[i]))))
        return out

    # -- exact piecewise-affine restrictions ------------------------------------
    def forward_segments(self, lo, hi):
        """``G_k`` on ``[lo, hi]`` as :class:`Segments` (discrete and uniform pairs)."""
        lo, hi = mpfr(lo), mpfr(hi)
        if self.kind == DMC:
            return compose(lo, hi, (self.kernel.pieces(y) for y in self.ys))
        if self.kind == UNIFORM:
            a, b, _, _ = self.affine()
            # clip(a t + b) has breaks where the line crosses 0 and 1
            z0, z1 = -b / a, (1 - b) / a
            inf = mpfr("inf")
            cuts, maps = [lo], []
            for start, end, m in ((-inf, z0, (mpfr(0), mpfr(0))), (z0, z1, (a, b)),
                                  (z1, inf, (mpfr(0), mpfr(1)))):
                e = min(end, hi)
                if e > max(start, lo):
                    maps.append(m)
                    cuts.append(e)
            if not maps:
                maps, cuts = [(mpfr(0), _clip(a * lo + b))], [lo, hi]
            return Segments(cuts, maps)
        raise TypeError("exact segments need a discrete or uniform pair")

    def quantile_segments(self, lo, hi):
        """Quantile on ``[lo, hi]`` as :class:`Segments`."""
        lo, hi = mpfr(lo), mpfr(hi)
        if self.kind == DMC:
            return compose(lo, hi, (self.kernel.inverse_pieces(y) for y in reversed(self.ys)))
        if self.kind == UNIFORM:
            _, _, ia, ib = self.affine()
            return Segments([lo, hi], [(ia, ib)])
        raise TypeError("exact segments need a discrete or uniform pair")


# ---------------------------------------------------------------------------
# public operations


def posterior_cdf(transcript, theta, k):
    """``G_k(theta)``, the posterior c.d.f. of the message after ``k - 1`` outputs.

    Parameters
    ----------
    transcript : Transcript
    theta : UnitValue or float
    k : int
        Between 1 and ``n + 1``.

    Returns
    -------
    UnitValue
    """
    post = PosteriorMap(transcript, k)
    prec = transcript.precision
    with post.context():
        v = post.forward(theta.value if isinstance(theta, UnitValue) else _mp(theta, prec))
    return UnitValue._raw(mpfr(v, prec), prec)


def posterior_quantile(transcript, t, k=None):
    """Quantile of ``G_k`` at `t` (inverse composition)."""
    post = PosteriorMap(transcript, k)
    prec = transcript.precision
    with post.context():
        v = post.quantile(t.value if isinstance(t, UnitValue) else _mp(t, prec))
    return UnitValue._raw(mpfr(v, prec), prec)


def _mp(v, prec):
    return UnitValue(v, prec).value


def posterior_log_density_at_message(transcript):
    """``(1/n) sum_k log2 f(phi_k | theta_k)`` in bits per channel use.

    Raises
    ------
    DensityUnderflow
        When some factor vanishes; the step is reported.
    """
    kern = transcript.kernel
    total = 0.0
    for k, (x, y) in enumerate(zip(transcript.xs, transcript.ys)):
        v = kern.log2_density_xy(x, y)
        if not math.isfinite(v):
            raise DensityUnderflow("posterior density vanished", step=k + 1)
        total += v
    return total / transcript.n


@dataclass(frozen=True)
class TrajectoryPair:
    """Posterior c.d.f. along the two points flanking the message.

    ``neg[k-1] = G_k(theta0 - d_minus)`` and ``pos[k-1] = G_k(theta0 + d_plus)``
    for ``k = 1, ..., n + 1``, with ``d_plus = min(delta, (1 - theta0)/2)``
    and ``d_minus = min(delta, theta0/2)``.
    """

    delta: float
    d_minus: object
    d_plus: object
    neg: tuple
    pos: tuple


def trajectories(transcript, delta):
    """Forward images of ``theta0 -/+ delta`` (clamped into the interval)."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    post = PosteriorMap(transcript)
    prec = transcript.precision
    with post.context():
        th = mpfr(transcript.theta0.value)
        d = mpfr(repr(float(delta))) if not isinstance(delta, UnitValue) else delta.value
        dp = min(d, (1 - th) / 2)
        dm = min(d, th / 2)
        neg = post.forward_path(th - dm)
        pos = post.forward_path(th + dp)
    unit = lambda seq: tuple(UnitValue._raw(mpfr(v, prec), prec) for v in seq)
    return TrajectoryPair(float(delta), UnitValue._raw(dm, prec), UnitValue._raw(dp, prec),
                          unit(neg), unit(pos))
