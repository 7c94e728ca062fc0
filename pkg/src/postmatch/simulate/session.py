"""Transmission sessions and their transcripts.

A session draws the message point, then alternates channel uses and kernel
updates.  Discrete pairs and the mixed-input pair are run in the normalized
domain; proper continuous pairs are run in the input domain, where the
normalized inputs and outputs are recovered on demand from ``F_X`` and
``F_Y``.

Random draws come from one :class:`RngStream` per session in a fixed order:
the message point bits (when random), then `n` channel uniforms, then `n`
randomization variables.  Identical ``(seed, stream_id)`` therefore give
bit-identical transcripts.
"""

from fractions import Fraction

import gmpy2
from gmpy2 import mpfr

from ..core.errors import OutOfSupport
from ..core.precision import (UnitValue, check_horizon, format_mp, parse_mp, required_precision,
                              to_mp, working_precision)
from ..core.rng import RngStream
from ..matching.kernels import DmcKernel, ExpMeanKernel, kernel_for
from ..matching.upf import Upf, _mu_inner, mu_variant_kernel, mu_variant_step

_FORMAT = "postmatch-transcript 1"


def _active_mu(mu):
    if mu is None or (mu.is_identity and len(mu.pieces) == 1):
        return None
    return mu


class Transcript:
    """Record of one session.

    Sequences are 0-based: ``xs[k-1]``, ``ys[k-1]``, ``lams[k-1]`` and
    ``phis[k-1]`` belong to channel use `k`, and ``thetas[k-1]`` is the
    normalized input before that use.  ``thetas`` has ``n + 1`` entries;
    the last one is the state after the final update, which equals the
    posterior c.d.f. of the message at the message point.

    Attributes
    ----------
    pair : InputChannelPair
    mu : Upf or None
    theta0 : UnitValue
    n, seed, stream_id, precision : int
    domain : {"x", "theta"}
        Coordinates in which the recursion was run.
    """

    def __init__(self, pair, mu, theta0, n, seed, stream_id, precision, domain,
                 xs, ys, lams, thetas=None, phis=None, x_last=None):
        self.pair, self.mu, self.theta0 = pair, mu, theta0
        self.n, self.seed, self.stream_id = int(n), int(seed), int(stream_id)
        self.precision, self.domain = int(precision), domain
        self.xs, self.ys, self.lams = tuple(xs), tuple(ys), tuple(lams)
        self._thetas = tuple(thetas) if thetas is not None else None
        self._phis = tuple(phis) if phis is not None else None
        self.x_last = x_last

    @property
    def kernel(self):
        return kernel_for(self.pair)

    @property
    def thetas(self):
        if self._thetas is None:
            k = self.kernel
            with working_precision(self.precision):
                vals = [k.theta_of(x) for x in self.xs + (self.x_last,)]
            self._thetas = tuple(_clip(v) for v in vals)
        return self._thetas

    @property
    def phis(self):
        if self._phis is None:
            k = self.kernel
            with working_precision(self.precision):
                self._phis = tuple(k.phi_of(y, lam) for y, lam in zip(self.ys, self.lams))
        return self._phis

    def theta_units(self):
        return [UnitValue._raw(v, self.precision) for v in self.thetas]

    def phi_units(self):
        return [UnitValue._raw(v, self.precision) for v in self.phis]

    # -- serialization ------------------------------------------------------
    def dumps(self):
        """Line-oriented text form; :meth:`loads` recovers identical values."""
        head = [
            _FORMAT,
            f"pair {self.pair.label}",
            f"n {self.n}",
            f"seed {self.seed}",
            f"stream_id {self.stream_id}",
            f"precision {self.precision}",
            f"domain {self.domain}",
            f"theta0 {format_mp(self.theta0.value)}",
            "mu " + (";".join(f"{a},{b},{c}" for a, b, c in self.mu.pieces) if self.mu else "none"),
            f"theta_last {format_mp(self.thetas[-1])}",
            "x_last " + (_fmt(self.x_last) if self.x_last is not None else "none"),
            "k x y theta phi lam",
        ]
        rows = [
            f"{k + 1} {_fmt(self.xs[k])} {_fmt(self.ys[k])} {format_mp(self.thetas[k])} "
            f"{format_mp(self.phis[k])} {self.lams[k]!r}"
            for k in range(self.n)
        ]
        return "\n".join(head + rows) + "\n"

    @classmethod
    def loads(cls, text, pair):
        """Parse :meth:`dumps` output; `pair` must carry the recorded label."""
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != _FORMAT:
            raise ValueError("not a transcript")
        head = {}
        i = 1
        while not lines[i].startswith("k "):
            key, _, val = lines[i].partition(" ")
            head[key] = val
            i += 1
        if head["pair"] != pair.label:
            raise ValueError(f"transcript is for {head['pair']!r}, not {pair.label!r}")
        prec = int(head["precision"])
        discrete = isinstance(kernel_for(pair), DmcKernel)
        mu = None
        if head["mu"] != "none":
            mu = Upf([tuple(Fraction(v) for v in p.split(",")) for p in head["mu"].split(";")])
        xs, ys, thetas, phis, lams = [], [], [], [], []
        for ln in lines[i + 1:]:
            _, x, y, th, ph, lam = ln.split()
            if discrete:
                xs.append(int(x))
                ys.append(int(y))
            else:
                xs.append(parse_mp(x, prec))
                ys.append(parse_mp(y, prec))
            thetas.append(parse_mp(th, prec))
            phis.append(parse_mp(ph, prec))
            lams.append(float(lam))
        thetas.append(parse_mp(head["theta_last"], prec))
        x_last = None if head["x_last"] == "none" else parse_mp(head["x_last"], prec)
        theta0 = UnitValue._raw(parse_mp(head["theta0"], prec), prec)
        return cls(pair, mu, theta0, int(head["n"]), int(head["seed"]), int(head["stream_id"]),
                   prec, head["domain"], xs, ys, lams, thetas, phis, x_last)

    def __eq__(self, other):
        if not isinstance(other, Transcript):
            return NotImplemented
        return (self.pair.label == other.pair.label and self.n == other.n
                and self.seed == other.seed and self.stream_id == other.stream_id
                and self.precision == other.precision and self.theta0 == other.theta0
                and self.xs == other.xs and self.ys == other.ys and self.lams == other.lams
                and self.thetas == other.thetas and self.phis == other.phis
                and (self.mu.pieces if self.mu else None) == (other.mu.pieces if other.mu else None))

    __hash__ = None

    def __repr__(self):
        return f"<Transcript {self.pair.label} n={self.n} seed={self.seed} stream={self.stream_id}>"


def _fmt(v):
    return str(v) if isinstance(v, int) else format_mp(v)


def _clip(v):
    if v < 0:
        return mpfr(0)
    if v > 1:
        return mpfr(1)
    return v


def session_precision(pair, n, rate_target=None, precision=None):
    """Working precision of a session.

    Without an explicit `precision` the policy ``2(ceil(n R) + 32)`` (at
    least 128 bits) is applied with `R` the target rate, which defaults to
    the mutual information of the pair.  An explicit precision is checked
    against the horizon guard.
    """
    rate = pair.mutual_information if rate_target is None else float(rate_target)
    if precision is None:
        return required_precision(n, rate)
    check_horizon(n, rate, int(precision))
    return int(precision)


def draw_message(stream, precision):
    """Message point with `precision` random bits, never exactly zero."""
    while True:
        v, stream = stream.bits(precision)
        if v:
            break
    with working_precision(precision):
        return UnitValue._raw(mpfr(v) / (mpfr(2) ** precision), precision), stream


def run_session(pair, theta0="random", n=1, seed=0, stream_id=0, mu=None,
                precision=None, rate_target=None, channel=None):
    """Simulate `n` channel uses of the posterior matching scheme.

    Parameters
    ----------
    pair : InputChannelPair
    theta0 : UnitValue, str, float or "random"
        Message point; ``"random"`` draws it at the full working precision.
    n : int
        Horizon, at least 1.
    seed, stream_id : int
        Keys of the random stream.
    mu : Upf, optional
        Run the mu-variant with this uniformity preserving map.
    precision : int, optional
        Working precision in bits; see :func:`session_precision`.
    rate_target : float, optional
        Rate used by the precision policy.
    channel : MemorylessChannel, optional
        Channel that actually produces the outputs; defaults to the pair's
        own channel.  The kernel is always the one designed for `pair`.

    Returns
    -------
    Transcript

    Raises
    ------
    OutOfSupport
        When a kernel step leaves the posterior support (with the step).
    PrecisionExhausted
        When an explicit precision is too small for the horizon.
    """
    n = int(n)
    if n < 1:
        raise ValueError("horizon n must be at least 1")
    prec = session_precision(pair, n, rate_target, precision)
    stream = RngStream(int(seed), int(stream_id))
    if isinstance(theta0, str) and theta0 == "random":
        theta0, stream = draw_message(stream, prec)
    else:
        theta0 = UnitValue(theta0.value if isinstance(theta0, UnitValue) else theta0, prec)
    u, stream = stream.uniforms(n)
    lam, stream = stream.uniforms(n)
    lams = [float(v) for v in lam]
    kernel = kernel_for(pair)
    mu = _active_mu(mu)
    ch = pair.channel if channel is None else channel
    with working_precision(prec):
        th = mpfr(theta0.value)
        if kernel.domain == "x" and mu is None:
            return _run_x(pair, kernel, ch, theta0, th, n, u, lams, seed, stream_id, prec)
        return _run_theta(pair, kernel, ch, mu, theta0, th, n, u, lams, seed, stream_id, prec)


def _run_theta(pair, kernel, ch, mu, theta0, th, n, u, lams, seed, stream_id, prec):
    discrete = isinstance(kernel, DmcKernel)
    if mu is not None:
        th = mu.apply_mp(th)
    xs, ys, thetas, phis = [], [], [th], []
    for k in range(n):
        x = kernel.input_of(th)
        y = ch.sample(x, float(u[k]))
        phi = kernel.phi_of(y, lams[k])
        if isinstance(kernel, ExpMeanKernel):
            c = kernel._consts()
            if th >= 1 - c["cfrac"] * (1 - phi):
                raise OutOfSupport("normalized input left the posterior support", step=k + 1)
        elif not discrete:
            _check_x(kernel, x, y, k + 1)
        if mu is not None:
            if discrete:
                th = mu_variant_step(kernel, mu, th, y)
            else:
                v = mu.inverse_mp(th)
                th = mu.apply_mp(_mu_inner(kernel, mu, v, lambda t: kernel.fwd(t, phi)))
        else:
            th = kernel.fwd(th, phi)
        xs.append(x)
        ys.append(y)
        phis.append(phi)
        thetas.append(th)
    return Transcript(pair, mu, theta0, n, seed, stream_id, prec, "theta",
                      xs, ys, lams, thetas, phis)


def _check_x(kernel, x, y, step):
    check = getattr(kernel, "check_xy", None)
    if check is not None:
        try:
            check(x, y)
        except OutOfSupport as exc:
            raise OutOfSupport(str(exc), step=step) from None


def _run_x(pair, kernel, ch, theta0, th, n, u, lams, seed, stream_id, prec):
    x = kernel.input_of(th)
    if gmpy2.is_infinite(x):
        raise OutOfSupport("message point maps to an infinite input", step=1)
    xs, ys = [], []
    for k in range(n):
        y = ch.sample(x, float(u[k]))
        if not isinstance(y, type(x)):
            y = to_mp(y)
        _check_x(kernel, x, y, k + 1)
        xs.append(x)
        ys.append(y)
        x = kernel.fwd_x(x, y)
    return Transcript(pair, None, theta0, n, seed, stream_id, prec, "x",
                      xs, ys, lams, x_last=x)


def transcript_from_outputs(pair, ys, theta0="0.5", lams=None, precision=128):
    """Transcript of a discrete pair along a prescribed output sequence.

    The outputs replace channel draws, so the message point only fixes the
    inputs and the hit flag; the posterior depends on `ys` alone.  Used to
    enumerate output sequences exhaustively.
    """
    kernel = kernel_for(pair)
    if not isinstance(kernel, DmcKernel):
        raise TypeError("prescribed outputs need a discrete pair")
    n = len(ys)
    lams = [0.5] * n if lams is None else [float(v) for v in lams]
    theta0 = UnitValue(theta0.value if isinstance(theta0, UnitValue) else theta0, precision)
    with working_precision(precision):
        th = mpfr(theta0.value)
        xs, thetas, phis = [], [th], []
        for y, lam in zip(ys, lams):
            xs.append(kernel.input_of(th))
            phi = kernel.phi_of(int(y), lam)
            th = kernel.fwd(th, phi)
            phis.append(phi)
            thetas.append(th)
    return Transcript(pair, None, theta0, n, 0, 0, precision, "theta",
                      xs, [int(y) for y in ys], lams, thetas, phis)


def replay_errors(transcript):
    """Largest gap between recorded states and the normalized kernel.

    Returns ``max_k |thetas[k] - forward_norm(thetas[k-1], phis[k-1])|`` as a
    float; zero for normalized-domain sessions, rounding-level for
    input-domain sessions.
    """
    kernel = transcript.kernel
    th, ph = transcript.thetas, transcript.phis
    worst = 0.0
    with working_precision(transcript.precision):
        for k in range(transcript.n):
            if transcript.mu is not None:
                nxt = mu_variant_kernel(transcript.pair, transcript.mu,
                                        UnitValue._raw(th[k], transcript.precision),
                                        UnitValue._raw(ph[k], transcript.precision)).value
            else:
                nxt = _clip(kernel.fwd(th[k], ph[k]))
            worst = max(worst, float(abs(nxt - th[k + 1])))
    return worst
