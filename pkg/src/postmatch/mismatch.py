"""Posterior matching over a channel other than the one it was designed for.

The transmitter and receiver both run the kernel of a design pair
``(P_X, P_{Y|X})`` while the outputs come from a true channel
``P_{Y*|X*}``.  The inputs then settle to an induced stationary law
``P_{X*}``, estimated here by iterating many independent float chains.
The achievable rate is the mutual information of the induced pair minus a
penalty, the conditional divergence between the channels less the
divergence between the output laws.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import interpolate, stats

from .channels import AdditiveNoiseChannel
from .core import distributions as dists
from .core.errors import InfinitePenalty, IntegrationFailed, OutOfSupport, UnsupportedOutput
from .core.quadrature import integrate_1d, quantile_nodes
from .core.rng import RngStream
from .matching.kernels import DmcKernel, kernel_for
from .simulate.posterior import posterior_log_density_at_message
from .simulate.session import run_session

_LOG2E = 1.0 / math.log(2.0)


@dataclass
class MismatchSetup:
    """Design pair, true channel and (optionally) the induced input law.

    Attributes
    ----------
    design_pair : InputChannelPair
    true_channel : MemorylessChannel
    induced_input : ScalarDistribution or EmpiricalLaw, optional
    label : str
    """

    design_pair: object
    true_channel: object
    induced_input: object = None
    label: str = ""

    def __post_init__(self):
        if not self.label:
            self.label = f"{self.design_pair.label}@{self.true_channel.label}"

    def check(self, samples=256, seed=0):
        """Verify on samples that the design kernel accepts true outputs.

        Raises
        ------
        OutOfSupport, UnsupportedOutput
        """
        design = self.design_pair
        ch = self.true_channel
        if design.channel.discrete != ch.discrete:
            raise UnsupportedOutput("design and true channels must both be discrete or continuous")
        if ch.discrete:
            if ch.nx != design.channel.nx or ch.ny != design.channel.ny:
                raise UnsupportedOutput("true channel alphabets differ from the design alphabets")
            return True
        u, st = RngStream(seed, 1 << 32).uniforms(samples)
        v, _ = st.uniforms(samples)
        x = np.asarray(design.input.ppf(u), dtype=float)
        y = np.asarray(ch.sample_array(x, v), dtype=float)
        kern = kernel_for(design)
        check = getattr(kern, "check_xy", None)
        dens = np.asarray(design.output.pdf(y), dtype=float)
        if np.any(dens <= 0):
            i = int(np.argmax(dens <= 0))
            raise OutOfSupport(f"true output {y[i]:.6g} has zero design probability", step=i + 1)
        if check is not None:
            for i, (a, b) in enumerate(zip(x, y)):
                try:
                    check(a, b)
                except OutOfSupport as exc:
                    raise OutOfSupport(str(exc), step=i + 1) from None
        return True


def same_channel(a, b, points=257, tol=1e-12):
    """Whether two channels have the same transition law.

    Discrete channels compare their matrices exactly.  Additive channels
    compare the noise c.d.f. and density at `points` quantiles of `a`.
    """
    if a is b:
        return True
    if a.discrete != b.discrete:
        return False
    if a.discrete:
        return a.exact == b.exact
    if not (isinstance(a, AdditiveNoiseChannel) and isinstance(b, AdditiveNoiseChannel)):
        return False
    if a.transform != b.transform:
        return False
    z = np.asarray(a.noise.ppf((np.arange(points) + 0.5) / points), dtype=float)
    fa, fb = np.asarray(a.noise.cdf(z)), np.asarray(b.noise.cdf(z))
    da, db = np.asarray(a.noise.pdf(z)), np.asarray(b.noise.pdf(z))
    return bool(np.allclose(fa, fb, rtol=0, atol=tol) and np.allclose(da, db, rtol=tol, atol=0))


def run_mismatch(setup, theta0="random", n=1, seed=0, stream_id=0, precision=None,
                 rate_target=None):
    """Session of the design scheme with outputs drawn from the true channel.

    The random stream is consumed exactly as in
    :func:`~postmatch.simulate.run_session`, so a true channel equal to the
    design channel reproduces the matched transcript bit for bit.

    Raises
    ------
    OutOfSupport
        When a true output leaves the design posterior support; the step is
        attached to the exception.
    """
    return run_session(setup.design_pair, theta0=theta0, n=n, seed=seed, stream_id=stream_id,
                       precision=precision, rate_target=rate_target,
                       channel=setup.true_channel)


# ---------------------------------------------------------------------------
# induced input law


class EmpiricalLaw(dists.ScalarDistribution):
    """Law given by equally weighted samples.

    The c.d.f. is the empirical one; quantiles use linear interpolation
    between order statistics.
    """

    def __init__(self, samples, label="empirical", effective_size=None):
        x = np.sort(np.asarray(samples, dtype=float).ravel())
        if x.size == 0 or not np.all(np.isfinite(x)):
            raise ValueError("need finite samples")
        self.samples = x
        self.kind = dists.DISCRETE if np.unique(x).size <= 64 else dists.CONTINUOUS
        self.support = (float(x[0]), float(x[-1]))
        self.label = label
        # number of independent draws behind the samples (for standard errors)
        self.effective_size = int(effective_size or x.size)

    def cdf(self, x):
        return np.searchsorted(self.samples, np.asarray(x, dtype=float), side="right") / self.samples.size

    def ppf(self, t):
        return np.quantile(self.samples, np.clip(np.asarray(t, dtype=float), 0.0, 1.0))

    def mean(self):
        return float(np.mean(self.samples))

    def var(self):
        return float(np.var(self.samples))

    def second_moment(self):
        return float(np.mean(self.samples ** 2))

    def nodes(self, max_nodes=None):
        """Points and weights representing the law.

        With more than `max_nodes` samples they are binned into `max_nodes`
        equal-width bins, each represented by the mean of its samples, which
        keeps the first moment exact and perturbs the second by the
        within-bin variance only.
        """
        x = self.samples
        if max_nodes is None or x.size <= max_nodes:
            return x, np.full(x.size, 1.0 / x.size)
        edges = np.linspace(x[0], x[-1], int(max_nodes) + 1)
        idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, int(max_nodes) - 1)
        counts = np.bincount(idx, minlength=int(max_nodes)).astype(float)
        sums = np.bincount(idx, weights=x, minlength=int(max_nodes))
        keep = counts > 0
        return sums[keep] / counts[keep], counts[keep] / x.size


@dataclass
class InducedInput:
    """Estimate of the stationary input under mismatch.

    Attributes
    ----------
    law : EmpiricalLaw
        Final states of all chains (plus post burn-in states when collected).
    ks_statistic, ks_pvalue : float
        Two-sample KS comparison of two independent ensembles.
    burn_in, chains : int
    """

    law: EmpiricalLaw
    ks_statistic: float
    ks_pvalue: float
    burn_in: int
    chains: int
    noise_var: float = math.nan

    @property
    def power(self):
        return self.law.second_moment()

    @property
    def snr(self):
        """Empirical input power over the true noise variance."""
        return self.power / self.noise_var if self.noise_var > 0 else math.nan


def _float_chains(setup, chains, steps, stream, collect=0):
    """Advance `chains` independent float trajectories of the design kernel.

    Returns the final states, followed by the states of the last `collect`
    steps when requested.
    """
    design, ch = setup.design_pair, setup.true_channel
    kern = kernel_for(design)
    u, stream = stream.uniforms(chains)
    kept = []
    if isinstance(kern, DmcKernel):
        theta = u
        for k in range(steps):
            x = np.clip(np.searchsorted(kern._fcx, theta, side="right") - 1, 0, kern.nx - 1)
            if k >= steps - collect:
                kept.append(x.astype(float))
            v, stream = stream.uniforms(chains)
            y = ch.sample_array(x, v)
            new = np.empty_like(theta)
            for j in range(kern.ny):
                sel = y == j
                if sel.any():
                    new[sel] = kern.forward_array_y(theta[sel], j)
            theta = np.clip(new, 0.0, 1.0)
        x = np.clip(np.searchsorted(kern._fcx, theta, side="right") - 1, 0, kern.nx - 1)
        return np.concatenate([x.astype(float)] + kept[1:])
    if not hasattr(kern, "fwd_x_array"):
        raise ValueError(f"no float input-domain kernel for {design.label}")
    x = np.asarray(design.input.ppf(u), dtype=float)
    for k in range(steps):
        v, stream = stream.uniforms(chains)
        y = np.asarray(ch.sample_array(x, v), dtype=float)
        with np.errstate(all="ignore"):
            x = np.asarray(kern.fwd_x_array(x, y), dtype=float)
        if not np.all(np.isfinite(x)):
            i = int(np.argmax(~np.isfinite(x)))
            raise OutOfSupport(f"chain {i} left the design support", step=k + 1)
        if k >= steps - collect and k < steps - 1:
            kept.append(x.copy())
    return np.concatenate([x] + kept)


def estimate_induced_input(setup, burn_in=10_000, chains=8192, collect=256, seed=0):
    """Empirical stationary input law of the mismatch chain.

    Two independent ensembles of ``chains/2`` float chains are run for
    `burn_in` steps each; the states of the last `collect` steps are pooled
    into the empirical law, and the final states of the two ensembles are
    compared by a two-sample KS test as a stability diagnostic.
    """
    half = max(1, int(chains) // 2)
    a = _float_chains(setup, half, int(burn_in), RngStream(seed, 0xA11CE), collect)
    b = _float_chains(setup, half, int(burn_in), RngStream(seed, 0xB0B), collect)
    ks = stats.ks_2samp(a[:half], b[:half])
    noise = getattr(setup.true_channel, "noise", None)
    nv = float(noise.var()) if noise is not None else math.nan
    law = EmpiricalLaw(np.concatenate([a, b]), label=f"induced[{setup.label}]",
                       effective_size=2 * half)
    return InducedInput(law, float(ks.statistic), float(ks.pvalue), int(burn_in), 2 * half, nv)


def invariance_check(setup, induced, samples=20_000, seed=0):
    """KS test of ``kernel(X*, Y*) ~ P_{X*}`` for the induced law.

    Returns
    -------
    statistic, pvalue : float
    """
    design, ch = setup.design_pair, setup.true_channel
    kern = kernel_for(design)
    st = RngStream(seed, 0xC3)
    idx, st = st.uniforms(samples)
    x = induced.law.samples[np.minimum((idx * induced.law.samples.size).astype(int),
                                       induced.law.samples.size - 1)]
    v, st = st.uniforms(samples)
    y = np.asarray(ch.sample_array(x, v), dtype=float)
    nxt = np.asarray(kern.fwd_x_array(x, y), dtype=float)
    res = stats.ks_2samp(nxt, induced.law.samples)
    return float(res.statistic), float(res.pvalue)


# ---------------------------------------------------------------------------
# divergences


def divergence(p, q, tol=1e-10, probe=(1e1, 1e2, 1e3)):
    """``D(p || q)`` in bits for two laws on the real line.

    Continuous laws are integrated adaptively; divergence of the integral
    is detected by comparing truncations to growing windows.

    Raises
    ------
    InfinitePenalty
        When `p` charges a set where `q` vanishes or the integral diverges.
    """
    if p.kind == dists.DISCRETE and q.kind == dists.DISCRETE:
        total = 0.0
        for loc, m in p.atoms:
            if m <= 0:
                continue
            qm = float(q.pmf(loc))
            if qm <= 0:
                raise InfinitePenalty(f"q has no mass at {loc}")
            total += m * math.log2(m / qm)
        return total
    if p.kind != dists.CONTINUOUS or q.kind != dists.CONTINUOUS:
        raise ValueError("divergence between mixed laws is not supported")

    def integrand(y):
        a = float(p.pdf(y))
        if a <= 0:
            return 0.0
        lb = float(q.logpdf(y))
        if not math.isfinite(lb):
            raise InfinitePenalty(f"q vanishes at {y:.6g} where p does not")
        return a * (math.log(a) - lb)

    lo, hi = p.interval()
    pts = []
    for d in (p, q):
        fn = getattr(d, "breakpoints", None)
        pts += list(fn()) if fn else []
    try:
        total = integrate_1d(integrand, lo, hi, tol, pts)
    except IntegrationFailed as exc:
        raise InfinitePenalty("divergence integral did not converge") from exc
    # the integral is finite only if contributions of far shells die out
    centre, scale = float(p.ppf(0.5)), float(p.scale())
    shells = []
    for r in probe:
        part = 0.0
        for a, b in ((centre + r * scale, centre + 2 * r * scale),
                     (centre - 2 * r * scale, centre - r * scale)):
            a, b = max(a, lo), min(b, hi)
            if b > a:
                try:
                    part += integrate_1d(integrand, a, b, tol)
                except IntegrationFailed:
                    part = math.inf
        shells.append(abs(part))
    if shells[-1] > 1e-9 and shells[-1] >= 0.5 * shells[-2]:
        raise InfinitePenalty("divergence integral grows with the integration window")
    return total * _LOG2E


def gaussian_reference_divergence(u, v_var):
    """``D(P_U || N(0, v_var))`` for zero-mean `U` from entropies and moments.

    Uses ``h(V) - h(U) + (log2 e / 2)(E U^2 / E V^2 - 1)``.
    """
    hv = 0.5 * math.log2(2 * math.pi * math.e * v_var)
    second = float(u.var()) + float(u.mean()) ** 2
    return hv - float(u.entropy()) + 0.5 * _LOG2E * (second / v_var - 1.0)


# ---------------------------------------------------------------------------
# rate bound


@dataclass
class MismatchBound:
    """Mismatch achievable rate and its decomposition, all in bits.

    Attributes
    ----------
    rate : float
        ``information - penalty``.
    information : float
        ``I(X*; Y*)`` of the induced pair.
    conditional_divergence : float
        ``D(P_{Y*|X*} || P_{Y|X} | P_{X*})``.
    output_divergence : float
        ``D(P_{Y*} || P_Y)`` against the design output law.
    penalty : float
    cross_rate : float
        ``E log2 f_{Y|X}(Y*|X*)/f_Y(Y*)``, equal to `rate` algebraically.
    """

    rate: float
    information: float
    conditional_divergence: float
    output_divergence: float
    penalty: float
    cross_rate: float
    diagnostics: dict = field(default_factory=dict)


def _input_nodes(law, max_nodes, level=5):
    if isinstance(law, EmpiricalLaw):
        return law.nodes(max_nodes)
    if law.kind == dists.DISCRETE:
        x = np.array([float(a) for a, _ in law.atoms])
        w = np.array([float(m) for _, m in law.atoms])
        return x, w
    return quantile_nodes(law, level)


def _true_nodes(channel, x, level):
    """Output nodes ``y[i, j]`` and weights ``w[i, j]`` given inputs ``x[i]``."""
    if channel.discrete:
        ys = np.arange(channel.ny, dtype=float)
        y = np.broadcast_to(ys, (len(x), channel.ny))
        w = channel.matrix[np.asarray(x, dtype=int)]
        return y, w
    if isinstance(channel, AdditiveNoiseChannel):
        z, wz = quantile_nodes(channel.noise, level)
        return channel._g(x)[:, None] + z[None, :], np.broadcast_to(wz, (len(x), len(z)))
    rows = [quantile_nodes(channel.conditional(float(v)), level) for v in x]
    k = min(len(r[0]) for r in rows)
    return (np.array([r[0][:k] for r in rows]), np.array([r[1][:k] / r[1][:k].sum() for r in rows]))


def _conditional_divergence(design_channel, true_channel, x, w, tol):
    if true_channel.discrete:
        p = true_channel.matrix[np.asarray(x, dtype=int)]
        q = design_channel.matrix[np.asarray(x, dtype=int)]
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(p > 0, p * np.log2(p / q), 0.0)
        if np.any(~np.isfinite(terms)):
            raise InfinitePenalty("true channel charges outputs the design channel excludes")
        return float(w @ terms.sum(axis=1))
    if (isinstance(true_channel, AdditiveNoiseChannel) and isinstance(design_channel, AdditiveNoiseChannel)
            and true_channel.transform == design_channel.transform):
        return divergence(true_channel.noise, design_channel.noise, tol)
    vals = [divergence(true_channel.conditional(float(v)), design_channel.conditional(float(v)), tol)
            for v in x]
    return float(w @ np.array(vals))


def mismatch_rate_bound(design_pair, induced_pair, tol=1e-9, max_components=512, level=5,
                        bins=4096):
    """Achievable rate ``I(X*;Y*) - (D_cond - D_out)`` of a mismatched scheme.

    Parameters
    ----------
    design_pair : InputChannelPair
    induced_pair : MismatchSetup or InputChannelPair
        Supplies the induced input law (``induced_input`` or ``input``) and
        the true channel.
    tol : float
        Allowed negative penalty.  For empirical input laws three standard
        errors of the sample average are added, since the penalty of an
        estimated law fluctuates around that of the stationary one.
    max_components : int
        Input points used for conditional divergences and the induced
        output density of channels that are neither discrete nor additive.
    bins : int
        Maximum number of input nodes; larger empirical laws are binned.

    Raises
    ------
    InfinitePenalty
        When the conditional divergence is infinite.
    ValueError
        When the computed penalty is below the allowance.
    """
    if isinstance(induced_pair, MismatchSetup):
        law, ch = induced_pair.induced_input, induced_pair.true_channel
        if law is None:
            raise ValueError("the setup has no induced input law")
    else:
        law, ch = induced_pair.input, induced_pair.channel
    if isinstance(law, InducedInput):
        law = law.law
    dch = design_pair.channel
    out = design_pair.output

    x, wx = _input_nodes(law, bins, level)
    y, wy = _true_nodes(ch, x, level)
    xb = np.broadcast_to(x[:, None], y.shape)
    live = wy > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        log_true = np.asarray(ch.log_density(y, xb), dtype=float)
        log_design = np.asarray(dch.log_density(y, xb), dtype=float)
        log_out = _log_density(out, y)
    if np.any(~np.isfinite(log_design[live])) or np.any(~np.isfinite(log_out[live])):
        raise InfinitePenalty("true outputs fall where the design model has no density")
    d_cond = _conditional_divergence(dch, ch, *_input_nodes(law, max_components, level), 1e-10)

    def avg(terms):
        return np.where(live, wy * terms, 0.0).sum(axis=1)

    per_x = avg(log_design - log_out) * _LOG2E
    cross = float(wx @ per_x)
    e_true = float(wx @ avg(log_true)) * _LOG2E
    e_out = float(wx @ avg(log_out)) * _LOG2E
    e_star = _output_log_moment(ch, law, x, wx, level, max_components) * _LOG2E
    info = e_true - e_star
    d_out = e_star - e_out
    penalty = d_cond - d_out
    if not math.isfinite(penalty):
        raise InfinitePenalty("mismatch penalty is not finite")
    allowance = tol
    if isinstance(law, EmpiricalLaw):
        sd = math.sqrt(max(float(wx @ (per_x - cross) ** 2), 0.0))
        allowance += 3.0 * sd / math.sqrt(law.effective_size)
    if penalty < -allowance:
        raise ValueError(f"negative mismatch penalty {penalty:.3g} (allowance {allowance:.3g})")
    rate = info - penalty
    return MismatchBound(rate=rate, information=info, conditional_divergence=d_cond,
                         output_divergence=d_out, penalty=penalty, cross_rate=cross,
                         diagnostics={"input_nodes": len(x), "allowance": allowance,
                                      "identity_gap": (e_true - float(wx @ avg(log_design)) * _LOG2E)
                                      - d_cond})


def _output_log_moment(ch, law, x, wx, level, max_components, grid=8192):
    """``E log f_{Y*}(Y*)`` in nats for the induced output law."""
    if ch.discrete:
        py = wx @ ch.matrix[np.asarray(x, dtype=int)]
        nz = py > 0
        return float(py[nz] @ np.log(py[nz]))
    if isinstance(ch, AdditiveNoiseChannel) and len(x) > max_components:
        # exact mixture on a fine output grid, spline-interpolated in log scale
        y, wy = _true_nodes(ch, x, level)
        g = np.linspace(float(y.min()), float(y.max()), grid)
        kinks = []
        fn = getattr(ch.noise, "breakpoints", None)
        lo, hi = ch.noise.interval()
        offs = [p for p in ([lo, hi] + list(fn() if fn else [])) if math.isfinite(p)]
        if offs:
            kinks = [ch._g(x)[:, None] + np.array(offs)[None, :]]
        if kinks and len(x) * len(offs) <= 4 * grid:
            g = np.unique(np.concatenate([g, np.ravel(kinks[0])]))
        fg = np.maximum(_mixture_density(ch, x, wx, g[None, :])[0], 1e-300)
        logf = interpolate.CubicSpline(g, np.log(fg))(y.ravel()).reshape(y.shape)
        terms = np.where(wy > 0, wy * logf, 0.0)
        return float(wx @ terms.sum(axis=1))
    xs, ws = (x, wx) if len(x) <= max_components else _input_nodes(law, max_components, level)
    ys, wys = _true_nodes(ch, xs, level)
    f_star = _mixture_density(ch, xs, ws, ys)
    with np.errstate(divide="ignore"):
        terms = np.where(wys > 0, wys * np.log(f_star), 0.0)
    return float(ws @ terms.sum(axis=1))


def _log_density(dist, y):
    if dist.kind == dists.DISCRETE:
        with np.errstate(divide="ignore"):
            return np.log(np.asarray(dist.pmf(np.asarray(y, dtype=float)), dtype=float))
    return np.asarray(dist.logpdf(y), dtype=float)


def _mixture_density(channel, xs, ws, ys, chunk=64):
    """``sum_k ws[k] f(ys | xs[k])`` evaluated blockwise."""
    flat = ys.ravel()
    out = np.zeros_like(flat)
    for i0 in range(0, len(xs), chunk):
        xb = xs[i0:i0 + chunk]
        dens = np.asarray(channel.density(flat[None, :], xb[:, None]), dtype=float)
        out += ws[i0:i0 + chunk] @ dens
    return out.reshape(ys.shape)


# ---------------------------------------------------------------------------
# Monte Carlo exponent


def empirical_mismatch_exponent(setup, n, trials=1, seeds=(0,), precision=None):
    """Average design-model posterior exponent along mismatch transcripts.

    Returns the mean over trials of ``(1/n) sum_k log2 f_{Y|X}(Y*_k|X*_k)
    / f_Y(Y*_k)``; trial ``i`` of seed ``s`` uses stream id ``i``.

    Raises
    ------
    DensityUnderflow
        When a factor vanishes.
    """
    vals = []
    for s in seeds:
        for i in range(int(trials)):
            tr = run_mismatch(setup, "random", n, seed=s, stream_id=i, precision=precision)
            vals.append(posterior_log_density_at_message(tr))
    return float(np.mean(vals))


def empirical_snr(induced):
    """Ratio of the induced input power to the true noise variance."""
    return induced.snr
