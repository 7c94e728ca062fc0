"""Acceptance criteria 1-10 (seed 42).

Each test records one pass/fail line, printed in the terminal summary.
"""

import math
import time
from fractions import Fraction
from itertools import product

import gmpy2
import numpy as np
import pytest
from gmpy2 import mpfr
from scipy import stats

from postmatch import analysis as an
from postmatch import channels as ch
from postmatch import mismatch as mm
from postmatch.core.precision import UnitValue, working_precision
from postmatch.core.rng import RngStream
from postmatch.matching import kernel_for
from postmatch.matching.kernels import kernel_eval, normalized_kernel_eval
from postmatch.matching.properties import dominance_permutation, dominated, fixed_point_scan
from postmatch.simulate import (PosteriorMap, decode_fixed_rate, decode_rollback,
                                decode_variable_rate, posterior_log_density_at_message,
                                run_session, transcript_from_outputs)

SEED = 42
P = 128
GRID = [(i + 0.5) / 100 for i in range(100)]


def rel(a, b):
    return float(abs(mpfr(a, P) - mpfr(b, P)) / max(abs(mpfr(b, P)), mpfr(2) ** -100))


# ---------------------------------------------------------------------------
# 1. closed-form kernels


def _closed_form_errors():
    worst = {}
    with working_precision(P):
        # BSC: four-branch affine map
        pair, p = ch.bsc(0.2), mpfr("0.2")
        e = 0.0
        for th, ph in product(GRID, (0.1, 0.3, 0.6, 0.9)):
            t = mpfr(repr(th))
            if ph < 0.5:
                want = 2 * (1 - p) * t if t < 0.5 else 2 * p * t + 1 - 2 * p
            else:
                want = 2 * p * t if t < 0.5 else 2 * (1 - p) * t - (1 - 2 * p)
            got = normalized_kernel_eval(pair, UnitValue(repr(th), P), UnitValue(repr(ph), P)).value
            e = max(e, rel(got, want))
        worst["bsc"] = e
        # exponential input with a mean constraint, a = b = 1
        pair, e = ch.exp_mean_pair(1, 1), 0.0
        for th, ph in product(GRID, (0.05, 0.4, 0.9)):
            if th >= 1 - (1 - ph) / 2:
                continue
            t, f = mpfr(repr(th)), mpfr(repr(ph))
            want = 2 * t * (1 - f) if t <= 0.5 else (1 - f) / (2 * (1 - t))
            got = normalized_kernel_eval(pair, UnitValue(repr(th), P), UnitValue(repr(ph), P)).value
            e = max(e, rel(got, want))
        worst["exp_mean"] = e
        # AWGN, uniform and exponential in input coordinates
        awgn, unif, expo = ch.awgn(3.0), ch.uniform_pair(), ch.exponential_pair()
        ea = eu = ee = 0.0
        for i in range(100):
            x = mpfr(i - 50) / 17
            y = mpfr(3 * i - 140) / 29
            ea = max(ea, rel(kernel_eval(awgn, x, y), 2 * (x - mpfr(3) / 4 * y)))
            xu = mpfr(i + 1) / 102
            yu = xu + mpfr(i % 10 + 1) / 11 * (mpfr(1) if i % 2 else 1 - xu)
            yu = min(yu, xu + mpfr("0.999"))
            want = xu / yu if yu <= 1 else (xu - yu + 1) / (2 - yu)
            eu = max(eu, rel(kernel_eval(unif, xu, yu), want))
            xe = mpfr(i + 1) / 25
            ye = xe * (1 + mpfr(i % 7 + 1) / 5)
            ee = max(ee, rel(kernel_eval(expo, xe, ye), gmpy2.log(ye / (ye - xe))))
        worst.update(awgn=ea, uniform=eu, exponential=ee)
        # DMC: linear interpolation of F_{X|Y}(.|y) between the points F_X(x)
        pair = ch.dmc([["0.6", "0.3", "0.1"], ["0.2", "0.5", "0.3"], ["0.1", "0.2", "0.7"]],
                      input_pmf=[Fraction(1, 2), Fraction(1, 3), Fraction(1, 6)])
        px = [Fraction(v) for v in pair.px_exact]
        kern, e = kernel_for(pair), 0.0
        for th, y in product(GRID, range(3)):
            post = [px[x] * pair.channel.exact[x][y] for x in range(3)]
            post = [v / sum(post) for v in post]
            t, cx, cp, want = Fraction(repr(th)), Fraction(0), Fraction(0), Fraction(1)
            for x in range(3):
                if t <= cx + px[x]:
                    want = cp + post[x] / px[x] * (t - cx)
                    break
                cx, cp = cx + px[x], cp + post[x]
            got = kern.fwd_y(mpfr(repr(th)), y)
            e = max(e, rel(got, mpfr(want.numerator) / want.denominator))
        worst["dmc"] = e
    return worst


def test_criterion_1_closed_form_kernels(criterion):
    t0 = time.perf_counter()
    worst = _closed_form_errors()
    dt = time.perf_counter() - t0
    ok = max(worst.values()) < 1e-12 and dt < 1.0
    detail = "max rel err " + ", ".join(f"{k}={v:.1e}" for k, v in worst.items()) + f"; {dt:.2f} s"
    criterion(1, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# 2. posterior exponent


POSTERIOR_CASES = [("bsc", ch.bsc(0.2), 0.278), ("awgn", ch.awgn(3.0), 1.0),
                   ("uniform", ch.uniform_pair(), 0.7213), ("exponential", ch.exponential_pair(), 0.8327),
                   ("exp_mean", ch.exp_mean_pair(1, 1), 1.0)]


def test_criterion_2_posterior_exponent(criterion):
    parts, ok = [], True
    for name, pair, ref in POSTERIOR_CASES:
        info = ch.mutual_information(pair)
        t0 = time.perf_counter()
        tr = run_session(pair, "random", 5000, seed=SEED, rate_target=0.0)
        e = posterior_log_density_at_message(tr)
        dt = time.perf_counter() - t0
        good = abs(e - info) <= 0.05 * info and abs(info - ref) <= 5e-4 and dt < 30
        ok &= good
        parts.append(f"{name} {e:.4f}/{info:.4f} ({dt:.1f} s)")
    criterion(2, ok, "exponent/I: " + "; ".join(parts))
    assert ok


# ---------------------------------------------------------------------------
# 3. zero-error uniform channel


def test_criterion_3_uniform_zero_error(criterion):
    pair = ch.uniform_pair()
    n, trials = 1000, 100
    hits, worst_ulps, rates = 0, 0.0, []
    for sid in range(trials):
        tr = run_session(pair, "random", n, seed=SEED, stream_id=sid)
        iv = decode_variable_rate(tr, 0.0)
        hits += iv.contains_message
        with working_precision(tr.precision):
            # f_Z = 1 on the support, f_Y is the triangular density
            want = float(sum(-gmpy2.log2(y if y <= 1 else 2 - y) for y in tr.ys) / n)
        worst_ulps = max(worst_ulps, abs(iv.rate - want) / math.ulp(want))
        rates.append(iv.rate)
    mean = float(np.mean(rates))
    ok = hits == trials and worst_ulps <= 1 and abs(mean - 0.7213) <= 0.02 * 0.7213
    detail = f"containment {hits}/{trials}, rate identity {worst_ulps:.0f} ulp, mean rate {mean:.4f}"
    criterion(3, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# 4. BSC achievability trend


def test_criterion_4_bsc_variable_rate(criterion):
    pair = ch.bsc(0.2)
    ns, trials, delta = (500, 1000, 2000), 500, 1e-3
    miss = {n: 0 for n in ns}
    rates = {n: [] for n in ns}
    t0 = time.perf_counter()
    for sid in range(trials):
        # one session per trial; shorter horizons decode its prefixes
        tr = run_session(pair, "random", ns[-1], seed=SEED, stream_id=sid)
        for n in ns:
            iv = decode_variable_rate(tr, delta, n_used=n)
            miss[n] += not iv.contains_message
            rates[n].append(iv.rate)
    dt = time.perf_counter() - t0
    mean = [float(np.mean(rates[n])) for n in ns]
    ok = (all(miss[n] / trials <= 2e-3 for n in ns) and mean[-1] >= 0.85 * 0.278
          and mean[0] < mean[1] < mean[2] and dt < 300)
    detail = (", ".join(f"n={n}: miss {miss[n]}/{trials} rate {m:.4f}" for n, m in zip(ns, mean))
              + f"; {dt:.0f} s")
    criterion(4, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# 5. Schalkwijk-Kailath


def test_criterion_5_schalkwijk_kailath(criterion):
    pair = ch.awgn(3.0)
    tr = run_session(pair, "random", 200, seed=SEED)
    with working_precision(tr.precision):
        exact = all(tr.xs[k + 1] == 2 * (tr.xs[k] - mpfr("0.75") * tr.ys[k]) for k in range(tr.n - 1))
    ns, trials, rate = list(range(8, 21)), 10_000, 0.9
    miss = dict.fromkeys(ns, 0)
    for sid in range(trials):
        s = run_session(pair, "random", ns[-1], seed=SEED, stream_id=sid, rate_target=rate)
        for n in ns:
            miss[n] += not decode_fixed_rate(s, rate, n_used=n, method="gaussian").contains_message
    live = [n for n in ns if miss[n] > 0]
    # stop at the trial floor: the first horizon without misses
    live = live[: next((i for i, n in enumerate(live) if n != ns[i]), len(live))]
    v = np.array([-math.log2(miss[n] / trials) for n in live])
    half = len(v) // 2
    increasing = bool(np.all(np.diff(v) > 0))
    curv = float(np.polyfit(live, v, 2)[0]) if len(v) >= 3 else float("nan")
    s1 = float(np.polyfit(live[:half], v[:half], 1)[0]) if half >= 2 else float("nan")
    s2 = float(np.polyfit(live[half:], v[half:], 1)[0]) if len(v) - half >= 2 else float("nan")
    ok = exact and len(v) >= 4 and increasing and curv > 0 and s2 > s1
    detail = (f"recursion exact={exact}; -log2 p_e " + " ".join(f"{n}:{x:.2f}" for n, x in zip(live, v))
              + f"; floor from n={live[-1] + 1 if live else ns[0]}; curvature {curv:.3f}, slopes {s1:.2f}->{s2:.2f}")
    criterion(5, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# 6. thresholds


def test_criterion_6_thresholds(criterion):
    ident, rho2 = an.ShapingFunction.identity(), an.ShapingFunction.inverse_sqrt()
    awgn, unif, expo = ch.awgn(3.0), ch.uniform_pair(), ch.exponential_pair()
    c = 0.5 * math.log2(4.0)
    h_y = 1 / (2 * math.log(2))  # entropy of the triangular law in bits
    sep_a = an.r_star_separable(awgn, ident).value
    sep_u = an.r_star_separable(unif, ident).value
    rs2 = an.r_star(expo, rho2).value
    rs1 = an.r_star(expo, ident).value
    rd = an.r_dagger(ch.bsc(0.2))
    ok = (abs(sep_a - c) <= 1e-6 and abs(sep_u - h_y) <= 1e-6 and abs(rs2 - 0.305) <= 0.005
          and abs(rs1 + 0.61) <= 0.01 and rd.nonpositive and "nonpositive" in rd.flags)
    detail = (f"sep AWGN {sep_a:.9f}, sep uniform {sep_u:.9f} (h(Y)={h_y:.9f}), "
              f"r_star exp/rho2 {rs2:.4f}, exp/identity {rs1:.4f}, bsc R_dagger {rd.value:.4f}")
    criterion(6, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# 7. distribution preservation


def _pushforward_pvalues(pair, n=100_000):
    kern = kernel_for(pair)
    th, st = RngStream(SEED, 7).uniforms(n)
    v, st = st.uniforms(n)
    lam, _ = st.uniforms(n)
    if pair.channel.discrete:
        x = np.searchsorted(kern._fcx[1:-1], th, side="right")
        y = pair.channel.sample_array(x, v)
        nxt = np.empty(n)
        for yy in range(pair.channel.ny):
            m = y == yy
            nxt[m] = kern.forward_array_y(th[m], yy)
        xn = np.searchsorted(kern._fcx[1:-1], nxt, side="right")
        counts = np.bincount(xn, minlength=pair.channel.nx)
        keep = pair.px > 0
        chi = stats.chisquare(counts[keep], n * pair.px[keep]).pvalue
        return min(chi, stats.kstest(nxt, "uniform").pvalue)
    x = np.asarray(pair.input.ppf(th), dtype=float)
    y = np.asarray(pair.channel.sample_array(x, v), dtype=float)
    if hasattr(kern, "fwd_x_array") and pair.input.kind == "continuous":
        return stats.kstest(kern.fwd_x_array(x, y), pair.input.cdf).pvalue
    out = pair.output
    phi = np.asarray(out.cdf(y), dtype=float)
    if out.atoms:
        phi = phi - np.asarray(out.pmf(y), dtype=float) * lam
    nxt = np.array([kern.forward_array(np.array([t]), f)[0] for t, f in zip(th, phi)])
    return stats.kstest(nxt, "uniform").pvalue


ZOO = [ch.bsc(0.2), ch.bec(erasure=0.3), ch.dmc([[0.6, 0.3, 0.1], [0.2, 0.5, 0.3]]), ch.square_law_dmc(),
       ch.awgn(3.0), ch.uniform_pair(), ch.exponential_pair(), ch.exp_mean_pair(1, 1), ch.square_law_pair()]


def test_criterion_7_distribution_preservation(criterion):
    pv = {pair.label: _pushforward_pvalues(pair) for pair in ZOO}
    tr = run_session(ch.exp_mean_pair(1, 1), "random", 100_000, seed=SEED, rate_target=0.0)
    mean = ch.empirical_constraint(tr.xs, ch.ConstraintFunction(lambda x: x, 1.0))
    ok = all(p > 0.01 for p in pv.values()) and mean <= 1.05
    detail = "p-values " + ", ".join(f"{k} {v:.3f}" for k, v in pv.items()) + f"; exp_mean mean {mean:.4f}"
    criterion(7, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# 8. decoder equivalence


def _compare(pair, ys, delta, tol):
    tr = transcript_from_outputs(pair, ys)
    v = decode_variable_rate(tr, delta)
    r = decode_rollback(tr, delta)
    post = PosteriorMap(tr)
    with post.context():
        gap = abs(post.forward(r.hi.value) - post.forward(r.lo.value) - (1 - mpfr(repr(delta))))
    return gap <= tol, v.length <= r.length, float(gap)


def test_criterion_8_decoder_equivalence(criterion):
    pair = ch.bsc(0.2)
    delta = 0.01
    tol = mpfr(2) ** -(P - 16)
    mass_ok = shorter = True
    worst, checked = 0.0, 0
    for n in range(1, 13):
        for ys in product((0, 1), repeat=n):
            a, b, g = _compare(pair, ys, delta, tol)
            mass_ok &= a
            shorter &= b
            worst = max(worst, g)
            checked += 1
    # the output process of this pair is i.i.d. uniform bits, so uniform
    # sampling of sequences follows the channel
    rng = np.random.default_rng(SEED)
    for n in range(13, 21):
        for _ in range(10_000):
            a, b, g = _compare(pair, rng.integers(0, 2, n), delta, tol)
            mass_ok &= a
            shorter &= b
            worst = max(worst, g)
            checked += 1
    ok = mass_ok and shorter
    detail = f"{checked} sequences; max |mass - (1-delta)| = {worst:.2e}; variable never longer: {shorter}"
    criterion(8, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# 9. mismatch


def test_criterion_9_mismatch(criterion):
    sk = ch.awgn(3.0)
    setup = mm.MismatchSetup(sk, ch.laplace_noise(1.0))
    setup.check()
    setup.induced_input = mm.estimate_induced_input(setup, burn_in=10_000, seed=SEED)
    bound = mm.mismatch_rate_bound(sk, setup)
    snr = mm.empirical_snr(setup.induced_input)
    expo = mm.empirical_mismatch_exponent(setup, 5000, seeds=(SEED,))
    penalties = {"laplace": bound.penalty}
    others = [(sk, ch.gaussian_noise(2.0)), (sk, ch.gaussian_noise(0.5)), (sk, ch.laplace_noise(2.0)),
              (sk, ch.uniform_noise(2.0)), (ch.bsc(0.2), ch.bsc(0.25).channel),
              (ch.bsc(0.2), ch.bsc(0.1).channel)]
    nonneg = bound.penalty >= -1e-9
    for design, true in others:
        s = mm.MismatchSetup(design, true)
        s.induced_input = mm.estimate_induced_input(s, burn_in=10_000, chains=4096, seed=SEED)
        b = mm.mismatch_rate_bound(design, s)
        penalties[true.label] = b.penalty
        nonneg &= b.penalty >= -1e-9
    ok = abs(bound.rate - 1.0) <= 0.01 and abs(snr - 3) <= 0.1 and abs(expo - 1.0) <= 0.1 and nonneg
    detail = (f"bound {bound.rate:.4f}, SNR* {snr:.4f}, exponent {expo:.4f}; penalties "
              + ", ".join(f"{k} {v:.2e}" for k, v in penalties.items()))
    criterion(9, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# 10. fixed points and dominance


def test_criterion_10_fixed_points_and_dominance(criterion):
    sq = fixed_point_scan(ch.square_law_dmc())
    flagged = any(abs(t - 0.5) < 1e-12 for t in sq.fixed_points)
    clear = {p.label: fixed_point_scan(p, grid_size=1000, phi_grid=200).fixed_point_free
             for p in (ch.bsc(0.2), ch.uniform_pair(), ch.awgn(3.0))}
    rng = np.random.default_rng(SEED)
    good = tested = 0
    while tested < 10_000:
        k = int(rng.integers(2, 9))
        wp, wq = rng.integers(1, 1000, k), rng.integers(1, 1000, k)
        p = [Fraction(int(v), int(wp.sum())) for v in wp]
        q = [Fraction(int(v), int(wq.sum())) for v in wq]
        if p == q:
            continue
        perm = dominance_permutation(p, q)
        good += dominated([q[i] for i in perm], [p[i] for i in perm])
        tested += 1
    ok = flagged and all(clear.values()) and good == tested
    detail = (f"square-law pair fixed point at 0.5: {flagged}; fixed-point free "
              + ", ".join(f"{k}={v}" for k, v in clear.items()) + f"; dominance {good}/{tested}")
    criterion(10, ok, detail)
    assert ok, detail
