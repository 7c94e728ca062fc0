"""Randomized properties (hypothesis)."""

from fractions import Fraction

import numpy as np
from gmpy2 import mpfr
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from postmatch import channels as ch
from postmatch.core.precision import UnitValue, format_mp, parse_mp, working_precision
from postmatch.matching import kernel_for
from postmatch.matching.properties import dominance_permutation, dominated
from postmatch.matching.upf import Upf

FAST = settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])


def pmf(size):
    return st.lists(st.integers(1, 1000), min_size=size, max_size=size).map(
        lambda w: [Fraction(v, sum(w)) for v in w])


pmf_pairs = st.integers(2, 8).flatmap(lambda k: st.tuples(pmf(k), pmf(k)))


@settings(max_examples=2000, deadline=None)
@given(pmf_pairs)
def test_dominance_permutation_orders_strictly(pq):
    p, q = pq
    assume(p != q)
    perm = dominance_permutation(p, q)
    assert sorted(perm) == list(range(len(p)))
    sp, sq = [p[i] for i in perm], [q[i] for i in perm]
    assert dominated(sq, sp)
    # partial sums of the sorted gaps are positive before the end
    gaps = np.cumsum([float(a - b) for a, b in zip(sp, sq)])[:-1]
    assert np.all(gaps > 0)


@settings(max_examples=500, deadline=None)
@given(st.floats(0.0, 1.0), st.integers(2, 80))
def test_dominance_binary_always_orders(a, scale):
    p = [Fraction(round(a * 1000), 1000), 1 - Fraction(round(a * 1000), 1000)]
    q = [Fraction(scale, 100), 1 - Fraction(scale, 100)]
    assume(p != q)
    assert dominated(p, q) or dominated(q, p)


@FAST
@given(st.floats(0.0, 1.0), st.sampled_from([53, 64, 128, 300]))
def test_unit_value_format_round_trip(x, prec):
    u = UnitValue(x, prec)
    assert 0 <= u.value <= 1
    assert parse_mp(format_mp(u.value), prec) == u.value


@FAST
@given(st.floats(allow_nan=False, allow_infinity=False).filter(lambda v: v < 0 or v > 1))
def test_unit_value_rejects_outside(x):
    try:
        UnitValue(x)
    except ValueError:
        return
    raise AssertionError("accepted a value outside [0, 1]")


KERNEL_PAIRS = [ch.bsc(0.2), ch.bec(erasure=0.3), ch.dmc([[0.7, 0.2, 0.1], [0.1, 0.3, 0.6]]),
                ch.awgn(3.0), ch.uniform_pair(), ch.exponential_pair()]


@FAST
@given(st.sampled_from(KERNEL_PAIRS), st.floats(1e-6, 1 - 1e-6), st.floats(1e-6, 1 - 1e-6),
       st.floats(1e-6, 1 - 1e-6))
def test_kernel_monotone_in_theta(pair, a, b, phi):
    k = kernel_for(pair)
    lo, hi = min(a, b), max(a, b)
    with working_precision(128):
        f = lambda t: k.fwd(mpfr(repr(t)), mpfr(repr(phi)))
        try:
            flo, fhi = f(lo), f(hi)
        except Exception:  # outside the posterior support of this output
            assume(False)
        assert flo <= fhi


def upfs():
    cuts = st.lists(st.fractions(Fraction(1, 1000), Fraction(999, 1000)), min_size=0, max_size=5,
                    unique=True).map(lambda c: [Fraction(0)] + sorted(c) + [Fraction(1)])

    def build(args):
        bounds, order = args
        widths = [b - a for a, b in zip(bounds, bounds[1:])]
        order = order[: len(widths)]
        starts, acc = {}, Fraction(0)
        for j in order:
            starts[j] = acc
            acc += widths[j]
        return Upf([(bounds[i], bounds[i + 1], starts[i]) for i in range(len(widths))])

    return cuts.flatmap(lambda b: st.tuples(st.just(b), st.permutations(range(len(b) - 1)))).map(build)


@FAST
@given(upfs(), st.floats(0.0, 1.0, exclude_min=True, exclude_max=True))
def test_upf_is_a_bijection(mu, t):
    # piece offsets are rounded once, so the round trip is exact up to an ulp
    tol = mpfr(2) ** -126
    dyadic = all(v.denominator & (v.denominator - 1) == 0 for p in mu.pieces for v in p)
    # within an ulp of a cut the point is absorbed into the boundary
    cuts = {float(v) for p in mu.pieces for v in p[:2]}
    assume(all(abs(t - c) > 2.0 ** -100 for c in cuts))
    with working_precision(128):
        u = UnitValue(t, 128)
        for back in (mu.inverse(mu(u)), mu(mu.inverse(u))):
            assert abs(back.value - u.value) <= tol
            if dyadic:
                assert back == u


@FAST
@given(st.lists(st.integers(1, 7), min_size=1, max_size=5, unique=True), st.integers(1, 2 ** 64 - 1))
def test_dyadic_upf_round_trip_is_exact(cuts, k):
    t = Fraction(k, 2 ** 64)
    bounds = [Fraction(0)] + [Fraction(c, 8) for c in sorted(cuts)] + [Fraction(1)]
    widths = [b - a for a, b in zip(bounds, bounds[1:])]
    starts = np.concatenate([[0], np.cumsum(widths[::-1])])[:-1][::-1]
    mu = Upf([(bounds[i], bounds[i + 1], Fraction(starts[i])) for i in range(len(widths))])
    u = UnitValue(t, 128)
    assert mu.inverse(mu(u)) == u and mu(mu.inverse(u)) == u


@FAST
@given(upfs())
def test_upf_preserves_lebesgue_measure(mu):
    # an interval exchange moves each piece rigidly
    x = np.sort(np.random.default_rng(0).random(4000))
    y = np.asarray(mu.apply_array(x))
    assert np.all((y >= 0) & (y <= 1))
    assert abs(np.mean(y < 0.5) - np.mean(x < 0.5)) < 0.05
