import math

import numpy as np
import pytest
from scipy import integrate

from postmatch import analysis as an
from postmatch import channels as ch
from postmatch.core import distributions as dists
from postmatch.core.errors import NotSeparable, RateAboveThreshold
from postmatch.matching import kernel_for
from postmatch.simulate import decode_variable_rate, run_session

BSC = ch.bsc(0.2)
AWGN = ch.awgn(3.0)
UNIF = ch.uniform_pair()
EXPO = ch.exponential_pair()
RHO2 = an.ShapingFunction.inverse_sqrt()
IDENT = an.ShapingFunction.identity()

H_TRIANGULAR = 1.0 / (2.0 * math.log(2.0))


def test_lipschitz_operators():
    assert an.lipschitz_global(lambda x: 2 * x, 0.1, 0.7) == pytest.approx(2.0)
    k = kernel_for(BSC)
    w = k.inverse_array
    assert an.lipschitz_global(lambda s: float(w(np.array([s]), 0.3)[0]), 0.1, 0.6) == pytest.approx(0.625)
    assert an.lipschitz_local(lambda s: float(w(np.array([s]), 0.3)[0]), 0.4) == pytest.approx(0.625)
    ka = kernel_for(AWGN)
    f = lambda x: float(ka.inv_x_array(np.array([x]), 0.7)[0])
    assert an.lipschitz_global(f, -1.3, 2.1) == pytest.approx(0.5, rel=1e-12)


def test_r_dagger_bsc_constant_weight_not_contracting():
    rep = an.r_dagger(BSC)
    assert rep.nonpositive and "nonpositive" in rep.flags
    # sup over s of the mean slope is attained below p
    assert rep.value == pytest.approx(-math.log2(0.5 * (1 / 0.4 + 1 / 1.6)), abs=1e-9)


def test_r_dagger_awgn_linear_kernel():
    assert an.r_dagger(AWGN).value == pytest.approx(1.0, abs=1e-6)


def test_r_dagger_uniform_matches_mean_slope():
    # the inverse kernel is affine with slope f_Y(y); the expectation is E f_Y(Y)
    mean_slope, _ = integrate.quad(lambda y: min(y, 2 - y) ** 2, 0, 2, points=[1])
    assert mean_slope == pytest.approx(2 / 3)
    assert an.r_dagger(UNIF).value == pytest.approx(-math.log2(mean_slope), abs=1e-6)


@pytest.fixture(scope="module")
def star_reports():
    return {"uniform": an.r_star(UNIF), "awgn": an.r_star(AWGN),
            "exp_rho2": an.r_star(EXPO, RHO2), "exp_id": an.r_star(EXPO)}


def test_r_star_values(star_reports):
    assert star_reports["uniform"].value == pytest.approx(H_TRIANGULAR, abs=0.01)
    assert star_reports["awgn"].value == pytest.approx(1.0, abs=0.01)
    assert star_reports["exp_rho2"].value == pytest.approx(0.305, abs=0.005)
    assert star_reports["exp_id"].value == pytest.approx(-0.61, abs=0.01)


def test_r_star_monotone_in_q(star_reports):
    # -(1/q) log2 r_q is nonincreasing in q, i.e. nondecreasing along the schedule
    for rep in star_reports.values():
        v = np.asarray(rep.q_values)
        assert np.all(np.diff(v) >= -0.02)
        assert "non_monotone" not in rep.flags


def _e_log2(dist, g):
    lo, hi = dist.interval()
    val, _ = integrate.quad(lambda y: g(y) * dist.pdf(y), lo, hi, limit=200)
    return val


def test_r_star_separable_closed_forms():
    assert an.r_star_separable(AWGN, IDENT).value == pytest.approx(1.0, abs=1e-6)
    assert an.r_star_separable(UNIF, IDENT).value == pytest.approx(H_TRIANGULAR, abs=1e-6)
    # half the mean of log2 Y under the exponential output law
    want = 0.5 * _e_log2(EXPO.output, math.log2)
    assert want == pytest.approx(0.305, abs=0.001)
    assert an.r_star_separable(EXPO, RHO2).value == pytest.approx(want, abs=1e-6)
    assert an.r_star_separable(EXPO, IDENT).value == pytest.approx(-2 * want, abs=1e-6)


def test_r_star_agrees_with_separable(star_reports):
    for key, pair, rho in (("uniform", UNIF, IDENT), ("awgn", AWGN, IDENT), ("exp_rho2", EXPO, RHO2)):
        sep = an.r_star_separable(pair, rho)
        assert star_reports[key].value == pytest.approx(sep.value, abs=0.01)


def test_not_separable():
    with pytest.raises(NotSeparable):
        an.r_star_separable(AWGN, RHO2)
    # a wrong factorization is caught by the grid check
    with pytest.raises(NotSeparable):
        an.r_star_separable(AWGN, IDENT, u=lambda s: s, v=lambda y: 0.7 + 0 * np.asarray(y))


def test_tail_function_examples():
    g = dists.Gaussian(0.0, 3.0)
    assert an.tail_function(g, 0.0) == 1.0
    assert an.tail_function(dists.Uniform(0, 1), 0.25) == pytest.approx(0.75)
    for ell in (0.5, 2.0, 6.0):
        assert an.tail_function(g, ell) == pytest.approx(2 * g.sf(ell / 2), rel=1e-12)
    shaped = RHO2.shaped_law(EXPO.input)
    for ell in (2.0, 10.0, 100.0):
        assert an.tail_function(shaped, ell) <= ell ** -2


def test_tail_function_asymmetric_matches_brute_force():
    d = dists.Exponential(1.0)
    for ell in (0.3, 1.0, 3.0):
        starts = np.linspace(0, 5, 20001)
        brute = float(np.min(d.cdf(starts) + d.sf(starts + ell)))
        assert an.tail_function(d, ell) == pytest.approx(brute, abs=1e-7)
        # exponential: best window starts at 0
        assert an.tail_function(d, ell) == pytest.approx(math.exp(-ell), rel=1e-9)


def test_tail_function_monotone_and_zero_past_support():
    for d in (dists.Uniform(0, 1), dists.Triangular(0, 1, 2), dists.Gaussian(0, 1), dists.Exponential(1.0)):
        ells = np.linspace(0, 4, 81)
        vals = [an.tail_function(d, e) for e in ells]
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
    assert an.tail_function(dists.Uniform(0, 1), 1.0) == 0.0
    assert an.tail_function(dists.Triangular(0, 1, 2), 2.5) == 0.0


def test_schedule_exponential_exponent():
    rep = an.r_star_separable(EXPO, RHO2)
    shaped = RHO2.shaped_law(EXPO.input)
    for n in (100, 400):
        e = -an.target_error_schedule(0.2, rep, shaped, n, margin=0.0, log2=True) / n
        assert e == pytest.approx(2 * (rep.value - 0.2), abs=1e-3)
    assert 2 * (rep.value - 0.2) == pytest.approx(0.21, abs=0.005)


def test_schedule_awgn_double_exponential():
    rep = an.r_star_separable(AWGN, IDENT)
    d10 = an.target_error_schedule(0.5, rep, AWGN.input, 10, 0.1)
    ell = 2 ** (10 * 0.5 * 0.9)
    assert d10 == pytest.approx(2 * AWGN.input.sf(ell / 2), rel=1e-9)
    vals = [-an.target_error_schedule(0.5, rep, AWGN.input, n, 0.1, log2=True) for n in range(10, 18)]
    ratios = [b / a for a, b in zip(vals, vals[1:])]
    # each extra use multiplies -log2 delta by about 2^(2 (C - R)(1 - margin))
    assert ratios[-1] == pytest.approx(2 ** 0.9, rel=0.02)
    assert all(b >= a for a, b in zip(ratios, ratios[1:]))


def test_schedule_rejects_rate_at_threshold():
    rep = an.r_star_separable(AWGN, IDENT)
    with pytest.raises(RateAboveThreshold):
        an.target_error_schedule(rep.value, rep, AWGN.input, 10)


def test_uniform_end_to_end(star_reports):
    rep = star_reports["uniform"]
    rate = 0.5 * rep.value
    n = next(m for m in range(10, 400, 10) if an.rate_shortfall_bound(rep, rate, m) <= 0.01)
    delta = an.target_error_schedule(rate, rep, dists.Uniform(0, 1), n)
    short = 0
    trials = 200
    for sid in range(trials):
        tr = run_session(UNIF, "random", n, seed=9, stream_id=sid)
        iv = decode_variable_rate(tr, delta)
        assert iv.contains_message
        short += iv.rate < rate
    assert short / trials <= 0.05


def test_report_text_round_trip(star_reports):
    for rep in list(star_reports.values()) + [an.r_dagger(BSC)]:
        back = an.ThresholdReport.from_text(rep.to_text())
        assert back.value == rep.value and back.kind == rep.kind
        assert back.rho_label == rep.rho_label and back.flags == rep.flags
        assert back.q_schedule == tuple(rep.q_schedule)
        assert back.q_values == tuple(float(v) for v in rep.q_values)
        assert back.to_text() == rep.to_text()


def test_weight_and_shaping_validation():
    with pytest.raises(ValueError):
        an.WeightFunction(lambda s: 0.5 + 0 * s)
    an.WeightFunction.symmetric(0.5).validate()
    RHO2.validate(EXPO.input)
    x = np.linspace(0.1, 5, 50)
    assert np.allclose(RHO2.inverse(RHO2(x)), x, rtol=1e-12)


def test_psi_diagnostic_finite():
    out = an.psi_diagnostic(AWGN, an.WeightFunction.constant(), 0.1, 0.9, 0.5, samples=512)
    assert out["psi"] == pytest.approx(2 * out["j"] + 2 * (out["k_s"] + out["k_t"]))
    assert out["j"] == 1.0
