import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from postmatch import channels as ch
from postmatch.core import distributions as dists
from postmatch.core.errors import NotDiscrete, UnsupportedOutput
from postmatch.core.quadrature import integrate_1d
from postmatch.core.rng import RngStream


def h2(p):
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


CONTINUOUS_PAIRS = [ch.awgn(3.0), ch.uniform_pair(), ch.exponential_pair(), ch.exp_mean_pair(1, 1)]


def test_bsc_output_is_fair_bit():
    out = ch.output_distribution(ch.bsc(0.2))
    assert list(out.probs) == [0.5, 0.5]


def test_uniform_pair_output_is_triangular():
    out = ch.output_distribution(ch.uniform_pair())
    y = np.array([0.1, 0.5, 0.99, 1.2, 1.7])
    assert np.allclose(out.pdf(y), np.where(y <= 1, y, 2 - y), atol=1e-9)


def test_exponential_pair_output_is_erlang():
    out = ch.output_distribution(ch.exponential_pair())
    y = np.array([0.2, 1.0, 3.0, 7.0])
    assert np.allclose(out.pdf(y), y * np.exp(-y), atol=1e-9)


def test_numeric_output_law_matches_closed_form():
    # a generic pair (no closed form) built from the same parts as the AWGN pair
    pair = ch.InputChannelPair(dists.Gaussian(0.0, 3.0), ch.gaussian_noise(1.0))
    y = np.linspace(-6, 6, 25)
    assert np.allclose(pair.output.cdf(y), stats.norm.cdf(y, scale=2.0), atol=1e-9)


def test_inverse_channel_uniform():
    post = ch.inverse_channel(ch.uniform_pair(), 0.5)
    x = np.array([0.1, 0.25, 0.4])
    assert np.allclose(post.cdf(x), x / 0.5)
    assert post.cdf(0.6) == 1.0


def test_inverse_channel_exponential():
    post = ch.inverse_channel(ch.exponential_pair(), 2.0)
    assert post.cdf(1.0) == pytest.approx(0.5)
    assert post.pdf(0.3) == pytest.approx(0.5)


def test_inverse_channel_awgn_mean():
    post = ch.inverse_channel(ch.awgn(3.0), 1.2)
    assert post.mean() == pytest.approx(0.75 * 1.2, rel=1e-12)


def test_inverse_channel_bayes_route_matches_closed_form():
    generic = ch.InputChannelPair(dists.Gaussian(0.0, 3.0), ch.gaussian_noise(1.0))
    post = generic.inverse_channel(1.2)
    x = np.linspace(-2, 4, 13)
    assert np.allclose(post.cdf(x), stats.norm.cdf(x, 0.9, math.sqrt(0.75)), atol=1e-8)


def test_inverse_channel_unsupported_output():
    with pytest.raises(UnsupportedOutput):
        ch.inverse_channel(ch.uniform_pair(), 2.5)


@pytest.mark.parametrize("y", [0.3, 0.9, 1.4])
def test_inverse_channel_density_normalized(y):
    pair = ch.InputChannelPair(dists.Uniform(0, 1), ch.uniform_noise(1.0))
    post = pair.inverse_channel(y)
    lo, hi = post.interval()
    assert integrate_1d(lambda x: float(post.pdf(x)), lo, hi, 1e-11) == pytest.approx(1.0,
                                                                                       abs=1e-9)


def test_mutual_information_bsc():
    assert ch.bsc(0.2).mutual_information == pytest.approx(1 - h2(0.2), abs=1e-12)


@pytest.mark.parametrize("pair,value", [
    (ch.awgn(3.0), 1.0),
    (ch.uniform_pair(), 0.5 * math.log2(math.e)),
    (ch.exponential_pair(), 0.8327),
    (ch.exp_mean_pair(1, 1), 1.0),
], ids=lambda v: getattr(v, "label", ""))
def test_mutual_information_values(pair, value):
    tol = 5e-5 if value == 0.8327 else 1e-9
    assert ch.mutual_information(pair, 1e-10) == pytest.approx(value, abs=tol)


@pytest.mark.parametrize("pair", CONTINUOUS_PAIRS, ids=lambda p: p.label)
def test_quadrature_information_matches_closed_form(pair):
    assert ch.mutual_information(pair, 1e-10) == pytest.approx(pair.closed_form_information(),
                                                               abs=2e-9)


def test_exp_mean_information_formula():
    assert ch.exp_mean_pair(2.0, 1.0).mutual_information == pytest.approx(math.log2(3.0))


def test_capacity_bsc():
    c, p = ch.capacity_dmc(ch.bsc(0.2).channel)
    assert c == pytest.approx(1 - h2(0.2), abs=1e-9)
    assert np.allclose(p.probs, [0.5, 0.5], atol=1e-6)


def test_capacity_noiseless():
    c, p = ch.capacity_dmc(ch.dmc([[1, 0], [0, 1]]).channel)
    assert c == pytest.approx(1.0, abs=1e-9)


def test_capacity_bec_both_spellings():
    assert ch.capacity_dmc(ch.bec(erasure=0.3).channel)[0] == pytest.approx(0.7, abs=1e-9)
    assert ch.capacity_dmc(ch.bec(p=0.7).channel)[0] == pytest.approx(0.7, abs=1e-9)
    with pytest.raises(ValueError):
        ch.bec()


def test_capacity_input_reproduces_capacity():
    w = [[0.7, 0.2, 0.1], [0.1, 0.3, 0.6]]
    c, p = ch.capacity_dmc(ch.dmc(w).channel, tol=1e-10)
    pair = ch.dmc(w, input_pmf=list(p.probs))
    assert pair.mutual_information == pytest.approx(c, abs=1e-9)


def test_capacity_needs_discrete_channel():
    with pytest.raises(NotDiscrete):
        ch.capacity_dmc(ch.gaussian_noise(1.0))


def test_dmc_rows_must_be_stochastic():
    with pytest.raises(ValueError):
        ch.dmc([[0.5, 0.4], [0.5, 0.5]])


def test_dmc_bayes_consistency():
    pair = ch.dmc([[0.7, 0.2, 0.1], [0.1, 0.3, 0.6]], input_pmf=[Fraction(1, 3), Fraction(2, 3)])
    for x in range(2):
        total = sum(pair.inverse_channel(y).pmf(x) * pair.output.pmf(y) for y in range(3))
        assert total == pytest.approx(float(pair.input.probs[x]), abs=1e-12)


def test_empirical_constraint_examples():
    sq = ch.ConstraintFunction(lambda x: x * x, 1.0)
    assert ch.empirical_constraint([1, -1, 1, -1], sq) == 1.0
    assert ch.empirical_constraint([0, 0, 0], ch.ConstraintFunction(lambda x: x, 0.0)) == 0.0
    x, _ = dists.sample(dists.Gaussian(0.0, 2.0), RngStream(42, 0), 100_000)
    assert ch.empirical_constraint(x, sq) == pytest.approx(2.0, abs=0.05)


@pytest.mark.parametrize("pair", CONTINUOUS_PAIRS, ids=lambda p: p.label)
def test_sampled_outputs_follow_output_law(pair):
    u, st = RngStream(11, 2).uniforms(100_000)
    v, _ = st.uniforms(100_000)
    x = pair.input.ppf(u)
    y = pair.channel.sample_array(x, v)
    assert stats.kstest(y, pair.output.cdf).pvalue > 0.01
