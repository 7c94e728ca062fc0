import math

import gmpy2
import numpy as np
import pytest
from gmpy2 import mpfr
from scipy import stats

from postmatch.core import distributions as dists
from postmatch.core.errors import OutOfSupport, PrecisionExhausted
from postmatch.core.precision import (UnitValue, check_horizon, format_mp, parse_mp,
                                      required_precision, to_mp, working_precision)
from postmatch.core.quadrature import expectation, integrate_density, quantile_nodes
from postmatch.core.rng import RngStream

BERNOULLI = dists.Discrete([0, 1], [0.5, 0.5])

ZOO = [
    dists.Uniform(0.0, 1.0),
    dists.Exponential(1.0),
    dists.Gaussian(0.0, 3.0),
    dists.Laplace(0.0, var=1.0),
    dists.Cauchy(0.0, 1.0),
    dists.Triangular(0.0, 1.0, 2.0),
    dists.Erlang(2, 1.0),
]


# -- quantiles and uniformization ------------------------------------------

def test_inverse_cdf_uniform():
    assert dists.inverse_cdf_sample(dists.Uniform(0, 1), 0.3) == 0.3


def test_inverse_cdf_exponential_median():
    # closed form -ln(1 - t)
    assert dists.inverse_cdf_sample(dists.Exponential(1.0), 0.5) == pytest.approx(-math.log(0.5),
                                                                                  rel=1e-15)


def test_inverse_cdf_bernoulli_atoms():
    assert dists.inverse_cdf_sample(BERNOULLI, 0.25) == 0
    assert dists.inverse_cdf_sample(BERNOULLI, 0.75) == 1


def test_inverse_cdf_tie_maps_to_atom():
    # right-continuous inverse: F(0) = 0.5, so t = 0.5 already maps past 0
    assert dists.inverse_cdf_sample(BERNOULLI, 0.5) == 1


def test_inverse_cdf_rejects_levels_outside_unit_interval():
    with pytest.raises(ValueError):
        dists.inverse_cdf_sample(dists.Uniform(0, 1), 1.5)


def test_inverse_cdf_extended_precision():
    t = UnitValue("0.5", 200)
    v = dists.inverse_cdf_sample(dists.Exponential(1.0), t)
    with working_precision(200):
        assert abs(v - gmpy2.log(mpfr(2))) < mpfr(2) ** -190


def test_uniformize_examples():
    assert float(dists.uniformize(dists.Uniform(0, 1), 0.4, 0.9)) == pytest.approx(0.4, abs=1e-30)
    assert float(dists.uniformize(BERNOULLI, 1, 0.5)) == 0.75
    assert float(dists.uniformize(dists.Exponential(1.0), math.log(2), 0.0)) == pytest.approx(
        0.5, abs=1e-15)


def test_uniformize_out_of_support():
    with pytest.raises(OutOfSupport):
        dists.uniformize(dists.Exponential(1.0), -1.0, 0.5)
    with pytest.raises(OutOfSupport):
        dists.uniformize(BERNOULLI, 2, 0.5)


@pytest.mark.parametrize("dist", [BERNOULLI, dists.Uniform(0, 1), dists.Exponential(1.0)],
                         ids=lambda d: d.label)
def test_uniformize_is_uniform(dist):
    rng = RngStream(7, 1)
    x, rng = dists.sample(dist, rng, 100_000)
    lam, _ = rng.uniforms(100_000)
    if dist.kind == dists.DISCRETE:
        u = dist.cdf(x) - dist.pmf(x) * lam
    else:
        u = dist.cdf(x)
    assert stats.kstest(u, "uniform").pvalue > 0.01


# -- sampling ----------------------------------------------------------------

def test_sample_bernoulli_mean():
    x, _ = dists.sample(BERNOULLI, RngStream(42, 0), 100_000)
    assert abs(x.mean() - 0.5) <= 3 * 0.5 / math.sqrt(100_000)


def test_sample_gaussian_variance():
    x, _ = dists.sample(dists.Gaussian(0.0, 1.0), RngStream(42, 0), 100_000)
    assert x.var() == pytest.approx(1.0, abs=0.02)


def test_sample_exponential_mean():
    x, _ = dists.sample(dists.Exponential(1.0), RngStream(42, 0), 100_000)
    assert x.mean() == pytest.approx(1.0, abs=0.02)


@pytest.mark.parametrize("dist", ZOO, ids=lambda d: d.label)
def test_inverse_transform_passes_ks(dist):
    x, _ = dists.sample(dist, RngStream(3, 5), 100_000)
    assert stats.kstest(x, dist.cdf).pvalue > 0.01


# -- distribution invariants ---------------------------------------------------

@pytest.mark.parametrize("dist", ZOO, ids=lambda d: d.label)
def test_density_integrates_to_one(dist):
    assert integrate_density(dist, tol=1e-11) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("dist", ZOO, ids=lambda d: d.label)
def test_cdf_roundtrip_on_grid(dist):
    t = np.linspace(0.001, 0.999, 201)
    assert np.allclose(dist.cdf(dist.ppf(t)), t, rtol=0, atol=1e-12)


@pytest.mark.parametrize("dist", ZOO, ids=lambda d: d.label)
def test_cdf_monotone_with_limits(dist):
    x = dist.ppf(np.linspace(1e-6, 1 - 1e-6, 1001))
    f = dist.cdf(x)
    assert np.all(np.diff(f) >= 0)
    assert dist.cdf(-1e300) == 0.0 and dist.cdf(1e300) == 1.0


@pytest.mark.parametrize("dist", ZOO[:3], ids=lambda d: d.label)
def test_cdf_roundtrip_extended_precision(dist):
    with working_precision(128):
        for t in ("0.1", "0.37", "0.5", "0.9"):
            tv = mpfr(t)
            assert abs(dist.cdf_mp(dist.ppf_mp(tv)) - tv) <= mpfr(2) ** -112


def test_mixed_law_masses_sum_to_one():
    d = dists.AtomPlusExponential(0.5, 2.0)
    assert float(d.mass_mp(0.0)) + d.continuous_mass == pytest.approx(1.0, abs=1e-12)
    # an atom at zero: F(0) is the atom mass, quantiles below it map to zero
    assert d.cdf(0.0) == pytest.approx(0.5)
    assert dists.inverse_cdf_sample(d, 0.3) == 0.0


def test_quantile_nodes_integrate_moments():
    d = dists.Exponential(1.0)
    x, w = quantile_nodes(d, level=6)
    assert np.sum(w) == pytest.approx(1.0, abs=1e-12)
    assert np.sum(w * x) == pytest.approx(1.0, rel=1e-9)
    assert expectation(d, lambda v: v * v) == pytest.approx(2.0, rel=1e-9)


# -- precision -----------------------------------------------------------------

def test_unit_value_range_enforced():
    with pytest.raises(ValueError):
        UnitValue(1.5)
    with pytest.raises(ValueError):
        UnitValue(-0.1)


def test_unit_value_arithmetic_uses_max_precision():
    a, b = UnitValue("0.25", 64), UnitValue("0.5", 256)
    assert (a + b).precision == 256
    assert (b * a).precision == 256


def test_format_roundtrip_is_exact():
    with working_precision(300):
        v = mpfr(1) / 3
    assert parse_mp(format_mp(v), 300) == v


def test_to_mp_reads_shortest_decimal():
    assert to_mp(0.2, 128) == mpfr("0.2", 128)


def test_precision_policy():
    assert required_precision(10, 0.5) == 128
    assert required_precision(2000, 0.278) == 2 * (556 + 32)
    with pytest.raises(PrecisionExhausted):
        check_horizon(2000, 1.0, 128)


# -- random streams ------------------------------------------------------------

def test_stream_replay():
    a, _ = RngStream(42, 3).uniforms(1000)
    b, _ = RngStream(42, 3).uniforms(1000)
    assert np.array_equal(a, b)


def test_stream_is_functional():
    s = RngStream(1, 0)
    u1, s1 = s.uniforms(10)
    u2, _ = s.uniforms(10)
    assert np.array_equal(u1, u2) and s1.counter > s.counter


def test_streams_are_uncorrelated():
    a, _ = RngStream(42, 0).uniforms(1_000_000)
    b, _ = RngStream(42, 1).uniforms(1_000_000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.01


def test_stream_rejects_wide_seed():
    with pytest.raises(ValueError):
        RngStream(2 ** 64)


def test_bits_width():
    v, _ = RngStream(9, 9).bits(200)
    assert 0 <= v < 2 ** 200
