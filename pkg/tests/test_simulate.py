import math

import gmpy2
import numpy as np
import pytest
from gmpy2 import mpfr
from scipy import stats

from postmatch import channels as ch
from postmatch.core.errors import OutOfSupport, PrecisionExhausted
from postmatch.core.precision import UnitValue, working_precision
from postmatch.matching.kernels import kernel_for, normalized_kernel_eval
from postmatch.matching.upf import Upf
from postmatch.simulate import (Transcript, posterior_cdf, posterior_log_density_at_message,
                                posterior_quantile, replay_errors, run_session, trajectories)


def test_replay_is_bit_identical():
    for pair in (ch.bsc(0.2), ch.awgn(3.0), ch.exponential_pair()):
        a = run_session(pair, "random", 40, seed=42, stream_id=7)
        b = run_session(pair, "random", 40, seed=42, stream_id=7)
        assert a == b
        assert a != run_session(pair, "random", 40, seed=42, stream_id=8)


@pytest.mark.parametrize("pair", [ch.bsc(0.2), ch.awgn(3.0), ch.uniform_pair(),
                                  ch.exp_mean_pair(1, 1)], ids=lambda p: p.label)
def test_transcript_text_roundtrip(pair):
    tr = run_session(pair, "random", 25, seed=5)
    back = Transcript.loads(tr.dumps(), pair)
    assert back == tr
    assert back.dumps() == tr.dumps()


def test_loads_rejects_other_pair():
    tr = run_session(ch.bsc(0.2), "random", 5, seed=5)
    with pytest.raises(ValueError):
        Transcript.loads(tr.dumps(), ch.bsc(0.1))


def test_first_state_is_message_point():
    tr = run_session(ch.bsc(0.2), "0.3", 5, seed=1)
    assert tr.thetas[0] == tr.theta0.value
    mu = Upf.three_piece_shift()
    tr = run_session(ch.bsc(0.2), "0.3", 5, seed=1, mu=mu)
    assert tr.thetas[0] == mu(tr.theta0).value


def test_normalized_replay_is_exact():
    tr = run_session(ch.bsc(0.2), "random", 200, seed=9)
    assert replay_errors(tr) == 0.0


@pytest.mark.parametrize("pair", [ch.awgn(3.0), ch.uniform_pair(), ch.exponential_pair()],
                         ids=lambda p: p.label)
def test_input_domain_replay_is_at_rounding_level(pair):
    tr = run_session(pair, "random", 100, seed=9)
    assert replay_errors(tr) <= 2.0 ** -(tr.precision - 16)


def test_inputs_are_quantiles_of_states():
    pair = ch.exponential_pair()
    tr = run_session(pair, "random", 30, seed=2)
    kern = tr.kernel
    with working_precision(tr.precision):
        for x, th in zip(tr.xs, tr.thetas):
            assert abs(pair.input.cdf_mp(x) - th) <= mpfr(2) ** -(tr.precision - 16)
        for y, lam, ph in zip(tr.ys, tr.lams, tr.phis):
            assert kern.phi_of(y, lam) == ph


def test_bsc_first_input_slices_at_median():
    tr = run_session(ch.bsc(0.2), "0.4999", 1, seed=0)
    assert tr.xs[0] == 0
    flips = [run_session(ch.bsc(0.2), "0.4999", 1, seed=0, stream_id=i).ys[0]
             for i in range(2000)]
    assert abs(np.mean(flips) - 0.2) < 4 * math.sqrt(0.16 / 2000)


def test_awgn_recursion():
    tr = run_session(ch.awgn(3.0), "random", 30, seed=4)
    with working_precision(tr.precision):
        for k in range(29):
            assert tr.xs[k + 1] == 2 * (tr.xs[k] - mpfr("0.75") * tr.ys[k])


def test_uniform_next_input_at_diagonal():
    pair = ch.uniform_pair()
    assert float(kernel_for(pair).forward_xy(0.3, 0.3)) == 1.0


def test_horizon_guard():
    with pytest.raises(PrecisionExhausted):
        run_session(ch.awgn(3.0), "random", 500, seed=0, precision=128)
    with pytest.raises(ValueError):
        run_session(ch.bsc(0.2), "random", 0)


def test_out_of_support_reports_step():
    # a deliberately wrong channel leaves the uniform posterior support
    with pytest.raises(OutOfSupport) as err:
        run_session(ch.uniform_pair(), "random", 50, seed=0, channel=ch.uniform_noise(3.0))
    assert err.value.step is not None


# -- posterior -----------------------------------------------------------------------

def test_posterior_cdf_prior_is_identity():
    tr = run_session(ch.bsc(0.2), "random", 10, seed=3)
    for th in (0.1, 0.5, 0.77):
        assert float(posterior_cdf(tr, th, 1)) == pytest.approx(th, abs=1e-30)


def test_posterior_cdf_at_message_is_state():
    for pair in (ch.bsc(0.2), ch.exponential_pair(), ch.awgn(3.0)):
        tr = run_session(pair, "random", 15, seed=3)
        for k in (1, 5, 16):
            got = posterior_cdf(tr, tr.theta0, k).value
            assert abs(got - tr.thetas[k - 1]) <= mpfr(2) ** -(tr.precision - 20)


def test_posterior_cdf_one_bsc_output():
    tr = run_session(ch.bsc(0.2), "0.2", 1, seed=0)
    phi = UnitValue._raw(tr.phis[0], tr.precision)
    want = normalized_kernel_eval(ch.bsc(0.2), UnitValue("0.25", tr.precision), phi)
    assert posterior_cdf(tr, UnitValue("0.25", tr.precision), 2) == want


@pytest.mark.parametrize("pair", [ch.bsc(0.2), ch.uniform_pair(), ch.exponential_pair()],
                         ids=lambda p: p.label)
def test_posterior_cdf_monotone_and_quantile_inverse(pair):
    tr = run_session(pair, "random", 20, seed=8)
    grid = np.linspace(0.001, 0.999, 200)
    vals = [posterior_cdf(tr, t, 21).value for t in grid]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    for t in (0.1, 0.5, 0.9):
        q = posterior_quantile(tr, t)
        assert float(posterior_cdf(tr, q, 21)) == pytest.approx(t, abs=1e-20)


def test_log_density_bsc_single_step():
    same = run_session(ch.bsc(0.2), "0.2", 1, seed=0)
    assert same.ys[0] == 0
    assert posterior_log_density_at_message(same) == pytest.approx(math.log2(1.6), abs=1e-12)
    # find a stream whose single output flips the input
    for sid in range(50):
        tr = run_session(ch.bsc(0.2), "0.2", 1, seed=0, stream_id=sid)
        if tr.ys[0] == 1:
            break
    assert posterior_log_density_at_message(tr) == pytest.approx(math.log2(0.4), abs=1e-12)


def test_inputs_are_stationary():
    pair = ch.exponential_pair()
    # one state per independent session, so the samples are independent
    xs = [float(run_session(pair, "random", 40, seed=1, stream_id=sid).xs[-1])
          for sid in range(2000)]
    assert stats.kstest(xs, pair.input.cdf).pvalue > 0.01


def test_outputs_are_uncorrelated():
    tr = run_session(ch.bsc(0.2), "random", 100_000, seed=6, rate_target=0.0)
    phi = np.array([float(v) for v in tr.phis])
    assert abs(np.corrcoef(phi[:-1], phi[1:])[0, 1]) < 0.01


def test_mean_constraint_holds():
    tr = run_session(ch.exp_mean_pair(1, 1), "random", 100_000, seed=42, rate_target=0.0)
    assert ch.empirical_constraint(tr.xs, ch.ConstraintFunction(lambda x: x, 1.0)) <= 1.05


# -- trajectories ---------------------------------------------------------------------

def test_trajectories_start_and_clamp():
    tr = run_session(ch.bsc(0.2), "0.9", 10, seed=3)
    tp = trajectories(tr, 0.2)
    assert float(tp.d_plus) == pytest.approx(0.05)
    assert float(tp.d_minus) == pytest.approx(0.2)
    assert float(tp.neg[0]) == pytest.approx(0.7) and float(tp.pos[0]) == pytest.approx(0.95)
    for a, th, b in zip(tp.neg, tr.thetas, tp.pos):
        assert a.value <= th <= b.value


def test_trajectories_diverge_for_bsc():
    wide = 0
    for sid in range(100):
        tr = run_session(ch.bsc(0.2), "random", 500, seed=42, stream_id=sid)
        tp = trajectories(tr, 0.1)
        wide += float(tp.neg[-1]) < 0.01 and float(tp.pos[-1]) > 0.99
    assert wide / 100 > 0.95


def test_trajectories_need_positive_delta():
    tr = run_session(ch.bsc(0.2), "random", 3, seed=3)
    with pytest.raises(ValueError):
        trajectories(tr, 0.0)
