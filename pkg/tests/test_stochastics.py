import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from apqfluid._validation import ParameterError, ValidationError
from apqfluid.stochastics import (
    RandomStream,
    erlang_ph,
    exp_ph,
    ph_from_config,
    ph_mean,
    ph_sample,
    ph_validate,
    ph_variance,
    poisson_arrivals,
)


def test_exp_ph_fields():
    ph = exp_ph(2)
    assert ph.alpha.tolist() == [1.0]
    assert ph.subgen.tolist() == [[-2.0]]
    assert ph.exit.tolist() == [2.0]


@pytest.mark.parametrize("mu", [0, -1.0, float("nan"), float("inf")])
def test_exp_ph_rejects_bad_rate(mu):
    with pytest.raises(ParameterError):
        exp_ph(mu)


def test_validate_examples():
    assert ph_validate([1], [[-3]]).exit.tolist() == [3.0]
    ph = ph_validate([0.5, 0.5], [[-2, 1], [0, -1]])
    assert ph.exit.tolist() == [1.0, 1.0]


@pytest.mark.parametrize("alpha,T,msg", [
    ([0.5, 0.6], [[-2, 1], [0, -1]], "sum to 1"),
    ([1.0], [[1.0]], "diagonal"),
    ([0.5, 0.5], [[-1, 2], [0, -1]], "row sums"),
    ([0.5, 0.5], [[-1, 1], [1, -1]], "at least one row"),
    ([1.0, 0.0], [[-1, -0.5], [0, -1]], "off-diagonal"),
    ([1.0], [[-1, 0], [0, -1]], "dimension"),
    ([-0.5, 1.5], [[-1, 0], [0, -1]], "non-negative"),
])
def test_validate_rejects(alpha, T, msg):
    with pytest.raises(ValidationError, match=msg):
        ph_validate(alpha, T)


def test_mean_examples():
    assert ph_mean(exp_ph(2)) == 0.5
    assert ph_mean(ph_validate([1, 0], [[-1, 1], [0, -1]])) == pytest.approx(2.0, rel=1e-12)


def test_mean_mixed_example_against_monte_carlo():
    # phase 1 holds Exp(2) then moves to phase 2 w.p. 1/2, phase 2 holds Exp(1):
    # E = 0.5 * (0.5 + 0.5 * 1) + 0.5 * 1 = 1.0
    ph = ph_validate([0.5, 0.5], [[-2, 1], [0, -1]])
    assert ph_mean(ph) == pytest.approx(1.0, rel=1e-12)
    x = ph_sample(ph, RandomStream(3), size=200_000)
    se = x.std() / np.sqrt(x.size)
    assert abs(x.mean() - 1.0) < 3 * se


@given(st.floats(1e-3, 1e3))
def test_exp_mean_relative_error(mu):
    assert abs(ph_mean(exp_ph(mu)) * mu - 1.0) < 1e-12


def test_sample_reproducible():
    a = ph_sample(exp_ph(1), RandomStream(42))
    b = ph_sample(exp_ph(1), RandomStream(42))
    assert a == b and a > 0
    assert ph_sample(exp_ph(1), RandomStream(42, 1)) != a


def test_sample_exp_mean():
    x = ph_sample(exp_ph(2), RandomStream(7), size=100_000)
    se = x.std() / np.sqrt(x.size)
    assert abs(x.mean() - 0.5) < 3 * se


def test_sample_erlang_variance():
    x = ph_sample(erlang_ph(2, 1.0), RandomStream(8), size=100_000)
    # standard error of the sample variance from the fourth central moment
    m4 = np.mean((x - x.mean()) ** 4)
    se = np.sqrt((m4 - x.var() ** 2) / x.size)
    assert abs(x.var() - 2.0) < 3 * se
    assert ph_variance(erlang_ph(2, 1.0)) == pytest.approx(2.0)


def test_sample_matches_erlang_law():
    x = ph_sample(erlang_ph(3, 1.5), RandomStream(9), size=20_000)
    assert stats.kstest(x, stats.gamma(3, scale=1 / 1.5).cdf).pvalue > 0.01


def test_ks_exp_samples_over_seeds():
    mu = 1.7
    passes = sum(
        stats.kstest(ph_sample(exp_ph(mu), RandomStream(s), size=10_000),
                     stats.expon(scale=1 / mu).cdf).pvalue >= 0.01
        for s in range(20)
    )
    assert passes >= 19


@st.composite
def subgenerators(draw):
    k = draw(st.integers(1, 4))
    off = np.array(draw(st.lists(st.floats(0, 5), min_size=k * k, max_size=k * k))).reshape(k, k)
    np.fill_diagonal(off, 0.0)
    exit_ = np.array(draw(st.lists(st.floats(0.1, 5), min_size=k, max_size=k)))
    T = off - np.diag(off.sum(axis=1) + exit_)
    w = np.array(draw(st.lists(st.floats(0.01, 1), min_size=k, max_size=k)))
    return w / w.sum(), T


@given(subgenerators())
@settings(max_examples=50, deadline=None)
def test_exit_closes_rows_exactly(rep):
    alpha, T = rep
    ph = ph_validate(alpha, T)
    assert np.all(ph.exit >= 0)
    assert np.allclose(ph.subgen.sum(axis=1) + ph.exit, 0.0, atol=1e-12)
    x = ph_sample(ph, RandomStream(0), size=200)
    assert np.all(x > 0)


def test_config_round_trip():
    for ph in (exp_ph(1.5), erlang_ph(2, 3.0)):
        assert ph_from_config(ph.to_config()) == ph
    with pytest.raises(ValidationError):
        ph_from_config({"type": "weibull"})


def test_poisson_arrivals():
    t, c = poisson_arrivals([0.3, 0.2], 50_000, RandomStream(1))
    assert np.all(np.diff(t) > 0)
    assert abs(np.mean(c == 1) - 0.6) < 0.01
    assert abs(t[-1] / t.size - 2.0) < 0.05
