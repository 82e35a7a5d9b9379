import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from apqfluid import TestReport, ks_two_sample
from apqfluid._validation import ParameterError
from apqfluid.stattests import chi2_homogeneity, cycle_ids, pick_per_cycle, regenerative_proportion


def test_ks_examples():
    assert ks_two_sample([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == (0.0, 1.0)
    assert ks_two_sample([0, 1], [0.5, 1.5])[0] == 0.5
    assert ks_two_sample([0], [1])[0] == 1.0
    with pytest.raises(ParameterError):
        ks_two_sample([], [1.0])


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=40),
       st.lists(st.floats(-100, 100), min_size=1, max_size=40))
@settings(max_examples=100)
def test_ks_statistic_matches_scipy(a, b):
    d, p = ks_two_sample(a, b)
    assert d == pytest.approx(stats.ks_2samp(a, b).statistic, abs=1e-12)
    assert 0.0 <= p <= 1.0


def test_ks_pvalue_matches_asymptotic_scipy():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=3000), rng.normal(0.05, size=2000)
    d, p = ks_two_sample(a, b)
    ref = stats.ks_2samp(a, b, method="asymp")
    assert d == pytest.approx(ref.statistic)
    assert p == pytest.approx(ref.pvalue, rel=0.05)


def test_report_decision():
    r = TestReport("x", 0.1, 0.004, 10, 10, 0.01)
    assert r.decision == "reject"
    assert TestReport("x", 0.1, 0.01, 10, 10, 0.01).decision == "accept"
    with pytest.raises(ValueError):
        TestReport("x", 0.1, 1.5, 10, 10, 0.01)


def test_chi2_merges_sparse_cells():
    stat, p, cells = chi2_homogeneity([1000, 0, 0, 1], [1000, 0, 1, 0])
    assert cells == 1 and p == 1.0
    # remainder 3 + 3 is still sparse and gets folded into a big cell
    assert chi2_homogeneity([500, 500, 2, 1], [480, 520, 0, 3])[2] == 2
    # remainder 6 + 6 is kept as its own cell
    assert chi2_homogeneity([500, 500, 2, 2, 2], [480, 520, 2, 2, 2])[2] == 3
    with pytest.raises(ValueError):
        chi2_homogeneity([1, 2], [1, 2, 3])


def test_cycle_ids_and_picks():
    regen = np.array([1, 0, 0, 1, 0, 1, 0, 0, 0, 1, 0], dtype=bool)
    ids = cycle_ids(regen)
    assert ids.tolist() == [0, 0, 0, 1, 1, 2, 2, 2, 2, -1, -1]
    picks = pick_per_cycle(ids, np.ones(11, dtype=bool), np.random.default_rng(0))
    assert len(picks) == 3
    assert [ids[i] for i in picks] == [0, 1, 2]
    only = pick_per_cycle(ids, np.arange(11) == 4, np.random.default_rng(0))
    assert only.tolist() == [4]


def test_pick_is_uniform_within_cycle():
    regen = np.tile([True, False, False], 30_000)
    picks = pick_per_cycle(cycle_ids(regen), np.ones(regen.size, dtype=bool),
                           np.random.default_rng(1))
    counts = np.bincount(picks % 3, minlength=3)
    assert stats.chisquare(counts).pvalue > 0.01


def test_regenerative_proportion_iid_case():
    rng = np.random.default_rng(3)
    x = rng.random(200_000) < 0.3
    # every event its own cycle: the estimate is the plain proportion
    r, se = regenerative_proportion(x, np.arange(x.size))
    assert r == pytest.approx(x.mean())
    assert se == pytest.approx(np.sqrt(0.3 * 0.7 / x.size), rel=0.05)
