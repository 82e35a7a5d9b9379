import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone

from apqfluid import EmbeddedDistributionEstimator, EmbeddedSampleSet, TildeTransformer, \
    estimate_embedded
from apqfluid.estimation import estimate_pair


def test_all_origin():
    s = EmbeddedSampleSet.from_raw(np.zeros(50), np.zeros(50))
    d = estimate_embedded(s)
    assert d.h == 1.0 and d.g.sum() == 0 and d.f.sum() == 0


def test_split_masses():
    m1 = np.r_[np.zeros(50), np.full(25, 2.0), np.full(25, 3.0)]
    m2 = np.r_[np.zeros(50), np.full(25, 2.0), np.full(25, 2.0)]
    d = estimate_embedded(EmbeddedSampleSet.from_raw(m1, m2), g_bins=5, f_bins=(3, 3))
    assert d.h == 0.5
    assert d.g.sum() == pytest.approx(0.25)
    assert d.f.sum() == pytest.approx(0.25)


@given(st.lists(st.tuples(st.floats(0, 50), st.floats(0, 1), st.integers(0, 2)),
                min_size=1, max_size=200))
@settings(max_examples=60, deadline=None)
def test_masses_sum_to_one(rows):
    m2 = np.array([r[0] if r[2] else 0.0 for r in rows])
    m1 = np.array([m2[i] * (1 + rows[i][1]) if rows[i][2] == 2 else m2[i] for i in range(len(rows))])
    d = estimate_embedded(EmbeddedSampleSet.from_raw(m1, m2), g_bins=7, f_bins=(4, 5),
                          g_range=(0.0, 10.0))
    assert abs(d.total_mass - 1.0) < 1e-12


def test_f_mass_stays_in_wedge():
    rng = np.random.default_rng(0)
    m2 = rng.uniform(0.1, 5, 5000)
    m1 = m2 * rng.uniform(1.0001, 2.0, 5000)  # b1 / b2 = 2
    d = estimate_embedded(EmbeddedSampleSet.from_raw(m1, m2), f_bins=(20, 20))
    xe, ye = d.f_edges
    for i in range(20):
        for j in range(20):
            # bin lies entirely outside 0 < x < (ratio - 1) * y
            if xe[i] >= (2.0 - 1.0) * ye[j + 1]:
                assert d.f[i, j] == 0


def test_estimator_api():
    est = EmbeddedDistributionEstimator(g_bins=10)
    assert est.get_params()["g_bins"] == 10
    assert clone(est).set_params(g_bins=3).g_bins == 3
    X = np.array([[0, 0], [1, 1], [1.5, 1.0]])
    est.fit(X)
    assert est.predict(X).tolist() == [0, 1, 2]
    with pytest.raises(ValueError):
        est.fit(np.array([[1.0, 2.0]]))


def test_tilde_transformer_round_trip():
    X = np.array([[3.0, 2.0], [1.0, 1.0], [0.0, 0.0]])
    t = TildeTransformer().fit(X)
    Z = t.transform(X)
    assert Z.tolist() == [[1.0, 2.0], [0.0, 1.0], [0.0, 0.0]]
    assert np.array_equal(t.inverse_transform(Z), X)


def test_shared_layout_pairs():
    rng = np.random.default_rng(1)
    def sample(n):
        m2 = rng.exponential(size=n)
        return EmbeddedSampleSet.from_raw(m2 * rng.uniform(1, 2, n), m2)
    a, b = estimate_pair(sample(1000), sample(800), g_bins=5, f_bins=(4, 4))
    assert a.same_layout(b)
    assert a.l1_distance(a) == 0.0
