import numpy as np
import pytest

from apqfluid import ApqParams, EmbeddedSampleSet, erlang_ph, exp_ph, \
    map_exponential, map_phase_type, simulate_matched, verify_lemma_during
from apqfluid._validation import ConfigurationError, InsufficientDataError, ParameterError
from apqfluid.estimation import estimate_pair
from apqfluid.fluid import down_phase_decrements
from apqfluid.mapping import compare_embedded, embedded_pair, lemma_jump_reports, \
    perturb_service_rate, verify_lemma_jumps


def test_map_exponential_examples():
    t = map_exponential(ApqParams(0.3, 0.2, 2.0, 1.0, exp_ph(1.5)))
    assert np.array_equal(t.gen, [[-1.5, 1.5], [1.0, -1.0]])
    assert t.r_down == pytest.approx(-20 / 3, abs=1e-12)
    assert t.c_check_down == pytest.approx(-20 / 7, abs=1e-12)
    t = map_exponential(ApqParams(1.0, 1.0, 3.0, 1.0, exp_ph(0.2)))
    assert t.r_down == -3.0 and t.c_check_down == -0.75
    with pytest.raises(ParameterError):
        ApqParams(0.3, 0.2, 1.0, 1.0, exp_ph(1.0))


def test_map_phase_type_erlang_blocks():
    t = map_phase_type(ApqParams(0.2, 0.2, 2.0, 1.0, erlang_ph(2, 1.0)))
    assert np.array_equal(t.gen, [[-1, 1, 0], [0, -1, 1], [1, 0, -1]])
    assert t.r_up.tolist() == [1.0, 1.0] and t.c_hat_up.tolist() == [1.0, 1.0]


@pytest.mark.parametrize("mu", [0.5, 1.0, 1.5, 7.0])
def test_phase_type_reduces_to_exponential(mu):
    p = ApqParams(0.1, 0.05, 2.5, 0.5, exp_ph(mu))
    assert map_phase_type(p) == map_exponential(p)


@pytest.mark.parametrize("k,rate", [(1, 1.0), (2, 3.0), (4, 9.0)])
def test_generator_and_sign_contract(k, rate):
    t = map_phase_type(ApqParams(0.3, 0.4, 1.7, 0.4, erlang_ph(k, rate)))
    assert np.allclose(t.gen.sum(axis=1), 0.0, atol=1e-12)
    off = t.gen[~np.eye(k + 1, dtype=bool)]
    assert np.all(off >= 0)
    assert np.all(t.r_up > 0) and t.r_down < 0 and t.c_check_down < 0 and t.c_hat_down == 0


def test_perturbed_service_changes_only_rates():
    p = ApqParams(0.3, 0.2, 2.0, 1.0, exp_ph(1.0))
    q = perturb_service_rate(p, 2.0)
    assert q.service.exit[0] == 2.0 and q.b1 == p.b1


@pytest.fixture(scope="module")
def small_run():
    return simulate_matched(ApqParams(0.3, 0.2, 2.0, 1.0, exp_ph(1.0)), 10_000, 7)


def test_during_identical_durations(small_run):
    reps = verify_lemma_during(small_run.mpp, small_run.fluid, n=5000, seed=7)
    assert [r.test_name for r in reps] == ["during_m1_tilde_vs_x", "during_m2_vs_y",
                                           "during_slope_ratio"]
    assert reps[2].p_value == 1.0
    # duplicate the queue's own increments on the fluid side
    dm1t, dm2 = small_run.mpp.service_increments()
    fake = small_run.fluid
    saved = dict(fake.up_runs)
    fake.up_runs["dx"], fake.up_runs["dy"] = dm1t.copy(), dm2.copy()
    try:
        same = verify_lemma_during(small_run.mpp, fake)
    finally:
        fake.up_runs.update(saved)
    assert same[0].statistic == 0.0 and same[1].statistic == 0.0


def test_during_detects_doubled_mu():
    p = ApqParams(0.3, 0.2, 2.0, 1.0, exp_ph(1.0))
    run = simulate_matched(p, 10_000, 3, tandem=map_phase_type(perturb_service_rate(p, 2.0)))
    reps = verify_lemma_during(run.mpp, run.fluid, n=10_000)
    assert reps[0].rejected and reps[1].rejected


def test_during_rejects_mismatched_rates(small_run):
    other = simulate_matched(ApqParams(0.3, 0.2, 3.0, 1.0, exp_ph(1.0)), 2000, 1)
    with pytest.raises(ConfigurationError):
        verify_lemma_during(small_run.mpp, other.fluid)


def test_jumps_near_saturation_flags_missing_categories():
    p = ApqParams(0.5, 0.49, 2.0, 1.0, exp_ph(1.0))  # rho = 0.99
    run = simulate_matched(p, 3000, 0, burn_in=0)
    dec = down_phase_decrements(run.fluid, 0)
    with pytest.raises(InsufficientDataError):
        verify_lemma_jumps(run.mpp, dec, burn_in=0)
    reps = verify_lemma_jumps(run.mpp, dec, burn_in=0, on_insufficient="flag")
    flag = reps[-1]
    assert flag.test_name.startswith("insufficient_data:") and "category3" in flag.test_name
    assert flag.p_value == 1.0


def test_jump_reports_on_matched_run(small_run):
    reps = lemma_jump_reports(small_run)
    names = {r.test_name for r in reps}
    assert {"jump_m1_tilde_uncensored", "jump_m1_tilde_censored", "jump_m2_positive",
            "jump_categories", "fluid_dx_free_exp", "fluid_dy_free_exp"} <= names
    assert all(0 <= r.p_value <= 1 for r in reps)


def test_compare_identical(small_run):
    d1, _ = embedded_pair(small_run, 10, (5, 5))
    reps = compare_embedded(d1, d1)
    assert all(r.statistic == 0 and not r.rejected for r in reps)


def test_compare_layout_mismatch(small_run):
    d1, d2 = embedded_pair(small_run, 10, (5, 5))
    d3, _ = embedded_pair(small_run, 11, (5, 5))
    with pytest.raises(ConfigurationError):
        compare_embedded(d1, d3)


def test_compare_sparse_interior_two_cells():
    m1 = np.r_[np.zeros(300), np.full(300, 1.0), np.full(300, 1.5)]
    m2 = np.r_[np.zeros(300), np.full(300, 1.0), np.full(300, 1.0)]
    rng = np.random.default_rng(0)
    perm = rng.permutation(900)
    s = EmbeddedSampleSet.from_raw(m1[perm], m2[perm])
    d1, d2 = estimate_pair(s, s, g_bins=4, f_bins=(3, 3))
    chi = [r for r in compare_embedded(d1, d2) if r.test_name == "interior_chi2"][0]
    assert chi.statistic == 0 and chi.p_value == 1.0


def test_compare_detects_doubled_lambda2():
    p = ApqParams(0.3, 0.2, 2.0, 1.0, exp_ph(1.0))
    q = ApqParams(0.3, 0.4, 2.0, 1.0, exp_ph(1.0))
    a = simulate_matched(p, 100_000, 11)
    b = simulate_matched(q, 100_000, 12)
    sa, _ = embedded_pair(a)
    sb, _ = embedded_pair(b)
    d1, d2 = estimate_pair(sa.samples, sb.samples)
    assert any(r.rejected for r in compare_embedded(d1, d2))
