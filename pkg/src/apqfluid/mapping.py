"""Tandem fluid parameters matched to an accumulating priority queue, and checks.

The up phases replay the service law: ``X`` and ``Y`` grow at ``b1 - b2`` and
``b2``, exactly as ``M1 - M2`` and ``M2`` do during a service.  The single
down phase lasts Exp(1); ``X`` falls at ``b1 / lambda1`` so its drop is
Exp(lambda1 / b1), and once ``X`` is empty ``Y`` falls at
``1 / (lambda1 / b1 + lambda2 / b2)``.  Those drops reproduce the downward
jumps of the maximum priority process at departures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ._validation import (
    ConfigurationError,
    InsufficientDataError,
    ParameterError,
    check_count,
    check_significance,
)
from .apq import ApqParams, EventLog, simulate_apq
from .estimation import EmbeddedDistribution, estimate_pair
from .fluid import FluidPath, TandemParams, down_phase_decrements, embedded_at_down_to_up, \
    fluid_category, simulate_tandem
from .mpp import EmbeddedSampleSet, JumpType, MppPath, Region, build_mpp, default_burn_in, \
    embedded_samples
from .stattests import (
    TestReport,
    chi2_report,
    cycle_ids,
    ks_one_sample_report,
    ks_report,
    pick_per_cycle,
    regenerative_proportion,
)
from .stochastics import RandomStream, ph_validate

MIN_CATEGORY = 100
RATIO_RTOL = 1e-9


def _down_rates(params: ApqParams):
    r_down = -1.0 / (params.lambda1 / params.b1)
    c_check = -1.0 / (params.lambda1 / params.b1 + params.lambda2 / params.b2)
    return r_down, c_check


def map_exponential(params: ApqParams) -> TandemParams:
    """Two-phase fluid model for exponential service with rate ``mu``."""
    if not params.service.is_exponential():
        raise ParameterError("service is not exponential; use map_phase_type")
    mu = float(params.service.exit[0])
    r_down, c_check = _down_rates(params)
    return TandemParams(
        gen=np.array([[-mu, mu], [1.0, -1.0]]),
        r_up=np.array([params.b1 - params.b2]),
        r_down=r_down,
        c_hat_up=np.array([params.b2]),
        c_hat_down=0.0,
        c_check_down=c_check,
    )


def map_phase_type(params: ApqParams) -> TandemParams:
    """Fluid model whose up phases are the service phases and one down phase.

    Phase order is ``(up_1, ..., up_k, down)``.  The generator blocks are the
    service sub-generator, its exit vector, the initial vector ``alpha`` and
    ``-1``.
    """
    ph = params.service
    k = ph.n_phases
    gen = np.empty((k + 1, k + 1))
    gen[:k, :k] = ph.subgen
    gen[:k, k] = ph.exit
    gen[k, :k] = ph.alpha
    gen[k, k] = -1.0
    r_down, c_check = _down_rates(params)
    return TandemParams(
        gen=gen,
        r_up=np.full(k, params.b1 - params.b2),
        r_down=r_down,
        c_hat_up=np.full(k, params.b2),
        c_hat_down=0.0,
        c_check_down=c_check,
    )


def perturb_service_rate(params: ApqParams, factor: float) -> ApqParams:
    """Same queue with every service rate multiplied by ``factor``."""
    ph = params.service
    return ApqParams(params.lambda1, params.lambda2, params.b1, params.b2,
                     ph_validate(ph.alpha, ph.subgen * factor))


@dataclass(frozen=True, eq=False)
class MatchedRun:
    params: ApqParams
    tandem: TandemParams
    log: EventLog
    mpp: MppPath
    fluid: FluidPath
    burn_in: int
    seed: int


def simulate_matched(params: ApqParams, n_events: int, seed: int, *,
                     burn_in: int | None = None, tandem: TandemParams | None = None,
                     allow_unstable: bool = False) -> MatchedRun:
    """Run the queue and its fluid counterpart for ``n_events`` post-burn-in events each.

    The queue draws from stream ``(seed, 0)`` and the fluid model from
    ``(seed, 1)``.  ``tandem`` overrides the mapped fluid parameters.
    """
    n_events = check_count(n_events, "n_events")
    burn_in = default_burn_in(n_events) if burn_in is None else check_count(burn_in, "burn_in", 0)
    tandem = map_phase_type(params) if tandem is None else tandem
    total = n_events + burn_in
    log = simulate_apq(params, total, RandomStream(seed, 0), allow_unstable=allow_unstable)
    mpp = build_mpp(log, params)
    fluid = simulate_tandem(tandem, total, RandomStream(seed, 1))
    return MatchedRun(params, tandem, log, mpp, fluid, burn_in, seed)


def _check_up_rates(b1: float, b2: float, tandem: TandemParams):
    if not (np.all(tandem.r_up == b1 - b2) and np.all(tandem.c_hat_up == b2)
            and tandem.c_hat_down == 0.0):
        raise ConfigurationError(
            "fluid up/down rates do not match the queue's accumulation rates"
        )


def verify_lemma_during(mpp: MppPath, fluid_path: FluidPath, significance: float = 0.01,
                        n: int | None = None, seed: int | None = None) -> list:
    """Compare in-service growth of ``(M1 - M2, M2)`` with up-run growth of ``(X, Y)``.

    Two KS tests (one per coordinate) plus a deterministic check that every
    increment pair has slope ratio ``b2 / (b1 - b2)`` on both sides.  ``n``
    caps the number of increments used per side.
    """
    significance = check_significance(significance)
    b1, b2 = mpp.b1, mpp.b2
    _check_up_rates(b1, b2, fluid_path.params)
    dm1t, dm2 = mpp.service_increments()
    dx, dy = fluid_path.up_runs["dx"], fluid_path.up_runs["dy"]
    if n is not None:
        dm1t, dm2, dx, dy = dm1t[:n], dm2[:n], dx[:n], dy[:n]
    if dm1t.size == 0 or dx.size == 0:
        raise InsufficientDataError("no service or up-run increments")
    target = b2 / (b1 - b2)
    rel = max(_max_rel(dm2 / dm1t, target), _max_rel(dy / dx, target))
    return [
        ks_report("during_m1_tilde_vs_x", dm1t, dx, significance, seed),
        ks_report("during_m2_vs_y", dm2, dy, significance, seed),
        TestReport("during_slope_ratio", rel, 1.0 if rel <= RATIO_RTOL else 0.0,
                   dm1t.size, dx.size, significance, seed),
    ]


def _max_rel(values, target):
    return float(np.max(np.abs(values - target)) / abs(target))


def _apq_jump_arrays(mpp: MppPath, burn_in: int):
    s = slice(burn_in, None)
    jt = mpp.jump_type[s]
    pre_t = (mpp.pre_m1 - mpp.pre_m2)[s]
    post_t = (mpp.post_m1 - mpp.post_m2)[s]
    d_m2 = (mpp.pre_m2 - mpp.post_m2)[s]
    prev3 = mpp.jump_type[burn_in - 1] == JumpType.TYPE3 if burn_in > 0 else True
    regen = np.empty(jt.size, dtype=bool)
    regen[0] = prev3
    regen[1:] = jt[:-1] == JumpType.TYPE3
    return jt.astype(np.int8), pre_t - post_t, d_m2, regen


def _fluid_jump_arrays(dec: dict, first_regen: bool):
    cat = fluid_category(dec)
    regen = np.empty(cat.size, dtype=bool)
    regen[0] = first_regen
    regen[1:] = dec["y_hit_zero"][:-1]
    return cat, dec["dx"], dec["dy"], regen


def verify_lemma_jumps(mpp: MppPath, decrements: dict, significance: float = 0.01, *,
                       burn_in: int = 0, first_regen: bool = True, params: ApqParams | None = None,
                       seed: int = 0, on_insufficient: str = "raise") -> list:
    """Compare departure jumps of the priority process with down-phase drops.

    Both sequences regenerate after a visit to the origin.  Each test draws
    one eligible event per complete regeneration cycle on each side, which
    yields i.i.d. samples with equal laws under the null hypothesis.

    Parameters
    ----------
    mpp : MppPath
    decrements : dict
        Output of :func:`down_phase_decrements` (already past burn-in).
    burn_in : int
        Jumps of ``mpp`` to skip.
    first_regen : bool
        Whether the first fluid cycle in ``decrements`` starts at the origin.
    params : ApqParams, optional
        Adds one-sample KS checks of the unconstrained fluid drops against
        Exp(lambda1 / b1) and Exp(lambda1 / b1 + lambda2 / b2).
    on_insufficient : {"raise", "flag"}
        With "flag", tests lacking data are omitted and their names returned
        in a trailing report named ``insufficient_data`` with ``p_value = 1``.

    Returns
    -------
    list of TestReport
    """
    significance = check_significance(significance)
    if on_insufficient not in ("raise", "flag"):
        raise ValueError("on_insufficient must be 'raise' or 'flag'")
    rng = np.random.default_rng(seed)
    jt, dm1t, dm2, regen_a = _apq_jump_arrays(mpp, burn_in)
    cat, dx, dy, regen_b = _fluid_jump_arrays(decrements, first_regen)
    ids_a, ids_b = cycle_ids(regen_a), cycle_ids(regen_b)

    counts_a = np.array([(jt == c).sum() for c in (1, 2, 3)])
    counts_b = np.array([(cat == c).sum() for c in (1, 2, 3)])
    missing = [f"category{c}" for c in (1, 2, 3)
               if min(counts_a[c - 1], counts_b[c - 1]) < MIN_CATEGORY]
    if missing and on_insufficient == "raise":
        raise InsufficientDataError(
            f"fewer than {MIN_CATEGORY} events in {', '.join(missing)}"
        )

    reports = []
    skipped = list(missing)

    def two_sample(name, va, ea, vb, eb):
        ia = pick_per_cycle(ids_a, ea, rng)
        ib = pick_per_cycle(ids_b, eb, rng)
        if min(ia.size, ib.size) < MIN_CATEGORY:
            if on_insufficient == "raise":
                raise InsufficientDataError(f"{name}: too few regeneration cycles")
            skipped.append(name)
            return
        reports.append(ks_report(name, va[ia], vb[ib], significance, seed))

    if "category1" not in missing:
        two_sample("jump_m1_tilde_uncensored", dm1t, jt == 1, dx, cat == 1)
    if "category2" not in missing or "category3" not in missing:
        two_sample("jump_m1_tilde_censored", dm1t, jt != 1, dx, cat != 1)
        two_sample("jump_m2_positive", dm2, dm2 > 0, dy, dy > 0)

    ia = pick_per_cycle(ids_a, np.ones(jt.size, dtype=bool), rng)
    ib = pick_per_cycle(ids_b, np.ones(cat.size, dtype=bool), rng)
    if min(ia.size, ib.size) >= MIN_CATEGORY:
        ca = np.bincount(jt[ia], minlength=4)[1:]
        cb = np.bincount(cat[ib], minlength=4)[1:]
        reports.append(chi2_report("jump_categories", ca, cb, significance, seed))
    elif on_insufficient == "raise":
        raise InsufficientDataError("jump_categories: too few regeneration cycles")
    else:
        skipped.append("jump_categories")

    if params is not None:
        _, c_check = _down_rates(params)
        scale_x = params.b1 / params.lambda1
        reports.append(ks_one_sample_report(
            "fluid_dx_free_exp", decrements["dx_free"], stats.expon(scale=scale_x).cdf,
            significance, seed))
        dyf = decrements["dy_free"][decrements["x_hit_zero"]]
        if dyf.size >= MIN_CATEGORY:
            scale_y = -c_check
            reports.append(ks_one_sample_report(
                "fluid_dy_free_exp", dyf, stats.expon(scale=scale_y).cdf, significance, seed))

    if on_insufficient == "flag" and skipped:
        reports.append(TestReport("insufficient_data:" + ",".join(skipped), 0.0, 1.0,
                                  int(jt.size), int(cat.size), significance, seed))
    return reports


def _regen_from_origin(samples: EmbeddedSampleSet) -> np.ndarray:
    return cycle_ids(samples.region == Region.ORIGIN)


def _pick_rng(seed, k):
    # same keys on both sides, so identical inputs give identical picks
    return np.random.default_rng([seed, k])


def compare_embedded(d1: EmbeddedDistribution, d2: EmbeddedDistribution,
                     significance: float = 0.01, seed: int = 0) -> list:
    """Test that two estimated post-jump laws agree.

    Reports the origin-mass difference (z-test with regenerative standard
    errors), a KS test on diagonal points and a chi-square test over the
    interior bins plus one cell for all non-interior points.  The KS and
    chi-square tests use one randomly drawn point per regeneration cycle.
    """
    significance = check_significance(significance)
    if not d1.same_layout(d2):
        raise ConfigurationError("histogram layouts differ")
    if d1.samples is None or d2.samples is None:
        raise ConfigurationError("compare_embedded needs distributions that keep their samples")
    a, b = d1.samples, d2.samples
    ids_a, ids_b = _regen_from_origin(a), _regen_from_origin(b)

    _, se_a = regenerative_proportion(a.region == Region.ORIGIN, ids_a)
    _, se_b = regenerative_proportion(b.region == Region.ORIGIN, ids_b)
    dh = d1.h - d2.h
    se = math.sqrt(np.nansum([se_a**2, se_b**2]))
    p_h = 1.0 if dh == 0 else (float(2 * stats.norm.sf(abs(dh) / se)) if se > 0 else 0.0)
    reports = [TestReport("origin_mass", abs(dh), p_h, d1.n_samples, d2.n_samples,
                          significance, seed)]

    ia = pick_per_cycle(ids_a, a.region == Region.G, _pick_rng(seed, 0))
    ib = pick_per_cycle(ids_b, b.region == Region.G, _pick_rng(seed, 0))
    if ia.size and ib.size:
        reports.append(ks_report("diagonal_ks", a.m2[ia], b.m2[ib], significance, seed))
    else:
        reports.append(TestReport("diagonal_ks", 0.0, 1.0, ia.size, ib.size, significance, seed))

    ia = pick_per_cycle(ids_a, np.ones(len(a), dtype=bool), _pick_rng(seed, 1))
    ib = pick_per_cycle(ids_b, np.ones(len(b), dtype=bool), _pick_rng(seed, 1))
    reports.append(chi2_report("interior_chi2", _cells(a, ia, d1), _cells(b, ib, d1),
                               significance, seed))
    return reports


def _cells(s: EmbeddedSampleSet, idx: np.ndarray, layout: EmbeddedDistribution) -> np.ndarray:
    xe, ye = layout.f_edges
    nx, ny = xe.size - 1, ye.size - 1
    inner = idx[s.region[idx] == Region.F]
    fx = np.clip(np.searchsorted(xe, s.m1_tilde[inner], side="right") - 1, 0, nx - 1)
    fy = np.clip(np.searchsorted(ye, s.m2[inner], side="right") - 1, 0, ny - 1)
    counts = np.zeros(nx * ny + 1)
    counts[0] = idx.size - inner.size
    counts[1:] = np.bincount(fx * ny + fy, minlength=nx * ny)
    return counts


def embedded_pair(run: MatchedRun, g_bins=50, f_bins=(30, 30)):
    """Estimated ``(h, g, f)`` for both sides of a matched run on a shared layout."""
    ratio = run.params.b1 / run.params.b2
    a = embedded_samples(run.mpp, run.burn_in)
    b = embedded_at_down_to_up(run.fluid, run.burn_in, ratio)
    return estimate_pair(a, b, g_bins, f_bins)


def lemma_jump_reports(run: MatchedRun, significance: float = 0.01,
                       on_insufficient: str = "raise") -> list:
    dec = down_phase_decrements(run.fluid, run.burn_in)
    first = bool(run.fluid.down_cycles["y_hit_zero"][run.burn_in - 1]) if run.burn_in else True
    return verify_lemma_jumps(run.mpp, dec, significance, burn_in=run.burn_in,
                              first_regen=first, params=run.params, seed=run.seed,
                              on_insufficient=on_insufficient)
