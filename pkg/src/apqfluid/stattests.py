"""Distribution tests used to compare the queue and fluid simulations."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy import stats

from ._validation import check_sample


@dataclass(frozen=True)
class TestReport:
    """Outcome of one hypothesis test.

    Deterministic checks are reported with ``p_value`` 1.0 (holds) or 0.0
    (violated).  ``decision`` is ``"reject"`` iff ``p_value < significance``.
    """

    __test__ = False  # keep pytest from collecting this class

    test_name: str
    statistic: float
    p_value: float
    n_a: int
    n_b: int
    significance: float
    seed: Optional[int] = None

    def __post_init__(self):
        p = float(self.p_value)
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p_value must lie in [0, 1], got {p}")
        object.__setattr__(self, "p_value", p)
        object.__setattr__(self, "statistic", float(self.statistic))

    @property
    def decision(self) -> str:
        return "reject" if self.p_value < self.significance else "accept"

    @property
    def rejected(self) -> bool:
        return self.decision == "reject"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["decision"] = self.decision
        return d


def ks_two_sample(a, b):
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.

    The p-value uses the limiting Kolmogorov distribution evaluated at
    ``sqrt(n_a n_b / (n_a + n_b)) * D``.
    """
    a = np.sort(check_sample(a, "a"))
    b = np.sort(check_sample(b, "b"))
    na, nb = a.size, b.size
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / na
    cdf_b = np.searchsorted(b, grid, side="right") / nb
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    en = na * nb / (na + nb)
    p = float(stats.kstwobign.sf(math.sqrt(en) * d)) if d > 0 else 1.0
    return d, min(max(p, 0.0), 1.0)


def ks_report(name, a, b, significance=0.01, seed=None) -> TestReport:
    d, p = ks_two_sample(a, b)
    return TestReport(name, d, p, int(np.size(a)), int(np.size(b)), significance, seed)


def ks_one_sample_report(name, x, cdf, significance=0.01, seed=None) -> TestReport:
    x = check_sample(x, "x")
    res = stats.kstest(x, cdf, method="asymp")
    return TestReport(name, res.statistic, res.pvalue, x.size, 0, significance, seed)


def chi2_homogeneity(counts_a, counts_b, min_expected: float = 5.0):
    """Chi-square test that two count vectors share one distribution.

    Cells whose pooled expected count falls below ``min_expected`` on either
    side are merged into one remainder cell; if that cell is still sparse it
    is folded into the smallest remaining cell.

    Returns
    -------
    statistic, p_value, n_cells
    """
    a = np.asarray(counts_a, dtype=float).ravel()
    b = np.asarray(counts_b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError("count vectors must have the same layout")
    keep = (a + b) > 0
    a, b = a[keep], b[keep]
    na, nb = a.sum(), b.sum()
    if na == 0 or nb == 0:
        raise ValueError("both count vectors need positive totals")
    pooled = (a + b) / (na + nb)
    sparse = (pooled * min(na, nb)) < min_expected
    if sparse.any():
        cells_a = list(a[~sparse]) + [a[sparse].sum()]
        cells_b = list(b[~sparse]) + [b[sparse].sum()]
        ra, rb = cells_a[-1], cells_b[-1]
        if (ra + rb) / (na + nb) * min(na, nb) < min_expected and len(cells_a) > 1:
            j = int(np.argmin(np.asarray(cells_a[:-1]) + np.asarray(cells_b[:-1])))
            cells_a[j] += cells_a.pop()
            cells_b[j] += cells_b.pop()
        a, b = np.asarray(cells_a), np.asarray(cells_b)
    if a.size < 2:
        return 0.0, 1.0, int(a.size)
    table = np.vstack([a, b])
    chi2, p, _, _ = stats.chi2_contingency(table, correction=False)
    return float(chi2), float(p), int(a.size)


def chi2_report(name, counts_a, counts_b, significance=0.01, seed=None) -> TestReport:
    stat, p, _ = chi2_homogeneity(counts_a, counts_b)
    return TestReport(name, stat, p, int(np.sum(counts_a)), int(np.sum(counts_b)),
                      significance, seed)


def cycle_ids(regen: np.ndarray) -> np.ndarray:
    """Regeneration-cycle label per event; -1 before the first and in the last open cycle.

    ``regen[i]`` marks event ``i`` as the first event of a new cycle.
    """
    regen = np.asarray(regen, dtype=bool)
    ids = np.cumsum(regen) - 1
    if regen.any():
        ids[ids == ids.max()] = -1  # trailing cycle may be truncated
    return ids


def pick_per_cycle(ids: np.ndarray, eligible: np.ndarray, rng) -> np.ndarray:
    """Indices of one uniformly chosen eligible event per complete cycle.

    Cycles of a regenerative sequence are i.i.d., so the picked events are
    i.i.d. too, and two processes with equal laws yield equally distributed
    picks.  Cycles without an eligible event contribute nothing.
    """
    ids = np.asarray(ids)
    idx = np.flatnonzero(np.asarray(eligible, dtype=bool) & (ids >= 0))
    if idx.size == 0:
        return idx
    cyc = ids[idx]
    # random key per event, keep the smallest key in each cycle
    key = rng.random(idx.size)
    order = np.lexsort((key, cyc))
    first = np.ones(order.size, dtype=bool)
    first[1:] = cyc[order][1:] != cyc[order][:-1]
    return np.sort(idx[order[first]])


def regenerative_proportion(indicator, ids):
    """Ratio estimate of a long-run proportion and its regenerative standard error."""
    ind = np.asarray(indicator, dtype=float)
    ids = np.asarray(ids)
    ok = ids >= 0
    n_cyc = int(ids[ok].max()) + 1 if ok.any() else 0
    if n_cyc < 2:
        return float(ind.mean()), float("nan")
    y = np.bincount(ids[ok], weights=ind[ok], minlength=n_cyc)
    tau = np.bincount(ids[ok], minlength=n_cyc).astype(float)
    r = y.sum() / tau.sum()
    resid = y - r * tau
    se = math.sqrt(resid.var(ddof=1) / n_cyc) / tau.mean()
    return float(r), float(se)
