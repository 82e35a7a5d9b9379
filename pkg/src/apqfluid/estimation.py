"""Histogram estimate of the post-jump stationary law as ``h``, ``g`` and ``f``.

``h`` is the mass at the origin, ``g`` a histogram over the diagonal
``m1 = m2 > 0`` (indexed by ``m2``) and ``f`` a 2-D histogram of interior
points in transformed coordinates ``(m1 - m2, m2)``.  All three are
probability masses and sum to one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points
from .mpp import TOL, EmbeddedSampleSet, Region, regions_of


class TildeTransformer(TransformerMixin, BaseEstimator):
    """Stateless map ``(m1, m2) -> (m1 - m2, m2)`` and its inverse."""

    def fit(self, X, y=None):
        check_points(X)
        self.n_features_in_ = 2
        return self

    def transform(self, X):
        X = check_points(X)
        if np.any(X[:, 0] < X[:, 1]):
            raise ValueError("transform needs m1 >= m2 on every row")
        return np.column_stack([X[:, 0] - X[:, 1], X[:, 1]])

    def inverse_transform(self, X):
        X = check_points(X)
        return np.column_stack([X[:, 0] + X[:, 1], X[:, 1]])


@dataclass(frozen=True, eq=False)
class EmbeddedDistribution:
    h: float
    g: np.ndarray
    g_edges: np.ndarray
    f: np.ndarray
    f_edges: tuple
    n_samples: int
    h_count: int
    g_counts: np.ndarray
    f_counts: np.ndarray
    samples: Optional[EmbeddedSampleSet] = None

    @property
    def total_mass(self) -> float:
        return float(self.h + self.g.sum() + self.f.sum())

    def same_layout(self, other: "EmbeddedDistribution") -> bool:
        return (
            np.array_equal(self.g_edges, other.g_edges)
            and np.array_equal(self.f_edges[0], other.f_edges[0])
            and np.array_equal(self.f_edges[1], other.f_edges[1])
        )

    def l1_distance(self, other: "EmbeddedDistribution") -> float:
        if not self.same_layout(other):
            raise ValueError("histogram layouts differ")
        return float(abs(self.h - other.h) + np.abs(self.g - other.g).sum()
                     + np.abs(self.f - other.f).sum())

    def to_dict(self) -> dict:
        return {
            "h": self.h,
            "n_samples": self.n_samples,
            "g_edges": self.g_edges.tolist(),
            "g": self.g.tolist(),
            "f_edges": [self.f_edges[0].tolist(), self.f_edges[1].tolist()],
            "f": self.f.tolist(),
        }


def _bin(values, edges):
    # outermost bins absorb anything beyond the layout
    k = np.searchsorted(edges, values, side="right") - 1
    return np.clip(k, 0, edges.size - 2)


def _edges(lo, hi, n):
    if not hi > lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, n + 1)


class EmbeddedDistributionEstimator(BaseEstimator):
    """Estimate ``(h, g, f)`` from post-jump points given as ``(m1, m2)`` rows.

    Parameters
    ----------
    g_bins : int
    f_bins : (int, int)
        Bins along ``m1 - m2`` and ``m2``.
    g_range : (float, float), optional
        Defaults to ``[0, q]`` with ``q`` the ``g_quantile`` of diagonal points.
    f_range : ((float, float), (float, float)), optional
        Defaults to the bounding box of interior points in transformed coordinates.
    g_quantile : float
    tol : float
        Slack for deciding origin and diagonal membership.

    Attributes
    ----------
    h_, g_, f_ : masses
    g_edges_, f_edges_ : bin edges
    n_samples_ : int
    """

    def __init__(self, g_bins=50, f_bins=(30, 30), g_range=None, f_range=None,
                 g_quantile=0.99, tol=TOL):
        self.g_bins = g_bins
        self.f_bins = f_bins
        self.g_range = g_range
        self.f_range = f_range
        self.g_quantile = g_quantile
        self.tol = tol

    def fit(self, X, y=None):
        X = check_points(X)
        region = regions_of(X[:, 0], X[:, 1], None, self.tol)
        if np.any(region == Region.INVALID):
            raise ValueError("points outside F, G and the origin")
        self.n_features_in_ = 2
        diag = X[region == Region.G, 1]
        inner = X[region == Region.F]
        inner_t = np.column_stack([inner[:, 0] - inner[:, 1], inner[:, 1]])
        self.g_edges_ = self._g_edges(diag)
        self.f_edges_ = self._f_edges(inner_t)
        n = X.shape[0]
        self.h_count_ = int(np.sum(region == Region.ORIGIN))
        self.g_counts_ = np.bincount(_bin(diag, self.g_edges_), minlength=self.g_bins)
        fx = _bin(inner_t[:, 0], self.f_edges_[0])
        fy = _bin(inner_t[:, 1], self.f_edges_[1])
        nx, ny = self.f_bins
        self.f_counts_ = np.bincount(fx * ny + fy, minlength=nx * ny).reshape(nx, ny)
        self.n_samples_ = n
        self.h_ = self.h_count_ / n
        self.g_ = self.g_counts_ / n
        self.f_ = self.f_counts_ / n
        return self

    def _g_edges(self, diag):
        if self.g_range is not None:
            return _edges(*self.g_range, self.g_bins)
        hi = float(np.quantile(diag, self.g_quantile)) if diag.size else 1.0
        return _edges(0.0, hi, self.g_bins)

    def _f_edges(self, inner_t):
        nx, ny = self.f_bins
        if self.f_range is not None:
            (x0, x1), (y0, y1) = self.f_range
        elif inner_t.size:
            (x0, y0), (x1, y1) = inner_t.min(axis=0), inner_t.max(axis=0)
        else:
            x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
        return (_edges(x0, x1, nx), _edges(y0, y1, ny))

    def predict(self, X):
        """Region label per point (see :class:`Region`)."""
        check_is_fitted(self)
        X = check_points(X)
        return regions_of(X[:, 0], X[:, 1], None, self.tol)

    def to_distribution(self, samples: EmbeddedSampleSet | None = None) -> EmbeddedDistribution:
        check_is_fitted(self)
        return EmbeddedDistribution(
            h=self.h_, g=self.g_, g_edges=self.g_edges_, f=self.f_, f_edges=self.f_edges_,
            n_samples=self.n_samples_, h_count=self.h_count_, g_counts=self.g_counts_,
            f_counts=self.f_counts_, samples=samples,
        )


def estimate_embedded(samples: EmbeddedSampleSet, g_bins=50, f_bins=(30, 30),
                      g_range=None, f_range=None) -> EmbeddedDistribution:
    est = EmbeddedDistributionEstimator(g_bins=g_bins, f_bins=f_bins,
                                        g_range=g_range, f_range=f_range)
    est.fit(samples.points)
    return est.to_distribution(samples)


def shared_layout(a: EmbeddedSampleSet, b: EmbeddedSampleSet, g_quantile: float = 0.99):
    """Default ``g_range`` and ``f_range`` from the pooled samples of two runs."""
    diag = np.concatenate([a.m2[a.region == Region.G], b.m2[b.region == Region.G]])
    g_hi = float(np.quantile(diag, g_quantile)) if diag.size else 1.0
    pts = np.vstack([a.tilde_points[a.region == Region.F], b.tilde_points[b.region == Region.F]])
    if pts.size:
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        f_range = ((float(lo[0]), float(hi[0])), (float(lo[1]), float(hi[1])))
    else:
        f_range = ((0.0, 1.0), (0.0, 1.0))
    return (0.0, g_hi), f_range


def estimate_pair(a: EmbeddedSampleSet, b: EmbeddedSampleSet, g_bins=50, f_bins=(30, 30)):
    """Estimate both runs on one pooled layout so they can be compared."""
    g_range, f_range = shared_layout(a, b)
    return (estimate_embedded(a, g_bins, f_bins, g_range, f_range),
            estimate_embedded(b, g_bins, f_bins, g_range, f_range))
