"""Maximum priority process built from an APQ event log.

``M1(t)`` and ``M2(t)`` bound the accumulated priority of any waiting class-1
and class-2 customer.  They grow at rates ``b1`` and ``b2`` during service,
stay at zero while the server idles, and jump down at departures:

* Type 1: the next customer has priority in ``[M2-, M1-)``; only ``M1`` drops.
* Type 2: the next customer has priority below ``M2-``; both drop to it.
* Type 3: nobody is waiting; both drop to zero.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._validation import InsufficientDataError, ValidationError, check_count
from .apq import ApqParams, EventLog

TOL = 1e-9


class JumpType(enum.IntEnum):
    TYPE1 = 1
    TYPE2 = 2
    TYPE3 = 3


class Region(enum.IntEnum):
    ORIGIN = 0
    G = 1
    F = 2
    INVALID = -1


class ClassificationError(ValidationError):
    """A pre/post pair fits none of the three jump types."""


@dataclass(frozen=True)
class JumpRecord:
    t: float
    pre: tuple
    post: tuple
    jump_type: JumpType
    next_class: Optional[int]


@dataclass(frozen=True, eq=False)
class MppPath:
    """Piecewise-linear path plus per-departure jump records.

    Segment ``k`` runs over ``[seg_t0[k], seg_t1[k])`` starting from
    ``(seg_m1[k], seg_m2[k])`` with slopes ``(b1, b2)`` if ``seg_busy[k]``
    and ``(0, 0)`` otherwise.  Jump arrays are aligned with service
    positions: jump ``m`` happens at departure ``D_{n(m)}``.
    """

    b1: float
    b2: float
    seg_t0: np.ndarray
    seg_t1: np.ndarray
    seg_m1: np.ndarray
    seg_m2: np.ndarray
    seg_busy: np.ndarray
    jump_t: np.ndarray
    pre_m1: np.ndarray
    pre_m2: np.ndarray
    post_m1: np.ndarray
    post_m2: np.ndarray
    jump_type: np.ndarray
    next_class: np.ndarray  # 0 when nobody is waiting

    @property
    def n_jumps(self) -> int:
        return self.jump_t.shape[0]

    @property
    def segments(self) -> np.ndarray:
        return np.column_stack([self.seg_t0, self.seg_t1, self.seg_m1, self.seg_m2])

    def jump(self, m: int) -> JumpRecord:
        """Jump record at the ``m``-th departure (1-based)."""
        i = m - 1
        nc = int(self.next_class[i])
        return JumpRecord(
            t=float(self.jump_t[i]),
            pre=(float(self.pre_m1[i]), float(self.pre_m2[i])),
            post=(float(self.post_m1[i]), float(self.post_m2[i])),
            jump_type=JumpType(int(self.jump_type[i])),
            next_class=nc or None,
        )

    @property
    def jumps(self) -> list:
        return [self.jump(m) for m in range(1, self.n_jumps + 1)]

    def service_segments(self):
        """Start and end states of every service segment, as four arrays."""
        busy = self.seg_busy
        dt = self.seg_t1[busy] - self.seg_t0[busy]
        m1s, m2s = self.seg_m1[busy], self.seg_m2[busy]
        return m1s, m2s, m1s + self.b1 * dt, m2s + self.b2 * dt

    def service_increments(self):
        """Per-service increments ``(dM1_tilde, dM2)`` from the pre-jump states."""
        m1s, m2s, m1e, m2e = self.service_segments()
        return (m1e - m2e) - (m1s - m2s), m2e - m2s

    def __call__(self, t):
        """Evaluate ``(M1(t), M2(t))`` on the covered time span."""
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.seg_t0, t, side="right") - 1
        k = np.clip(k, 0, self.seg_t0.size - 1)
        dt = np.where(self.seg_busy[k], t - self.seg_t0[k], 0.0)
        return self.seg_m1[k] + self.b1 * dt, self.seg_m2[k] + self.b2 * dt

    def jumps_csv(self, header: str | None = None) -> str:
        buf = io.StringIO()
        if header:
            buf.write(header.rstrip("\n") + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "t", "jump_type", "pre_m1", "pre_m2", "post_m1", "post_m2",
                    "post_m1_tilde"])
        for i in range(self.n_jumps):
            w.writerow([
                i + 1,
                repr(float(self.jump_t[i])),
                int(self.jump_type[i]),
                repr(float(self.pre_m1[i])),
                repr(float(self.pre_m2[i])),
                repr(float(self.post_m1[i])),
                repr(float(self.post_m2[i])),
                repr(float(self.post_m1[i] - self.post_m2[i])),
            ])
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class EmbeddedSampleSet:
    """Post-jump states in raw ``(m1, m2)`` and transformed ``(m1 - m2, m2)`` form.

    For fluid samples the transformed pair is ``(X, Y)`` and ``m1 = X + Y``.
    """

    m1: np.ndarray
    m2: np.ndarray
    region: np.ndarray

    @property
    def m1_tilde(self) -> np.ndarray:
        return self.m1 - self.m2

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.m1, self.m2])

    @property
    def tilde_points(self) -> np.ndarray:
        return np.column_stack([self.m1_tilde, self.m2])

    def __len__(self):
        return self.m1.shape[0]

    @classmethod
    def from_raw(cls, m1, m2, ratio: float | None = None, tol: float = TOL):
        m1 = np.asarray(m1, dtype=float)
        m2 = np.asarray(m2, dtype=float)
        return cls(m1=m1, m2=m2, region=regions_of(m1, m2, ratio, tol))

    @classmethod
    def from_tilde(cls, x, y, ratio: float | None = None, tol: float = TOL):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return cls.from_raw(x + y, y, ratio, tol)

    def to_csv(self, header: str | None = None) -> str:
        buf = io.StringIO()
        if header:
            buf.write(header.rstrip("\n") + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["post_m1", "post_m2", "post_m1_tilde", "region"])
        names = {r.value: r.name for r in Region}
        mt = self.m1_tilde
        for i in range(len(self)):
            w.writerow([repr(float(self.m1[i])), repr(float(self.m2[i])),
                        repr(float(mt[i])), names[int(self.region[i])]])
        return buf.getvalue()


def transform_tilde(p):
    """Map ``(m1, m2)`` to ``(m1 - m2, m2)``; requires ``m1 >= m2``."""
    m1, m2 = p
    if m1 < m2:
        raise ValueError(f"transform needs m1 >= m2, got ({m1}, {m2})")
    return (m1 - m2, m2)


def classify_jump(pre, post, tol: float = TOL) -> JumpType:
    pre_m1, pre_m2 = pre
    m1, m2 = post
    if abs(m1) <= tol and abs(m2) <= tol:
        return JumpType.TYPE3
    if abs(m1 - m2) <= tol:
        return JumpType.TYPE2
    if abs(m2 - pre_m2) <= tol and m1 > m2:
        return JumpType.TYPE1
    raise ClassificationError(f"cannot classify jump {pre} -> {post}")


def region_of(p, params: ApqParams | float | None = None, tol: float = TOL) -> Region:
    """Which of ``F``, ``G``, origin (or none) the point ``p = (m1, m2)`` lies in.

    ``params`` supplies ``b1 / b2`` for the upper edge of ``F``; either an
    :class:`ApqParams` or the ratio itself.  Without it the edge is not checked.
    """
    ratio = params.b1 / params.b2 if isinstance(params, ApqParams) else params
    return Region(int(regions_of(np.array([p[0]]), np.array([p[1]]), ratio, tol)[0]))


def regions_of(m1, m2, ratio: float | None = None, tol: float = TOL) -> np.ndarray:
    m1 = np.asarray(m1, dtype=float)
    m2 = np.asarray(m2, dtype=float)
    out = np.full(m1.shape, Region.INVALID.value, dtype=np.int8)
    origin = (np.abs(m1) <= tol) & (np.abs(m2) <= tol)
    diag = ~origin & (np.abs(m1 - m2) <= tol) & (m2 > 0)
    inner = ~origin & ~diag & (m2 > -tol) & (m1 > m2)
    if ratio is not None:
        inner &= m1 < ratio * m2 + tol
    out[origin] = Region.ORIGIN.value
    out[diag] = Region.G.value
    out[inner] = Region.F.value
    return out


def build_mpp(log: EventLog, params: ApqParams | None = None, tol: float = TOL) -> MppPath:
    """Construct ``(M1, M2)`` from an event log.

    At the ``m``-th departure ``M1`` becomes the largest accumulated priority
    among arrived, unserved customers (the next customer served, by the
    selection rule), or zero if none is waiting; ``M2`` becomes
    ``min(M1(D), M2(C) + b2 X)``.
    """
    params = params if params is not None else log.params
    if params is None:
        raise ValidationError("build_mpp needs ApqParams")
    log_order = log.service_order - 1
    n = log_order.size
    if n == 0:
        raise InsufficientDataError("event log has no served customers")
    b1, b2 = params.b1, params.b2
    C = log.start[log_order]
    X = log.service_time[log_order]
    D = C + X
    if np.any(C[1:] < D[:-1]):
        raise ValidationError("inconsistent log: service intervals overlap")

    # value of the next customer's priority at each departure, 0 if it arrives later
    nxt_g = np.empty(n)
    nxt_cls = np.zeros(n, dtype=np.int8)
    nxt_g[:-1] = log.gamma[log_order[1:]]
    nxt_cls[:-1] = log.cls[log_order[1:]]
    waiting = np.zeros(n, dtype=bool)
    waiting[:-1] = nxt_g[:-1] <= D[:-1]
    # last departure: scan arrived-unserved customers directly
    last_best, last_cls = _max_waiting(log, D[-1], b1, b2)
    rate_next = np.where(nxt_cls == 1, b1, b2)

    jt = np.empty(n, dtype=np.int8)
    pre1 = np.empty(n)
    pre2 = np.empty(n)
    post1 = np.empty(n)
    post2 = np.empty(n)
    cls_next = np.zeros(n, dtype=np.int8)
    seg_m1 = np.empty(n)
    seg_m2 = np.empty(n)

    m1 = m2 = 0.0
    for k in range(n):
        seg_m1[k] = m1
        seg_m2[k] = m2
        a1 = m1 + b1 * X[k]
        a2 = m2 + b2 * X[k]
        pre1[k] = a1
        pre2[k] = a2
        if k < n - 1:
            v = rate_next[k] * (D[k] - nxt_g[k]) if waiting[k] else 0.0
            c = int(nxt_cls[k]) if waiting[k] else 0
        else:
            v, c = last_best, last_cls
        new1 = v
        new2 = min(v, a2)
        post1[k] = new1
        post2[k] = new2
        cls_next[k] = c
        jt[k] = classify_jump((a1, a2), (new1, new2), tol)
        if k < n - 1 and not waiting[k]:
            m1 = m2 = 0.0  # idle until the next arrival
        else:
            m1, m2 = new1, new2

    # interleave idle gaps as explicit zero segments
    idle = np.flatnonzero(C[1:] > D[:-1])
    t0 = np.concatenate([C, D[idle]])
    t1 = np.concatenate([D, C[idle + 1]])
    sm1 = np.concatenate([seg_m1, np.zeros(idle.size)])
    sm2 = np.concatenate([seg_m2, np.zeros(idle.size)])
    busy = np.concatenate([np.ones(n, dtype=bool), np.zeros(idle.size, dtype=bool)])
    srt = np.argsort(t0, kind="stable")
    return MppPath(
        b1=b1, b2=b2,
        seg_t0=t0[srt], seg_t1=t1[srt], seg_m1=sm1[srt], seg_m2=sm2[srt],
        seg_busy=busy[srt],
        jump_t=D, pre_m1=pre1, pre_m2=pre2, post_m1=post1, post_m2=post2,
        jump_type=jt, next_class=cls_next,
    )


def _max_waiting(log: EventLog, t: float, b1: float, b2: float):
    arrived = log.gamma <= t
    unserved = np.isnan(log.start) | (log.start > t)
    # customers served before t have start < t; the one departing at t has start < t too
    mask = arrived & unserved
    if not np.any(mask):
        return 0.0, 0
    rates = np.where(log.cls == 1, b1, b2)
    v = np.where(mask, rates * (t - log.gamma), -np.inf)
    i = int(np.argmax(v))
    return float(v[i]), int(log.cls[i])


def default_burn_in(n_jumps: int) -> int:
    return max(1000, n_jumps // 100)


def embedded_samples(path: MppPath, burn_in: int | None = None, tol: float = TOL) -> EmbeddedSampleSet:
    """Post-jump states of jumps after the first ``burn_in`` ones."""
    burn_in = default_burn_in(path.n_jumps) if burn_in is None else check_count(burn_in, "burn_in", 0)
    if path.n_jumps <= burn_in:
        raise InsufficientDataError(
            f"path has {path.n_jumps} jumps, burn-in needs more than {burn_in}"
        )
    s = slice(burn_in, None)
    return EmbeddedSampleSet.from_raw(path.post_m1[s], path.post_m2[s], path.b1 / path.b2, tol)
