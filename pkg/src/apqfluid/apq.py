"""Discrete-event simulation of the two-class accumulating priority queue.

A class-``i`` customer accumulates priority linearly at rate ``b_i`` from its
arrival epoch.  Whenever the server frees up it takes the waiting customer
with the largest accumulated priority (smallest arrival index on ties); an
idle server starts the next arrival immediately.
"""

from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from ._validation import ParameterError, ValidationError, check_count, check_positive
from .stochastics import PhaseType, as_generator, ph_from_config, ph_mean, ph_sample


class StabilityError(ParameterError):
    """Offered load (lambda1 + lambda2) * E[X] is not below one."""


@dataclass(frozen=True)
class ApqParams:
    lambda1: float
    lambda2: float
    b1: float
    b2: float
    service: PhaseType

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "b1", "b2"):
            object.__setattr__(self, name, check_positive(getattr(self, name), name))
        if not self.b1 > self.b2:
            raise ParameterError(f"need b1 > b2, got b1={self.b1}, b2={self.b2}")
        if not isinstance(self.service, PhaseType):
            raise ParameterError("service must be a PhaseType")

    @property
    def rho(self) -> float:
        return (self.lambda1 + self.lambda2) * ph_mean(self.service)

    def rate(self, cls: int) -> float:
        return self.b1 if cls == 1 else self.b2

    def check_stable(self) -> None:
        if not self.rho < 1.0:
            raise StabilityError(f"unstable queue: rho = {self.rho:.6g} >= 1")

    def to_config(self) -> dict:
        return {
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "b1": self.b1,
            "b2": self.b2,
            "service": self.service.to_config(),
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "ApqParams":
        try:
            return cls(
                lambda1=cfg["lambda1"],
                lambda2=cfg["lambda2"],
                b1=cfg["b1"],
                b2=cfg["b2"],
                service=ph_from_config(cfg["service"]),
            )
        except KeyError as exc:
            raise ValidationError(f"apq config missing key {exc}") from None


@dataclass(frozen=True)
class CustomerRecord:
    n: int
    gamma: float
    cls: int
    service_time: float
    start: float
    depart: float


@dataclass(frozen=True, eq=False)
class EventLog:
    """Per-customer arrays indexed by arrival order (array row ``n - 1``).

    Unserved customers carry ``nan`` start and departure times.
    ``service_order[m - 1]`` is the 1-based arrival index ``n(m)``.
    """

    gamma: np.ndarray
    cls: np.ndarray
    service_time: np.ndarray
    start: np.ndarray
    depart: np.ndarray
    service_order: np.ndarray
    busy_period_starts: np.ndarray
    params: Optional[ApqParams] = None

    @property
    def n_customers(self) -> int:
        return self.gamma.shape[0]

    @property
    def n_served(self) -> int:
        return self.service_order.shape[0]

    def record(self, n: int) -> CustomerRecord:
        i = n - 1
        return CustomerRecord(
            n=n,
            gamma=float(self.gamma[i]),
            cls=int(self.cls[i]),
            service_time=float(self.service_time[i]),
            start=float(self.start[i]),
            depart=float(self.depart[i]),
        )

    @property
    def customers(self) -> list:
        return [self.record(n) for n in range(1, self.n_customers + 1)]

    def served_starts(self) -> np.ndarray:
        return self.start[self.service_order - 1]

    def served_departs(self) -> np.ndarray:
        return self.depart[self.service_order - 1]

    def check(self) -> None:
        """Assert the structural invariants of a log; raises ValidationError."""
        order = self.service_order
        if np.unique(order).size != order.size:
            raise ValidationError("service_order repeats an arrival index")
        if np.any(order < 1) or np.any(order > self.n_customers):
            raise ValidationError("service_order refers to unknown customers")
        if np.any(np.diff(self.gamma) <= 0):
            raise ValidationError("arrival epochs are not strictly increasing")
        idx = order - 1
        C, D, g = self.start[idx], self.depart[idx], self.gamma[idx]
        if np.any(np.isnan(C)) or np.any(np.isnan(D)):
            raise ValidationError("served customer without start/departure")
        if np.any(g > C):
            raise ValidationError("service starts before arrival")
        if np.any(D != C + self.service_time[idx]):
            raise ValidationError("departure != start + service time")
        if np.any(C[1:] < D[:-1]):
            raise ValidationError("service intervals overlap")
        if np.any(C[1:] != np.maximum(D[:-1], g[1:])):
            raise ValidationError("server idles while customers wait")

    def to_csv(self, header: str | None = None) -> str:
        buf = io.StringIO()
        if header:
            buf.write(header.rstrip("\n") + "\n")
        position = np.zeros(self.n_customers, dtype=int)
        position[self.service_order - 1] = np.arange(1, self.n_served + 1)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "gamma", "cls", "service_time", "start", "depart", "service_position"])
        for i in range(self.n_customers):
            served = position[i] > 0
            w.writerow([
                i + 1,
                repr(float(self.gamma[i])),
                int(self.cls[i]),
                repr(float(self.service_time[i])),
                repr(float(self.start[i])) if served else "",
                repr(float(self.depart[i])) if served else "",
                int(position[i]) if served else "",
            ])
        return buf.getvalue()


def priority_of(rec: CustomerRecord, t: float, b1: float, b2: float) -> float:
    """Accumulated priority ``b_cls * max(0, t - gamma)`` of one customer."""
    rate = b1 if rec.cls == 1 else b2
    return rate * max(0.0, t - rec.gamma)


def next_customer(log: EventLog, served: Iterable[int], t: float, b1: float, b2: float):
    """Arrival index maximising priority among arrived, unserved customers at ``t``.

    Brute-force scan over the whole log; ties go to the smallest index.
    Returns ``None`` when nobody is waiting.
    """
    served = set(int(n) for n in served)
    arrived = np.flatnonzero(log.gamma <= t)
    best, best_v = None, -np.inf
    for i in arrived:
        n = int(i) + 1
        if n in served:
            continue
        rate = b1 if log.cls[i] == 1 else b2
        v = rate * max(0.0, t - log.gamma[i])
        if v > best_v:
            best, best_v = n, v
    return best


class _ArrivalSource:
    """Lazily generated merged Poisson arrivals with attached service times."""

    def __init__(self, params: ApqParams, gen: np.random.Generator, chunk: int):
        self.params = params
        self.gen = gen
        self.chunk = chunk
        self.gamma: list = []
        self.cls: list = []
        self.service: list = []
        self._t = 0.0

    def ensure(self, i: int) -> bool:
        while len(self.gamma) <= i:
            self._extend()
        return True

    def _extend(self):
        p, n = self.params, self.chunk
        lam = p.lambda1 + p.lambda2
        gaps = self.gen.exponential(1.0 / lam, size=n)
        times = self._t + np.cumsum(gaps)
        cls = np.where(self.gen.random(n) < p.lambda1 / lam, 1, 2)
        svc = ph_sample(p.service, self.gen, size=n)
        self._t = float(times[-1])
        self.gamma.extend(times.tolist())
        self.cls.extend(cls.tolist())
        self.service.extend(svc.tolist())


class _ScriptSource:
    def __init__(self, script: Sequence):
        rows = sorted(script, key=lambda r: r[0])
        self.gamma = [float(r[0]) for r in rows]
        self.cls = [int(r[1]) for r in rows]
        self.service = [float(r[2]) for r in rows]
        if any(c not in (1, 2) for c in self.cls):
            raise ValidationError("scripted classes must be 1 or 2")
        if any(s <= 0 for s in self.service):
            raise ValidationError("scripted service times must be positive")

    def ensure(self, i: int) -> bool:
        return i < len(self.gamma)


def simulate_apq(
    params: ApqParams,
    n_departures: int,
    rng=None,
    *,
    arrival_script: Sequence | None = None,
    allow_unstable: bool = False,
    chunk: int = 8192,
) -> EventLog:
    """Simulate the queue until ``n_departures`` customers have been served.

    Parameters
    ----------
    params : ApqParams
    n_departures : int
    rng : RandomStream, Generator, int or None
        Ignored when ``arrival_script`` is given.
    arrival_script : sequence of (time, class, service_time), optional
        Deterministic arrivals for golden traces.  The run stops early if
        the script runs out of customers.
    allow_unstable : bool
        Skip the ``rho < 1`` check (exploratory runs only).

    Returns
    -------
    EventLog
        Holds every customer that arrived no later than the last departure.
    """
    n_departures = check_count(n_departures, "n_departures")
    if arrival_script is None:
        if not allow_unstable:
            params.check_stable()
        src = _ArrivalSource(params, as_generator(rng), chunk)
    else:
        src = _ScriptSource(arrival_script)

    b1, b2 = params.b1, params.b2
    queues = (deque(), deque())
    gam, cls_, svc = src.gamma, src.cls, src.service
    order: list = []
    starts: dict = {}
    busy_starts: list = []
    nxt = 0  # first arrival not yet admitted to a queue
    t = -np.inf  # epoch at which the server last became free
    for _ in range(n_departures):
        while src.ensure(nxt) and gam[nxt] <= t:
            queues[cls_[nxt] - 1].append(nxt)
            nxt += 1
        q1, q2 = queues
        if q1 and q2:
            i1, i2 = q1[0], q2[0]
            v1 = b1 * (t - gam[i1])
            v2 = b2 * (t - gam[i2])
            if v1 > v2 or (v1 == v2 and i1 < i2):
                i = q1.popleft()
            else:
                i = q2.popleft()
            c = t
        elif q1 or q2:
            i = (q1 or q2).popleft()
            c = t
        else:
            if not src.ensure(nxt):
                break
            i = nxt
            nxt += 1
            c = gam[i]
            busy_starts.append(c)
        starts[i] = c
        order.append(i)
        t = c + svc[i]

    # keep everyone who had arrived by the final departure
    while src.ensure(nxt) and gam[nxt] <= t:
        nxt += 1
    n_cust = nxt
    start = np.full(n_cust, np.nan)
    idx = np.fromiter(starts.keys(), dtype=int, count=len(starts))
    start[idx] = np.fromiter(starts.values(), dtype=float, count=len(starts))
    service_time = np.asarray(svc[:n_cust], dtype=float)
    log = EventLog(
        gamma=np.asarray(gam[:n_cust], dtype=float),
        cls=np.asarray(cls_[:n_cust], dtype=np.int8),
        service_time=service_time,
        start=start,
        depart=start + service_time,
        service_order=np.asarray(order, dtype=np.int64) + 1,
        busy_period_starts=np.asarray(busy_starts, dtype=float),
        params=params,
    )
    return log


def departures_leaving_empty(log: EventLog) -> np.ndarray:
    """Boolean per departure: did it leave the system empty?

    Counted directly from arrival epochs, independently of any priority logic.
    """
    D = log.served_departs()
    # customers arrived by D minus customers served by D
    arrived = np.searchsorted(log.gamma, D, side="right")
    served = np.arange(1, D.size + 1)
    return arrived == served
