"""Phase-type service laws and reproducible random streams.

A phase-type law ``PH(alpha, T)`` is the absorption time of a transient
continuous-time Markov chain started from ``alpha`` with sub-generator ``T``.
The exponential law with rate ``mu`` is the one-phase case ``PH((1), (-mu))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import ParameterError, ValidationError, check_positive

ALPHA_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PhaseType:
    """Initial distribution ``alpha`` and sub-generator ``subgen`` of a PH law.

    Use :func:`ph_validate` or :func:`exp_ph` rather than constructing this
    directly; they compute ``exit`` and check every invariant.
    """

    alpha: np.ndarray
    subgen: np.ndarray
    exit: np.ndarray = field(repr=False)

    @property
    def n_phases(self) -> int:
        return self.alpha.shape[0]

    @property
    def mean(self) -> float:
        return ph_mean(self)

    def is_exponential(self) -> bool:
        return self.n_phases == 1

    def to_config(self) -> dict:
        if self.is_exponential():
            return {"type": "exp", "mu": float(self.exit[0])}
        return {
            "type": "ph",
            "alpha": [float(a) for a in self.alpha],
            "T": [[float(v) for v in row] for row in self.subgen],
        }

    def __eq__(self, other):
        if not isinstance(other, PhaseType):
            return NotImplemented
        return (
            np.array_equal(self.alpha, other.alpha)
            and np.array_equal(self.subgen, other.subgen)
            and np.array_equal(self.exit, other.exit)
        )

    __hash__ = None


def ph_validate(alpha, subgen) -> PhaseType:
    """Check a PH representation and return it with its exit-rate vector.

    Raises
    ------
    ValidationError
        Naming the first violated invariant.
    """
    a = np.atleast_1d(np.asarray(alpha, dtype=float))
    T = np.atleast_2d(np.asarray(subgen, dtype=float))
    k = a.shape[0]
    if a.ndim != 1 or T.shape != (k, k):
        raise ValidationError(
            f"dimension mismatch: alpha has shape {a.shape}, subgen {T.shape}"
        )
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(T))):
        raise ValidationError("alpha and subgen must be finite")
    if np.any(a < 0):
        raise ValidationError("alpha must be non-negative")
    if abs(a.sum() - 1.0) > ALPHA_TOL:
        raise ValidationError(f"alpha must sum to 1, sums to {a.sum():.12g}")
    diag = np.diag(T)
    if np.any(diag >= 0):
        raise ValidationError("subgen diagonal entries must be negative")
    off = T - np.diag(diag)
    if np.any(off < 0):
        raise ValidationError("subgen off-diagonal entries must be non-negative")
    # exit is defined so that every row of [subgen | exit] sums to zero
    exit_ = -(diag + off.sum(axis=1))
    if np.any(exit_ < -1e-12 * np.abs(diag)):
        raise ValidationError("subgen row sums must be <= 0 (positive row sum found)")
    exit_ = np.maximum(exit_, 0.0)
    if not np.any(exit_ > 0):
        raise ValidationError("subgen must have at least one row with negative sum")
    if abs(np.linalg.det(T)) == 0 or np.linalg.cond(T) > 1e14:
        raise ValidationError("subgen is singular (some phase is not transient)")
    for arr in (a, T, exit_):
        arr.setflags(write=False)
    return PhaseType(alpha=a, subgen=T, exit=exit_)


def exp_ph(mu) -> PhaseType:
    """Exponential service law with rate ``mu`` as a one-phase PH law."""
    mu = check_positive(mu, "mu")
    return ph_validate([1.0], [[-mu]])


def erlang_ph(k: int, rate) -> PhaseType:
    """Erlang-``k`` law: ``k`` sequential exponential stages of rate ``rate``."""
    rate = check_positive(rate, "rate")
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    T = -rate * np.eye(k) + rate * np.eye(k, k=1)
    alpha = np.zeros(k)
    alpha[0] = 1.0
    return ph_validate(alpha, T)


def ph_mean(ph: PhaseType) -> float:
    """Mean absorption time ``alpha (-T)^{-1} 1``."""
    if ph.is_exponential():
        return 1.0 / ph.exit[0]
    ones = np.ones(ph.n_phases)
    return float(ph.alpha @ np.linalg.solve(-ph.subgen, ones))


def ph_variance(ph: PhaseType) -> float:
    ones = np.ones(ph.n_phases)
    m1 = np.linalg.solve(-ph.subgen, ones)
    m2 = 2.0 * ph.alpha @ np.linalg.solve(-ph.subgen, m1)
    mean = ph.alpha @ m1
    return float(m2 - mean * mean)


def ph_from_config(cfg: dict) -> PhaseType:
    """Parse ``{"type": "exp", "mu": r}`` or ``{"type": "ph", "alpha": ..., "T": ...}``."""
    if not isinstance(cfg, dict) or "type" not in cfg:
        raise ValidationError("service must be an object with a 'type' key")
    kind = cfg["type"]
    if kind == "exp":
        return exp_ph(cfg.get("mu"))
    if kind == "ph":
        try:
            return ph_validate(cfg["alpha"], cfg["T"])
        except KeyError as exc:
            raise ValidationError(f"phase-type service missing key {exc}") from None
    raise ValidationError(f"unknown service type {kind!r}")


def _jump_tables(ph: PhaseType):
    # Row i: cumulative probabilities over (phase 0..k-1, absorb) when leaving phase i.
    rates = -np.diag(ph.subgen)
    off = ph.subgen + np.diag(rates)
    probs = np.hstack([off, ph.exit[:, None]]) / rates[:, None]
    cum = np.cumsum(probs, axis=1)
    cum[:, -1] = 1.0
    return rates, cum


def ph_sample(ph: PhaseType, rng=None, size=None):
    """Draw absorption times by simulating the underlying jump chain.

    Parameters
    ----------
    ph : PhaseType
    rng : RandomStream, numpy Generator, int or None
    size : int, optional
        Number of draws. ``None`` returns a single float.

    Returns
    -------
    float or np.ndarray
    """
    gen = as_generator(rng)
    n = 1 if size is None else int(size)
    if ph.is_exponential():
        out = gen.exponential(1.0 / ph.exit[0], size=n)
    else:
        out = _ph_sample_chain(ph, gen, n)
    return float(out[0]) if size is None else out


def _ph_sample_chain(ph: PhaseType, gen: np.random.Generator, n: int) -> np.ndarray:
    k = ph.n_phases
    rates, cum = _jump_tables(ph)
    alpha_cum = np.cumsum(ph.alpha)
    alpha_cum[-1] = 1.0
    state = np.searchsorted(alpha_cum, gen.random(n), side="right")
    total = np.zeros(n)
    alive = np.arange(n)
    while alive.size:
        s = state[alive]
        total[alive] += gen.exponential(size=alive.size) / rates[s]
        u = gen.random(alive.size)
        nxt = (u[:, None] >= cum[s]).sum(axis=1)
        keep = nxt < k
        state[alive[keep]] = nxt[keep]
        alive = alive[keep]
    return total


class RandomStream:
    """Reproducible random stream identified by ``(seed, stream_id)``.

    Backed by the counter-based Philox generator keyed through a
    :class:`numpy.random.SeedSequence`, so distinct stream ids give
    independent streams and the same pair always replays the same draws.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if not 0 <= int(seed) < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")
        if int(stream_id) < 0:
            raise ParameterError("stream_id must be non-negative")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.Philox(ss))

    def substream(self, k: int) -> np.random.Generator:
        """Independent generator for component ``k`` of this stream."""
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, int(k) + 1))
        return np.random.Generator(np.random.Philox(ss))

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id})"


def as_generator(rng) -> np.random.Generator:
    """Turn ``None``, an int seed, a RandomStream or a Generator into a Generator."""
    if isinstance(rng, RandomStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None or isinstance(rng, (int, np.integer)):
        return RandomStream(0 if rng is None else int(rng)).generator
    raise ParameterError(f"cannot build a random generator from {rng!r}")


def as_stream(rng) -> RandomStream | np.random.Generator:
    if isinstance(rng, (RandomStream, np.random.Generator)):
        return rng
    return RandomStream(0 if rng is None else int(rng))


def poisson_arrivals(rates, n: int, rng=None, start: float = 0.0):
    """First ``n`` epochs of independent merged Poisson streams.

    Returns
    -------
    times : np.ndarray
        Strictly increasing arrival epochs after ``start``.
    classes : np.ndarray
        1-based stream label of each arrival.
    """
    gen = as_generator(rng)
    rates = np.asarray([check_positive(r, "rate") for r in rates])
    total = rates.sum()
    times = start + np.cumsum(gen.exponential(1.0 / total, size=n))
    cum = np.cumsum(rates / total)
    cum[-1] = 1.0
    classes = np.searchsorted(cum, gen.random(n), side="right") + 1
    return times, classes
