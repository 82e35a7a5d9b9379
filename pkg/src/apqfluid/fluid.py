"""Event-driven simulation of a tandem fluid queue with one down phase.

Both buffers are driven by a background CTMC ``phi`` on ``S+ u {down}``.
Buffer ``X`` moves at rate ``r_phi`` and is reflected at zero.  Buffer ``Y``
moves at ``c_hat_phi >= 0`` while ``X > 0`` and drains at ``c_check < 0``
while ``X = 0`` until it is empty too.  All levels are piecewise linear, so
each phase sojourn is resolved exactly from its boundary-hitting times.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from ._validation import InsufficientDataError, ParameterError, ValidationError, check_count
from .mpp import TOL, EmbeddedSampleSet
from .stochastics import as_generator

CLAMP = 1e-12


@dataclass(frozen=True, eq=False)
class TandemParams:
    """Phases ``0 .. k-1`` are up phases; phase ``k`` is the single down phase."""

    gen: np.ndarray
    r_up: np.ndarray
    r_down: float
    c_hat_up: np.ndarray
    c_hat_down: float
    c_check_down: float

    def __post_init__(self):
        gen = np.atleast_2d(np.asarray(self.gen, dtype=float))
        k = gen.shape[0] - 1
        r_up = np.atleast_1d(np.asarray(self.r_up, dtype=float))
        c_up = np.atleast_1d(np.asarray(self.c_hat_up, dtype=float))
        if gen.shape != (k + 1, k + 1) or k < 1:
            raise ValidationError(f"generator must be square with >= 2 phases, got {gen.shape}")
        if r_up.shape != (k,) or c_up.shape != (k,):
            raise ValidationError("r_up and c_hat_up need one entry per up phase")
        off = gen - np.diag(np.diag(gen))
        if np.any(off < 0):
            raise ValidationError("generator off-diagonals must be non-negative")
        if np.any(np.abs(gen.sum(axis=1)) > 1e-12 * np.abs(np.diag(gen)).max()):
            raise ValidationError("generator rows must sum to zero")
        if np.any(np.diag(gen) >= 0):
            raise ValidationError("every phase needs a positive exit rate")
        if not _irreducible(off > 0):
            raise ValidationError("generator is not irreducible")
        if np.any(r_up <= 0) or not self.r_down < 0:
            raise ParameterError("need r_up > 0 and r_down < 0")
        if np.any(c_up < 0) or self.c_hat_down < 0:
            raise ParameterError("c_hat rates must be >= 0")
        if not self.c_check_down < 0:
            raise ParameterError("c_check_down must be < 0")
        for name, arr in (("gen", gen), ("r_up", r_up), ("c_hat_up", c_up)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for name in ("r_down", "c_hat_down", "c_check_down"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def n_up(self) -> int:
        return self.r_up.shape[0]

    @property
    def phase_down(self) -> int:
        return self.n_up

    @property
    def phases_up(self) -> range:
        return range(self.n_up)

    def to_dict(self) -> dict:
        return {
            "gen": self.gen.tolist(),
            "r_up": self.r_up.tolist(),
            "r_down": self.r_down,
            "c_hat_up": self.c_hat_up.tolist(),
            "c_hat_down": self.c_hat_down,
            "c_check_down": self.c_check_down,
        }

    def __eq__(self, other):
        if not isinstance(other, TandemParams):
            return NotImplemented
        return (
            np.array_equal(self.gen, other.gen)
            and np.array_equal(self.r_up, other.r_up)
            and np.array_equal(self.c_hat_up, other.c_hat_up)
            and self.r_down == other.r_down
            and self.c_hat_down == other.c_hat_down
            and self.c_check_down == other.c_check_down
        )

    __hash__ = None


def _irreducible(adj: np.ndarray) -> bool:
    n = adj.shape[0]
    reach = adj | np.eye(n, dtype=bool)
    for _ in range(n):
        reach = reach | ((reach.astype(int) @ reach.astype(int)) > 0)
    return bool(reach.all())


@dataclass(frozen=True, eq=False)
class FluidPath:
    """Piecewise-linear ``(phi, X, Y)`` path with per-sojourn summaries.

    ``pieces`` columns: t_start, t_end, phase, x_start, y_start, x_slope, y_slope.
    ``down_cycles`` fields (one row per completed down sojourn): start_x,
    start_y, dx, dy, x_hit_zero, y_hit_zero, end_x, end_y, duration, dx_free,
    dy_free.  ``dx_free`` is ``|r_down|`` times the sojourn length, i.e. the
    drop ``X`` would make without the floor; ``dy_free`` is the same for
    ``Y`` over the part of the sojourn spent at ``X = 0`` (nan if ``X`` never
    hit zero).  ``up_runs`` fields: duration, dx, dy over each maximal run of
    up phases.  ``sojourns`` has the phase and length of every phase visit.
    """

    params: TandemParams
    pieces: np.ndarray
    down_cycles: dict
    up_runs: dict
    sojourns: dict

    @property
    def n_down_cycles(self) -> int:
        return self.down_cycles["dx"].shape[0]

    def cycles_csv(self, header: str | None = None) -> str:
        dc = self.down_cycles
        buf = io.StringIO()
        if header:
            buf.write(header.rstrip("\n") + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cycle", "dx", "dy", "x_hit_zero", "y_hit_zero", "end_x", "end_y", "duration"])
        for i in range(self.n_down_cycles):
            w.writerow([
                i + 1,
                repr(float(dc["dx"][i])),
                repr(float(dc["dy"][i])),
                int(dc["x_hit_zero"][i]),
                int(dc["y_hit_zero"][i]),
                repr(float(dc["end_x"][i])),
                repr(float(dc["end_y"][i])),
                repr(float(dc["duration"][i])),
            ])
        return buf.getvalue()


class _Draws:
    """Chunked unit-exponential and uniform draws."""

    def __init__(self, gen: np.random.Generator, chunk: int = 16384):
        self.gen = gen
        self.chunk = chunk
        self._e: list = []
        self._u: list = []

    def exp(self) -> float:
        if not self._e:
            self._e = self.gen.standard_exponential(self.chunk).tolist()
            self._e.reverse()
        return self._e.pop()

    def unif(self) -> float:
        if not self._u:
            self._u = self.gen.random(self.chunk).tolist()
            self._u.reverse()
        return self._u.pop()


def simulate_tandem(
    params: TandemParams,
    n_down_cycles: int,
    rng=None,
    *,
    initial: tuple | None = None,
) -> FluidPath:
    """Simulate until ``n_down_cycles`` down-phase sojourns have completed.

    Parameters
    ----------
    params : TandemParams
    n_down_cycles : int
    rng : RandomStream, Generator, int or None
    initial : (phase, x, y), optional
        Defaults to the regenerative state: an up phase drawn from the
        down phase's transition row, at ``x = y = 0``.
    """
    n_down_cycles = check_count(n_down_cycles, "n_down_cycles")
    draws = _Draws(as_generator(rng))
    gen = params.gen
    k = params.n_up
    down = k
    rates = -np.diag(gen)
    jump = (gen + np.diag(rates)) / rates[:, None]
    cum = np.cumsum(jump, axis=1)
    cum[:, -1] = 1.0
    cum_rows = [row.tolist() for row in cum]
    hold = (1.0 / rates).tolist()
    r_up = params.r_up.tolist()
    c_up = params.c_hat_up.tolist()
    rx = -params.r_down
    ch = params.c_hat_down
    cy = -params.c_check_down

    def next_phase(p):
        u = draws.unif()
        row = cum_rows[p]
        j = 0
        while u >= row[j]:
            j += 1
        return j

    if initial is None:
        phase, x, y = next_phase(down), 0.0, 0.0
    else:
        phase, x, y = int(initial[0]), float(initial[1]), float(initial[2])
        if not 0 <= phase <= k or x < 0 or y < 0:
            raise ParameterError(f"invalid initial state {initial!r}")

    pieces: list = []
    add = pieces.append
    cyc = {name: [] for name in ("start_x", "start_y", "dx", "dy", "x_hit_zero", "y_hit_zero",
                                 "end_x", "end_y", "duration", "dx_free", "dy_free")}
    runs = {"duration": [], "dx": [], "dy": []}
    soj_phase: list = []
    soj_len: list = []
    t = 0.0
    run_t = run_x = run_y = None
    done = 0
    while done < n_down_cycles:
        s = draws.exp() * hold[phase]
        soj_phase.append(phase)
        soj_len.append(s)
        if phase < down:
            if run_t is None:
                run_t, run_x, run_y = t, x, y
            ru, cu = r_up[phase], c_up[phase]
            add((t, t + s, phase, x, y, ru, cu))
            x += ru * s
            y += cu * s
        else:
            if run_t is not None:
                runs["duration"].append(t - run_t)
                runs["dx"].append(x - run_x)
                runs["dy"].append(y - run_y)
                run_t = None
            x0, y0 = x, y
            x_hit = y_hit = False
            dy_free = np.nan
            rem = s
            tc = t
            if x > 0:
                tau = x / rx
                if tau > s + CLAMP:
                    add((tc, tc + s, phase, x, y, -rx, ch))
                    x -= rx * s
                    y += ch * s
                    rem = 0.0
                else:
                    tau = min(tau, s)
                    add((tc, tc + tau, phase, x, y, -rx, ch))
                    y += ch * tau
                    x = 0.0
                    x_hit = True
                    tc += tau
                    rem = s - tau
                    if rem <= CLAMP:
                        rem = 0.0
            else:
                x_hit = True
            if x_hit:
                dy_free = cy * rem
                if rem > 0:
                    if y > 0:
                        tau_y = y / cy
                        if tau_y > rem + CLAMP:
                            add((tc, tc + rem, phase, 0.0, y, 0.0, -cy))
                            y -= cy * rem
                        else:
                            tau_y = min(tau_y, rem)
                            add((tc, tc + tau_y, phase, 0.0, y, 0.0, -cy))
                            y = 0.0
                            y_hit = True
                            if rem - tau_y > CLAMP:
                                add((tc + tau_y, t + s, phase, 0.0, 0.0, 0.0, 0.0))
                    else:
                        y_hit = True
                        add((tc, t + s, phase, 0.0, 0.0, 0.0, 0.0))
                elif y <= 0:
                    y_hit = True
            last = pieces[-1]
            if last[1] != t + s:  # absorb rounding so pieces tile time exactly
                pieces[-1] = (last[0], t + s) + last[2:]
            cyc["start_x"].append(x0)
            cyc["start_y"].append(y0)
            cyc["dx"].append(x0 - x)
            cyc["dy"].append(y0 - y)
            cyc["x_hit_zero"].append(x_hit)
            cyc["y_hit_zero"].append(y_hit)
            cyc["end_x"].append(x)
            cyc["end_y"].append(y)
            cyc["duration"].append(s)
            cyc["dx_free"].append(rx * s)
            cyc["dy_free"].append(dy_free)
            done += 1
        t += s
        phase = next_phase(phase)

    down_cycles = {name: np.asarray(v, dtype=bool if name.endswith("zero") else float)
                   for name, v in cyc.items()}
    return FluidPath(
        params=params,
        pieces=np.asarray(pieces, dtype=float).reshape(-1, 7),
        down_cycles=down_cycles,
        up_runs={name: np.asarray(v, dtype=float) for name, v in runs.items()},
        sojourns={"phase": np.asarray(soj_phase, dtype=np.int64),
                  "duration": np.asarray(soj_len, dtype=float)},
    )


def down_phase_decrements(path: FluidPath, burn_in: int = 0) -> dict:
    """Per down sojourn: ``dx``, ``dy`` and the two boundary flags."""
    if path.n_down_cycles <= burn_in:
        raise InsufficientDataError("no completed down cycles after burn-in")
    dc = path.down_cycles
    s = slice(burn_in, None)
    return {name: dc[name][s] for name in ("dx", "dy", "x_hit_zero", "y_hit_zero",
                                           "dx_free", "dy_free", "start_x", "start_y")}


def embedded_at_down_to_up(path: FluidPath, burn_in: int | None = None,
                           ratio: float | None = None, tol: float = TOL) -> EmbeddedSampleSet:
    """``(X, Y)`` at every down-to-up transition after burn-in.

    ``(X, Y)`` plays the role of ``(m1 - m2, m2)``.  ``ratio`` is ``b1 / b2``
    of the matched queue, used only to flag points outside the wedge.
    """
    n = path.n_down_cycles
    if burn_in is None:
        burn_in = max(1000, n // 100)
    burn_in = check_count(burn_in, "burn_in", 0)
    if n <= burn_in:
        raise InsufficientDataError(f"path has {n} down cycles, burn-in needs more than {burn_in}")
    dc = path.down_cycles
    return EmbeddedSampleSet.from_tilde(dc["end_x"][burn_in:], dc["end_y"][burn_in:], ratio, tol)


def fluid_category(decrements: dict) -> np.ndarray:
    """1: X stayed positive; 2: X drained, Y survived; 3: Y drained too."""
    cat = np.ones(decrements["dx"].shape[0], dtype=np.int8)
    cat[decrements["x_hit_zero"]] = 2
    cat[decrements["y_hit_zero"]] = 3
    return cat
