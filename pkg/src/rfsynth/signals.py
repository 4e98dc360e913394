"""Pulse trains, logic waveforms and their generators.

A :class:`PulseTrain` is the universal signal carrier: an ordered array of
rising-edge timestamps plus a constant pulse width.  Only rising edges carry
information; falling edges exist so that a train can be rendered as a
:class:`LogicWaveform` when a level-sensitive block (the XOR detector) needs
one.

All randomness flows through :class:`SeededRng`, a thin owner of a numpy
``PCG64`` stream.  Waiting times are produced by inverse-CDF sampling,
``-tau * log(1 - R)`` with ``R`` in ``[0, 1)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientData, InvalidArgument

LOW = 0
HIGH = 1

PRNG_NAME = "numpy.PCG64"


class SeededRng:
    """Single-owner uniform stream keyed by a 64-bit seed.

    Identical seeds give bit-identical variate sequences on every platform
    numpy supports.  Child streams for parallel work come from :meth:`spawn`,
    which derives independent 64-bit seeds through ``SeedSequence``.
    """

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise InvalidArgument(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self._gen = np.random.Generator(np.random.PCG64(seed))

    def uniform(self, n: int) -> np.ndarray:
        """``n`` doubles in ``[0, 1)``."""
        return self._gen.random(n)

    def integers(self, low: int, high: int, size=None) -> np.ndarray:
        return self._gen.integers(low, high, size=size)

    def spawn(self, n: int) -> list["SeededRng"]:
        return [SeededRng(s) for s in child_seeds(self.seed, n)]

    def __repr__(self):
        return f"SeededRng(seed={self.seed})"


def child_seeds(seed: int, n: int) -> list[int]:
    """Derive ``n`` independent 64-bit seeds from a root seed."""
    children = np.random.SeedSequence(int(seed)).spawn(n)
    return [int(c.generate_state(1, np.uint64)[0]) for c in children]


def as_rng(rng) -> SeededRng:
    if isinstance(rng, SeededRng):
        return rng
    return SeededRng(rng)


@dataclass
class PulseTrain:
    """Rising-edge timestamps of a logic pulse train.

    Attributes
    ----------
    edges : ndarray
        Strictly increasing rising-edge times in seconds, all in ``[0, t_end]``.
    pulse_width : float
        Constant pulse duration in seconds.
    t_end : float
        Observation horizon in seconds.
    meta : dict
        Generator parameters, seed and diagnostics; serialized to the JSON
        sidecar on export.
    """

    edges: np.ndarray
    pulse_width: float
    t_end: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.edges = np.ascontiguousarray(self.edges, dtype=np.float64)
        if self.edges.ndim != 1:
            raise InvalidArgument("edges must be one-dimensional")
        if not self.pulse_width >= 0:
            raise InvalidArgument("pulse_width must be non-negative")
        if len(self.edges):
            if self.edges[0] < 0 or self.edges[-1] > self.t_end:
                raise InvalidArgument("edges must lie in [0, t_end]")
            if len(self.edges) > 1 and not np.all(np.diff(self.edges) > 0):
                raise InvalidArgument("edges must be strictly increasing")

    def __len__(self):
        return len(self.edges)

    @property
    def waits(self) -> np.ndarray:
        return np.diff(self.edges)

    def shifted(self, dt: float) -> "PulseTrain":
        return PulseTrain(self.edges + dt, self.pulse_width, self.t_end + dt, dict(self.meta))

    def to_waveform(self) -> "LogicWaveform":
        """Render as a level waveform; overlapping pulses merge into one HIGH run."""
        e = self.edges
        if self.pulse_width <= 0 and len(e):
            raise InvalidArgument("zero-width pulses have no level representation")
        if len(e) == 0:
            return LogicWaveform(np.empty(0), np.empty(0, dtype=np.int8), self.t_end)
        fall = np.minimum(e + self.pulse_width, self.t_end)
        # a pulse that overlaps the next one is absorbed into it
        keep_fall = np.append(fall[:-1] < e[1:], fall[-1] < self.t_end)
        keep_rise = np.insert(keep_fall[:-1], 0, True)
        rises = e[keep_rise]
        falls = fall[keep_fall]
        times = np.empty(len(rises) + len(falls))
        levels = np.empty(len(times), dtype=np.int8)
        times[0::2] = rises
        levels[0::2] = HIGH
        times[1::2] = falls
        levels[1::2] = LOW
        if rises[0] == 0.0:
            # already HIGH at the origin
            return LogicWaveform(times[1:], levels[1:], self.t_end, initial=HIGH)
        return LogicWaveform(times, levels, self.t_end)


@dataclass
class LogicWaveform:
    """Piecewise-constant two-level signal given by its transition list.

    ``times[i]`` is the instant the level becomes ``levels[i]``; the level
    before the first transition is ``initial``.  Levels alternate.
    """

    times: np.ndarray
    levels: np.ndarray
    t_end: float
    initial: int = LOW

    def __post_init__(self):
        self.times = np.ascontiguousarray(self.times, dtype=np.float64)
        self.levels = np.ascontiguousarray(self.levels, dtype=np.int8)
        if self.times.shape != self.levels.shape:
            raise InvalidArgument("times and levels differ in length")
        if len(self.times):
            if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
                raise InvalidArgument("transition times must be strictly increasing")
            if self.times[-1] > self.t_end or self.times[0] < 0:
                raise InvalidArgument("transitions must lie in [0, t_end]")
            if self.levels[0] == self.initial or np.any(self.levels[1:] == self.levels[:-1]):
                raise InvalidArgument("levels must alternate")

    def __len__(self):
        return len(self.times)

    def level_at(self, t) -> np.ndarray:
        """Level just after time ``t`` (right-continuous)."""
        if len(self.times) == 0:
            return np.full(np.shape(t), self.initial, dtype=np.int8)
        idx = np.searchsorted(self.times, t, side="right") - 1
        lv = np.where(idx >= 0, self.levels[np.maximum(idx, 0)], self.initial)
        return lv.astype(np.int8)

    def high_time(self, t0: float = 0.0, t1: float | None = None) -> float:
        """Exact HIGH time inside ``[t0, t1]``."""
        if t1 is None:
            t1 = self.t_end
        return float(high_time_in_windows(self, np.array([t0, t1]))[0])

    def duty(self) -> float:
        if self.t_end <= 0:
            raise InsufficientData("waveform has zero length")
        return self.high_time() / self.t_end

    def rising_edges(self) -> np.ndarray:
        return self.times[self.levels == HIGH]

    def rising_train(self, pulse_width: float | None = None) -> PulseTrain:
        """Rising edges as a :class:`PulseTrain`."""
        rises = self.rising_edges()
        if pulse_width is None:
            falls = self.times[self.levels == LOW]
            # width of the first complete pulse, or zero if none
            fi = np.searchsorted(falls, rises[0]) if len(rises) else 0
            pulse_width = float(falls[fi] - rises[0]) if len(rises) and fi < len(falls) else 0.0
        return PulseTrain(rises, pulse_width, self.t_end)

    def shifted(self, dt: float) -> "LogicWaveform":
        return LogicWaveform(self.times + dt, self.levels, self.t_end + dt, self.initial)


def high_time_in_windows(w: LogicWaveform, bounds: np.ndarray) -> np.ndarray:
    """HIGH time of ``w`` inside consecutive windows ``[bounds[i], bounds[i+1]]``.

    Exact: uses the cumulative HIGH time at every transition and interpolates
    linearly inside the constant-level stretch that contains each bound.
    """
    bounds = np.asarray(bounds, dtype=np.float64)
    t = w.times
    lv = w.levels.astype(np.float64)
    # cumulative HIGH time at each transition instant
    seg_start = np.concatenate(([0.0], t))
    seg_level = np.concatenate(([float(w.initial)], lv))
    seg_len = np.diff(np.concatenate((seg_start, [max(w.t_end, seg_start[-1])])))
    cum = np.concatenate(([0.0], np.cumsum(seg_len * seg_level)))
    idx = np.searchsorted(seg_start, bounds, side="right") - 1
    idx = np.clip(idx, 0, len(seg_start) - 1)
    at = cum[idx] + (bounds - seg_start[idx]) * seg_level[idx]
    return np.diff(at)


def _check_positive(name: str, value: float) -> float:
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise InvalidArgument(f"{name} must be positive and finite, got {value}")
    return value


def gen_poisson_rpt(rate: float, pulse_width: float, duration: float, rng,
                    dead_time: bool = False) -> PulseTrain:
    """Poissonian random pulse train on ``[0, duration]``.

    Waiting times are ``-log(1 - R) / rate`` for uniform ``R``.  With
    ``dead_time`` enabled, a wait shorter than ``pulse_width`` is stretched
    to ``pulse_width`` so pulses never overlap; the realized rate deviation
    is stored in ``meta['rate_deviation']``.
    """
    rate = _check_positive("rate", rate)
    duration = _check_positive("duration", duration)
    if not pulse_width >= 0:
        raise InvalidArgument("pulse_width must be non-negative")
    rng = as_rng(rng)
    if dead_time and pulse_width * rate > 0.01:
        warnings.warn(f"dead time {pulse_width:g} s is {pulse_width * rate:.3g} of the mean wait; "
                      "the realized rate will fall noticeably below the nominal one",
                      stacklevel=2)
    tau = 1.0 / rate
    chunks = []
    t = 0.0
    expected = rate * duration
    n = int(expected + 6.0 * math.sqrt(expected) + 16)
    while True:
        waits = -tau * np.log1p(-rng.uniform(n))
        if dead_time:
            np.maximum(waits, pulse_width, out=waits)
        times = t + np.cumsum(waits)
        chunks.append(times)
        t = times[-1]
        if t > duration:
            break
        n = max(1024, int(0.1 * expected))
    edges = np.concatenate(chunks)
    if dead_time and pulse_width > 0:
        _enforce_separation(edges, pulse_width)
    edges = edges[: np.searchsorted(edges, duration, side="right")]
    meta = {"generator": "poisson", "rate": rate, "pulse_width": pulse_width,
            "duration": duration, "dead_time": bool(dead_time), "seed": rng.seed,
            "prng": PRNG_NAME}
    if dead_time:
        # renewal rate with stretched waits: 1 / E[max(W, tp)]
        realized = 1.0 / (pulse_width + tau * math.exp(-pulse_width * rate))
        meta["rate_deviation"] = realized / rate - 1.0
    return PulseTrain(edges, pulse_width, duration, meta)


def _enforce_separation(edges: np.ndarray, gap: float) -> None:
    """Push edges that cumulative rounding left a few ulp short of ``gap``."""
    bad = np.flatnonzero(np.diff(edges) < gap)
    for i in bad:
        # cascades are possible but each step moves by a few ulp only
        j = i + 1
        while j < len(edges) and edges[j] - edges[j - 1] < gap:
            edges[j] = np.nextafter(edges[j - 1] + gap, np.inf)
            while edges[j] - edges[j - 1] < gap:
                edges[j] = np.nextafter(edges[j], np.inf)
            j += 1


def gen_periodic(freq: float, duty: float, phase: float, duration: float) -> PulseTrain:
    """Periodic pulse train with edges at ``phase + k / freq``.

    The horizon is half-open: an edge landing exactly on ``duration`` belongs
    to the next period and is dropped, so ``freq * duration`` whole periods
    give exactly that many edges.
    """
    freq = _check_positive("freq", freq)
    duration = _check_positive("duration", duration)
    if not 0.0 < duty < 1.0:
        raise InvalidArgument(f"duty must lie in (0, 1), got {duty}")
    period = 1.0 / freq
    if not 0.0 <= phase < period:
        raise InvalidArgument(f"phase must lie in [0, 1/freq), got {phase}")
    n = int(math.floor((duration - phase) * freq)) + 2
    # k / freq is correctly rounded, unlike k * period
    edges = phase + np.arange(n) / freq
    edges = edges[edges < duration]
    meta = {"generator": "periodic", "freq": freq, "duty": duty, "phase": phase,
            "duration": duration}
    return PulseTrain(edges, duty * period, duration, meta)


@dataclass
class FrequencyEstimate:
    value: float
    stderr: float
    n_waits: int


def empirical_frequency(train: PulseTrain) -> FrequencyEstimate:
    """Inverse mean waiting time, ``(N - 1) / (t_N - t_1)``.

    The standard error assumes independent waits: ``f * cv / sqrt(N - 1)``
    with ``cv`` the coefficient of variation of the waits.
    """
    e = train.edges
    if len(e) < 2:
        raise InsufficientData("need at least 2 edges to form a waiting time")
    n = len(e) - 1
    span = e[-1] - e[0]
    f = n / span
    if n > 1:
        waits = np.diff(e)
        cv = float(np.std(waits, ddof=1)) / (span / n)
    else:
        cv = 0.0
    return FrequencyEstimate(float(f), float(f * cv / math.sqrt(n)), n)


def divide_by_two(train) -> LogicWaveform:
    """Toggle flip-flop: the output level flips on every input rising edge.

    Accepts a :class:`PulseTrain` or a :class:`LogicWaveform` (whose rising
    edges are used).  Output rises on input edges 1, 3, 5, ... and falls on
    edges 2, 4, 6, ...
    """
    if isinstance(train, LogicWaveform):
        edges, t_end = train.rising_edges(), train.t_end
    else:
        edges, t_end = train.edges, train.t_end
    if len(edges) == 0:
        raise InsufficientData("divide_by_two needs a nonempty train")
    levels = np.empty(len(edges), dtype=np.int8)
    levels[0::2] = HIGH
    levels[1::2] = LOW
    return LogicWaveform(edges.copy(), levels, t_end)
