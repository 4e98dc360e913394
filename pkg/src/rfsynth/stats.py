"""Estimators for duty cycles, waiting-time distributions, correlograms and
settling times."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import stats as sps

from .errors import InsufficientData, InvalidArgument
from .signals import HIGH, LogicWaveform, PulseTrain, high_time_in_windows

BLOCK_PERIODS = 50
MAX_BLOCKS = 4000


class DutyEstimate(NamedTuple):
    duty: float
    stderr: float


def _block_bounds(waves, discard: float, block_periods: int) -> np.ndarray:
    t0, t1 = discard, waves[0].t_end
    if not t1 > t0:
        raise InsufficientData(f"window ({t0}, {t1}] is empty")
    n_rises = sum(int(np.count_nonzero((w.times > t0) & (w.levels == HIGH))) for w in waves)
    if n_rises == 0:
        return np.array([t0, t1])
    mean_period = (t1 - t0) / n_rises * len(waves)
    n_blocks = int((t1 - t0) // (block_periods * mean_period))
    n_blocks = min(n_blocks, MAX_BLOCKS)
    if n_blocks < 5:
        raise InsufficientData(
            f"window holds {n_rises} periods, too few for {block_periods}-period blocks")
    return np.linspace(t0, t1, n_blocks + 1)


def _bootstrap_sd(values: np.ndarray, n_boot: int, seed: int) -> float:
    if len(values) < 2:
        return 0.0
    gen = np.random.Generator(np.random.PCG64(seed))
    pick = gen.integers(0, len(values), size=(n_boot, len(values)))
    return float(np.std(values[pick].mean(axis=1), ddof=1))


def duty_cycle_estimate(w: LogicWaveform, discard: float = 0.0, block_periods: int = BLOCK_PERIODS,
                        n_boot: int = 400, seed: int = 0) -> DutyEstimate:
    """Exact HIGH fraction of ``w`` over ``(discard, t_end]``.

    The standard error comes from a block bootstrap over equal-length blocks
    of at least ``block_periods`` mean output periods, so that the
    dependence between the HIGH and LOW parts of a period stays inside one
    block.  A waveform without rising edges in the window has zero error.
    """
    bounds = _block_bounds([w], discard, block_periods)
    duty = w.high_time(discard, w.t_end) / (w.t_end - discard)
    if len(bounds) == 2:
        return DutyEstimate(duty, 0.0)
    blocks = high_time_in_windows(w, bounds) / np.diff(bounds)
    return DutyEstimate(duty, _bootstrap_sd(blocks, n_boot, seed))


def net_duty_estimate(up: LogicWaveform, down: LogicWaveform, discard: float = 0.0,
                      block_periods: int = BLOCK_PERIODS, n_boot: int = 400,
                      seed: int = 0) -> DutyEstimate:
    """``duty(up) - duty(down)`` with a joint block-bootstrap error."""
    bounds = _block_bounds([up, down], discard, block_periods)
    span = up.t_end - discard
    net = (up.high_time(discard, up.t_end) - down.high_time(discard, down.t_end)) / span
    if len(bounds) == 2:
        return DutyEstimate(net, 0.0)
    blocks = (high_time_in_windows(up, bounds) - high_time_in_windows(down, bounds)) / np.diff(bounds)
    return DutyEstimate(net, _bootstrap_sd(blocks, n_boot, seed))


class WaitingTimeTest(NamedTuple):
    mean: float
    ks_stat: float
    ks_pass_1pct: bool


def waiting_time_test(train: PulseTrain, min_waits: int = 1000) -> WaitingTimeTest:
    """Kolmogorov-Smirnov test of the waits against Exp(sample mean).

    The statistic is compared with the two-sided 1% critical value for the
    sample size.  Estimating the mean from the same data makes the test
    conservative.
    """
    waits = np.diff(train.edges)
    if len(waits) < min_waits:
        raise InsufficientData(f"need at least {min_waits} waits, got {len(waits)}")
    mean = float(waits.mean())
    stat = float(sps.kstest(waits, "expon", args=(0.0, mean)).statistic)
    crit = float(sps.kstwo.ppf(0.99, len(waits)))
    return WaitingTimeTest(mean, stat, stat < crit)


@dataclass
class AutocorrResult:
    """Sample autocorrelation of a waiting-time sequence.

    ``stderr[k]`` follows Bartlett's formula from the lower-lag estimates;
    ``rescaled_t[k] = k * mean_wait``.
    """

    lags: np.ndarray
    a_k: np.ndarray
    n_waits: int
    mean_wait: float
    rescaled_t: np.ndarray
    stderr: np.ndarray
    estimator: str = "biased"

    def band(self, z: float = 3.0):
        return self.a_k - z * self.stderr, self.a_k + z * self.stderr


def autocorrelation(train: PulseTrain, max_lag: int) -> AutocorrResult:
    """Biased (divide-by-N) autocorrelation of the waits at lags 0..max_lag."""
    if max_lag < 0:
        raise InvalidArgument("max_lag must be non-negative")
    x = np.diff(train.edges)
    n = len(x)
    if n < max(2, 10 * max_lag):
        raise InsufficientData(f"need at least {10 * max_lag} waits for max_lag={max_lag}, got {n}")
    mean = float(x.mean())
    a = _acf(x - mean, max_lag)
    lags = np.arange(max_lag + 1)
    # Bartlett: var(a_k) ~ (1 + 2 * sum_{j<k} a_j^2) / N
    acc = np.concatenate(([0.0, 0.0], np.cumsum(a[1:-1] ** 2)))[: max_lag + 1]
    se = np.sqrt((1.0 + 2.0 * acc) / n)
    se[0] = 0.0
    return AutocorrResult(lags, a, n, mean, lags * mean, se)


def _acf(d: np.ndarray, max_lag: int) -> np.ndarray:
    n = len(d)
    m = 1 << int(math.ceil(math.log2(2 * n)))
    spec = np.fft.rfft(d, m)
    raw = np.fft.irfft(spec * np.conj(spec), m)[: max_lag + 1]
    out = raw / raw[0] if raw[0] > 0 else np.zeros(max_lag + 1)
    out[0] = 1.0
    return np.clip(out, -1.0, 1.0)


class Settle(NamedTuple):
    time: float
    saturated: bool


def settling_time(series, target: float, band: float) -> Settle:
    """Earliest sample time after which ``value`` stays inside
    ``target * (1 +/- band)`` through the end of the series.

    ``series`` is a sequence of ``(t, value)`` pairs or a ``(2, N)`` array.
    A series that never settles returns its last time with ``saturated``.
    """
    arr = np.asarray(series, dtype=np.float64)
    if arr.ndim == 2 and arr.shape[1] == 2 and arr.shape[0] != 2:
        arr = arr.T
    if arr.size == 0:
        raise InsufficientData("empty series")
    if not band > 0:
        raise InvalidArgument("band must be positive")
    t, v = arr[0], arr[1]
    lo, hi = sorted((target * (1 - band), target * (1 + band)))
    inside = (v >= lo) & (v <= hi)
    if not inside[-1]:
        return Settle(float(t[-1]), True)
    outside = np.flatnonzero(~inside)
    first = 0 if len(outside) == 0 else outside[-1] + 1
    return Settle(float(t[first]), False)


class SlopeFit(NamedTuple):
    slope: float
    stderr: float
    intercept: float


def weighted_slope(x, y, sigma) -> SlopeFit:
    """Weighted least-squares line through ``(x, y)`` with errors ``sigma``."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    w = 1.0 / np.asarray(sigma, float) ** 2
    sw, sx, sy = w.sum(), (w * x).sum(), (w * y).sum()
    sxx, sxy = (w * x * x).sum(), (w * x * y).sum()
    det = sw * sxx - sx * sx
    slope = (sw * sxy - sx * sy) / det
    intercept = (sxx * sy - sx * sxy) / det
    return SlopeFit(float(slope), float(math.sqrt(sw / det)), float(intercept))


def origin_fit_r2(x, y) -> tuple[float, float]:
    """Slope and R^2 of a least-squares line forced through the origin."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    slope = float((x * y).sum() / (x * x).sum())
    resid = y - slope * x
    r2 = 1.0 - float((resid ** 2).sum()) / float((y ** 2).sum())
    return slope, r2
