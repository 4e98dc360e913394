"""Closed-form duty-cycle transfer of the frequency ratio detector.

With a periodic signal of period ``T`` on the set input and a Poisson train
of mean wait ``tau`` on the reset input, the long-run duty cycle depends only
on ``rho = T / tau = f_R / f_P``::

    D(rho) = (1 - exp(-rho)) / rho

This module evaluates ``D``, the geometric series behind its denominator,
its inverse, and a Monte Carlo oracle that draws the HIGH durations and
period lengths directly instead of simulating edge streams.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidArgument
from .signals import as_rng

SERIES_THRESHOLD = 1e-6


def duty_transfer(rho):
    """Mean FRD duty cycle at frequency ratio ``rho = f_R / f_P``.

    Accepts a scalar or an array.  Below ``rho = 1e-6`` the three-term
    expansion ``1 - rho/2 + rho**2/6`` replaces the quotient.
    """
    r = np.asarray(rho, dtype=np.float64)
    if not np.all(r > 0) or not np.all(np.isfinite(r)):
        raise InvalidArgument("rho must be positive and finite")
    small = r < SERIES_THRESHOLD
    safe = np.where(small, 1.0, r)
    out = np.where(small, 1.0 - r / 2.0 + r * r / 6.0, -np.expm1(-safe) / safe)
    return float(out) if out.ndim == 0 else out


def duty_slope(rho: float) -> float:
    """``dD/drho``, used to turn duty offsets into frequency offsets."""
    rho = float(rho)
    if rho < 1e-4:
        return -0.5 + rho / 3.0
    return (rho * math.exp(-rho) + math.expm1(-rho)) / (rho * rho)


class SeriesComparison(NamedTuple):
    closed_form: float
    truncated_sum: float


def series_denominator(T_over_tau: float, truncation_K: int) -> SeriesComparison:
    """Mean integer part of ``W / T`` for exponential ``W``, two ways.

    ``closed_form`` is ``exp(-x) / (1 - exp(-x))``; ``truncated_sum`` adds
    ``k * P(k <= W/T < k+1)`` for ``k = 1..K``.
    """
    x = float(T_over_tau)
    if not x > 0:
        raise InvalidArgument(f"T/tau must be positive, got {x}")
    if truncation_K < 1:
        raise InvalidArgument("truncation_K must be at least 1")
    closed = math.exp(-x) / -math.expm1(-x)
    one_minus_q = -math.expm1(-x)
    # k * (e^{-kx} - e^{-(k+1)x}) = k * e^{-kx} * (1 - e^{-x})
    terms = [k * math.exp(-k * x) * one_minus_q for k in range(1, truncation_K + 1)]
    return SeriesComparison(closed, math.fsum(terms))


def _duty_scalar(rho: float) -> float:
    if rho < SERIES_THRESHOLD:
        return 1.0 - rho / 2.0 + rho * rho / 6.0
    return -math.expm1(-rho) / rho


def invert_duty(target: float) -> float:
    """The unique ``rho`` with ``duty_transfer(rho) == target``.

    Brent's method in ``log(rho)`` on the strictly decreasing transfer
    function, after doubling out a bracket from ``rho = 1``.
    """
    target = float(target)
    if not 0.0 < target < 1.0:
        raise InvalidArgument(f"target duty must lie in (0, 1), got {target}")
    lo, hi = 1.0, 1.0
    while _duty_scalar(lo) <= target:
        lo *= 0.5
        if lo < 1e-300:
            raise InvalidArgument(f"target duty {target} is indistinguishable from 1")
    while _duty_scalar(hi) >= target:
        hi *= 2.0
    x = brentq(lambda x: _duty_scalar(math.exp(x)) - target, math.log(lo), math.log(hi),
               xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=200)
    return math.exp(x)


class OracleEstimate(NamedTuple):
    duty: float
    stderr: float


def mc_duty_oracle(rho: float, n_periods: int, rng, n_boot: int = 500) -> OracleEstimate:
    """Monte Carlo duty from sampled HIGH durations and period lengths.

    With ``T = 1`` and ``tau = 1/rho``, each output period draws a HIGH time
    ``W = -tau * log(1 - R)`` and spans ``1 + floor(W)`` periods of the
    set signal.  The estimate is ``sum(W) / sum(1 + floor(W))``; the standard
    error is a bootstrap over batches of periods.
    """
    rho = float(rho)
    if not (rho > 0 and math.isfinite(rho)):
        raise InvalidArgument(f"rho must be positive and finite, got {rho}")
    n_periods = int(n_periods)
    if n_periods < 1000:
        raise InvalidArgument("n_periods must be at least 1000")
    rng = as_rng(rng)
    tau = 1.0 / rho
    n_batches = 1000
    batch = -(-n_periods // n_batches)
    n_batches = -(-n_periods // batch)
    high = np.zeros(n_batches)
    tot = np.zeros(n_batches)
    chunk = 1 << 20
    done = 0
    while done < n_periods:
        m = min(chunk, n_periods - done)
        w = -tau * np.log1p(-rng.uniform(m))
        ids = (done + np.arange(m)) // batch
        high += np.bincount(ids, weights=w, minlength=n_batches)
        tot += np.bincount(ids, weights=1.0 + np.floor(w), minlength=n_batches)
        done += m
    duty = high.sum() / tot.sum()
    pick = rng.integers(0, n_batches, size=(n_boot, n_batches))
    boot = high[pick].sum(axis=1) / tot[pick].sum(axis=1)
    return OracleEstimate(float(duty), float(np.std(boot, ddof=1)))
