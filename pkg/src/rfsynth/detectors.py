"""Event-driven detector models: the frequency ratio detector and two
classical phase detectors used as baselines.

Each detector is a fold over the time-merged edge streams of its inputs and
returns the exact transition list of its output.  Coincident edges (equal
timestamps) have probability zero for continuous inputs but are resolved
deterministically and counted:

* FRD: reset wins, so the output ends LOW.
* PFD: both flip-flops clock together and the reset clears them, so no
  net pulse is produced.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .analytic import duty_transfer
from .errors import InvalidArgument
from .signals import (HIGH, LOW, LogicWaveform, PulseTrain, as_rng, divide_by_two, gen_periodic,
                      gen_poisson_rpt)
from .stats import duty_cycle_estimate, net_duty_estimate


@dataclass
class DetectorRun:
    waveform: LogicWaveform
    duty: float
    n_coincident: int = 0


@dataclass
class PfdRun:
    up: LogicWaveform
    down: LogicWaveform
    duty_up: float
    duty_down: float
    n_coincident: int = 0

    @property
    def net_duty(self) -> float:
        return self.duty_up - self.duty_down


@numba.njit(cache=True)
def _frd_fold(set_e, rst_e, dead, out_t, out_l):
    i = 0
    j = 0
    n_set = set_e.shape[0]
    n_rst = rst_e.shape[0]
    q = 0
    n = 0
    n_coinc = 0
    t_last = -np.inf
    while i < n_set or j < n_rst:
        ts = set_e[i] if i < n_set else np.inf
        tr = rst_e[j] if j < n_rst else np.inf
        if ts == tr:
            t = ts
            i += 1
            j += 1
            n_coinc += 1
            target = 0
        elif ts < tr:
            t = ts
            i += 1
            target = 1
        else:
            t = tr
            j += 1
            target = 0
        if t < t_last + dead:
            continue
        if target != q:
            q = target
            out_t[n] = t
            out_l[n] = q
            n += 1
            t_last = t
    return n, n_coinc


@numba.njit(cache=True)
def _pfd_fold(ref_e, fb_e, up_t, up_l, dn_t, dn_l):
    i = 0
    j = 0
    n_ref = ref_e.shape[0]
    n_fb = fb_e.shape[0]
    up = 0
    dn = 0
    nu = 0
    nd = 0
    n_coinc = 0
    while i < n_ref or j < n_fb:
        tr = ref_e[i] if i < n_ref else np.inf
        tf = fb_e[j] if j < n_fb else np.inf
        if tr == tf:
            t = tr
            i += 1
            j += 1
            n_coinc += 1
            # both clocks fire, the AND resets both
            if up == 1:
                up = 0
                up_t[nu] = t
                up_l[nu] = 0
                nu += 1
            if dn == 1:
                dn = 0
                dn_t[nd] = t
                dn_l[nd] = 0
                nd += 1
        elif tr < tf:
            t = tr
            i += 1
            if dn == 1:
                dn = 0
                dn_t[nd] = t
                dn_l[nd] = 0
                nd += 1
            elif up == 0:
                up = 1
                up_t[nu] = t
                up_l[nu] = 1
                nu += 1
        else:
            t = tf
            j += 1
            if up == 1:
                up = 0
                up_t[nu] = t
                up_l[nu] = 0
                nu += 1
            elif dn == 0:
                dn = 1
                dn_t[nd] = t
                dn_l[nd] = 1
                nd += 1
    return nu, nd, n_coinc


def _horizon(a: float, b: float) -> float:
    if not np.isclose(a, b, rtol=1e-12, atol=0.0):
        raise InvalidArgument(f"inputs cover different horizons ({a} vs {b})")
    return min(a, b)


def frd_process(set_input: PulseTrain, reset_input: PulseTrain, dead_time: float = 0.0) -> DetectorRun:
    """Frequency ratio detector: an edge-triggered RS latch.

    A rising edge on ``set_input`` drives Q HIGH (ignored when already HIGH);
    a rising edge on ``reset_input`` drives Q LOW (ignored when already LOW).
    Q starts LOW at ``t = 0``.  With ``dead_time > 0``, edges arriving less
    than ``dead_time`` after an output transition are ignored, a behavioral
    stand-in for the recovery time of the two-flip-flop construction.
    """
    if dead_time < 0:
        raise InvalidArgument("dead_time must be non-negative")
    t_end = _horizon(set_input.t_end, reset_input.t_end)
    n_max = len(set_input) + len(reset_input)
    out_t = np.empty(n_max)
    out_l = np.empty(n_max, dtype=np.int8)
    n, n_coinc = _frd_fold(set_input.edges, reset_input.edges, float(dead_time), out_t, out_l)
    w = LogicWaveform(out_t[:n].copy(), out_l[:n].copy(), t_end)
    return DetectorRun(w, w.duty(), int(n_coinc))


def xor_pd_process(a: LogicWaveform, b: LogicWaveform) -> DetectorRun:
    """XOR phase detector: output HIGH exactly where the input levels differ."""
    t_end = _horizon(a.t_end, b.t_end)
    times = np.union1d(a.times, b.times)
    lv = a.level_at(times) ^ b.level_at(times)
    start = a.initial ^ b.initial
    prev = np.concatenate(([start], lv[:-1])).astype(np.int8)
    keep = lv != prev
    w = LogicWaveform(times[keep], lv[keep], t_end, initial=start)
    n_coinc = len(a.times) + len(b.times) - len(times)
    return DetectorRun(w, w.duty(), int(n_coinc))


def pfd_process(ref_edges: PulseTrain, fb_edges: PulseTrain) -> PfdRun:
    """Dual flip-flop phase frequency detector with instantaneous reset.

    A reference edge raises UP, a feedback edge raises DOWN, and the moment
    both would be HIGH the pair is cleared.  ``net_duty`` is
    ``duty_up - duty_down``.
    """
    t_end = _horizon(ref_edges.t_end, fb_edges.t_end)
    n_max = len(ref_edges) + len(fb_edges)
    up_t = np.empty(n_max)
    up_l = np.empty(n_max, dtype=np.int8)
    dn_t = np.empty(n_max)
    dn_l = np.empty(n_max, dtype=np.int8)
    nu, nd, n_coinc = _pfd_fold(ref_edges.edges, fb_edges.edges, up_t, up_l, dn_t, dn_l)
    up = LogicWaveform(up_t[:nu].copy(), up_l[:nu].copy(), t_end)
    down = LogicWaveform(dn_t[:nd].copy(), dn_l[:nd].copy(), t_end)
    return PfdRun(up, down, up.duty(), down.duty(), int(n_coinc))


@dataclass
class ResponsePoint:
    rho: float
    duty_measured: float
    duty_analytic: float
    stderr: float


def frd_response_curve(rho_values, periods_per_point: int, rng, swap: bool = False,
                       dead_time: float = 0.0) -> list[ResponsePoint]:
    """Measured FRD duty against ``rho = f_R / f_P`` with ``f_P = 1``.

    The periodic signal drives the set input and a Poisson train the reset
    input; ``swap=True`` exchanges them.  Each point uses its own child
    stream of ``rng`` so points are independent of evaluation order.
    """
    rho_values = [float(r) for r in rho_values]
    if any(not r > 0 for r in rho_values):
        raise InvalidArgument("every rho must be positive")
    if periods_per_point < 10_000:
        raise InvalidArgument("periods_per_point must be at least 1e4")
    rng = as_rng(rng)
    duration = float(periods_per_point)
    periodic = gen_periodic(1.0, 0.5, 0.0, duration)
    out = []
    for rho, child in zip(rho_values, rng.spawn(len(rho_values))):
        poisson = gen_poisson_rpt(rho, 0.0, duration, child)
        if swap:
            run = frd_process(poisson, periodic, dead_time)
        else:
            run = frd_process(periodic, poisson, dead_time)
        est = duty_cycle_estimate(run.waveform, 0.0)
        out.append(ResponsePoint(rho, est.duty, duty_transfer(rho), est.stderr))
    return out


@dataclass
class ComparePoint:
    f_r: float
    xor_duty: float
    xor_stderr: float
    pfd_net_duty: float
    pfd_stderr: float
    frd_duty: float
    frd_stderr: float


def detector_compare(f_p: float, f_r_values, periods: int, rng) -> list[ComparePoint]:
    """All three detectors against a periodic reference at ``f_p``.

    XOR sees a half-duty square wave against the divide-by-two of the random
    train; the PFD and FRD see the raw edge streams.
    """
    rng = as_rng(rng)
    duration = periods / f_p
    periodic = gen_periodic(f_p, 0.5, 0.0, duration)
    square = periodic.to_waveform()
    out = []
    for f_r, child in zip(f_r_values, rng.spawn(len(f_r_values))):
        rpt = gen_poisson_rpt(f_r, 0.0, duration, child)
        xr = xor_pd_process(square, divide_by_two(rpt))
        xe = duty_cycle_estimate(xr.waveform, 0.0)
        pr = pfd_process(periodic, rpt)
        pe = net_duty_estimate(pr.up, pr.down, 0.0)
        fr = frd_process(periodic, rpt)
        fe = duty_cycle_estimate(fr.waveform, 0.0)
        out.append(ComparePoint(float(f_r), xe.duty, xe.stderr, pe.duty, pe.stderr,
                                fe.duty, fe.stderr))
    return out


__all__ = ["DetectorRun", "PfdRun", "ResponsePoint", "ComparePoint", "frd_process",
           "xor_pd_process", "pfd_process", "frd_response_curve", "detector_compare",
           "HIGH", "LOW"]
