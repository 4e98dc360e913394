"""Closed-loop simulation of a frequency-locked random pulse source.

Signal chain::

    LO (periodic, f_P) --set--> FRD --Q--> RC low-pass --> PI amplifier --> VCRS
                                 ^                                          |
                                 +------------------reset-------------------+

The FRD output is piecewise constant between events, so the RC filter is
advanced in closed form.  The amplifier is a PI stage working on
``ln(v_ctrl)`` whose integral time equals the filter time constant; with
that pole-zero placement ``ln(v_ctrl)`` moves linearly in time between
events, the VCRS rate ``kv * v_ctrl`` is monotone over every inter-event
interval, and the next VCRS edge is drawn exactly by thinning against the
larger endpoint rate.  Loop gain is the same at every operating point
because the FRD sensitivity per unit of ``ln f_R`` depends only on the
frequency ratio.

Two non-idealities are modeled:

* edge loss: every FRD output transition removes ``edge_loss_delta``
  volt-seconds from the filter input, so the measured duty falls short in
  proportion to the transition rate and the loop locks low;
* compensation: ``comp_gain * rate_estimate`` volts are subtracted from the
  set point, the behavioral equivalent of injecting a current proportional
  to the output rate at the amplifier's reference input.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .analytic import duty_slope, duty_transfer
from .errors import InvalidArgument
from .signals import PulseTrain, SeededRng, child_seeds
from .stats import Settle, settling_time

V_LOGIC = 1.0
R1_OHMS = 100e3
C1_PRESETS_UF = (110.0, 47.0, 22.5, 10.5, 5.1)
NOMINAL_EDGE_ERROR = -0.0088
NOMINAL_EDGE_FREQ = 2e7


@dataclass
class LoopConfig:
    """Parameters of one closed-loop run.

    ``ref_duty`` defaults to ``duty_transfer(lock_ratio)``; ``v_init``
    defaults to half the voltage that would produce the lock rate.
    """

    f_P: float
    lock_ratio: float = 1.0
    kv: float = 1e6
    v_min: float = 1e-4
    v_max: float = 30.0
    filter_tau: float = 1.0
    amp_gain: float = 45.0
    ref_duty: float | None = None
    edge_loss_delta: float = 0.0
    comp_gain: float = 0.0
    duration: float = 100.0
    seed: int = 0
    v_init: float | None = None

    def __post_init__(self):
        for name in ("f_P", "lock_ratio", "filter_tau", "duration"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
                raise InvalidArgument(f"{name} must be positive and finite, got {v!r}")
        if not self.kv >= 0:
            raise InvalidArgument(f"kv must be non-negative, got {self.kv!r}")
        if not 0 < self.v_min < self.v_max:
            raise InvalidArgument(f"need 0 < v_min < v_max, got v_min={self.v_min!r}, v_max={self.v_max!r}")
        if not self.amp_gain >= 0:
            raise InvalidArgument(f"amp_gain must be non-negative, got {self.amp_gain!r}")
        if self.edge_loss_delta < 0:
            raise InvalidArgument(f"edge_loss_delta must be non-negative, got {self.edge_loss_delta!r}")
        if self.ref_duty is None:
            self.ref_duty = duty_transfer(self.lock_ratio)
        if not 0 < self.ref_duty < 1:
            raise InvalidArgument(f"ref_duty must lie in (0, 1), got {self.ref_duty!r}")
        if self.v_init is not None and not self.v_min <= self.v_init <= self.v_max:
            raise InvalidArgument(f"v_init must lie in [v_min, v_max], got {self.v_init!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidArgument(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")

    @property
    def lock_voltage(self) -> float:
        return self.lock_ratio * self.f_P / self.kv if self.kv > 0 else self.v_max

    def initial_voltage(self) -> float:
        if self.v_init is not None:
            return self.v_init
        return min(max(0.5 * self.lock_voltage, self.v_min), self.v_max)

    def replace(self, **changes) -> "LoopConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def scaled_to(self, f_P: float) -> "LoopConfig":
        """Same loop in units of LO periods, moved to a new LO frequency.

        Time constants and duration scale with ``1 / f_P``; ``v_init`` scales
        with ``f_P``.  Edge loss and compensation are absolute and are left
        untouched, which is what makes their effect grow with frequency.
        """
        s = self.f_P / f_P
        v_init = None if self.v_init is None else self.v_init / s
        return self.replace(f_P=f_P, filter_tau=self.filter_tau * s, duration=self.duration * s,
                            v_init=v_init)


@dataclass
class LoopTrace:
    """Result of :func:`simulate_fll`.

    ``samples`` has fields ``t, v_filter, v_ctrl, rate``; ``windowed_freq``
    has fields ``t, freq`` (event count over the trailing window).  The
    steady-state summary covers ``(discard, duration]``.
    """

    config: LoopConfig
    samples: np.ndarray
    windowed_freq: np.ndarray
    output: PulseTrain | None
    discard: float
    n_events: int
    f_R: float
    frd_duty: float
    n_transitions: int
    clamp_fraction: float
    diverged: bool
    meta: dict = field(default_factory=dict)

    @property
    def rel_error(self) -> float:
        target = self.config.lock_ratio * self.config.f_P
        return self.f_R / target - 1.0

    def steady_output(self) -> PulseTrain:
        """Output edges after the settling discard."""
        if self.output is None:
            raise InvalidArgument("trace was run with keep_edges=False")
        e = self.output.edges
        return PulseTrain(e[e > self.discard], 0.0, self.output.t_end, dict(self.output.meta))


# float state slots
_T, _VF, _U, _RHAT, _HIGH, _TFIRST, _TLAST, _CLAMP, _TLO = range(9)
# int state slots
_Q, _LOK, _SEG, _SAMP, _NAFTER, _NEDGE, _NTRANS, _POS = range(8)


@numba.njit(cache=True, inline="always")
def _advance(t0, vf0, u0, t_new, x, s, umin, umax, tau_f):
    """Closed-form state at ``t_new`` with no event inside ``(t0, t_new]``.

    Returns ``(vf, u, clamp_time)``; ``u`` moves linearly and is held at the
    clamp it runs into.
    """
    h = t_new - t0
    vf = x + (vf0 - x) * math.exp(-h / tau_f)
    u1 = u0 + s * h
    clamp = 0.0
    if s > 0.0 and u1 > umax:
        clamp = h - (umax - u0) / s
        u1 = umax
    elif s < 0.0 and u1 < umin:
        clamp = h - (umin - u0) / s
        u1 = umin
    elif s == 0.0 and (u0 >= umax or u0 <= umin):
        clamp = h
    return vf, u1, clamp


@numba.njit(cache=True)
def _fll_kernel(fs, is_, p, seg_t, seg_f, seg_phi, unif, edges, bins,
                samp_t, samp_vf, samp_v, samp_rate):
    """Run until done (0), uniforms exhausted (1) or edge buffer full (2).

    All state lives in ``fs``/``is_`` between calls so the run can resume
    with a fresh uniform buffer without changing the variate sequence.
    """
    kv, umin, umax, tau_f, kp, ref = p[0], p[1], p[2], p[3], p[4], p[5]
    v_logic, t_end, delta, comp, t_discard, dt = p[6], p[7], p[8], p[9], p[10], p[11]
    global_bound = p[12] > 0.0
    keep = edges.shape[0] > 0
    n_unif = unif.shape[0]
    n_bins = bins.shape[0]
    n_samp = samp_t.shape[0]
    n_seg = seg_t.shape[0]
    lam_max = kv * math.exp(umax)
    du_edge = kp * delta / tau_f
    dvf_edge = delta / tau_f

    t, vf, u, rhat = fs[_T], fs[_VF], fs[_U], fs[_RHAT]
    high, tfirst, tlast, clamp, tlo = fs[_HIGH], fs[_TFIRST], fs[_TLAST], fs[_CLAMP], fs[_TLO]
    q, lok, seg, sj = is_[_Q], is_[_LOK], is_[_SEG], is_[_SAMP]
    nafter, nedge, ntrans, pos = is_[_NAFTER], is_[_NEDGE], is_[_NTRANS], is_[_POS]
    status = 0
    while True:
        if t >= t_end:
            status = 0
            break
        if pos + 2 > n_unif:
            status = 1
            break
        if keep and nedge >= edges.shape[0]:
            status = 2
            break
        x = v_logic * q
        s = kp / tau_f * (x - (ref * v_logic - comp * rhat))
        t_stop = min(tlo, t_end)
        if global_bound:
            lam_b = lam_max
        else:
            u_stop = min(max(u + s * (t_stop - t), umin), umax)
            lam_b = kv * math.exp(max(u, u_stop))
        if lam_b > 0.0:
            tc = t - math.log1p(-unif[pos]) / lam_b
            pos += 1
        else:
            tc = np.inf
        t_next = min(tc, t_stop)
        # trace samples inside (t, t_next]
        while sj < n_samp and sj * dt <= t_next:
            ts = sj * dt
            svf, su, _ = _advance(t, vf, u, ts, x, s, umin, umax, tau_f)
            samp_t[sj] = ts
            samp_vf[sj] = svf
            samp_v[sj] = math.exp(su)
            samp_rate[sj] = kv * math.exp(su)
            sj += 1
        vf, u, dclamp = _advance(t, vf, u, t_next, x, s, umin, umax, tau_f)
        clamp += dclamp
        if q == 1 and t_next > t_discard:
            high += t_next - max(t, t_discard)
        t = t_next
        if tc >= t_stop:
            if t_stop < tlo:
                continue
            # LO rising edge: set
            if q == 0:
                q = 1
                if t > t_discard:
                    ntrans += 1
                if delta > 0.0:
                    vf -= dvf_edge
                    u = max(u - du_edge, umin)
            if comp != 0.0:
                r_new = kv * math.exp(u)
                u = min(max(u + kp * comp * (r_new - rhat), umin), umax)
                rhat = r_new
            lok += 1
            while seg + 1 < n_seg and lok >= seg_phi[seg + 1]:
                seg += 1
            tlo = seg_t[seg] + (lok - seg_phi[seg]) / seg_f[seg]
            continue
        lam_c = kv * math.exp(u)
        accept = unif[pos] * lam_b < lam_c
        pos += 1
        if not accept:
            continue
        # VCRS edge: reset
        b = int(t / dt)
        if b < n_bins:
            bins[b] += 1
        if keep:
            edges[nedge] = t
        nedge += 1
        if t > t_discard:
            if nafter == 0:
                tfirst = t
            tlast = t
            nafter += 1
        if q == 1:
            q = 0
            if t > t_discard:
                ntrans += 1
            if delta > 0.0:
                vf -= dvf_edge
                u = max(u - du_edge, umin)
        if comp != 0.0:
            # a set-point step reaches ln(v_ctrl) through the proportional path
            r_new = lam_c if delta == 0.0 else kv * math.exp(u)
            u = min(max(u + kp * comp * (r_new - rhat), umin), umax)
            rhat = r_new

    if status == 0:
        while sj < n_samp and sj * dt <= t_end + 1e-12 * t_end:
            ts = sj * dt
            samp_t[sj] = ts
            samp_vf[sj] = vf
            samp_v[sj] = math.exp(u)
            samp_rate[sj] = kv * math.exp(u)
            sj += 1
    fs[_T], fs[_VF], fs[_U], fs[_RHAT] = t, vf, u, rhat
    fs[_HIGH], fs[_TFIRST], fs[_TLAST], fs[_CLAMP], fs[_TLO] = high, tfirst, tlast, clamp, tlo
    is_[_Q], is_[_LOK], is_[_SEG], is_[_SAMP] = q, lok, seg, sj
    is_[_NAFTER], is_[_NEDGE], is_[_NTRANS], is_[_POS] = nafter, nedge, ntrans, pos
    return status


_UNIFORM_CHUNK = 1 << 20
_EDGE_CHUNK = 1 << 20


def lo_schedule_arrays(f_P: float, schedule):
    """Segment start times, frequencies and cumulative LO phase.

    ``schedule`` is ``None`` (constant ``f_P``) or a list of
    ``(t_start, freq)`` with the first start at 0.  Phase is continuous
    across segment boundaries.
    """
    if schedule is None:
        schedule = [(0.0, f_P)]
    seg_t = np.array([float(a) for a, _ in schedule])
    seg_f = np.array([float(b) for _, b in schedule])
    if seg_t[0] != 0.0 or np.any(np.diff(seg_t) <= 0) or np.any(seg_f <= 0):
        raise InvalidArgument("LO schedule must start at 0 with increasing times and positive frequencies")
    seg_phi = np.concatenate(([0.0], np.cumsum(np.diff(seg_t) * seg_f[:-1])))
    return seg_t, seg_f, seg_phi


def simulate_fll(config: LoopConfig, *, lo_schedule=None, keep_edges: bool = True,
                 discard: float | None = None, sample_dt: float | None = None,
                 window: float | None = None, thinning_bound: str = "local") -> LoopTrace:
    """Simulate the closed loop for ``config.duration`` seconds.

    Parameters
    ----------
    lo_schedule : list of (t_start, freq), optional
        Piecewise-constant LO frequency; defaults to ``config.f_P`` throughout.
    keep_edges : bool
        Store every VCRS edge in ``trace.output``.  Long runs should pass
        False and rely on the summary and the windowed frequency.
    discard : float, optional
        Settling time excluded from the steady-state summary; default
        ``10 * filter_tau`` capped at half the duration.
    sample_dt, window : float, optional
        Trace sampling interval (default ``filter_tau / 20``) and trailing
        window for ``windowed_freq`` (default ``filter_tau / 4``).
    thinning_bound : {"local", "global"}
        Dominating rate for thinning: the larger endpoint rate of each
        inter-event interval, or the constant ``kv * v_max``.
    """
    c = config
    if discard is None:
        discard = min(10.0 * c.filter_tau, 0.5 * c.duration)
    if sample_dt is None:
        sample_dt = c.filter_tau / 20.0
    if window is None:
        window = c.filter_tau / 4.0
    if thinning_bound not in ("local", "global"):
        raise InvalidArgument("thinning_bound must be 'local' or 'global'")
    seg_t, seg_f, seg_phi = lo_schedule_arrays(c.f_P, lo_schedule)

    p = np.array([c.kv, math.log(c.v_min), math.log(c.v_max), c.filter_tau, c.amp_gain,
                  c.ref_duty, V_LOGIC, c.duration, c.edge_loss_delta, c.comp_gain,
                  discard, sample_dt, 1.0 if thinning_bound == "global" else 0.0])
    fs = np.zeros(9)
    is_ = np.zeros(8, dtype=np.int64)
    v0 = c.initial_voltage()
    fs[_U] = math.log(v0)
    fs[_VF] = c.ref_duty * V_LOGIC
    fs[_RHAT] = c.kv * v0
    fs[_TLO] = 0.0
    n_samp = int(math.floor(c.duration / sample_dt + 1e-9)) + 1
    samp = [np.zeros(n_samp) for _ in range(4)]
    bins = np.zeros(n_samp, dtype=np.int64)

    rng = SeededRng(c.seed)
    unif = rng.uniform(_UNIFORM_CHUNK)
    edge_chunks = []
    edges = np.empty(_EDGE_CHUNK if keep_edges else 0)
    while True:
        status = _fll_kernel(fs, is_, p, seg_t, seg_f, seg_phi, unif, edges, bins, *samp)
        if status == 0:
            break
        if status == 1:
            unif = np.concatenate((unif[is_[_POS]:], rng.uniform(_UNIFORM_CHUNK)))
            is_[_POS] = 0
        elif status == 2:
            edge_chunks.append(edges)
            edges = np.empty(_EDGE_CHUNK)
            is_[_NEDGE] = 0
    n_total = int(is_[_NEDGE]) + sum(len(e) for e in edge_chunks)

    output = None
    if keep_edges:
        edge_chunks.append(edges[: is_[_NEDGE]])
        output = PulseTrain(np.concatenate(edge_chunks), 0.0, c.duration,
                            {"generator": "fll", "seed": c.seed})

    samples = np.rec.fromarrays(samp, names="t,v_filter,v_ctrl,rate")
    m = max(1, int(round(window / sample_dt)))
    csum = np.concatenate(([0], np.cumsum(bins)))
    j = np.arange(m, n_samp)
    # bins j-m .. j-1 cover [t_j - m*dt, t_j)
    wf = np.rec.fromarrays([samp[0][j], (csum[j] - csum[j - m]) / (m * sample_dt)], names="t,freq")

    n_after = int(is_[_NAFTER])
    span = fs[_TLAST] - fs[_TFIRST]
    f_R = (n_after - 1) / span if n_after >= 2 and span > 0 else 0.0
    clamp_fraction = float(fs[_CLAMP]) / c.duration
    return LoopTrace(
        config=c, samples=samples, windowed_freq=wf, output=output, discard=discard,
        n_events=n_total, f_R=f_R, frd_duty=float(fs[_HIGH]) / (c.duration - discard),
        n_transitions=int(is_[_NTRANS]), clamp_fraction=clamp_fraction,
        diverged=clamp_fraction > 0.9,
        meta={"sample_dt": sample_dt, "window": m * sample_dt, "thinning_bound": thinning_bound,
              "lo_schedule": None if lo_schedule is None else [list(x) for x in lo_schedule],
              "n_events_after_discard": n_after})


@dataclass
class SweepPoint:
    f_P: float
    f_R: float
    rel_error: float
    n_events: int
    diverged: bool


def linearity_sweep(config_base: LoopConfig, f_P_values, scale_time: bool = True) -> list[SweepPoint]:
    """Lock error at each LO frequency.

    With ``scale_time`` each point runs :meth:`LoopConfig.scaled_to`, i.e.
    the same number of LO periods per filter time constant and per run;
    otherwise the base config is reused with only ``f_P`` changed.  Every
    point gets a child seed of ``config_base.seed`` and discards its first
    ``10 * filter_tau``.
    """
    f_P_values = sorted(float(f) for f in f_P_values)
    seeds = child_seeds(config_base.seed, len(f_P_values))
    out = []
    for f, seed in zip(f_P_values, seeds):
        cfg = config_base.scaled_to(f) if scale_time else config_base.replace(f_P=f)
        cfg = cfg.replace(seed=seed)
        tr = simulate_fll(cfg, keep_edges=False, discard=10.0 * cfg.filter_tau,
                          sample_dt=cfg.duration / 200.0)
        out.append(SweepPoint(f, tr.f_R, tr.rel_error, tr.n_events, tr.diverged))
    return out


def edge_loss_for_error(config: LoopConfig, f_cal: float = NOMINAL_EDGE_FREQ,
                        target_error: float = NOMINAL_EDGE_ERROR) -> float:
    """Edge loss (volt-seconds per transition) that shifts the lock point by
    ``target_error`` at ``f_cal`` in the uncompensated loop.

    The loop holds ``D(rho) - delta * transition_rate / V_LOGIC`` at the
    set point, and the FRD makes ``2 * f_P * (1 - exp(-rho))`` transitions
    per second, which gives ``delta`` in closed form.
    """
    rho = config.lock_ratio * (1.0 + target_error)
    trans_rate = 2.0 * f_cal * -math.expm1(-rho)
    return V_LOGIC * (duty_transfer(rho) - config.ref_duty) / trans_rate


def calibrate_edge_loss(config: LoopConfig, f_cal: float = NOMINAL_EDGE_FREQ,
                        target_error: float = NOMINAL_EDGE_ERROR, duration_scale: float = 1.0,
                        step: float = 0.05) -> float:
    """Tune ``edge_loss_delta`` by experiment so the uncompensated lock error
    at ``f_cal`` equals ``target_error``.

    Runs the loop at the closed-form estimate of :func:`edge_loss_for_error`
    and at ``1 + step`` times it on a shared random stream, then
    interpolates linearly to the target.  Both points sit next to the
    answer, so curvature and the residual bias of the finite-gain loop drop
    out.  ``config`` is interpreted in LO periods.
    """
    d0 = edge_loss_for_error(config, f_cal, target_error)
    base = config.scaled_to(f_cal).replace(comp_gain=0.0)
    base = base.replace(duration=base.duration * duration_scale)
    # common random numbers: both runs share one stream, so their difference
    # is nearly free of counting noise
    seed = child_seeds(config.seed, 1)[0]
    d1 = d0 * (1.0 + step)
    errs = []
    for d in (d0, d1):
        cfg = base.replace(edge_loss_delta=d, seed=seed)
        errs.append(simulate_fll(cfg, keep_edges=False, discard=10 * cfg.filter_tau,
                                 sample_dt=cfg.duration / 200.0).rel_error)
    e0, e1 = errs
    if e0 == e1:
        return d0
    return d0 + (d1 - d0) * (target_error - e0) / (e1 - e0)


def compensation_guess(config: LoopConfig) -> float:
    """Compensation gain (V per cps) that cancels the edge loss at lock.

    The deficit is ``2 * delta * f_R * D(rho)`` volts, linear in the output
    rate with a slope that does not depend on ``f_P``.
    """
    return 2.0 * config.edge_loss_delta * duty_transfer(config.lock_ratio)


def calibrate_compensation(config: LoopConfig, f_cal: float, duration_scale: float = 1.0) -> float:
    """Tune ``comp_gain`` by experiment at a single LO frequency.

    Runs the uncompensated loop and the loop with the analytic guess on a
    shared random stream, then takes the secant step to zero error.  ``config`` is interpreted in LO
    periods (see :meth:`LoopConfig.scaled_to`).
    """
    g0 = compensation_guess(config)
    base = config.scaled_to(f_cal)
    base = base.replace(duration=base.duration * duration_scale)
    seed = child_seeds(config.seed, 2)[1]
    runs = []
    for g in (0.0, g0):
        cfg = base.replace(comp_gain=g, seed=seed)
        runs.append(simulate_fll(cfg, keep_edges=False, discard=10 * cfg.filter_tau,
                                 sample_dt=cfg.duration / 200.0).rel_error)
    e0, e1 = runs
    if e0 == e1:
        return g0
    return g0 * e0 / (e0 - e1)


def predicted_edge_error(config: LoopConfig, f_P: float) -> float:
    """First-order lock error from edge loss and compensation at ``f_P``."""
    rho = config.lock_ratio
    f_R = rho * f_P
    deficit = (config.edge_loss_delta * 2.0 * f_P * -math.expm1(-rho) - config.comp_gain * f_R) / V_LOGIC
    return deficit / (rho * duty_slope(rho))


@dataclass
class StepPoint:
    c1: float
    settle_up: Settle
    settle_down: Settle
    trace: LoopTrace

    @property
    def settle_time_up(self) -> float:
        return self.settle_up.time

    @property
    def settle_time_down(self) -> float:
        return self.settle_down.time


def step_response(config: LoopConfig, f_low: float = 1e5, f_high: float = 1e6, half_period: float = 10.0,
                  c1_values=tuple(c * 1e-6 for c in C1_PRESETS_UF), r1: float = R1_OHMS,
                  band: float = 0.02, window_taus: float = 0.25,
                  samples_per_tau: float = 40.0) -> list[StepPoint]:
    """Frequency-jump response for a family of filter capacitors.

    The LO starts at ``f_low`` with the loop locked, jumps to ``f_high`` at
    ``half_period`` and back at ``2 * half_period``.  For each ``C1`` the
    filter time constant is ``r1 * C1`` and the trailing window of the
    frequency estimate is ``window_taus`` filter time constants, so every
    time scale of the measurement follows ``C1``.  Settle times are measured
    from each jump to the entry of the windowed output frequency into
    ``(1 +/- band)`` of the new target.
    """
    if not f_low <= f_high:
        raise InvalidArgument("need f_low <= f_high")
    if half_period <= 0:
        raise InvalidArgument("half_period must be positive")
    c1_values = sorted(float(c) for c in c1_values)
    seeds = child_seeds(config.seed, len(c1_values))
    out = []
    for c1, seed in zip(c1_values, seeds):
        tau_f = r1 * c1
        cfg = config.replace(f_P=f_low, filter_tau=tau_f, duration=3.0 * half_period, seed=seed,
                             v_init=None)
        cfg = cfg.replace(v_init=cfg.lock_voltage)
        dt = tau_f / samples_per_tau
        sched = [(0.0, f_low), (half_period, f_high), (2.0 * half_period, f_low)]
        tr = simulate_fll(cfg, lo_schedule=sched, keep_edges=False, sample_dt=dt,
                          window=window_taus * tau_f, discard=0.0)
        wf = tr.windowed_freq
        up = _settle_after(wf, half_period, 2.0 * half_period, cfg.lock_ratio * f_high, band)
        down = _settle_after(wf, 2.0 * half_period, 3.0 * half_period, cfg.lock_ratio * f_low, band)
        out.append(StepPoint(c1, up, down, tr))
    return out


def _settle_after(wf, t_step, t_stop, target, band) -> Settle:
    sel = (wf.t >= t_step) & (wf.t <= t_stop + 1e-12)
    series = np.vstack((wf.t[sel] - t_step, wf.freq[sel]))
    return settling_time(series, target, band)
