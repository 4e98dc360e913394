"""Exit criteria, run at their stated tolerances.

Each test prints one ``CRITERION n PASS|FAIL`` line through the
``acceptance_report`` fixture; ``pytest -m acceptance -s`` shows them live.
"""

import math
import os
import time

import numpy as np
import pytest

from rfsynth.analytic import duty_transfer, invert_duty, mc_duty_oracle, series_denominator
from rfsynth.cli import main
from rfsynth.detectors import detector_compare, frd_response_curve
from rfsynth.loop import (C1_PRESETS_UF, LoopConfig, calibrate_compensation, calibrate_edge_loss,
                          linearity_sweep, simulate_fll, step_response)
from rfsynth.signals import SeededRng, gen_poisson_rpt
from rfsynth.stats import autocorrelation, origin_fit_r2, waiting_time_test, weighted_slope

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

RHOS = (0.1, 0.3, 1.0, 3.0, 10.0)


def test_transfer_function_agreement(acceptance_report):
    t0 = time.perf_counter()
    kids = SeededRng(101).spawn(2)
    sim = frd_response_curve(RHOS, 10**6, kids[0])
    worst = 0.0
    for p, child in zip(sim, kids[1].spawn(len(RHOS))):
        mc = mc_duty_oracle(p.rho, 10**6, child)
        d = duty_transfer(p.rho)
        worst = max(worst, abs(mc.duty - d) / mc.stderr, abs(p.duty_measured - d) / p.stderr,
                    abs(p.duty_measured - mc.duty) / math.hypot(p.stderr, mc.stderr))
    elapsed = time.perf_counter() - t0
    anchors = (round(duty_transfer(1.0), 9) == 0.632120559 and round(duty_transfer(10.0), 8) == 0.09999546)
    ok = worst < 3.0 and anchors and elapsed < 60.0
    acceptance_report(1, ok, f"max |z|={worst:.2f} over oracle/analytic/event pairs, anchors={anchors}, "
                             f"{elapsed:.1f}s")
    assert ok


def test_series_identity(acceptance_report):
    xs = (0.1, 0.5, 1.0, math.log(2), 5.0)
    gaps = [abs(s.closed_form - s.truncated_sum) for s in (series_denominator(x, 500) for x in xs)]
    ln2 = series_denominator(math.log(2), 500).closed_form
    ok = max(gaps) < 1e-12 and ln2 == 1.0
    acceptance_report(2, ok, f"max gap={max(gaps):.2e}, closed form at ln2={ln2!r}")
    assert ok


def test_inversion_round_trip(acceptance_report):
    rho = 10.0 ** np.random.default_rng(103).uniform(-3.0, 3.0, 1000)
    t0 = time.perf_counter()
    back = np.array([invert_duty(duty_transfer(r)) for r in rho])
    elapsed = time.perf_counter() - t0
    worst = float(np.max(np.abs(back - rho) / rho))
    ok = worst < 1e-8 and elapsed < 1.0
    acceptance_report(3, ok, f"max rel error={worst:.2e}, {elapsed:.3f}s")
    assert ok


def test_swap_mirror(acceptance_report):
    kids = SeededRng(104).spawn(2)
    swapped = frd_response_curve(RHOS, 10**6, kids[0], swap=True)
    plain = {p.rho: p for p in frd_response_curve([1 / r for r in RHOS], 10**6, kids[1])}
    z = []
    for s in swapped:
        u = plain[1 / s.rho]
        z.append(abs(s.duty_measured - u.duty_measured) / math.hypot(s.stderr, u.stderr))
    # the swapped cell holds HIGH for the remainder of each period instead
    comp = max(abs(s.duty_measured - (1 - s.duty_analytic)) / s.stderr for s in swapped)
    ok = max(z) < 3.0
    acceptance_report(4, ok, f"swap(rho) vs plain(1/rho) max |z|={max(z):.1f}; "
                             f"swap(rho) vs 1-D(rho) max |z|={comp:.2f}")
    assert ok


def test_classical_detector_insensitivity(acceptance_report):
    t0 = time.perf_counter()
    f_r = np.geomspace(0.1, 10.0, 9)
    pts = detector_compare(1.0, f_r, 2 * 10**5, SeededRng(105))
    elapsed = time.perf_counter() - t0
    x = np.log10(f_r)
    xor = np.array([p.xor_duty for p in pts])
    xor_se = np.array([p.xor_stderr for p in pts])
    xor_z = float(np.max(np.abs(xor - 0.5) / xor_se))
    xfit = weighted_slope(x, xor, xor_se)
    pfit = weighted_slope(x, [p.pfd_net_duty for p in pts], [p.pfd_stderr for p in pts])
    xor_ok = xor_z < 3.0 and abs(xfit.slope) < 3 * xfit.stderr
    pfd_ok = abs(pfit.slope) < 3 * pfit.stderr
    ok = xor_ok and pfd_ok and elapsed < 120.0
    acceptance_report(5, ok, f"XOR max |z|={xor_z:.2f}, slope={xfit.slope:+.1e}+/-{xfit.stderr:.0e}; "
                             f"PFD slope={pfit.slope:+.3f}+/-{pfit.stderr:.0e} "
                             f"(net {pts[0].pfd_net_duty:+.2f} to {pts[-1].pfd_net_duty:+.2f}); "
                             f"{elapsed:.0f}s")
    assert ok


def test_closed_loop_linearity(acceptance_report):
    # 1e4 LO periods per filter time constant keeps the finite-gain bias ~1e-4
    base = LoopConfig(f_P=1e3, filter_tau=10.0, duration=4000.0, seed=106)
    t0 = time.perf_counter()
    pts = linearity_sweep(base, np.geomspace(1e3, 1e6, 11))
    elapsed = time.perf_counter() - t0
    worst = max(abs(p.rel_error) for p in pts)
    ok = worst < 0.01 and not any(p.diverged for p in pts) and elapsed < 300.0
    acceptance_report(6, ok, f"max |error|={worst:.3%} over 1e3..1e6 cps, {elapsed:.0f}s")
    assert ok


@pytest.mark.skipif(not os.environ.get("RFS_LONG"), reason="five-decade mode; set RFS_LONG=1")
def test_closed_loop_linearity_five_decades():
    base = LoopConfig(f_P=200.0, filter_tau=50.0, duration=2e4, seed=116)
    pts = linearity_sweep(base, np.geomspace(200.0, 2e7, 11))
    assert max(abs(p.rel_error) for p in pts) < 0.01


def test_edge_effect_and_compensation(acceptance_report):
    # lengths in LO periods: 1e4 per filter constant, 2e7 per run, 1e8 for verification
    base = LoopConfig(f_P=2e4, filter_tau=0.5, duration=1000.0, seed=107)
    f_lo, f_top = 2e4, 2e7

    def err(cfg, f, seed, scale=5.0):
        c = cfg.scaled_to(f)
        c = c.replace(duration=c.duration * scale, seed=seed)
        return simulate_fll(c, keep_edges=False, discard=10 * c.filter_tau,
                            sample_dt=c.duration / 200).rel_error

    delta = calibrate_edge_loss(base, f_top, -0.0088, duration_scale=5.0)
    lossy = base.replace(edge_loss_delta=delta)
    e_top = err(lossy, f_top, 1071)
    cal_ok = abs(e_top + 0.0088) < 0.0005

    f = np.geomspace(f_lo, f_top, 11)
    sweep = linearity_sweep(lossy, f)
    _, r2 = origin_fit_r2(f, [p.rel_error for p in sweep])

    g = calibrate_compensation(lossy, 1e7, duration_scale=5.0)
    fixed = lossy.replace(comp_gain=g)
    e_lo, e_hi = err(fixed, f_lo, 1072), err(fixed, f_top, 1073)
    comp_ok = abs(e_lo) < 0.001 and abs(e_hi) < 0.001
    ok = cal_ok and r2 > 0.95 and comp_ok
    acceptance_report(7, ok, f"uncompensated {e_top:+.3%} at 20 Mcps, R2={r2:.4f}; "
                             f"compensated {e_lo:+.3%} at 20 kcps, {e_hi:+.3%} at 20 Mcps")
    assert ok


def test_step_response(acceptance_report):
    t0 = time.perf_counter()
    cfg = LoopConfig(f_P=1e5, seed=108)
    pts = step_response(cfg, c1_values=[c * 1e-6 for c in C1_PRESETS_UF])
    elapsed = time.perf_counter() - t0
    c1 = np.array([p.c1 for p in pts])
    up = np.array([p.settle_time_up for p in pts])
    down = [p.settle_time_down for p in pts]
    increasing = bool(np.all(np.diff(up) > 0)) and not any(p.settle_up.saturated for p in pts)
    # settle time per unit C1 between neighbouring presets
    scaling = (up[1:] / up[:-1]) / (c1[1:] / c1[:-1])
    half = step_response(cfg.replace(seed=118), c1_values=[5.25e-6, 10.5e-6])
    ratio = half[0].settle_time_up / half[1].settle_time_up
    ok = increasing and bool(np.all(np.abs(scaling - 1) <= 0.2)) and abs(ratio - 0.5) <= 0.1 \
        and elapsed < 180.0
    acceptance_report(8, ok, "up " + ", ".join(f"{t:.3g}" for t in up) + " s; "
                             f"per-C1 scaling {scaling.min():.2f}..{scaling.max():.2f}; "
                             f"half-C1 ratio {ratio:.3f}; down (informational) "
                             + ", ".join(f"{t:.3g}" for t in down) + f" s; {elapsed:.0f}s")
    assert ok


def test_randomness_quality(acceptance_report):
    passes = sum(waiting_time_test(gen_poisson_rpt(1.0, 0.0, 1e5, rng)).ks_pass_1pct
                 for rng in SeededRng(109).spawn(100))
    # open-loop VCRS: constant control voltage, rate 1e4 cps through the thinning path
    v = 1e-2
    cfg = LoopConfig(f_P=1e4, amp_gain=0.0, v_init=v, v_max=2 * v, duration=100.0, seed=119)
    tr = simulate_fll(cfg, thinning_bound="global", discard=0.0)
    res = autocorrelation(tr.output, 100)
    frac = float(np.mean(np.abs(res.a_k[1:]) < 3 / math.sqrt(res.n_waits)))
    ok = passes >= 98 and frac >= 0.99 and res.n_waits >= 10**6 * 0.99
    acceptance_report(9, ok, f"KS pass {passes}/100; {frac:.0%} of lags 1..100 inside 3/sqrt(N), "
                             f"N={res.n_waits}")
    assert ok


def test_autocorrelation_rescaling(acceptance_report):
    base = LoopConfig(f_P=1e4, filter_tau=20 / 1e4, duration=1.02e6 / 1e4, seed=11)
    other = base.scaled_to(5e3).replace(seed=12)
    runs = [autocorrelation(simulate_fll(c).steady_output(), 20) for c in (base, other)]
    a, b = runs
    # both axes in units of each run's mean waiting time
    same_axis = np.allclose(a.rescaled_t / a.mean_wait, b.rescaled_t / b.mean_wait)
    z = np.abs(a.a_k[1:] - b.a_k[1:]) / np.hypot(a.stderr[1:], b.stderr[1:])
    ok = same_axis and float(z.max()) < 3.0
    acceptance_report(10, ok, f"tau ratio {b.mean_wait / a.mean_wait:.3f}; max |z|={z.max():.2f} "
                              f"over t in (0, 20 tau]; a_1={a.a_k[1]:+.4f} vs {b.a_k[1]:+.4f}")
    assert ok


STOCHASTIC_RUNS = {
    "transfer": ["transfer", "--rho-min", "0.1", "--rho-max", "10", "--points", "5",
                 "--mc-periods", "1e4", "--sim-periods", "1e4"],
    "detector-compare": ["detector-compare", "--points", "3", "--periods", "2e4"],
    "lock": ["lock", "--f-P", "1e3", "--filter-tau", "0.1", "--duration", "5", "--edges"],
    "sweep": ["sweep", "--decades", "1", "--points", "3", "--duration", "20"],
    "step": ["step", "--c1", "1", "2", "--half-period", "1"],
    "autocorr": ["autocorr", "--n-waits", "1e5", "--max-lag", "20"],
    "autocorr-fll": ["autocorr", "--source", "fll", "--rate", "1e3", "--duration", "20",
                     "--max-lag", "20"],
    "gen": ["gen", "--rate", "100", "--duration", "10", "--pulse-width", "1e-4", "--dead-time"],
}


def test_full_stack_determinism(acceptance_report, tmp_path):
    mismatched, compared = [], 0
    for name, argv in STOCHASTIC_RUNS.items():
        dirs = [tmp_path / name / tag for tag in "ab"]
        for d in dirs:
            assert main([*argv, "--seed", "111", "--out", str(d)]) == 0
        files = sorted(p.name for p in dirs[0].glob("*.csv"))
        assert files and files == sorted(p.name for p in dirs[1].glob("*.csv"))
        for f in files:
            compared += 1
            if (dirs[0] / f).read_bytes() != (dirs[1] / f).read_bytes():
                mismatched.append(f"{name}/{f}")
    ok = not mismatched
    acceptance_report(11, ok, f"{compared} CSV files over {len(STOCHASTIC_RUNS)} runs, "
                              f"mismatches: {mismatched or 'none'}")
    assert ok
