"""Command-line front end.

Every subcommand maps onto one library operation, writes fixed-header CSV
tables into the output directory and finishes with a JSON manifest.  Exit
codes: 0 success, 1 runtime failure, 2 argument or configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .analytic import duty_transfer, mc_duty_oracle
from .detectors import detector_compare, frd_response_curve
from .errors import InsufficientData, InvalidArgument
from .loop import C1_PRESETS_UF, R1_OHMS, LoopConfig, linearity_sweep, simulate_fll, step_response
from .signals import SeededRng, gen_periodic, gen_poisson_rpt
from .stats import autocorrelation

DEFAULT_OUT = "rfs_out"
ENV_OUT = "RFS_OUT_DIR"

_FIELDS = {f.name: f for f in dataclasses.fields(LoopConfig)}
_OPTIONAL = {"ref_duty", "v_init"}


class ConfigError(InvalidArgument):
    pass


def _number(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(x):
        raise argparse.ArgumentTypeError(f"not finite: {text!r}")
    return x


def _count(text: str) -> int:
    x = _number(text)
    if x != int(x) or x < 0:
        raise argparse.ArgumentTypeError(f"not a non-negative integer: {text!r}")
    return int(x)


def _seed(text: str) -> int:
    try:
        s = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= s < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return s


def _check_value(key: str, value):
    if key in _OPTIONAL and value is None:
        return value
    if key == "seed":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"seed: expected an integer, got {value!r}")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    return float(value)


def read_config_file(path) -> dict:
    """Parse a LoopConfig JSON file; unknown keys and non-numbers are rejected."""
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    for key in doc:
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
    return {k: _check_value(k, v) for k, v in doc.items()}


def build_config(file_values: dict | None = None, overrides: dict | None = None,
                 defaults: dict | None = None) -> LoopConfig:
    """Merge ``defaults < file < overrides`` into a validated LoopConfig."""
    merged = dict(defaults or {})
    merged.update(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    if "f_P" not in merged:
        raise ConfigError("f_P is required (config file or --f-P)")
    try:
        return LoopConfig(**merged)
    except InvalidArgument as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, overrides: dict | None = None) -> LoopConfig:
    """LoopConfig from a JSON file, with ``overrides`` taking precedence."""
    return build_config(read_config_file(path), overrides)


def _add_loop_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("loop configuration (override --config)")
    g.add_argument("--config", help="JSON file with LoopConfig fields")
    for name in _FIELDS:
        if name == "seed":
            continue
        g.add_argument("--" + name.replace("_", "-"), dest=name, type=_number, default=None)


def _loop_overrides(args) -> dict:
    out = {name: getattr(args, name) for name in _FIELDS if name != "seed"}
    out["seed"] = args.seed
    return out


def _loop_config(args, defaults=None) -> LoopConfig:
    file_values = read_config_file(args.config) if args.config else {}
    return build_config(file_values, _loop_overrides(args), defaults)


# ---------------------------------------------------------------- commands

def cmd_transfer(args, out: Path) -> tuple[list, dict]:
    if not 0 < args.rho_min <= args.rho_max:
        raise InvalidArgument("need 0 < --rho-min <= --rho-max")
    if args.points < 1:
        raise InvalidArgument("--points must be at least 1")
    rho = np.geomspace(args.rho_min, args.rho_max, args.points)
    rngs = SeededRng(args.seed).spawn(2)
    mc = [mc_duty_oracle(r, args.mc_periods, child) for r, child in zip(rho, rngs[0].spawn(len(rho)))]
    files = [io.write_table(out / "transfer.csv", io.TRANSFER_HEADER,
                            [rho, duty_transfer(rho), [m.duty for m in mc], [m.stderr for m in mc]])]
    if args.sim_periods:
        pts = frd_response_curve(rho, args.sim_periods, rngs[1])
        files.append(io.write_table(out / "response.csv", io.RESPONSE_HEADER,
                                    [[getattr(p, f) for p in pts] for f in io.RESPONSE_HEADER]))
    return files, {}


def cmd_detector_compare(args, out: Path):
    if not 0 < args.f_r_min <= args.f_r_max:
        raise InvalidArgument("need 0 < --f-r-min <= --f-r-max")
    f_r = np.geomspace(args.f_r_min, args.f_r_max, args.points)
    pts = detector_compare(args.f_p, f_r, args.periods, SeededRng(args.seed))
    cols = ["f_r", "xor_duty", "xor_stderr", "pfd_net_duty", "pfd_stderr", "frd_duty", "frd_stderr"]
    return [io.write_table(out / "detector_compare.csv", io.COMPARE_HEADER,
                           [[getattr(p, c) for p in pts] for c in cols])], {}


def cmd_lock(args, out: Path):
    cfg = _loop_config(args, {"f_P": 1e4})
    tr = simulate_fll(cfg, keep_edges=args.edges, thinning_bound=args.thinning)
    s = tr.samples
    files = [io.write_table(out / "trace.csv", io.TRACE_HEADER, [s.t, s.v_filter, s.v_ctrl, s.rate]),
             io.write_table(out / "windowed_freq.csv", io.WINDOWED_HEADER,
                            [tr.windowed_freq.t, tr.windowed_freq.freq])]
    if args.edges:
        files += io.write_train(out / "output_edges.csv", tr.output)
    summary = {"f_R": tr.f_R, "rel_error": tr.rel_error, "frd_duty": tr.frd_duty,
               "ref_duty": cfg.ref_duty, "n_events": tr.n_events, "diverged": tr.diverged,
               "clamp_fraction": tr.clamp_fraction, "discard_s": tr.discard}
    files.append(io.write_json(out / "lock_summary.json", summary))
    return files, {"loop": cfg.to_dict()}


def cmd_sweep(args, out: Path):
    if args.decades <= 0 or args.points < 2:
        raise InvalidArgument("need --decades > 0 and --points >= 2")
    f_values = np.geomspace(args.f_min, args.f_min * 10 ** args.decades, args.points)
    cfg = _loop_config(args, {"f_P": args.f_min})
    pts = linearity_sweep(cfg, f_values, scale_time=not args.no_scale)
    files = [io.write_table(out / "sweep.csv", io.SWEEP_HEADER,
                            [[p.f_P for p in pts], [p.f_R for p in pts], [p.rel_error for p in pts]])]
    return files, {"loop": cfg.to_dict(), "diverged": [p.diverged for p in pts]}


def cmd_step(args, out: Path):
    cfg = _loop_config(args, {"f_P": args.f_low})
    c1 = [c * 1e-6 for c in (args.c1 or C1_PRESETS_UF)]
    pts = step_response(cfg, args.f_low, args.f_high, args.half_period, c1, args.r1, args.band)
    files = [io.write_table(out / "step.csv", io.STEP_HEADER,
                            [[p.c1 * 1e6 for p in pts], [p.settle_time_up for p in pts],
                             [p.settle_time_down for p in pts]])]
    for p in pts:
        wf = p.trace.windowed_freq
        files.append(io.write_table(out / f"step_windowed_c1_{p.c1 * 1e6:g}uF.csv",
                                    io.WINDOWED_HEADER, [wf.t, wf.freq]))
    flags = {f"{p.c1 * 1e6:g}uF": {"up_saturated": p.settle_up.saturated,
                                   "down_saturated": p.settle_down.saturated} for p in pts}
    return files, {"loop": cfg.to_dict(), "saturated": flags}


def cmd_autocorr(args, out: Path):
    extra = {}
    if args.source == "poisson":
        train = gen_poisson_rpt(args.rate, 0.0, (args.n_waits + 1) / args.rate, SeededRng(args.seed))
    else:
        cfg = _loop_config(args, {"f_P": args.rate})
        tr = simulate_fll(cfg, keep_edges=True)
        train = tr.steady_output()
        extra["loop"] = cfg.to_dict()
    res = autocorrelation(train, args.max_lag)
    lo, hi = res.band(3.0)
    files = [io.write_table(out / "autocorr.csv", io.AUTOCORR_HEADER,
                            [res.lags, res.rescaled_t, res.a_k, lo, hi], int_columns=("k",))]
    extra.update(n_waits=res.n_waits, mean_wait=res.mean_wait, estimator=res.estimator)
    return files, extra


def cmd_gen(args, out: Path):
    if args.kind == "poisson":
        train = gen_poisson_rpt(args.rate, args.pulse_width, args.duration, SeededRng(args.seed),
                                dead_time=args.dead_time)
    else:
        train = gen_periodic(args.rate, args.duty, args.phase, args.duration)
    return io.write_train(out / f"{args.kind}_train.csv", train), {"n_edges": len(train)}


# ----------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rfsynth", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, stochastic=True, **kw):
        p = sub.add_parser(name, **kw)
        p.set_defaults(func=func, stochastic=stochastic)
        p.add_argument("--out", help=f"output directory (default ${ENV_OUT} or ./{DEFAULT_OUT})")
        p.add_argument("--seed", type=_seed, default=None,
                       help="root seed; required for stochastic runs")
        return p

    p = add("transfer", cmd_transfer, help="analytic transfer table with Monte Carlo points")
    p.add_argument("--rho-min", type=_number, default=0.01)
    p.add_argument("--rho-max", type=_number, default=100.0)
    p.add_argument("--points", type=_count, default=41)
    p.add_argument("--mc-periods", type=_count, default=10**6)
    p.add_argument("--sim-periods", type=_count, default=0,
                   help="also run the event-driven detector with this many periods per point")

    p = add("detector-compare", cmd_detector_compare, help="XOR, PFD and FRD duty against f_R")
    p.add_argument("--f-p", type=_number, default=1.0)
    p.add_argument("--f-r-min", type=_number, default=0.1)
    p.add_argument("--f-r-max", type=_number, default=10.0)
    p.add_argument("--points", type=_count, default=9)
    p.add_argument("--periods", type=_count, default=10**5)

    p = add("lock", cmd_lock, help="single closed-loop run")
    p.add_argument("--edges", action="store_true", help="also export the output edge train")
    p.add_argument("--thinning", choices=("local", "global"), default="local")
    _add_loop_flags(p)

    p = add("sweep", cmd_sweep, help="closed-loop linearity sweep")
    p.add_argument("--f-min", type=_number, default=1e3)
    p.add_argument("--decades", type=_number, default=3.0)
    p.add_argument("--points", type=_count, default=11)
    p.add_argument("--no-scale", action="store_true",
                   help="keep absolute time constants instead of scaling with f_P")
    _add_loop_flags(p)

    p = add("step", cmd_step, help="frequency-step response for a C1 family")
    p.add_argument("--f-low", type=_number, default=1e5)
    p.add_argument("--f-high", type=_number, default=1e6)
    p.add_argument("--half-period", type=_number, default=10.0)
    p.add_argument("--c1", type=_number, nargs="+", help="capacitors in uF")
    p.add_argument("--r1", type=_number, default=R1_OHMS)
    p.add_argument("--band", type=_number, default=0.02)
    _add_loop_flags(p)

    p = add("autocorr", cmd_autocorr, help="waiting-time autocorrelation")
    p.add_argument("--source", choices=("poisson", "fll"), default="poisson")
    p.add_argument("--rate", type=_number, default=1e4, help="Poisson rate or LO frequency")
    p.add_argument("--n-waits", type=_count, default=10**6)
    p.add_argument("--max-lag", type=_count, default=100)
    _add_loop_flags(p)

    p = add("gen", cmd_gen, help="generate a pulse train")
    p.add_argument("--kind", choices=("poisson", "periodic"), default="poisson")
    p.add_argument("--rate", type=_number, required=True)
    p.add_argument("--duration", type=_number, required=True)
    p.add_argument("--pulse-width", type=_number, default=0.0)
    p.add_argument("--dead-time", action="store_true")
    p.add_argument("--duty", type=_number, default=0.5)
    p.add_argument("--phase", type=_number, default=0.0)
    return ap


def _is_stochastic(args) -> bool:
    return args.stochastic and not (args.command == "gen" and args.kind == "periodic")


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(ENV_OUT) or DEFAULT_OUT)


def _snapshot(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("func", "stochastic")}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if _is_stochastic(args) and args.seed is None:
        print(f"rfsynth {args.command}: --seed is required", file=sys.stderr)
        return 2
    out = _out_dir(args)
    manifest = io.RunManifest(command=" ".join(["rfsynth", *(argv if argv is not None else sys.argv[1:])]),
                              config_snapshot=_snapshot(args), seed=args.seed).start()
    try:
        out.mkdir(parents=True, exist_ok=True)
        files, extra = args.func(args, out)
    except InvalidArgument as exc:
        print(f"rfsynth {args.command}: {exc}", file=sys.stderr)
        return 2
    except (InsufficientData, OSError, FloatingPointError) as exc:
        print(f"rfsynth {args.command}: {exc}", file=sys.stderr)
        return 1
    manifest.config_snapshot.update(extra)
    path = out / f"{args.command}_manifest.json"
    manifest.finish([*files, path]).write(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
