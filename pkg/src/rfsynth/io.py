"""CSV and JSON serialization of trains, waveforms, experiment tables and
run manifests.

Floats are written with 17 significant digits so that a CSV round-trips
bit-exactly; headers are fixed per table type.
"""

from __future__ import annotations

import dataclasses
import datetime as _dt
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .signals import PRNG_NAME, LogicWaveform, PulseTrain

FLOAT_FMT = "%.17g"

TRAIN_HEADER = ("edge_time_s",)
WAVEFORM_HEADER = ("time_s", "level")
RESPONSE_HEADER = ("rho", "duty_measured", "duty_analytic", "stderr")
TRANSFER_HEADER = ("rho", "duty_analytic", "duty_mc", "mc_stderr")
COMPARE_HEADER = ("f_r_cps", "xor_duty", "xor_stderr", "pfd_net_duty", "pfd_stderr",
                  "frd_duty", "frd_stderr")
TRACE_HEADER = ("t_s", "v_filter", "v_ctrl", "rate_cps")
WINDOWED_HEADER = ("t_s", "freq_cps")
SWEEP_HEADER = ("f_p_cps", "f_r_cps", "rel_error")
STEP_HEADER = ("c1_uF", "settle_up_s", "settle_down_s")
AUTOCORR_HEADER = ("k", "t_s", "a_k", "ci_lo", "ci_hi")


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and dataclasses to JSON types."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def write_table(path, header, columns, int_columns=()) -> Path:
    """Write equal-length columns under ``header``.

    Columns named in ``int_columns`` are written as integers, all others
    with :data:`FLOAT_FMT`.
    """
    path = Path(path)
    if len(header) != len(columns):
        raise ValueError("one column per header field")
    cols = [np.asarray(c) for c in columns]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("columns differ in length")
    fmt = ["%d" if h in int_columns else FLOAT_FMT for h in header]
    data = np.column_stack(cols) if n else np.empty((0, len(cols)))
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        if n:
            np.savetxt(fh, data, fmt=fmt, delimiter=",")
    return path


def read_table(path) -> dict:
    """Read a table written by :func:`write_table` into named float columns."""
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if not fh.readline().strip():
            return {h: np.empty(0) for h in header}
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {h: data[:, i] for i, h in enumerate(header)}


def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def write_train(path, train: PulseTrain) -> list[Path]:
    """Edge CSV plus a JSON sidecar with pulse width, horizon and generator meta."""
    csv_path = write_table(path, TRAIN_HEADER, [train.edges])
    side = write_json(sidecar_path(csv_path), {"pulse_width": train.pulse_width,
                                               "t_end": train.t_end, "meta": train.meta})
    return [csv_path, side]


def read_train(path) -> PulseTrain:
    edges = read_table(path)["edge_time_s"]
    side = json.loads(sidecar_path(path).read_text())
    return PulseTrain(edges, side["pulse_width"], side["t_end"], side.get("meta", {}))


def write_waveform(path, w: LogicWaveform) -> Path:
    return write_table(path, WAVEFORM_HEADER, [w.times, w.levels], int_columns=("level",))


@dataclasses.dataclass
class RunManifest:
    """Provenance record written next to every CLI output."""

    command: str
    config_snapshot: dict
    seed: int | None
    tool_version: str = __version__
    started: str = ""
    finished: str = ""
    output_files: list = dataclasses.field(default_factory=list)
    prng: str = PRNG_NAME

    def start(self) -> "RunManifest":
        self.started = _now()
        return self

    def finish(self, files) -> "RunManifest":
        self.output_files = sorted(str(Path(f).name) for f in files)
        self.finished = _now()
        return self

    def write(self, path) -> Path:
        return write_json(path, self)


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="milliseconds")
