import json

import numpy as np
import pytest

from rfsynth import cli, io
from rfsynth.cli import ConfigError, build_config, load_config, main, read_config_file
from rfsynth.loop import LoopConfig


def _run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def _manifest(out, command):
    return json.loads((out / f"{command}_manifest.json").read_text())


class TestConfig:
    def test_minimal_file_gets_defaults(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"f_P": 1e4}')
        assert load_config(p) == LoopConfig(f_P=1e4)

    def test_negative_f_p_names_key(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"f_P": -5}')
        with pytest.raises(ConfigError, match="f_P"):
            load_config(p)

    def test_flag_wins(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"f_P": 1e4, "kv": 2e6}')
        c = load_config(p, {"f_P": 2e4})
        assert (c.f_P, c.kv) == (2e4, 2e6)

    def test_precedence_order(self):
        c = build_config({"f_P": 2.0, "kv": 5.0}, {"kv": 7.0, "amp_gain": None}, {"f_P": 1.0, "kv": 3.0})
        assert (c.f_P, c.kv, c.amp_gain) == (2.0, 7.0, LoopConfig(f_P=1.0).amp_gain)

    @pytest.mark.parametrize("text,key", [('{"f_P": 1, "gain": 2}', "gain"),
                                          ('{"f_P": "fast"}', "f_P"),
                                          ('{"f_P": 1, "seed": 1.5}', "seed")])
    def test_rejected(self, tmp_path, text, key):
        p = tmp_path / "c.json"
        p.write_text(text)
        with pytest.raises(ConfigError, match=key):
            read_config_file(p)

    def test_not_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("f_P = 1")
        with pytest.raises(ConfigError):
            read_config_file(p)

    def test_cli_bad_config_exit_2(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        p.write_text('{"f_P": -5}')
        assert _run(tmp_path, "lock", "--seed", "1", "--config", str(p)) == 2
        assert "f_P" in capsys.readouterr().err


class TestExitCodes:
    def test_transfer_happy_path(self, tmp_path):
        assert _run(tmp_path, "transfer", "--rho-min", "0.01", "--rho-max", "100", "--points", "41",
                    "--mc-periods", "1e4", "--seed", "7") == 0
        t = io.read_table(tmp_path / "transfer.csv")
        assert len(t["rho"]) == 41
        assert np.all(np.abs(t["duty_mc"] - t["duty_analytic"]) < 5 * t["mc_stderr"] + 1e-12)

    def test_negative_rho(self, tmp_path, capsys):
        assert _run(tmp_path, "transfer", "--rho-min", "-1", "--seed", "7") == 2
        assert capsys.readouterr().err

    def test_missing_seed(self, tmp_path, capsys):
        assert _run(tmp_path, "transfer") == 2
        assert "--seed" in capsys.readouterr().err

    def test_periodic_gen_needs_no_seed(self, tmp_path):
        assert _run(tmp_path, "gen", "--kind", "periodic", "--rate", "1000", "--duration", "1") == 0
        assert len(io.read_train(tmp_path / "periodic_train.csv")) == 1000

    def test_unknown_command(self, tmp_path):
        assert _run(tmp_path, "nope") == 2

    def test_bad_number(self, tmp_path):
        assert _run(tmp_path, "gen", "--rate", "fast", "--duration", "1", "--seed", "1") == 2

    def test_insufficient_data_is_runtime_failure(self, tmp_path):
        assert _run(tmp_path, "autocorr", "--n-waits", "5", "--max-lag", "10", "--seed", "1") == 1

    def test_diverged_run_still_succeeds(self, tmp_path):
        assert _run(tmp_path, "lock", "--seed", "1", "--f-P", "1e3", "--kv", "0", "--duration", "1") == 0
        summary = json.loads((tmp_path / "lock_summary.json").read_text())
        assert summary["diverged"] is True


class TestOutputs:
    def test_manifest_lists_every_file(self, tmp_path):
        assert _run(tmp_path, "lock", "--seed", "3", "--f-P", "1e3", "--filter-tau", "0.1",
                    "--duration", "5", "--edges") == 0
        m = _manifest(tmp_path, "lock")
        on_disk = sorted(p.name for p in tmp_path.iterdir())
        assert m["output_files"] == on_disk
        assert m["seed"] == 3
        assert m["config_snapshot"]["loop"]["f_P"] == 1e3
        assert m["tool_version"] and m["prng"]
        assert m["started"] <= m["finished"]

    def test_env_out_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.ENV_OUT, str(tmp_path / "env"))
        assert main(["gen", "--rate", "10", "--duration", "10", "--seed", "1"]) == 0
        assert (tmp_path / "env" / "poisson_train.csv").exists()
        assert (tmp_path / "env" / "gen_manifest.json").exists()

    def test_out_flag_beats_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.ENV_OUT, str(tmp_path / "env"))
        assert _run(tmp_path / "flag", "gen", "--rate", "10", "--duration", "10", "--seed", "1") == 0
        assert (tmp_path / "flag" / "poisson_train.csv").exists()
        assert not (tmp_path / "env").exists()

    def test_sweep_rows_sorted_by_frequency(self, tmp_path):
        assert _run(tmp_path, "sweep", "--seed", "7", "--decades", "1", "--points", "3",
                    "--duration", "20") == 0
        t = io.read_table(tmp_path / "sweep.csv")
        assert np.all(np.diff(t["f_p_cps"]) > 0)

    def test_sweep_twice_byte_identical(self, tmp_path):
        args = ("sweep", "--decades", "3", "--points", "11", "--seed", "7")
        assert _run(tmp_path / "a", *args) == 0
        assert _run(tmp_path / "b", *args) == 0
        assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()
