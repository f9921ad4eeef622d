import csv
import json
from pathlib import Path

import numpy as np
import pytest

from statesecrecy.channel import OutcomeTrace, trace_from_csv, trace_to_csv
from statesecrecy.cli import main
from statesecrecy.config import CodeSpec, ConfigError, ScenarioConfig, load_config
from statesecrecy.runner import collect_records, run_scenario, runs_csv_header
from statesecrecy.scenarios import state_channel_law, state_demo_system

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def write_config(tmp_path, body: str) -> Path:
    path = tmp_path / "scenario.toml"
    path.write_text(body)
    return path


BASE_STATE = """
mode = "state"
horizon = {horizon}
runs = {runs}
seed = 3
outputs = "{out}"

[system]
A = [[1.2, 0.1], [0.0, 0.5]]
Q = [[0.6, 0.2], [0.2, 0.5]]
Sigma0 = "Q"

[channel]
kind = "iid_joint"
p11 = 0.54
p10 = 0.36
p01 = 0.06
p00 = 0.04

[code]
kind = "state_secrecy"
"""


class TestConfig:
    def test_shipped_configs_load(self):
        for name in (
            "state_scenario.toml",
            "state_scenario_random.toml",
            "state_scenario_deterministic.toml",
            "output_scenario.toml",
        ):
            cfg = load_config(CONFIG_DIR / name)
            assert cfg.horizon == 60 and cfg.runs == 1000

    def test_output_steady_state_sigma0(self):
        cfg = load_config(CONFIG_DIR / "output_scenario.toml")
        from statesecrecy.gaussians import solve_dare

        steady = solve_dare(cfg.system.A, cfg.system.C, cfg.system.Q.m, cfg.system.R.m)
        np.testing.assert_allclose(cfg.system.Sigma0.m, steady.m, atol=1e-9)

    def test_overrides(self, tmp_path):
        path = write_config(tmp_path, BASE_STATE.format(horizon=30, runs=10, out="o"))
        cfg = load_config(path, {"runs": 4, "seed": 99})
        assert cfg.runs == 4 and cfg.seed == 99 and cfg.horizon == 30
        assert cfg.outputs == tmp_path / "o"

    @pytest.mark.parametrize(
        "mangle,field",
        [
            (lambda s: s.replace('mode = "state"', 'mode = "both"'), "mode"),
            (lambda s: s.replace("horizon = 10", "horizon = 0"), "horizon"),
            (lambda s: s.replace("p11 = 0.54", "p11 = 0.99"), "channel"),
            (lambda s: s.replace('kind = "state_secrecy"', 'kind = "rot13"'), "code.kind"),
            (lambda s: s.replace('Sigma0 = "Q"', 'Sigma0 = "steady_state"'), "system.Sigma0"),
            (lambda s: s.replace("A = [[1.2, 0.1], [0.0, 0.5]]", 'A = "big"'), "system.A"),
            (lambda s: s.replace("\n[code]\nkind = \"state_secrecy\"\n", "\n"), "code"),
        ],
    )
    def test_diagnostics_name_the_field(self, tmp_path, mangle, field):
        body = mangle(BASE_STATE.format(horizon=10, runs=2, out="o"))
        with pytest.raises(ConfigError) as err:
            load_config(write_config(tmp_path, body))
        assert err.value.field == field

    def test_baseline_code_parsing(self, tmp_path):
        body = BASE_STATE.format(horizon=10, runs=2, out="o").replace(
            'kind = "state_secrecy"', 'kind = "baseline_random"\np = 0.29'
        )
        cfg = load_config(write_config(tmp_path, body))
        assert cfg.code == CodeSpec("baseline_random", p=0.29)

    def test_scripted_channel(self, tmp_path):
        trace = OutcomeTrace(np.ones(12, int), np.ones(12, int))
        trace_to_csv(trace, tmp_path / "script.csv")
        body = BASE_STATE.format(horizon=10, runs=2, out="o").replace(
            'kind = "iid_joint"\np11 = 0.54\np10 = 0.36\np01 = 0.06\np00 = 0.04',
            'kind = "scripted"\npath = "script.csv"',
        )
        cfg = load_config(write_config(tmp_path, body))
        assert cfg.channel.kind == "scripted"
        # too-short script is a config error
        body_short = body.replace("horizon = 10", "horizon = 40")
        with pytest.raises(ConfigError) as err:
            load_config(write_config(tmp_path, body_short))
        assert err.value.field == "channel.script"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="no such config"):
            load_config(tmp_path / "absent.toml")


class TestRunner:
    def make_cfg(self, tmp_path, code=CodeSpec("state_secrecy"), runs=5, horizon=15, seed=3):
        return ScenarioConfig(
            state_demo_system(), "state", state_channel_law(), code,
            horizon, runs, seed, tmp_path / "out",
        )

    def test_record_shapes_and_flags(self, tmp_path):
        cfg = self.make_cfg(tmp_path)
        records = collect_records(cfg)
        assert len(records) == 5
        for rec in records:
            assert rec.gamma_u.shape == (16,)
            flags = rec.critical_flag()
            if rec.k0 is None:
                assert flags.sum() == 0
            else:
                assert flags[rec.k0] == 1 and flags[: rec.k0].sum() == 0

    def test_scripted_all_ones_zero_eve_error(self, tmp_path):
        from statesecrecy.channel import ChannelLaw

        trace = OutcomeTrace(np.ones(16, int), np.ones(16, int))
        cfg = ScenarioConfig(
            state_demo_system(), "state", ChannelLaw.scripted(trace),
            CodeSpec("state_secrecy"), 15, 1, 3, tmp_path / "out",
        )
        records, _ = run_scenario(cfg)
        assert np.all(records[0].tr_P_eve <= 1e-9)

    def test_csv_schema_and_log1p(self, tmp_path):
        cfg = self.make_cfg(tmp_path, runs=3)
        run_scenario(cfg)
        with open(cfg.outputs / "runs.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0]) == runs_csv_header(2)
        assert len(rows) == 3 * 16
        for row in rows[:32]:
            assert row["tr_H"] == ""  # state mode
            expected = np.log1p(float(row["tr_P_eve"]))
            assert float(row["log1p_tr_P_eve"]) == pytest.approx(expected, rel=1e-15)

    def test_byte_identical_reruns(self, tmp_path):
        cfg_a = self.make_cfg(tmp_path / "a", runs=6)
        cfg_b = self.make_cfg(tmp_path / "b", runs=6)
        run_scenario(cfg_a)
        run_scenario(cfg_b)
        for name in ("runs.csv", "summary.csv", "summary.json"):
            assert (cfg_a.outputs / name).read_bytes() == (cfg_b.outputs / name).read_bytes()

    def test_worker_pool_matches_sequential(self, tmp_path):
        cfg_a = self.make_cfg(tmp_path / "seq", runs=8)
        cfg_b = self.make_cfg(tmp_path / "par", runs=8)
        run_scenario(cfg_a, workers=1)
        run_scenario(cfg_b, workers=2)
        assert (cfg_a.outputs / "runs.csv").read_bytes() == (cfg_b.outputs / "runs.csv").read_bytes()

    def test_baseline_records(self, tmp_path):
        cfg = self.make_cfg(tmp_path, code=CodeSpec("baseline_deterministic", s=5), runs=4)
        records = collect_records(cfg)
        for rec in records:
            assert rec.tr_H is None
            assert rec.tr_P_user.shape == (16,)

    def test_summary_contents(self, tmp_path):
        cfg = self.make_cfg(tmp_path, runs=10, horizon=40)
        _, summary = run_scenario(cfg)
        scalars = summary["scalars"]
        assert scalars["runs"] == 10
        assert scalars["target_slope_2_log_rho"] == pytest.approx(2 * np.log(1.2))
        assert 0 < scalars["fraction_with_critical_event"] <= 1
        per_k = summary["per_k"]
        assert per_k["frac_critical_by_k"].shape == (41,)
        assert np.all(np.diff(per_k["frac_critical_by_k"]) >= 0)


class TestCli:
    def test_run_and_exit_codes(self, tmp_path, capsys):
        path = write_config(tmp_path, BASE_STATE.format(horizon=12, runs=3, out="cli_out"))
        assert main(["run", str(path)]) == 0
        assert (tmp_path / "cli_out" / "runs.csv").exists()
        out = capsys.readouterr().out
        assert json.loads(out.splitlines()[0])["runs"] == 3

    def test_invalid_config_exit_code(self, tmp_path, capsys):
        path = write_config(
            tmp_path, BASE_STATE.format(horizon=12, runs=3, out="o").replace('"state"', '"x"')
        )
        assert main(["run", str(path)]) == 1
        assert "mode" in capsys.readouterr().err

    def test_unknown_suite_exit_code(self, capsys):
        assert main(["verify", "nonsense"]) == 1
        assert "unknown suite" in capsys.readouterr().err

    def test_usage_error_exit_code(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1

    def test_verify_suite_json_output(self, capsys):
        assert main(["verify", "worst_case"]) == 0
        out = capsys.readouterr().out
        results = [json.loads(line) for line in out.splitlines()]
        assert all(r["passed"] for r in results)
        assert {r["suite"] for r in results} == {"worst_case"}

    def test_export_traces(self, tmp_path):
        path = write_config(tmp_path, BASE_STATE.format(horizon=12, runs=4, out="tr_out"))
        assert main(["export-traces", str(path)]) == 0
        files = sorted((tmp_path / "tr_out" / "traces").glob("*.csv"))
        assert len(files) == 4
        loaded = trace_from_csv(files[0])
        assert loaded.horizon == 12
