import csv
import io
import json
import math
import pathlib
import subprocess
import sys

import numpy as np
import pytest

import gridsync.cli as cli
from gridsync.config import config_from_dict
from gridsync.network import Spectrum
from gridsync.scenario import MONOTONE, rows_pass, verify_scenario


def scenario(machine, buses=(1.0, 0.25), edges=((0, 1, 1.0),), disturbance=(1.0, 0.0), **extra):
    data = {
        "schema": 1,
        "network": {"buses": [{"f": f} for f in buses],
                    "edges": [{"from": i, "to": j, "b": b} for i, j, b in edges]},
        "machine": machine,
        "disturbance": {"u0": list(disturbance)} if not isinstance(disturbance, str) else disturbance,
    }
    data.update(extra)
    return data


SWING = {"kind": "swing", "m": 1.0, "d": 1.0}
TURBINE = {"kind": "turbine", "m": 1.0, "d": 1.0, "tau": 1.0, "r_inv": 1.0}
OVERDAMPED = {"kind": "turbine", "m": 10.0, "d": 1.0, "tau": 1.0, "r_inv": 1.0}


@pytest.fixture
def write(tmp_path):
    def _write(data, name="scenario.json"):
        path = tmp_path / name
        path.write_text(data if isinstance(data, str) else json.dumps(data))
        return str(path)
    return _write


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


class TestAnalyze:
    def test_two_bus_golden(self, write, capsys):
        code, out, _ = run(["analyze", write(scenario(SWING))], capsys)
        assert code == 0
        rep = json.loads(out)
        assert rep["sync_cost"]["value"] == pytest.approx(0.068, rel=1e-2)
        assert rep["rocof"]["value"] == pytest.approx(0.8)
        assert rep["w_inf"]["value"] == pytest.approx(0.8)
        assert rep["t_nadir"]["value"] == MONOTONE
        assert rep["nadir_method"] == "closed_form"

    def test_single_turbine_golden(self, write, capsys):
        data = scenario(TURBINE, buses=[1.0], edges=[], disturbance=[1.0])
        code, out, _ = run(["analyze", write(data)], capsys)
        rep = json.loads(out)
        assert code == 0
        assert rep["nadir"]["value"] == pytest.approx(0.60394, rel=1e-3)
        assert rep["t_nadir"]["value"] == pytest.approx(math.pi / 2, rel=1e-3)
        assert rep["damping"]["underdamped"] is True

    def test_overdamped_fallback(self, write, capsys):
        code, out, _ = run(["analyze", write(scenario(OVERDAMPED))], capsys)
        rep = json.loads(out)
        assert code == 0
        assert rep["nadir_method"] == "simulated_fallback"
        assert rep["nadir"]["method"] == "simulated_fallback"
        assert rep["sync_cost"]["method"] == "closed_form"
        assert rep["nadir"]["value"] == pytest.approx(rep["w_inf"]["value"], rel=1e-9)  # monotone response

    def test_byte_identical(self, write, capsys, tmp_path):
        path = write(scenario(TURBINE))
        first = run(["analyze", path], capsys)[1]
        second = run(["analyze", path], capsys)[1]
        assert first == second
        out = tmp_path / "report.json"
        assert cli.main(["analyze", path, "--out", str(out)]) == 0
        assert out.read_text() == first

    def test_csv(self, write, capsys):
        code, out, _ = run(["analyze", write(scenario(SWING)), "--format", "csv"], capsys)
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0
        assert [r["metric"] for r in rows] == ["w_inf", "nadir", "t_nadir", "rocof", "sync_cost"]
        assert float(rows[0]["value"]) == pytest.approx(0.8)

    def test_format_from_config(self, write, capsys):
        code, out, _ = run(["analyze", write(scenario(SWING, output={"format": "csv"}))], capsys)
        assert out.startswith("metric,value,method")


class TestExitCodes:
    def test_disconnected_is_domain_error(self, write, capsys):
        data = scenario(SWING, buses=[1.0, 1.0, 1.0], edges=[(0, 1, 1.0)], disturbance=[1, 0, 0])
        code, _, err = run(["analyze", write(data)], capsys)
        assert code == 2
        assert "disconnected" in err

    def test_invalid_parameter_is_domain_error(self, write, capsys):
        bad = scenario({"kind": "swing", "m": -1.0, "d": 1.0})
        code, _, err = run(["analyze", write(bad)], capsys)
        assert code == 2
        assert "machine.m" in err

    def test_missing_file_is_usage_error(self, tmp_path, capsys):
        assert run(["analyze", str(tmp_path / "nope.json")], capsys)[0] == 1

    def test_bad_json_is_usage_error(self, write, capsys):
        assert run(["analyze", write("{not json")], capsys)[0] == 1

    def test_bad_arguments(self, write, capsys):
        with pytest.raises(SystemExit) as info:
            cli.main(["frobnicate"])
        assert info.value.code == 1
        with pytest.raises(SystemExit) as info:
            cli.main(["sweep", write(scenario(SWING)), "--param", "m"])
        assert info.value.code == 1

    def test_entry_point(self, write):
        proc = subprocess.run([sys.executable, "-m", "gridsync", "spectrum", write(scenario(SWING))],
                              capture_output=True, text=True, check=False)
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["lambdas"] == pytest.approx([0.0, 5.0])


class TestVerify:
    def test_underdamped_all_pass(self, write, capsys):
        code, out, _ = run(["verify", write(scenario(TURBINE, disturbance=[1.0, -0.4]))], capsys)
        rep = json.loads(out)
        assert code == 0
        assert rep["all_pass"] is True
        assert {r["metric"] for r in rep["rows"]} == {"w_inf", "nadir", "t_nadir", "rocof", "sync_cost"}

    def test_swing_monotone_row(self, write, capsys):
        code, out, _ = run(["verify", write(scenario(SWING))], capsys)
        rows = {r["metric"]: r for r in json.loads(out)["rows"]}
        assert code == 0
        assert rows["t_nadir"]["status"] == "monotone"

    def test_overdamped_marks_simulated_only(self, write, capsys):
        code, out, _ = run(["verify", write(scenario(OVERDAMPED)), "--format", "csv"], capsys)
        rows = {r["metric"]: r for r in csv.DictReader(io.StringIO(out))}
        assert code == 0
        assert rows["nadir"]["status"] == "simulated-only"
        assert rows["nadir"]["pass"] == ""
        assert rows["sync_cost"]["pass"] == "true"

    def test_monte_carlo_rows(self, write, capsys):
        path = write(scenario(SWING, buses=[1, 1, 1], edges=[(0, 1, 1), (0, 2, 1), (1, 2, 1)],
                              disturbance=[1, 0, 0]))
        code, out, _ = run(["verify", path, "--mc-samples", "20000", "--seed", "3"], capsys)
        rows = {r["metric"]: r for r in json.loads(out)["rows"]}
        assert code == 0
        assert rows["mean_cost[identity]"]["closed_form"] == pytest.approx(1 / 3)

    @staticmethod
    def tamper(spec):
        lam = spec.lambdas.copy()
        lam[1:] *= 1.05
        return Spectrum(lam, spec.v0, spec.V_perp, spec.gamma, spec.alpha_F, spec.ratings)

    def test_tampered_spectrum_is_caught(self):
        cfg = config_from_dict(scenario(SWING))
        rows = verify_scenario(cfg, spectrum_hook=self.tamper)
        assert not rows_pass(rows)
        failed = {r["metric"] for r in rows if r["pass"] is False}
        assert failed == {"sync_cost"}

    def test_tampered_spectrum_exit_code(self, write, capsys, monkeypatch):
        real = cli.verify_scenario
        monkeypatch.setattr(cli, "verify_scenario", lambda cfg, **kw: real(cfg, spectrum_hook=self.tamper, **kw))
        code, _, err = run(["verify", write(scenario(SWING))], capsys)
        assert code == 3
        assert "sync_cost" in err


class TestSweep:
    def test_turbine_nadir_decreasing(self, write, capsys):
        argv = ["sweep", write(scenario(TURBINE)), "--param", "m", "--from", "0.5", "--to", "5",
                "--points", "20", "--log"]
        code, out, _ = run(argv, capsys)
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0
        assert len(rows) == 20
        nadirs = np.array([float(r["nadir"]) for r in rows])
        assert np.all(np.diff(nadirs) < 0)
        assert all(r["underdamped"] == "true" for r in rows)
        ms = np.array([float(r["param_value"]) for r in rows])
        np.testing.assert_allclose(ms, np.geomspace(0.5, 5, 20), rtol=1e-14)

    def test_swing_w_inf_constant(self, write, capsys):
        argv = ["sweep", write(scenario(SWING)), "--param", "m", "--from", "0.1", "--to", "10",
                "--points", "7", "--format", "json"]
        code, out, _ = run(argv, capsys)
        rows = json.loads(out)
        assert code == 0
        assert len({r["w_inf"] for r in rows}) == 1
        assert rows[0]["underdamped"] is None

    @pytest.mark.parametrize("extra", [
        ["--param", "m", "--from", "-1", "--to", "5", "--points", "5"],
        ["--param", "m", "--from", "1", "--to", "5", "--points", "1"],
        ["--param", "tau", "--from", "1", "--to", "5", "--points", "5"],
    ])
    def test_rejected_sweeps(self, write, capsys, extra):
        assert run(["sweep", write(scenario(SWING)), *extra], capsys)[0] == 2

    def test_sweep_crossing_into_overdamped(self, write, capsys):
        argv = ["sweep", write(scenario(TURBINE)), "--param", "m", "--from", "1", "--to", "10",
                "--points", "4", "--format", "json"]
        code, out, _ = run(argv, capsys)
        rows = json.loads(out)
        assert code == 0
        assert rows[0]["underdamped"] is True and rows[-1]["underdamped"] is False


class TestSimulateAndSpectrum:
    def test_trajectory_csv(self, write, capsys):
        code, out, _ = run(["simulate", write(scenario(SWING)), "--horizon", "5", "--dt", "0.01"], capsys)
        rows = list(csv.reader(io.StringIO(out)))
        assert code == 0
        assert rows[0] == ["t", "w_1", "w_2", "wbar", "wtilde_1", "wtilde_2"]
        assert len(rows) == 502
        assert float(rows[-1][3]) == pytest.approx(0.8 * (1 - math.exp(-5)), rel=1e-12)

    def test_measured_json(self, write, capsys):
        code, out, _ = run(["simulate", write(scenario(SWING)), "--format", "json"], capsys)
        rep = json.loads(out)
        assert code == 0
        assert rep["method"] == "simulated"
        assert rep["sync_cost"] == pytest.approx(0.068, rel=1e-3)

    def test_spectrum(self, write, capsys):
        code, out, _ = run(["spectrum", write(scenario(SWING))], capsys)
        rep = json.loads(out)
        assert code == 0
        assert rep["gamma"] == [[pytest.approx(3.4)]]
        assert rep["repeated_eigenvalues"] is False

    def test_spectrum_csv(self, write, capsys):
        code, out, _ = run(["spectrum", write(scenario(SWING)), "--format", "csv"], capsys)
        assert out.splitlines() == ["k,lambda", "0,0", "1,5"]


SCENARIOS = sorted((pathlib.Path(__file__).parents[1] / "scenarios").glob("*.json"))


@pytest.mark.parametrize("path", SCENARIOS, ids=lambda p: p.stem)
def test_bundled_scenarios_verify(path, capsys):
    code, _, err = run(["verify", str(path)], capsys)
    assert code == 0, err
