import copy
import json

import numpy as np
import pytest

from gridsync.config import ConfigError, config_from_dict, dumps_canonical, parse_config, to_canonical
from gridsync.machines import MachineKind

MINIMAL = {
    "schema": 1,
    "network": {"buses": [{"f": 1.0}, {"f": 0.25}], "edges": [{"from": 0, "to": 1, "b": 1.0}]},
    "machine": {"kind": "swing", "m": 1.0, "d": 1.0},
    "disturbance": {"u0": [1.0, 0.0]},
}


def with_changes(**paths):
    data = copy.deepcopy(MINIMAL)
    for path, value in paths.items():
        node = data
        keys = path.split("__")
        for key in keys[:-1]:
            node = node[int(key)] if key.isdigit() else node[key]
        last = keys[-1]
        if value is KeyError:
            del node[last]
        else:
            node[int(last) if last.isdigit() else last] = value
    return data


def errors_of(data):
    with pytest.raises(ConfigError) as info:
        config_from_dict(data)
    return info.value.errors


def test_minimal_parses():
    cfg = config_from_dict(MINIMAL)
    assert cfg.network.n == 2
    assert cfg.machine.kind is MachineKind.SWING
    np.testing.assert_array_equal(cfg.u0, [1.0, 0.0])
    assert cfg.horizon is None and cfg.dt is None
    assert cfg.output == {"format": "json"}


def test_zero_rating_names_field():
    errs = errors_of(with_changes(network__buses__1__f=0.0))
    assert any(e.startswith("network.buses[1].f") for e in errs)


def test_collects_every_error():
    data = with_changes(network__buses__0__f=-1.0, machine__kind="diesel", schema=2)
    data["surprise"] = True
    errs = errors_of(data)
    assert any(e.startswith("network.buses[0].f") for e in errs)
    assert any("unknown machine kind" in e for e in errs)
    assert any(e.startswith("schema") for e in errs)
    assert "surprise: unknown field" in errs


@pytest.mark.parametrize("change, fragment", [
    (dict(machine__m=KeyError), "machine.m: required"),
    (dict(machine__d="1"), "machine.d: must be a finite number"),
    (dict(disturbance={"u0": [1.0]}), "does not match the 2 buses"),
    (dict(disturbance={"u0": [1.0, "x"]}), "disturbance.u0[1]"),
    (dict(disturbance={"other": 1}), "expected 'u0' or 'pattern'"),
    (dict(disturbance="single:7:1.0"), "outside 0..1"),
    (dict(disturbance="spike"), "unknown pattern"),
    (dict(network__edges=[{"from": 0, "to": 0, "b": 1.0}]), "self-loop"),
    (dict(network__edges=[{"from": 0, "to": 1, "b": 1.0}, {"from": 1, "to": 0, "b": 2.0}]), "duplicate edge"),
    (dict(network__edges=[{"from": 0, "to": 3, "b": 1.0}]), "network.edges[0].to"),
    (dict(network__edges=[{"from": 0, "to": 1, "b": 0.0}]), "network.edges[0].b"),
    (dict(network__buses=[{"f": 1.0}, {"f": 1.5}]), "ratings must lie in (0, 1]"),
    (dict(output={"format": "xml"}), "output.format"),
    (dict(simulation={"dt": -0.1}), "simulation.dt"),
])
def test_error_paths(change, fragment):
    assert any(fragment in e for e in errors_of(with_changes(**change)))


def test_turbine_needs_tau():
    data = with_changes(machine={"kind": "turbine", "m": 1.0, "d": 1.0, "r_inv": 1.0})
    assert "machine.tau: required" in errors_of(data)


def test_turbine_allows_zero_droop():
    cfg = config_from_dict(with_changes(machine={"kind": "turbine", "m": 1.0, "d": 1.0, "tau": 1.0, "r_inv": 0.0}))
    assert cfg.machine.r_inv == 0.0


def test_root_must_be_object():
    with pytest.raises(ConfigError):
        config_from_dict([1, 2])


class TestPatterns:
    def test_single(self):
        cfg = config_from_dict(with_changes(disturbance="single:1:-0.5"))
        np.testing.assert_array_equal(cfg.u0, [0.0, -0.5])

    def test_proportional(self):
        cfg = config_from_dict(with_changes(disturbance={"pattern": "proportional:2.5"}))
        np.testing.assert_allclose(cfg.u0, [2.0, 0.5])

    def test_pattern_survives_round_trip(self):
        cfg = config_from_dict(with_changes(disturbance="proportional:1"))
        assert to_canonical(cfg)["disturbance"] == {"pattern": "proportional:1"}


@pytest.mark.parametrize("data", [
    MINIMAL,
    with_changes(machine={"kind": "turbine", "m": 2.0, "d": 1.0, "tau": 0.5, "r_inv": 3.0},
                 simulation={"horizon": 30.0, "dt": 0.01}, output={"format": "csv"}),
    with_changes(disturbance="single:0:1"),
])
def test_round_trip_idempotent(data):
    once = dumps_canonical(config_from_dict(data))
    twice = dumps_canonical(config_from_dict(json.loads(once)))
    assert once == twice


def test_parse_file(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(MINIMAL))
    assert parse_config(path).network.n == 2
    with pytest.raises(OSError):
        parse_config(tmp_path / "missing.json")
