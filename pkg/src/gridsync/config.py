"""Scenario configuration: JSON parsing, validation and canonical form.

Schema (version 1)::

    {
      "schema": 1,
      "network": {
        "buses": [{"f": 1.0}, {"f": 0.25}],
        "edges": [{"from": 0, "to": 1, "b": 1.0}]
      },
      "machine": {"kind": "turbine", "m": 1.0, "d": 1.0, "tau": 1.0, "r_inv": 1.0},
      "disturbance": {"u0": [1.0, 0.0]},
      "simulation": {"horizon": null, "dt": null},
      "output": {"format": "json"}
    }

``disturbance`` may also be a named pattern, either as a bare string or
as ``{"pattern": ...}``: ``single:<bus>:<magnitude>`` or
``proportional:<total>`` (``u0 = total * f / sum(f)``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParameterError
from .machines import MachineKind, MachineParams
from .network import NetworkModel

__all__ = ["ScenarioConfig", "ConfigError", "parse_config", "config_from_dict", "to_canonical", "dumps_canonical"]

SCHEMA_VERSION = 1
FORMATS = ("json", "csv")


class ConfigError(ParameterError):
    """Every schema violation found, each prefixed with its field path."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


@dataclass
class ScenarioConfig:
    network: NetworkModel
    machine: MachineParams
    u0: np.ndarray
    disturbance: object  # list of floats or a pattern string, as given
    horizon: float | None = None
    dt: float | None = None
    output: dict = field(default_factory=lambda: {"format": "json"})

    def with_machine(self, **changes) -> ScenarioConfig:
        return ScenarioConfig(self.network, self.machine.replace(**changes), self.u0,
                              self.disturbance, self.horizon, self.dt, dict(self.output))


def _number(value, path, errors, positive=True, allow_zero=False, required=True):
    if value is None:
        if required:
            errors.append(f"{path}: required")
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        errors.append(f"{path}: must be a finite number, got {value!r}")
        return None
    if positive and (value < 0 or (value == 0 and not allow_zero)):
        errors.append(f"{path}: must be {'>= 0' if allow_zero else '> 0'}, got {value!r}")
        return None
    return float(value)


def _resolve_disturbance(raw, f, errors):
    path = "disturbance"
    if isinstance(raw, dict):
        if "u0" in raw:
            raw, path = raw["u0"], "disturbance.u0"
        elif "pattern" in raw:
            raw, path = raw["pattern"], "disturbance.pattern"
        else:
            errors.append("disturbance: expected 'u0' or 'pattern'")
            return None
    if raw is None:
        errors.append("disturbance: required")
        return None
    n = None if f is None else f.size
    if isinstance(raw, str):
        parts = raw.split(":")
        try:
            if parts[0] == "single" and len(parts) == 3:
                bus, mag = int(parts[1]), float(parts[2])
                if n is not None and not 0 <= bus < n:
                    errors.append(f"{path}: bus {bus} outside 0..{n - 1}")
                    return None
                if n is None:
                    return None
                u0 = np.zeros(n)
                u0[bus] = mag
                return u0
            if parts[0] == "proportional" and len(parts) == 2:
                total = float(parts[1])
                return None if f is None else total * f / f.sum()
        except ValueError:
            pass
        errors.append(f"{path}: unknown pattern {raw!r} (use single:<bus>:<magnitude> or proportional:<total>)")
        return None
    if not isinstance(raw, list):
        errors.append(f"{path}: expected a list of numbers or a pattern string")
        return None
    vals = [_number(v, f"{path}[{i}]", errors, positive=False) for i, v in enumerate(raw)]
    if any(v is None for v in vals):
        return None
    if n is not None and len(vals) != n:
        errors.append(f"{path}: length {len(vals)} does not match the {n} buses")
        return None
    return np.array(vals)


def config_from_dict(data) -> ScenarioConfig:
    errors = []
    if not isinstance(data, dict):
        raise ConfigError(["<root>: expected a JSON object"])
    schema = data.get("schema")
    if schema != SCHEMA_VERSION:
        errors.append(f"schema: expected {SCHEMA_VERSION}, got {schema!r}")

    net = data.get("network")
    f = None
    edges = []
    if not isinstance(net, dict):
        errors.append("network: required object")
    else:
        buses = net.get("buses")
        if not isinstance(buses, list) or not buses:
            errors.append("network.buses: required non-empty list")
        else:
            vals = []
            for i, bus in enumerate(buses):
                if not isinstance(bus, dict):
                    errors.append(f"network.buses[{i}]: expected an object")
                    vals.append(None)
                    continue
                vals.append(_number(bus.get("f"), f"network.buses[{i}].f", errors))
            if all(v is not None for v in vals):
                f = np.array(vals)
                if f.max() > 1.0 + 1e-9:
                    errors.append(f"network.buses: ratings must lie in (0, 1], max is {f.max():g}")
        raw_edges = net.get("edges", [])
        if not isinstance(raw_edges, list):
            errors.append("network.edges: expected a list")
            raw_edges = []
        seen = set()
        nb = len(buses) if isinstance(buses, list) else None
        for k, e in enumerate(raw_edges):
            p = f"network.edges[{k}]"
            if not isinstance(e, dict):
                errors.append(f"{p}: expected an object")
                continue
            ends = []
            for key in ("from", "to"):
                v = e.get(key)
                if isinstance(v, bool) or not isinstance(v, int):
                    errors.append(f"{p}.{key}: required integer bus index")
                elif nb is not None and not 0 <= v < nb:
                    errors.append(f"{p}.{key}: bus {v} outside 0..{nb - 1}")
                else:
                    ends.append(v)
            b = _number(e.get("b"), f"{p}.b", errors)
            if len(ends) == 2:
                i, j = ends
                if i == j:
                    errors.append(f"{p}: self-loop at bus {i}")
                elif (min(i, j), max(i, j)) in seen:
                    errors.append(f"{p}: duplicate edge ({min(i, j)}, {max(i, j)})")
                else:
                    seen.add((min(i, j), max(i, j)))
                    if b is not None:
                        edges.append((i, j, b))

    mach = data.get("machine")
    machine_kw = None
    if not isinstance(mach, dict):
        errors.append("machine: required object")
    else:
        kind = mach.get("kind")
        try:
            kind = MachineKind(kind)
        except ValueError:
            errors.append(f"machine.kind: unknown machine kind {kind!r} (expected 'swing' or 'turbine')")
            kind = None
        m = _number(mach.get("m"), "machine.m", errors)
        d = _number(mach.get("d"), "machine.d", errors)
        tau = r_inv = None
        if kind is MachineKind.TURBINE:
            tau = _number(mach.get("tau"), "machine.tau", errors)
            r_inv = _number(mach.get("r_inv"), "machine.r_inv", errors, allow_zero=True)
        if kind is not None and None not in (m, d) and (kind is MachineKind.SWING or None not in (tau, r_inv)):
            machine_kw = dict(kind=kind, m=m, d=d, tau=tau, r_inv=r_inv)

    u0 = _resolve_disturbance(data.get("disturbance"), f, errors)

    sim = data.get("simulation") or {}
    horizon = dt = None
    if not isinstance(sim, dict):
        errors.append("simulation: expected an object")
    else:
        horizon = _number(sim.get("horizon"), "simulation.horizon", errors, required=False)
        dt = _number(sim.get("dt"), "simulation.dt", errors, required=False)

    out = data.get("output") or {}
    if not isinstance(out, dict):
        errors.append("output: expected an object")
        out = {}
    fmt = out.get("format", "json")
    if fmt not in FORMATS:
        errors.append(f"output.format: expected one of {FORMATS}, got {fmt!r}")

    unknown = set(data) - {"schema", "network", "machine", "disturbance", "simulation", "output"}
    errors.extend(f"{k}: unknown field" for k in sorted(unknown))

    if errors:
        raise ConfigError(errors)
    network = NetworkModel(f.size, edges, f)
    raw = data["disturbance"]
    if isinstance(raw, dict):
        raw = raw.get("u0", raw.get("pattern"))
    return ScenarioConfig(network, MachineParams(**machine_kw), u0, raw, horizon, dt, {"format": fmt})


def parse_config(path) -> ScenarioConfig:
    """Read and validate a scenario file.

    Raises ``OSError``/``json.JSONDecodeError`` for unreadable files and
    :class:`ConfigError` (listing every violation) for schema problems.
    """
    text = Path(path).read_text(encoding="utf-8")
    return config_from_dict(json.loads(text))


def to_canonical(cfg: ScenarioConfig) -> dict:
    p = cfg.machine
    machine = {"kind": p.kind.value, "m": p.m, "d": p.d}
    if p.kind is MachineKind.TURBINE:
        machine.update(tau=p.tau, r_inv=p.r_inv)
    dist = cfg.disturbance
    disturbance = {"pattern": dist} if isinstance(dist, str) else {"u0": [float(v) for v in cfg.u0]}
    return {
        "schema": SCHEMA_VERSION,
        "network": {
            "buses": [{"f": float(v)} for v in cfg.network.ratings],
            "edges": [{"from": i, "to": j, "b": b} for i, j, b in cfg.network.edges],
        },
        "machine": machine,
        "disturbance": disturbance,
        "simulation": {"horizon": cfg.horizon, "dt": cfg.dt},
        "output": dict(cfg.output),
    }


def dumps_canonical(cfg: ScenarioConfig) -> str:
    return json.dumps(to_canonical(cfg), indent=2) + "\n"

