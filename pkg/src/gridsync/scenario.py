"""Scenario-level drivers behind the command line: analyze, verify, sweep.

Each driver returns plain dicts/lists ready for serialization.  Closed
forms are used wherever they exist; otherwise the simulation oracle fills
in and the field is tagged accordingly.
"""

from __future__ import annotations

import math

import numpy as np

from .config import ScenarioConfig
from .errors import NeedsSimulation, ParameterError
from .machines import MachineKind, classify_damping
from .metrics import (
    SigmaU,
    cost_matrix,
    mean_sync_cost,
    nadir,
    rocof,
    steady_state_frequency,
    sync_cost,
)
from .network import Spectrum, decompose
from .simulate import simulate_metrics, simulated_cost_gram

__all__ = ["analyze_scenario", "verify_scenario", "sweep_scenario", "spectrum_summary",
           "THRESHOLDS", "MONOTONE"]

MONOTONE = "none (monotone)"

# relative pass thresholds for closed form vs oracle
THRESHOLDS = {
    "w_inf": 1e-4,
    "nadir": 1e-3,
    "t_nadir": 1e-3,
    "rocof": 1e-3,
    "sync_cost": 1e-2,
    "mean_cost": 2e-2,
}


def _damping_dict(cfg: ScenarioConfig):
    if cfg.machine.kind is not MachineKind.TURBINE:
        return None
    prof = classify_damping(cfg.machine)
    out = {"underdamped": prof.underdamped, "eta": prof.eta, "omega_d": prof.omega_d, "phi": prof.phi}
    if prof.note:
        out["note"] = prof.note
    return out


def _closed_form(cfg: ScenarioConfig, spec: Spectrum) -> dict:
    """Closed-form values; entries without a closed form are None."""
    p, f, u0 = cfg.machine, cfg.network.ratings, cfg.u0
    out = {
        "w_inf": steady_state_frequency(p, f, u0),
        "sync_cost": sync_cost(spec, p, u0),
    }
    try:
        nd = nadir(p, f, u0)
        out["nadir"], out["t_nadir"] = nd.value, nd.t_nadir
    except NeedsSimulation:
        out["nadir"] = out["t_nadir"] = None
    try:
        out["rocof"] = rocof(p, f, u0)
    except NeedsSimulation:
        out["rocof"] = None
    return out


def analyze_scenario(cfg: ScenarioConfig, spec: Spectrum | None = None) -> dict:
    spec = spec or decompose(cfg.network)
    cf = _closed_form(cfg, spec)
    fallback = cf["nadir"] is None or cf["rocof"] is None
    sim = simulate_metrics(cfg.network, cfg.machine, cfg.u0, cfg.horizon, cfg.dt) if fallback else None

    def field(name):
        if cf[name] is not None or (name == "t_nadir" and cf["nadir"] is not None):
            value, method = cf[name], "closed_form"
        else:
            value, method = getattr(sim, name), "simulated_fallback"
        return {"value": MONOTONE if value is None else value, "method": method}

    return {
        "schema": 1,
        "machine": cfg.machine.kind.value,
        "w_inf": field("w_inf"),
        "nadir": field("nadir"),
        "t_nadir": field("t_nadir"),
        "rocof": field("rocof"),
        "sync_cost": field("sync_cost"),
        "nadir_method": "closed_form" if cf["nadir"] is not None else "simulated_fallback",
        "damping": _damping_dict(cfg),
        "spectrum": {"lambdas": spec.lambdas.tolist()},
    }


def _rel_error(closed, simulated, floor=0.0):
    """Relative error; ``floor`` bounds the denominator for values at roundoff level."""
    denom = max(abs(closed), floor)
    if denom == 0:
        return abs(simulated)
    return abs(closed - simulated) / denom


def verify_scenario(cfg: ScenarioConfig, spectrum_hook=None, mc_samples: int = 0,
                    seed: int | None = None) -> list[dict]:
    """Compare every closed-form metric against the simulation oracle.

    ``spectrum_hook`` may replace the spectrum before the closed forms are
    evaluated (used to inject faults in tests).  With ``mc_samples > 0``
    the mean costs are also checked by Monte Carlo over random disturbances,
    each costed with the simulated quadratic form.
    """
    spec = decompose(cfg.network)
    if spectrum_hook is not None:
        spec = spectrum_hook(spec)
    cf = _closed_form(cfg, spec)
    sim = simulate_metrics(cfg.network, cfg.machine, cfg.u0, cfg.horizon, cfg.dt)
    # cost scale: ||Y|| * ||F^{-1/2} u0||^2 bounds z0^T Y z0 for any direction of u0
    Y = cost_matrix(spec, cfg.machine).Y
    y_norm = float(np.linalg.norm(Y, 2)) if Y.size else 0.0
    cost_floor = 1e-12 * y_norm * float(np.sum(cfg.u0**2 / cfg.network.ratings))
    rows = []
    for name in ("w_inf", "nadir", "t_nadir", "rocof", "sync_cost"):
        s = getattr(sim, name)
        c = cf[name]
        row = {"metric": name, "closed_form": c, "simulated": s, "rel_error": None, "pass": None}
        if name in ("nadir", "t_nadir", "rocof") and cf[name if name != "t_nadir" else "nadir"] is None:
            row["status"] = "simulated-only"
        elif name == "t_nadir" and (c is None or s is None):
            row["pass"] = c is None and s is None
            row["status"] = "monotone" if row["pass"] else "mismatch"
        else:
            row["rel_error"] = _rel_error(c, s, cost_floor if name == "sync_cost" else 0.0)
            row["pass"] = row["rel_error"] <= THRESHOLDS[name]
        rows.append(row)

    if mc_samples > 0:
        rng = np.random.default_rng(seed)
        G = simulated_cost_gram(cfg.network, cfg.machine, cfg.horizon)
        f = cfg.network.ratings
        scales = {SigmaU.IDENTITY: np.ones_like(f), SigmaU.F: np.sqrt(f), SigmaU.F_SQUARED: f}
        for sigma, scale in scales.items():
            U = rng.normal(size=(mc_samples, f.size)) * scale
            mc = float(np.mean(np.einsum("si,ij,sj->s", U, G, U)))
            c = mean_sync_cost(spec, cfg.machine, sigma)
            err = _rel_error(c, mc)
            rows.append({"metric": f"mean_cost[{sigma.value}]", "closed_form": c, "simulated": mc,
                         "rel_error": err, "pass": err <= THRESHOLDS["mean_cost"]})
    return rows


def rows_pass(rows) -> bool:
    return all(r["pass"] is not False for r in rows)


SWEEP_PARAMS = ("m", "d", "tau", "r_inv")


def sweep_values(start: float, stop: float, points: int, log: bool) -> np.ndarray:
    if points < 2:
        raise ParameterError("a sweep needs at least 2 points")
    if not (math.isfinite(start) and math.isfinite(stop)) or start <= 0 or stop <= 0:
        raise ParameterError(f"sweep range [{start}, {stop}] crosses the invalid region (<= 0)")
    return np.geomspace(start, stop, points) if log else np.linspace(start, stop, points)


def sweep_scenario(cfg: ScenarioConfig, param: str, start: float, stop: float, points: int,
                   log: bool = False) -> list[dict]:
    """Metrics along a one-parameter sweep of the representative machine."""
    if param not in SWEEP_PARAMS:
        raise ParameterError(f"unknown sweep parameter {param!r}")
    if param in ("tau", "r_inv") and cfg.machine.kind is MachineKind.SWING:
        raise ParameterError(f"{param} is not a parameter of the swing model")
    spec = decompose(cfg.network)
    rows = []
    for value in sweep_values(start, stop, points, log):
        scen = cfg.with_machine(**{param: float(value)})
        report = analyze_scenario(scen, spec)
        damping = report["damping"]
        rows.append({
            "param_value": float(value),
            "w_inf": report["w_inf"]["value"],
            "nadir": report["nadir"]["value"],
            "rocof": report["rocof"]["value"],
            "sync_cost": report["sync_cost"]["value"],
            "underdamped": None if damping is None else damping["underdamped"],
        })
    return rows


def spectrum_summary(cfg: ScenarioConfig) -> dict:
    spec = decompose(cfg.network)
    return {
        "lambdas": spec.lambdas.tolist(),
        "alpha_F": spec.alpha_F,
        "v0": spec.v0.tolist(),
        "gamma": spec.gamma.tolist(),
        "repeated_eigenvalues": spec.has_repeated_eigenvalues(),
    }
