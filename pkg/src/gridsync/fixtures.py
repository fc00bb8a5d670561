"""Seeded random scenarios for property checks and verification sweeps."""

from __future__ import annotations

import numpy as np

from .machines import MachineKind, MachineParams, classify_damping
from .network import NetworkModel

__all__ = ["random_network", "random_machine", "random_disturbance", "underdamped_m_range"]


def random_network(rng: np.random.Generator, n_range=(3, 12), b_range=(0.5, 5.0),
                   f_range=(0.1, 1.0), extra_edge_prob=0.3) -> NetworkModel:
    """Connected graph: a random spanning tree plus independent extra edges.

    One bus is pinned at rating 1 (largest-machine normalization).
    """
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    order = rng.permutation(n)
    pairs = set()
    for k in range(1, n):
        a, b = int(order[k]), int(order[rng.integers(0, k)])
        pairs.add((min(a, b), max(a, b)))
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in pairs and rng.random() < extra_edge_prob:
                pairs.add((i, j))
    edges = [(i, j, float(rng.uniform(*b_range))) for i, j in sorted(pairs)]
    f = rng.uniform(*f_range, size=n)
    f[rng.integers(0, n)] = 1.0
    return NetworkModel(n, edges, f)


def random_machine(rng: np.random.Generator, kind, m_range=(0.2, 5.0), d_range=(0.2, 5.0),
                   tau_range=(0.2, 5.0), r_range=(0.2, 5.0), underdamped: bool = False,
                   min_omega_d_sq: float = 1e-3, max_tries: int = 10_000) -> MachineParams:
    """Uniform draw; with ``underdamped=True`` turbine draws are rejection-sampled."""
    kind = MachineKind(kind)
    for _ in range(max_tries):
        m, d = rng.uniform(*m_range), rng.uniform(*d_range)
        if kind is MachineKind.SWING:
            return MachineParams(kind, m, d)
        p = MachineParams(kind, m, d, rng.uniform(*tau_range), rng.uniform(*r_range))
        if not underdamped or classify_damping(p).omega_d_sq > min_omega_d_sq:
            return p
    raise RuntimeError("no under-damped draw found in the given ranges")


def random_disturbance(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.normal(size=n)


def underdamped_m_range(d: float, tau: float, r_inv: float) -> tuple[float, float]:
    """Open interval of inertia values for which the turbine machine is under-damped.

    Solves ``omega_d^2 > 0`` for ``m``:
    ``m^2 - 2 tau (d + 2 r_inv) m + (d tau)^2 < 0``.
    """
    c = d + 2 * r_inv
    half_width = 2 * np.sqrt(r_inv * (d + r_inv))
    return tau * (c - half_width), tau * (c + half_width)
