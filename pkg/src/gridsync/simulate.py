"""Time-domain oracle built from the undiagonalized coupled system.

Every bus carries its own machine states (angle, frequency[, turbine
power]) with parameters scaled by its rating, and buses interact only
through ``p^e = L theta``.  The step response is propagated with exact
matrix exponentials, so the sample spacing only matters for the
quadrature of the L2 cost and for locating extrema.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.optimize import linear_sum_assignment, minimize_scalar

from .errors import ParameterError, TailNotConvergedError, UnstableSystemError
from .machines import MachineKind, MachineParams, closed_loop_mode, representative_machine
from .metrics import MetricsReport
from .network import NetworkModel, Spectrum, build_laplacian

__all__ = [
    "CoupledSystem",
    "Trajectory",
    "assemble",
    "step_response",
    "measure",
    "simulate_metrics",
    "simulated_cost_gram",
    "modal_poles",
    "match_poles",
    "write_trajectory_csv",
]

POINTS_PER_PERIOD = 200
MODE_DECAY = math.log(1e10)  # a mode is negligible once e^{-sigma t} < 1e-10
MAX_HORIZON = 1e4
HORIZON_TIME_CONSTANTS = 60.0
ROCOF_T0 = 1e-6


@dataclass(frozen=True)
class CoupledSystem:
    """``x' = A_full x + B_full u``, bus frequencies ``w = C_freq x``.

    States are grouped per bus: ``(theta_i, w_i[, q_i])``.
    """

    A_full: np.ndarray
    B_full: np.ndarray
    C_freq: np.ndarray
    n: int
    n_x: int
    kind: MachineKind
    ratings: np.ndarray

    def poles(self) -> np.ndarray:
        return np.linalg.eigvals(self.A_full)

    def nonzero_poles(self) -> np.ndarray:
        """Eigenvalues with the single angle-drift zero removed."""
        ev = self.poles()
        return np.delete(ev, np.argmin(np.abs(ev)))


@dataclass
class Trajectory:
    """Sampled step response; ``w`` and ``wtilde`` have shape ``(n, len(t))``."""

    t: np.ndarray
    w: np.ndarray
    wbar: np.ndarray
    wtilde: np.ndarray
    x: np.ndarray
    system: CoupledSystem
    u0: np.ndarray

    @property
    def wbar_rate(self) -> np.ndarray:
        return _wbar_rate(self.system, self.x, self.u0)


def assemble(model: NetworkModel, p: MachineParams) -> CoupledSystem:
    f = model.ratings
    n, nx = model.n, p.order
    L = build_laplacian(model)
    N = n * nx
    A = np.zeros((N, N))
    B = np.zeros((N, n))
    C = np.zeros((n, N))
    for i in range(n):
        th, w = nx * i, nx * i + 1
        m_i, d_i = f[i] * p.m, f[i] * p.d
        A[th, w] = 1.0
        A[w, w] = -d_i / m_i
        for j in range(n):
            A[w, nx * j] -= L[i, j] / m_i
        if p.kind is MachineKind.TURBINE:
            q = nx * i + 2
            A[w, q] = 1.0 / m_i
            A[q, w] = -f[i] * p.r_inv / p.tau
            A[q, q] = -1.0 / p.tau
        B[w, i] = 1.0 / m_i
        C[i, w] = 1.0
    return CoupledSystem(A, B, C, n, nx, p.kind, f.copy())


def _stable_rates(sys: CoupledSystem) -> np.ndarray:
    ev = sys.nonzero_poles()
    scale = max(1.0, float(np.max(np.abs(ev)))) if ev.size else 1.0
    if ev.size and np.any(ev.real >= -1e-12 * scale):
        worst = ev[np.argmax(ev.real)]
        raise UnstableSystemError(f"assembled system has a non-decaying mode at {worst:.6g}")
    return ev


def default_horizon(sys: CoupledSystem) -> float:
    ev = _stable_rates(sys)
    if ev.size == 0:
        return 1.0
    horizon = HORIZON_TIME_CONSTANTS / float(np.min(-ev.real))
    if horizon > MAX_HORIZON:
        warnings.warn(f"default horizon {horizon:.4g} s capped at {MAX_HORIZON:g} s", stacklevel=3)
        horizon = MAX_HORIZON
    return horizon


def _segments(poles: np.ndarray, horizon: float):
    """Piecewise-uniform sampling ``[(t_start, dt, steps), ...]``.

    The step doubles each time the fastest still-active mode decays below
    the resolution threshold.
    """
    rates = -poles.real
    mags = np.abs(poles)
    t_dead = MODE_DECAY / rates
    target = 2 * math.pi / POINTS_PER_PERIOD
    dt_max = horizon / 2000.0
    dt = min(target / float(mags.max()), dt_max) if mags.size else dt_max
    segs, t = [], 0.0
    while t < horizon * (1 - 1e-12):
        # stay at this step until every mode too fast for 2*dt has died out
        needs_dt = mags * (2 * dt) > target
        if 2 * dt > dt_max:
            t_end = horizon
        else:
            t_end = min(float(t_dead[needs_dt].max()), horizon) if np.any(needs_dt) else t
        if t_end > t:
            steps = int(math.ceil((t_end - t) / dt - 1e-9))
            segs.append((t, dt, steps))
            t += steps * dt
        dt = min(2 * dt, dt_max)
    return segs


def _augmented(sys: CoupledSystem, u0: np.ndarray) -> np.ndarray:
    N = sys.A_full.shape[0]
    M = np.zeros((N + 1, N + 1))
    M[:N, :N] = sys.A_full
    M[:N, N] = sys.B_full @ u0
    return M


def _propagate(Phi: np.ndarray, y0: np.ndarray, steps: int, block: int = 256) -> np.ndarray:
    K = min(steps, block)
    P = np.empty((K,) + Phi.shape)
    P[0] = Phi
    for k in range(1, K):
        P[k] = P[k - 1] @ Phi
    out = np.empty((steps, y0.size))
    y = y0
    for start in range(0, steps, K):
        c = min(K, steps - start)
        out[start:start + c] = P[:c] @ y
        y = out[start + c - 1]
    return out


def _wbar(sys: CoupledSystem, x: np.ndarray) -> np.ndarray:
    f = sys.ratings
    return (f @ (sys.C_freq @ x.T)) / f.sum()


def _wbar_rate(sys: CoupledSystem, x: np.ndarray, u0: np.ndarray) -> np.ndarray:
    f = sys.ratings
    xdot = x @ sys.A_full.T + sys.B_full @ u0
    return (f @ (sys.C_freq @ xdot.T)) / f.sum()


def step_response(sys: CoupledSystem, u0, horizon: float | None = None,
                  dt: float | None = None) -> Trajectory:
    """Response to ``u(t) = u0`` for ``t >= 0`` from the zero state.

    With ``dt`` given the grid is uniform; otherwise the spacing adapts to
    the modes still alive at each time.
    """
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (sys.n,):
        raise ParameterError(f"disturbance must have length {sys.n}")
    ev = _stable_rates(sys)
    if horizon is None:
        horizon = default_horizon(sys)
    if horizon <= 0:
        raise ParameterError("horizon must be positive")

    if dt is not None:
        if dt <= 0:
            raise ParameterError("dt must be positive")
        fastest = float(np.max(np.abs(ev))) if ev.size else 0.0
        if fastest and dt > (2 * math.pi / fastest) / 20:
            raise ParameterError(
                f"dt={dt:g} too coarse for the fastest pole (|p|={fastest:.4g}); "
                f"use dt <= {(2 * math.pi / fastest) / 20:.4g}"
            )
        segs = [(0.0, dt, int(math.ceil(horizon / dt - 1e-9)))]
    else:
        segs = _segments(ev, horizon)

    M = _augmented(sys, u0)
    N = sys.A_full.shape[0]
    y = np.zeros(N + 1)
    y[N] = 1.0
    ts, ys = [np.zeros(1)], [y[None, :]]
    for t0, h, steps in segs:
        block = _propagate(expm(M * h), y, steps)
        ts.append(t0 + h * np.arange(1, steps + 1))
        ys.append(block)
        y = block[-1]
    t = np.concatenate(ts)
    x = np.concatenate(ys)[:, :N]
    w = sys.C_freq @ x.T
    wbar = _wbar(sys, x)
    return Trajectory(t, w, wbar, w - wbar[None, :], x, sys, u0)


def _state_at(M: np.ndarray, y0: np.ndarray, s: float) -> np.ndarray:
    return expm(M * s) @ y0


def measure(traj: Trajectory) -> MetricsReport:
    """Empirical metrics of a simulated step response.

    * ``nadir``: max of ``|wbar|``, with the argmax refined between
      neighbouring samples by exact propagation.
    * ``rocof``: max of ``|d wbar/dt|`` over the samples, a geometric grid
      accumulating at ``t = 0`` and the right limit at ``0+``.
    * ``sync_cost``: trapezoid integral of ``|wtilde|^2`` plus an
      exponential tail bound from the slowest mode.
    """
    sys, u0, t = traj.system, traj.u0, traj.t
    N = sys.A_full.shape[0]
    M = _augmented(sys, u0)
    ev = sys.nonzero_poles()

    wt2 = np.sum(traj.wtilde**2, axis=0)
    peak = float(np.sqrt(wt2.max()))
    end = float(np.sqrt(wt2[-1]))
    sigma = float(np.min(-ev.real)) if ev.size else 1.0
    noise = 1e-9 * float(np.max(np.abs(traj.w), initial=0.0))
    if peak > noise and end >= max(1e-4 * peak, noise):
        need = t[-1] + math.log(end / (1e-5 * peak)) / sigma
        raise TailNotConvergedError(
            f"tail not converged: |wtilde(T)| = {end:.3g} vs peak {peak:.3g}; "
            f"try horizon >= {need:.4g} s",
            suggested_horizon=need,
        )
    cost = float(np.trapezoid(wt2, t) + wt2[-1] / (2 * sigma))

    # nadir
    absw = np.abs(traj.wbar)
    j = int(np.argmax(absw))
    if absw[j] == 0.0:
        nadir, t_nadir = 0.0, None
    elif j == len(t) - 1 or absw[j] <= absw[-1] * (1 + 1e-9):
        nadir, t_nadir = float(absw[-1]), None
    else:
        lo, hi = t[max(j - 1, 0)], t[min(j + 1, len(t) - 1)]
        y_lo = np.concatenate([traj.x[max(j - 1, 0)], [1.0]])

        def neg(s):
            return -abs(_wbar(sys, _state_at(M, y_lo, s)[None, :N])[0])

        res = minimize_scalar(neg, bounds=(0.0, hi - lo), method="bounded",
                              options={"xatol": 1e-12 * max(1.0, hi)})
        nadir, t_nadir = max(-res.fun, float(absw[j])), lo + res.x
        if -res.fun < absw[j]:
            t_nadir = float(t[j])

    # rocof
    rate = np.abs(traj.wbar_rate)
    right_limit = abs(float((sys.ratings @ (sys.C_freq @ (sys.B_full @ u0))) / sys.ratings.sum()))
    geo = ROCOF_T0 * 2.0 ** np.arange(0, 64)
    geo = geo[geo < t[-1]]
    y0 = np.zeros(N + 1)
    y0[N] = 1.0
    xs = np.array([_state_at(M, y0, s)[:N] for s in geo]) if geo.size else np.zeros((0, N))
    geo_rate = np.abs(_wbar_rate(sys, xs, u0)) if geo.size else np.zeros(0)
    rocof = float(max(rate.max(), geo_rate.max(initial=0.0), right_limit))

    report = MetricsReport(
        w_inf=float(traj.wbar[-1]),
        nadir=float(nadir),
        t_nadir=None if t_nadir is None else float(t_nadir),
        rocof=rocof,
        sync_cost=cost,
    )
    report.provenance = {k: "simulated" for k in ("w_inf", "nadir", "t_nadir", "rocof", "sync_cost")}
    return report


def simulate_metrics(model: NetworkModel, p: MachineParams, u0, horizon=None, dt=None) -> MetricsReport:
    return measure(step_response(assemble(model, p), u0, horizon, dt))


def simulated_cost_gram(model: NetworkModel, p: MachineParams, horizon=None) -> np.ndarray:
    """``G`` with ``||wtilde||_2^2 = u0^T G u0``, from one simulation per bus.

    The response is linear in ``u0``, so the cost of any disturbance is a
    quadratic form whose matrix is assembled from unit-step trajectories.
    """
    sys = assemble(model, p)
    n = model.n
    if horizon is None:
        horizon = default_horizon(sys)
    trajs = [step_response(sys, np.eye(n)[i], horizon) for i in range(n)]
    W = np.stack([tr.wtilde for tr in trajs])  # (bus, n, T)
    inner = np.einsum("ait,bit->abt", W, W)
    G = np.trapezoid(inner, trajs[0].t, axis=-1)
    return 0.5 * (G + G.T)


def modal_poles(spec: Spectrum, p: MachineParams) -> np.ndarray:
    """Poles of every closed-loop mode, with the integrator of ``g0`` removed."""
    g0 = representative_machine(p)
    roots = [np.roots(g0.den)]
    roots[0] = np.delete(roots[0], np.argmin(np.abs(roots[0])))
    for lam in spec.modal_lambdas:
        roots.append(np.roots(closed_loop_mode(g0, lam).den))
    return np.concatenate(roots)


def match_poles(a, b) -> float:
    """Largest relative mismatch after pairing two pole multisets.

    Poles are sorted and then paired by minimum total distance, which is
    robust to ordering ties between complex-conjugate pairs.
    """
    a = np.sort_complex(np.asarray(a, dtype=complex))
    b = np.sort_complex(np.asarray(b, dtype=complex))
    if a.shape != b.shape:
        raise ValueError(f"pole counts differ: {a.size} vs {b.size}")
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    gap = cost[r, c]
    scale = np.maximum(np.abs(a[r]), np.abs(b[c]))
    # two exact zeros match perfectly
    rel = np.divide(gap, scale, out=np.where(gap > 0, np.inf, 0.0), where=scale > 0)
    return float(np.max(rel, initial=0.0))


def write_trajectory_csv(traj: Trajectory, fh) -> None:
    """Columns ``t, w_1..w_n, wbar, wtilde_1..wtilde_n`` at 15 significant digits."""
    n = traj.w.shape[0]
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["t"] + [f"w_{i + 1}" for i in range(n)] + ["wbar"]
                    + [f"wtilde_{i + 1}" for i in range(n)])
    for k in range(traj.t.size):
        row = [traj.t[k], *traj.w[:, k], traj.wbar[k], *traj.wtilde[:, k]]
        writer.writerow([f"{v:.15g}" for v in row])
