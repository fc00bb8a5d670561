"""Representative machine models and their closed-loop modal responses.

Two machine families are supported:

* ``swing``:   g0(s) = 1 / (m s^2 + d s)
* ``turbine``: g0(s) = (tau s + 1) / (s (m tau s^2 + (m + d tau) s + d + r_inv))

Each network mode with Laplacian eigenvalue ``lam`` closes the loop
``h(s) = g0(s) / (1 + lam g0(s))``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import NeedsSimulation, ParameterError

__all__ = [
    "MachineKind",
    "MachineParams",
    "TransferFunction",
    "StateSpaceRealization",
    "DampingProfile",
    "representative_machine",
    "closed_loop_mode",
    "realize_state_space",
    "closed_loop_matrix",
    "classify_damping",
    "g0_step_response",
    "g0_rate",
    "g0_acceleration",
    "UNDERDAMPED_TOL",
]

# omega_d^2 within this band of zero counts as over-damped (the closed form divides by omega_d)
UNDERDAMPED_TOL = 1e-12


class MachineKind(str, enum.Enum):
    SWING = "swing"
    TURBINE = "turbine"


@dataclass(frozen=True)
class MachineParams:
    """Parameters of the representative (largest, ``f = 1``) machine.

    ``tau`` and ``r_inv`` are only used by the turbine model.
    """

    kind: MachineKind
    m: float
    d: float
    tau: float | None = None
    r_inv: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", MachineKind(self.kind))
        for name in ("m", "d"):
            v = getattr(self, name)
            if v is None or not np.isfinite(v) or v <= 0:
                raise ParameterError(f"{name} must be finite and > 0, got {v!r}")
        if self.kind is MachineKind.TURBINE:
            if self.tau is None or not np.isfinite(self.tau) or self.tau <= 0:
                raise ParameterError(f"tau must be finite and > 0, got {self.tau!r}")
            if self.r_inv is None or not np.isfinite(self.r_inv) or self.r_inv < 0:
                raise ParameterError(f"r_inv must be finite and >= 0, got {self.r_inv!r}")

    @property
    def order(self) -> int:
        return 2 if self.kind is MachineKind.SWING else 3

    @property
    def is_turbine(self) -> bool:
        return self.kind is MachineKind.TURBINE

    def replace(self, **changes) -> MachineParams:
        values = dict(kind=self.kind, m=self.m, d=self.d, tau=self.tau, r_inv=self.r_inv)
        values.update(changes)
        return MachineParams(**values)


@dataclass(frozen=True)
class TransferFunction:
    """Rational function ``num(s)/den(s)``, coefficients in descending powers.

    The denominator is normalized to a leading coefficient of 1.
    """

    num: np.ndarray
    den: np.ndarray

    def __post_init__(self):
        num = np.trim_zeros(np.atleast_1d(np.asarray(self.num, dtype=float)), "f")
        den = np.trim_zeros(np.atleast_1d(np.asarray(self.den, dtype=float)), "f")
        if den.size == 0:
            raise ParameterError("zero denominator")
        lead = den[0]
        object.__setattr__(self, "num", num / lead if num.size else np.zeros(1))
        object.__setattr__(self, "den", den / lead)

    def __call__(self, s):
        return np.polyval(self.num, s) / np.polyval(self.den, s)

    def poles(self) -> np.ndarray:
        return np.roots(self.den)

    def zeros(self) -> np.ndarray:
        return np.roots(self.num)

    def __repr__(self):
        return f"TransferFunction(num={self.num.tolist()}, den={self.den.tolist()})"


@dataclass(frozen=True)
class StateSpaceRealization:
    """Single-input single-output ``(A, B, C)`` with no feed-through."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def transfer(self, s: complex) -> complex:
        n = self.A.shape[0]
        x = np.linalg.solve(s * np.eye(n) - self.A, self.B)
        return complex((self.C @ x)[0, 0])


@dataclass(frozen=True)
class DampingProfile:
    """Transient character of the turbine machine's second-order factor.

    ``omega_d``, ``phi`` and ``beta`` are ``None`` unless ``underdamped``.
    """

    eta: float
    gamma_c: float
    omega_d_sq: float
    underdamped: bool
    omega_d: float | None = None
    phi: float | None = None
    beta: float | None = None
    note: str | None = None


def representative_machine(p: MachineParams) -> TransferFunction:
    if p.kind is MachineKind.SWING:
        return TransferFunction([1.0], [p.m, p.d, 0.0])
    m, d, tau, r = p.m, p.d, p.tau, p.r_inv
    return TransferFunction([tau, 1.0], [m * tau, m + d * tau, d + r, 0.0])


def closed_loop_mode(g0: TransferFunction, lam: float) -> TransferFunction:
    """``g0 / (1 + lam g0)``; with ``lam = 0`` this is ``g0`` itself."""
    if lam < 0:
        raise ParameterError(f"eigenvalue must be >= 0, got {lam}")
    num = g0.num
    den = np.polyadd(g0.den, lam * num)
    return TransferFunction(num, den)


def realize_state_space(p: MachineParams) -> StateSpaceRealization:
    """Realization with state (angle, frequency[, turbine power]).

    The input enters the frequency equation with gain ``+1/m`` so that
    ``C (sI - A)^{-1} B = g0(s)``.
    """
    m, d = p.m, p.d
    if p.kind is MachineKind.SWING:
        A = np.array([[0.0, 1.0], [0.0, -d / m]])
        B = np.array([[0.0], [1.0 / m]])
        C = np.array([[1.0, 0.0]])
    else:
        tau, r = p.tau, p.r_inv
        A = np.array([
            [0.0, 1.0, 0.0],
            [0.0, -d / m, 1.0 / m],
            [0.0, -r / tau, -1.0 / tau],
        ])
        B = np.array([[0.0], [1.0 / m], [0.0]])
        C = np.array([[1.0, 0.0, 0.0]])
    return StateSpaceRealization(A, B, C)


def closed_loop_matrix(A: np.ndarray, B: np.ndarray, C: np.ndarray, lam: float) -> np.ndarray:
    return A - lam * (B @ C)


def classify_damping(p: MachineParams) -> DampingProfile:
    if p.kind is not MachineKind.TURBINE:
        raise ParameterError("damping classification applies to the turbine model only")
    m, d, tau, r = p.m, p.d, p.tau, p.r_inv
    eta = 0.5 * (1.0 / tau + d / m)
    gamma_c = 1.0 / tau - r / m
    wd2 = (d + r) / (m * tau) - 0.25 * (1.0 / tau + d / m) ** 2
    note = None
    if r == 0:
        # g0 collapses to the swing machine via a pole-zero cancellation at -1/tau
        note = "degenerate: no droop"
    if wd2 <= UNDERDAMPED_TOL:
        return DampingProfile(eta, gamma_c, wd2, False, note=note)

    wd = math.sqrt(wd2)
    a = 1.0 / tau - eta
    phi = math.atan2(a, wd)
    # second derivative phase; requires d > 0 which MachineParams guarantees
    b = a + r / (d * tau)
    beta = math.atan2(b, wd)
    return DampingProfile(eta, gamma_c, wd2, True, omega_d=wd, phi=phi, beta=beta, note=note)


def _underdamped_profile(p: MachineParams) -> DampingProfile:
    prof = classify_damping(p)
    if not prof.underdamped:
        raise NeedsSimulation(
            "analytic response implemented for under-damped case only; use simulation oracle"
        )
    return prof


def g0_step_response(p: MachineParams, t):
    """Inverse Laplace transform of ``g0(s)`` (frequency step response).

    Vectorized over ``t >= 0``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ParameterError("time must be non-negative")
    if p.kind is MachineKind.SWING:
        return (1.0 / p.d) * -np.expm1(-(p.d / p.m) * t)
    prof = _underdamped_profile(p)
    wd, eta = prof.omega_d, prof.eta
    # inverse transform of (s + gamma) / ((s + eta)^2 + wd^2)
    osc = np.cos(wd * t) + (prof.gamma_c - eta) / wd * np.sin(wd * t)
    return (1.0 - np.exp(-eta * t) * osc) / (p.d + p.r_inv)


def g0_rate(p: MachineParams, t):
    """First time derivative of :func:`g0_step_response`."""
    t = np.asarray(t, dtype=float)
    if p.kind is MachineKind.SWING:
        return np.exp(-(p.d / p.m) * t) / p.m
    prof = _underdamped_profile(p)
    assert -math.pi / 2 < prof.phi < math.pi / 2
    return np.exp(-prof.eta * t) * np.cos(prof.omega_d * t - prof.phi) / (p.m * math.cos(prof.phi))


def g0_acceleration(p: MachineParams, t):
    """Second time derivative of :func:`g0_step_response`."""
    t = np.asarray(t, dtype=float)
    if p.kind is MachineKind.SWING:
        return -(p.d / p.m**2) * np.exp(-(p.d / p.m) * t)
    prof = _underdamped_profile(p)
    beta = prof.beta
    return -(p.d / p.m**2) * np.exp(-prof.eta * t) * np.cos(prof.omega_d * t - beta) / math.cos(beta)
