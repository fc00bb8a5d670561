"""Closed-form synchronization performance metrics.

The bus frequency step response splits into a network-independent system
frequency ``wbar(t) = (sum u0 / sum f) g0(t)`` applied to every bus, and a
deviation ``wtilde(t)`` whose energy is the quadratic form ``z0^T Y z0``
with ``Y[k, l] = Gamma[k, l] <h_k, h_l>``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import NearResonanceError, NeedsSimulation, NotHurwitzError, ParameterError
from .machines import (
    MachineKind,
    MachineParams,
    classify_damping,
    closed_loop_matrix,
    g0_step_response,
    realize_state_space,
)
from .network import Spectrum, project_disturbance

__all__ = [
    "CostMethod",
    "CostMatrix",
    "MetricsReport",
    "SigmaU",
    "Regime",
    "NadirResult",
    "system_frequency",
    "steady_state_frequency",
    "nadir",
    "rocof",
    "inner_product_sylvester",
    "inner_product_swing_closed",
    "turbine_norm_closed",
    "turbine_inner_product_limits",
    "cost_matrix",
    "sync_cost",
    "mean_sync_cost",
    "swing_cost_high_inertia",
    "swing_cost_low_inertia",
    "turbine_cost_high_inertia",
    "analyze",
]


class CostMethod(str, enum.Enum):
    SWING_CLOSED_FORM = "swing_closed_form"
    SYLVESTER_NUMERIC = "sylvester_numeric"
    TURBINE_DIAGONAL_CLOSED_FORM = "turbine_diagonal_closed_form"


class SigmaU(str, enum.Enum):
    """Covariance of a random disturbance step."""

    IDENTITY = "identity"
    F = "F"
    F_SQUARED = "F_squared"


class Regime(str, enum.Enum):
    LOW_INERTIA = "low_inertia"
    HIGH_INERTIA = "high_inertia"


@dataclass(frozen=True)
class CostMatrix:
    Y: np.ndarray
    method: CostMethod


class NadirResult(NamedTuple):
    """``t_nadir`` is None for a monotone response."""

    value: float
    t_nadir: float | None


@dataclass
class MetricsReport:
    """Step-response metrics with per-field provenance (closed_form | simulated)."""

    w_inf: float
    nadir: float
    rocof: float
    sync_cost: float
    t_nadir: float | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("w_inf", "nadir", "rocof", "sync_cost"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} is not finite")
        if self.nadir < abs(self.w_inf) - 1e-12:
            raise ValueError(f"nadir {self.nadir} below steady-state |w_inf| {abs(self.w_inf)}")


def _disturbance_gain(f, u0) -> float:
    f = np.asarray(f, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != f.shape:
        raise ParameterError(f"disturbance has shape {u0.shape}, expected {f.shape}")
    if not np.all(np.isfinite(u0)):
        raise ParameterError("disturbance entries must be finite")
    return float(u0.sum() / f.sum())


def system_frequency(p: MachineParams, f, u0, t):
    """Rating-weighted mean frequency ``wbar(t)`` sampled at ``t``.

    Independent of the network.  Over-damped turbine machines raise
    :class:`NeedsSimulation`.
    """
    return _disturbance_gain(f, u0) * g0_step_response(p, t)


def steady_state_frequency(p: MachineParams, f, u0) -> float:
    damping = p.d if p.kind is MachineKind.SWING else p.d + p.r_inv
    return _disturbance_gain(f, u0) / damping


def nadir(p: MachineParams, f, u0) -> NadirResult:
    """Maximum excursion ``||wbar||_inf`` and the time it is reached.

    The swing machine (and the droop-free turbine, whose ``g0`` reduces
    to the swing machine) never overshoots: the Nadir is the steady-state
    deviation with no finite attaining time.
    """
    k = abs(_disturbance_gain(f, u0))
    if p.kind is MachineKind.SWING or p.r_inv == 0:
        return NadirResult(k / (p.d if p.kind is MachineKind.SWING else p.d + p.r_inv), None)
    prof = classify_damping(p)
    if not prof.underdamped:
        raise NeedsSimulation("over-damped turbine: no closed-form Nadir; use the simulated value")
    angle = prof.phi + math.pi / 2
    overshoot = math.sqrt(p.tau * p.r_inv / p.m) * math.exp(-prof.eta / prof.omega_d * angle)
    value = k / (p.d + p.r_inv) * (1.0 + overshoot)
    return NadirResult(value, angle / prof.omega_d)


def rocof(p: MachineParams, f, u0) -> float:
    """Maximum rate of change of system frequency, reached at ``t -> 0+``."""
    if p.kind is MachineKind.TURBINE and p.r_inv > 0 and not classify_damping(p).underdamped:
        raise NeedsSimulation("over-damped turbine: RoCoF closed form not established; simulate")
    return abs(_disturbance_gain(f, u0)) / p.m


def _is_hurwitz(A: np.ndarray) -> bool:
    return bool(np.all(np.linalg.eigvals(A).real < 0))


def inner_product_sylvester(A_k, A_l, B, C, check: bool = True) -> float:
    """``<h_k, h_l> = C Q C^T`` with ``A_k Q + Q A_l^T + B B^T = 0``.

    Solved through the Kronecker (vectorized) form, which is exact for the
    2x2 and 3x3 machine realizations used here.
    """
    A_k = np.asarray(A_k, dtype=float)
    A_l = np.asarray(A_l, dtype=float)
    B = np.asarray(B, dtype=float).reshape(-1, 1)
    C = np.asarray(C, dtype=float).reshape(1, -1)
    if check and not (_is_hurwitz(A_k) and _is_hurwitz(A_l)):
        raise NotHurwitzError("Sylvester inner product needs Hurwitz state matrices")
    n = A_k.shape[0]
    eye = np.eye(n)
    K = np.kron(eye, A_k) + np.kron(A_l, eye)
    rhs = -(B @ B.T).reshape(-1, order="F")
    if np.linalg.cond(K) > 1e14:
        raise NearResonanceError("Kronecker system is numerically singular")
    Q = np.linalg.solve(K, rhs).reshape(n, n, order="F")
    return float((C @ Q @ C.T)[0, 0])


def inner_product_swing_closed(m: float, d: float, lam_k: float, lam_l: float) -> float:
    if lam_k <= 0 or lam_l <= 0:
        raise ParameterError("swing inner product needs positive eigenvalues")
    return 2 * d / (m * (lam_k - lam_l) ** 2 + 2 * (lam_k + lam_l) * d**2)


def turbine_norm_closed(p: MachineParams, lam: float) -> float:
    """Squared H2 norm ``||h_k||^2`` of a turbine closed-loop mode."""
    if lam <= 0:
        raise ParameterError("turbine norm needs a positive eigenvalue")
    m, d, tau, r = p.m, p.d, p.tau, p.r_inv
    num = m + tau * (lam * tau + d)
    den = 2 * lam * (m * (r + d) + tau * d * (r + lam * tau + d))
    return num / den


def turbine_inner_product_limits(p: MachineParams, lam_k: float, lam_l: float, regime) -> float:
    """Asymptotic ``<h_k, h_l>`` for the turbine machine as ``m -> 0`` or ``m -> inf``.

    The low-inertia value is the ``m = 0`` limit and ignores ``p.m``; the
    high-inertia value is the leading ``1/m`` term for distinct eigenvalues.
    """
    regime = Regime(regime)
    d, tau, r = p.d, p.tau, p.r_inv
    if regime is Regime.HIGH_INERTIA:
        if lam_k == lam_l:
            raise ParameterError("high-inertia asymptote assumes distinct eigenvalues")
        return 2 * (d + r) / (p.m * (lam_k - lam_l) ** 2)
    s, prod = lam_k + lam_l, lam_k * lam_l
    N = 2 * d * (d + r) + tau * (2 * d + r) * s + 2 * prod * tau**2
    D = (2 * d * (d + r) ** 2 * s
         + d * tau * (2 * d + r) * s**2
         + 2 * d * tau * prod * (2 * r + tau * s))
    return N / D


def _pairwise(lams, fn) -> np.ndarray:
    k = len(lams)
    out = np.empty((k, k))
    for a in range(k):
        for b in range(a, k):
            out[a, b] = out[b, a] = fn(lams[a], lams[b])
    return out


def inner_product_matrix(p: MachineParams, lams, method: CostMethod | None = None) -> np.ndarray:
    """Matrix of ``<h_k, h_l>`` over the given nonzero eigenvalues."""
    lams = np.asarray(lams, dtype=float)
    method = CostMethod(method) if method is not None else (
        CostMethod.SWING_CLOSED_FORM if p.kind is MachineKind.SWING else CostMethod.SYLVESTER_NUMERIC
    )
    if method is CostMethod.SWING_CLOSED_FORM:
        if p.kind is not MachineKind.SWING:
            raise ParameterError("swing closed form requested for a turbine machine")
        return _pairwise(lams, lambda a, b: inner_product_swing_closed(p.m, p.d, a, b))
    if method is CostMethod.TURBINE_DIAGONAL_CLOSED_FORM:
        return np.diag([turbine_norm_closed(p, lam) for lam in lams])
    ss = realize_state_space(p)
    mats = [closed_loop_matrix(ss.A, ss.B, ss.C, lam) for lam in lams]
    idx = range(len(lams))
    return _pairwise(list(idx), lambda a, b: inner_product_sylvester(mats[a], mats[b], ss.B, ss.C))


def cost_matrix(spec: Spectrum, p: MachineParams, method: CostMethod | None = None) -> CostMatrix:
    """``Y = Gamma * <h_k, h_l>`` (elementwise).

    Default path: swing closed form for swing machines; for turbines the
    diagonal closed form when ``Gamma`` is diagonal (homogeneous ratings),
    otherwise the numerically solved Sylvester equations.
    """
    lams = spec.modal_lambdas
    if method is None:
        if p.kind is MachineKind.SWING:
            method = CostMethod.SWING_CLOSED_FORM
        else:
            off = spec.gamma - np.diag(np.diag(spec.gamma))
            diagonal = lams.size == 0 or np.max(np.abs(off)) <= 1e-12 * np.max(np.abs(spec.gamma))
            method = CostMethod.TURBINE_DIAGONAL_CLOSED_FORM if diagonal else CostMethod.SYLVESTER_NUMERIC
    method = CostMethod(method)
    if lams.size == 0:
        return CostMatrix(np.zeros((0, 0)), method)
    H = inner_product_matrix(p, lams, method)
    if method is CostMethod.TURBINE_DIAGONAL_CLOSED_FORM:
        Y = np.diag(np.diag(spec.gamma) * np.diag(H))
    else:
        Y = spec.gamma * H
    return CostMatrix(0.5 * (Y + Y.T), method)


def sync_cost(spec: Spectrum, p: MachineParams, u0, method: CostMethod | None = None,
              Y: CostMatrix | None = None) -> float:
    """Energy ``||wtilde||_2^2 = z0^T Y z0`` of the deviations from system frequency."""
    z0 = project_disturbance(spec, spec.ratings, u0)
    Ym = (Y or cost_matrix(spec, p, method)).Y
    return max(float(z0 @ Ym @ z0), 0.0)


def mean_sync_cost(spec: Spectrum, p: MachineParams, sigma_u=SigmaU.IDENTITY,
                   method: CostMethod | None = None) -> float:
    """Expected cost ``Tr(Y Sigma_z)`` for independent random bus disturbances.

    ``sigma_u`` selects ``E[u0 u0^T]`` among ``I``, ``F`` and ``F^2``; the
    matching modal covariances are ``Gamma``, ``I`` and ``V_perp^T F V_perp``
    (the pseudoinverse of ``Gamma`` on the modal subspace).
    """
    sigma_u = SigmaU(sigma_u)
    Y = cost_matrix(spec, p, method).Y
    if sigma_u is SigmaU.IDENTITY:
        Sz = spec.gamma
    elif sigma_u is SigmaU.F:
        Sz = np.eye(Y.shape[0])
    else:
        Vp = spec.V_perp
        Sz = Vp.T @ (spec.ratings[:, None] * Vp)
    return float(np.trace(Y @ Sz))


def swing_cost_high_inertia(spec: Spectrum, d: float, z0) -> float:
    """Limit of the swing-machine cost as ``m -> inf`` (distinct eigenvalues)."""
    z0 = np.asarray(z0, dtype=float)
    lam = spec.modal_lambdas
    return float(np.sum(np.diag(spec.gamma) * z0**2 / (2 * d * lam)))


def swing_cost_low_inertia(spec: Spectrum, d: float, z0) -> float:
    """Limit of the swing-machine cost as ``m -> 0+``."""
    z0 = np.asarray(z0, dtype=float)
    lam = spec.modal_lambdas
    H = 1.0 / (d * (lam[:, None] + lam[None, :]))
    return float(z0 @ (spec.gamma * H) @ z0)


def turbine_cost_high_inertia(spec: Spectrum, p: MachineParams, z0) -> float:
    """Limit of the turbine-machine cost as ``m -> inf`` (distinct eigenvalues)."""
    return swing_cost_high_inertia(spec, p.d, z0) * p.d / (p.r_inv + p.d)


def analyze(spec: Spectrum, p: MachineParams, u0) -> MetricsReport:
    """All closed-form metrics for one scenario.

    Raises :class:`NeedsSimulation` for over-damped turbine machines; the
    caller is expected to fall back on :mod:`gridsync.simulate`.
    """
    f = spec.ratings
    nd = nadir(p, f, u0)
    report = MetricsReport(
        w_inf=steady_state_frequency(p, f, u0),
        nadir=nd.value,
        t_nadir=nd.t_nadir,
        rocof=rocof(p, f, u0),
        sync_cost=sync_cost(spec, p, u0),
    )
    report.provenance = {k: "closed_form" for k in ("w_inf", "nadir", "t_nadir", "rocof", "sync_cost")}
    return report
