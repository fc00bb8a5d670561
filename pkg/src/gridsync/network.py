"""Network Laplacian, rating scaling and spectral decomposition.

The coupling between generator buses is the susceptance-weighted graph
Laplacian ``L``.  With machine parameters proportional to the rating
vector ``f``, every quantity of interest is expressed through the scaled
Laplacian ``L_F = F^{-1/2} L F^{-1/2}`` and its eigen-decomposition.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DisconnectedGraphError, ParameterError

__all__ = [
    "NetworkModel",
    "Spectrum",
    "build_laplacian",
    "scaled_laplacian",
    "spectral_decomposition",
    "decompose",
    "project_disturbance",
    "fix_column_signs",
]

RATING_NORMALIZATION_TOL = 1e-9
REPEATED_EIGENVALUE_RTOL = 1e-9


@dataclass(frozen=True)
class NetworkModel:
    """Generator buses coupled through lossless lines.

    Parameters
    ----------
    n : int
        Number of generator buses.
    edges : sequence of (i, j, b_ij)
        Zero-based bus indices and positive line susceptance (p.u.).
    ratings : array_like
        Rating parameter ``f_i > 0`` of each bus, relative to the largest
        machine (which should have ``f_i = 1``).
    """

    n: int
    edges: tuple = ()
    ratings: np.ndarray = field(default=None)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"n must be a positive integer, got {self.n!r}")
        f = np.ones(self.n) if self.ratings is None else np.asarray(self.ratings, dtype=float).copy()
        if f.shape != (self.n,):
            raise ParameterError(f"ratings must have length {self.n}, got shape {f.shape}")
        if not np.all(np.isfinite(f)) or np.any(f <= 0):
            raise ParameterError("all ratings f_i must be finite and > 0")
        f.setflags(write=False)
        edges = tuple((int(i), int(j), float(b)) for i, j, b in self.edges)
        for i, j, b in edges:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ParameterError(f"edge ({i}, {j}) references a bus outside 0..{self.n - 1}")
            if not np.isfinite(b) or b <= 0:
                raise ParameterError(f"edge ({i}, {j}) has non-positive susceptance {b}")
        object.__setattr__(self, "ratings", f)
        object.__setattr__(self, "edges", edges)
        if abs(f.max() - 1.0) > RATING_NORMALIZATION_TOL:
            warnings.warn(
                f"largest rating is {f.max():g}, expected 1 (largest-machine normalization)",
                stacklevel=3,
            )

    def scaled(self, factor: float) -> NetworkModel:
        """Same topology with every susceptance multiplied by ``factor``."""
        return NetworkModel(self.n, [(i, j, b * factor) for i, j, b in self.edges], self.ratings)

    def permuted(self, perm) -> NetworkModel:
        """Relabel buses so that old bus ``perm[k]`` becomes new bus ``k``."""
        perm = np.asarray(perm)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(self.n)
        edges = [(int(inv[i]), int(inv[j]), b) for i, j, b in self.edges]
        return NetworkModel(self.n, edges, self.ratings[perm])


@dataclass(frozen=True)
class Spectrum:
    """Eigen-decomposition artifacts of the scaled Laplacian.

    ``lambdas[0]`` is exactly zero with eigenvector ``v0``; the columns of
    ``V_perp`` are the eigenvectors for ``lambdas[1:]``.
    """

    lambdas: np.ndarray
    v0: np.ndarray
    V_perp: np.ndarray
    gamma: np.ndarray
    alpha_F: float
    ratings: np.ndarray

    @property
    def n(self) -> int:
        return self.v0.shape[0]

    @property
    def modal_lambdas(self) -> np.ndarray:
        """The nonzero eigenvalues ``lambda_1 .. lambda_{n-1}``."""
        return self.lambdas[1:]

    @property
    def V(self) -> np.ndarray:
        return np.column_stack([self.v0, self.V_perp])

    def has_repeated_eigenvalues(self, rtol: float = REPEATED_EIGENVALUE_RTOL) -> bool:
        lam = self.modal_lambdas
        if lam.size < 2:
            return False
        gaps = np.diff(lam)
        return bool(np.any(gaps <= rtol * lam[1:]))

    def rotated(self, R: np.ndarray) -> Spectrum:
        """Re-choose the basis ``V_perp -> V_perp R`` inside each eigenspace.

        ``R`` must be orthogonal and commute with ``diag(lambdas[1:])``,
        i.e. only mix eigenvectors that share an eigenvalue; otherwise the
        result would not be an eigenbasis.
        """
        R = np.asarray(R, dtype=float)
        k = self.modal_lambdas.size
        if R.shape != (k, k) or not np.allclose(R.T @ R, np.eye(k), atol=1e-10):
            raise ParameterError(f"R must be an orthogonal {k}x{k} matrix")
        lam = self.modal_lambdas
        scale = float(np.max(lam, initial=1.0))
        if np.max(np.abs(lam[:, None] * R - R * lam[None, :]), initial=0.0) > 1e-8 * scale:
            raise ParameterError("R mixes eigenvectors of distinct eigenvalues")
        Vp = self.V_perp @ R
        gamma = Vp.T @ (Vp / self.ratings[:, None])
        return Spectrum(self.lambdas, self.v0, Vp, 0.5 * (gamma + gamma.T), self.alpha_F, self.ratings)


def build_laplacian(model: NetworkModel) -> np.ndarray:
    """Susceptance-weighted graph Laplacian (n x n, zero row sums)."""
    L = np.zeros((model.n, model.n))
    seen = set()
    for i, j, b in model.edges:
        if i == j:
            raise ParameterError(f"self-loop at bus {i}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise ParameterError(f"duplicate edge {key}")
        seen.add(key)
        L[i, j] -= b
        L[j, i] -= b
        L[i, i] += b
        L[j, j] += b
    return L


def scaled_laplacian(L: np.ndarray, f) -> np.ndarray:
    """Return ``F^{-1/2} L F^{-1/2}``."""
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise ParameterError("ratings must be strictly positive")
    s = 1.0 / np.sqrt(f)
    LF = s[:, None] * L * s[None, :]
    return 0.5 * (LF + LF.T)


def fix_column_signs(V: np.ndarray) -> np.ndarray:
    """Flip columns so that each one's largest-magnitude entry is positive."""
    V = np.array(V, dtype=float)
    if V.size == 0:
        return V
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def spectral_decomposition(LF: np.ndarray, f, tol_connectivity: float | None = None) -> Spectrum:
    """Diagonalize the scaled Laplacian, with the kernel pinned analytically.

    The numerically smallest eigenpair is replaced by ``(0, alpha_F F^{1/2} 1)``
    and the remaining eigenvectors are re-orthogonalized against it.

    Raises
    ------
    DisconnectedGraphError
        If the second-smallest eigenvalue is below ``tol_connectivity``
        (default ``1e-8 * lambda_max``).
    """
    f = np.asarray(f, dtype=float)
    n = f.shape[0]
    if LF.shape != (n, n):
        raise ParameterError(f"L_F has shape {LF.shape}, expected ({n}, {n})")
    w, V = np.linalg.eigh(LF)
    alpha_F = float(np.sum(f) ** -0.5)
    v0 = alpha_F * np.sqrt(f)

    if n >= 2:
        lam_max = w[-1]
        tol = 1e-8 * lam_max if tol_connectivity is None else tol_connectivity
        if lam_max <= 0 or w[1] < tol:
            raise DisconnectedGraphError(
                f"graph disconnected or nearly disconnected (lambda_1 = {w[1]:.3e})"
            )

    Vp = V[:, 1:]
    Vp = Vp - np.outer(v0, v0 @ Vp)
    Vp = Vp / np.linalg.norm(Vp, axis=0)
    Vp = fix_column_signs(Vp)

    lambdas = np.concatenate([[0.0], w[1:]])
    gamma = Vp.T @ (Vp / f[:, None])
    gamma = 0.5 * (gamma + gamma.T)
    return Spectrum(lambdas, v0, Vp, gamma, alpha_F, f.copy())


def decompose(model: NetworkModel, tol_connectivity: float | None = None) -> Spectrum:
    """Laplacian, scaling and spectral decomposition in one call."""
    L = build_laplacian(model)
    return spectral_decomposition(scaled_laplacian(L, model.ratings), model.ratings, tol_connectivity)


def project_disturbance(spec: Spectrum, f, u0) -> np.ndarray:
    """Modal coordinates ``z0 = V_perp^T F^{-1/2} u0`` of a step disturbance."""
    u0 = np.asarray(u0, dtype=float)
    f = np.asarray(f, dtype=float)
    if u0.shape != (spec.n,) or f.shape != (spec.n,):
        raise ParameterError(f"disturbance must have length {spec.n}, got shape {u0.shape}")
    return spec.V_perp.T @ (u0 / np.sqrt(f))
