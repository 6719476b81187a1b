"""Logarithmic negativity of a two-mode Gaussian state.

Covariances use the vacuum-variance-1/2 convention, V = Re <u u^T> with
u = (q1, p1, q2, p2).  For V = [[A, C], [C^T, B]] the smaller symplectic
eigenvalue of the partial transpose is

    eta^- = sqrt((S - sqrt(S^2 - 4 det V)) / 2),   S = det A + det B - 2 det C

and E_N = max(0, -ln 2 eta^-).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

DISCRIMINANT_TOL = 1e-12
# -ln(2 eta) below this is round-off in sqrt(S^2 - 4 det V), not entanglement
ROUNDOFF_FLOOR = 1e-12


class UnphysicalCovarianceError(ValueError):
    pass


def symplectic_form(n_modes: int = 2) -> np.ndarray:
    w = np.array([[0.0, 1.0], [-1.0, 0.0]])
    return np.kron(np.eye(n_modes), w)


def _check_bona_fide(V: np.ndarray) -> None:
    # V + i Omega / 2 >= 0
    ev = np.linalg.eigvalsh(V + 0.5j * symplectic_form(2))
    if ev.min() < -1e-9 * max(1.0, np.abs(ev).max()):
        warnings.warn(f"covariance violates the uncertainty relation (min eigenvalue {ev.min():.3g})",
                      RuntimeWarning, stacklevel=3)


def _det2(X) -> float:
    return float(X[0, 0] * X[1, 1] - X[0, 1] * X[1, 0])


def log_negativity(V, *, check: bool = True) -> tuple[float, float]:
    """Return ``(E_N, eta_minus)`` in nats for a real symmetric 4x4 covariance."""
    V = np.asarray(V, dtype=float)
    if V.shape != (4, 4):
        raise ValueError(f"expected a 4x4 covariance, got shape {V.shape}")
    if not np.allclose(V, V.T, rtol=1e-10, atol=1e-12 * np.abs(V).max()):
        raise ValueError("covariance matrix is not symmetric")
    if np.any(np.diag(V) <= 0.0):
        raise UnphysicalCovarianceError("covariance diagonal must be positive")
    if check:
        _check_bona_fide(V)
    A, B, C = V[:2, :2], V[2:, 2:], V[:2, 2:]
    dA, dB, dC = _det2(A), _det2(B), _det2(C)
    w = symplectic_form(1)
    tau = np.trace(A @ w @ C @ w @ B @ w @ C.T @ w)
    det_V = np.linalg.det(V)  # LU; the block expansion cancels badly for strong squeezing
    S = dA + dB - 2.0 * dC
    # S^2 - 4 det V expanded in block invariants: exact (dA - dB)^2 for product states,
    # so nearly equal local variances do not lose the small root to cancellation
    disc = (dA - dB) ** 2 - 4.0 * dC * (dA + dB) + 4.0 * tau
    if disc < 0.0:
        if disc < -DISCRIMINANT_TOL * max(S * S, 1.0):
            raise UnphysicalCovarianceError(f"negative discriminant {disc:.3g}")
        disc = 0.0
    # (S - sqrt(disc))/2 rewritten as 2 det V/(S + sqrt(disc))
    root = S + math.sqrt(disc)
    inner = 2.0 * det_V / root if root > 0.0 else 0.0
    eta = math.sqrt(max(inner, 0.0))
    if eta == 0.0:
        raise UnphysicalCovarianceError("vanishing symplectic eigenvalue")
    E = -math.log(2.0 * eta)
    return (E if E > ROUNDOFF_FLOOR else 0.0), eta


def partial_transpose_spectrum(V) -> np.ndarray:
    """Symplectic eigenvalues of the partially transposed covariance, ascending.

    Uses |eig(i Omega V~)| directly, without the two-mode invariant formula.
    """
    V = np.asarray(V, dtype=float)
    P = np.diag([1.0, 1.0, 1.0, -1.0])
    Vt = P @ V @ P
    ev = np.abs(np.linalg.eigvals(1j * symplectic_form(2) @ Vt))
    return np.sort(ev)[::2]


@dataclass
class EntanglementSeries:
    times: np.ndarray
    E_N: np.ndarray
    eta_minus: np.ndarray
    death_time: float | None
    revivals: list[float] = field(default_factory=list)

    def in_bits(self) -> np.ndarray:
        return self.E_N / math.log(2.0)


def _crossings(times, E):
    """Downward zero crossings and revivals of a nonnegative series."""
    positive = E > 0.0
    deaths, revivals = [], []
    for k in range(1, len(E)):
        if positive[k - 1] and not positive[k]:
            deaths.append(float(times[k]))
        elif positive[k] and not positive[k - 1]:
            revivals.append(float(times[k]))
    return deaths, revivals


def entanglement_series(traj_or_times, V=None) -> EntanglementSeries:
    """Evaluate E_N along a covariance trajectory (or explicit times and V array)."""
    if V is None:
        times, V = traj_or_times.times, traj_or_times.V
    else:
        times = traj_or_times
    times = np.asarray(times, dtype=float)
    V = np.asarray(V)
    E = np.empty(len(times))
    eta = np.empty(len(times))
    for k in range(len(times)):
        try:
            E[k], eta[k] = log_negativity(V[k], check=False)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise type(exc)(f"sample {k} (t = {times[k]:.6g}): {exc}") from exc
    deaths, revivals = _crossings(times, E)
    death_time = None
    if deaths and not E[-1] > 0.0:
        death_time = deaths[-1]
        later = [r for r in revivals if r > deaths[0]]
        revivals = later
    elif deaths:
        revivals = [r for r in revivals if r > deaths[0]]
    return EntanglementSeries(times, E, eta, death_time, revivals)
