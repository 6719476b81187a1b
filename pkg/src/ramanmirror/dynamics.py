"""Linearized mirror fluctuations after adiabatic elimination of the cavity fields.

With both drives at the lower mechanical sideband (delta_j = -omega_m_j) and the
mean fields chosen purely imaginary, the slowly varying mirror operators obey

    d b1/dt = -g1/2 b1 + alpha1 (e^{2i d2 t} - e^{-2i d1 t}) b2
                       + alpha1 (1 - e^{-2i(d1+d2) t}) b2^dag + F1~
    d b2/dt = -g2/2 b2 + alpha2 (e^{-2i d2 t} - e^{2i d1 t}) b1
                       + alpha2 (e^{-2i(d1+d2) t} - 1) b1^dag + F2~

Lifted to quadratures u = (q1, p1, q2, p2), b = (q + i p)/sqrt(2), this is
du/dt = M(t) u + n(t) with delta-correlated noise <n(t) n(t')^T> = C(t) delta(t-t').
The second moments R = <u u^T> then follow dR/dt = M R + R M^T + C, which is the
differential form of R(t) = G R(0) G^T + G Z G^T with dG/dt = M G.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .config import SystemConfig, derive_params
from .gain import GainCoefficients, gain_coefficients
from .steady_state import CavityModel, SteadyStateBranch, mean_fields_fixed_point

SQRT2 = math.sqrt(2.0)


class AdiabaticityWarning(UserWarning):
    """Parameters sit outside the regime the eliminated equations assume."""


class NonPhysicalNoiseError(ValueError):
    pass


@dataclass(frozen=True)
class MirrorCoupling:
    alpha1: complex
    alpha2: complex
    kappa_p1: complex
    kappa_p2: complex
    kappa_combined: complex
    delta1: float
    delta2: float
    gamma_m: tuple[float, float]
    G: tuple[float, float]
    amplitude: tuple[float, float]
    xi12: complex
    xi21: complex

    @property
    def noise_gains(self) -> tuple[complex, complex, complex, complex]:
        """(k1, x1, k2, x2): weights of the cavity noise in the mirror equations."""
        kc = self.kappa_combined
        A1 = self.G[0] * self.amplitude[0]
        A2 = self.G[1] * self.amplitude[1]
        return (2.0 * self.kappa_p2 / kc * A1, 4.0 * self.xi12 / kc * A1,
                2.0 * self.kappa_p1 / kc * A2, 4.0 * self.xi21 / kc * A2)


def mirror_coupling(gain: GainCoefficients, steady: SteadyStateBranch, cfg: SystemConfig,
                    delta: tuple[float, float] | None = None) -> MirrorCoupling:
    """Effective mirror-mirror rates about the steady state ``steady``."""
    if gain.kappa1 is None or gain.kappa2 is None:
        gain = GainCoefficients(*gain.xi, cfg.cavity1.kappa, cfg.cavity2.kappa)
    om = (cfg.mirror1.omega_m, cfg.mirror2.omega_m)
    gm = (cfg.mirror1.gamma_m, cfg.mirror2.gamma_m)
    if delta is None:
        delta = (-om[0], -om[1])
    elif delta != (-om[0], -om[1]):
        warnings.warn("mirror equations were eliminated at delta_j = -omega_m_j; "
                      f"using delta = {delta}", AdiabaticityWarning, stacklevel=2)
    for j, cav in enumerate(cfg.cavities):
        if not cav.kappa > 10.0 * gm[j]:
            warnings.warn(f"cavity {j + 1}: kappa = {cav.kappa:.3g} is not >> gamma_m = "
                          f"{gm[j]:.3g}; adiabatic elimination is questionable",
                          AdiabaticityWarning, stacklevel=2)
    kc = gain.kappa_combined
    if kc == 0 or not np.isfinite(kc):
        raise ZeroDivisionError("combined cavity rate kappa vanished")
    G = derive_params(cfg).G
    amp = (abs(steady.a1_mean), abs(steady.a2_mean))
    common = G[0] * G[1] * amp[0] * amp[1] / kc
    return MirrorCoupling(
        alpha1=4.0 * gain.xi12 * common,
        alpha2=4.0 * gain.xi21 * common,
        kappa_p1=gain.kappa_eff1,
        kappa_p2=gain.kappa_eff2,
        kappa_combined=kc,
        delta1=float(delta[0]),
        delta2=float(delta[1]),
        gamma_m=gm,
        G=G,
        amplitude=amp,
        xi12=gain.xi12,
        xi21=gain.xi21,
    )


def operating_point(cfg: SystemConfig, delta: tuple[float, float] | None = None):
    """Gain coefficients and self-consistent mean fields at the dynamics detunings."""
    model = CavityModel.from_config(cfg)
    if delta is None:
        delta = (-cfg.mirror1.omega_m, -cfg.mirror2.omega_m)
    eps = [model.epsilon(j + 1, cav.power, delta[j]) for j, cav in enumerate(cfg.cavities)]
    steady = mean_fields_fixed_point(model, delta[0], delta[1], eps[0], eps[1])
    return model.gain, steady


# ---------------------------------------------------------------------------
# quadrature lift


def quadrature_lift(c0: complex, c1: complex, c2: complex):
    """Real blocks of  db/dt = c0 b + c1 b' + c2 b'^dag  in (q, p) quadratures.

    Returns ``(self_block, cross_block)``; both act on column vectors (q, p).
    Works elementwise on arrays, adding two trailing 2x2 axes.
    """
    c0, c1, c2 = np.asarray(c0), np.asarray(c1), np.asarray(c2)
    s, d = c1 + c2, c1 - c2
    self_block = np.stack([np.stack([c0.real, -c0.imag], -1),
                           np.stack([c0.imag, c0.real], -1)], -2)
    cross = np.stack([np.stack([s.real, -d.imag], -1),
                      np.stack([s.imag, d.real], -1)], -2)
    return self_block, cross


def quadrature_unlift(cross_block) -> tuple[complex, complex]:
    """Inverse of the cross-block map: recover (c1, c2)."""
    (a, b), (c, d) = np.asarray(cross_block)
    return complex((a + d) / 2.0, (c - b) / 2.0), complex((a - d) / 2.0, (c + b) / 2.0)


def _coefficients(cp: MirrorCoupling, t):
    t = np.asarray(t, dtype=float)
    d1, d2 = cp.delta1, cp.delta2
    e = lambda w: np.exp(1j * w * t)  # noqa: E731
    # mode 1 driven by b2, b2^dag; mode 2 by b1, b1^dag
    c11 = cp.alpha1 * (e(2 * d2) - e(-2 * d1))
    c12 = cp.alpha1 * (1.0 - e(-2 * (d1 + d2)))
    c21 = cp.alpha2 * (e(-2 * d2) - e(2 * d1))
    c22 = cp.alpha2 * (e(-2 * (d1 + d2)) - 1.0)
    return c11, c12, c21, c22


def build_drift(cp: MirrorCoupling, t) -> np.ndarray:
    """M(t); for array ``t`` the result has shape t.shape + (4, 4)."""
    t = np.asarray(t, dtype=float)
    c11, c12, c21, c22 = _coefficients(cp, t)
    self1, cross1 = quadrature_lift(-cp.gamma_m[0] / 2.0 + 0j * t, c11, c12)
    self2, cross2 = quadrature_lift(-cp.gamma_m[1] / 2.0 + 0j * t, c21, c22)
    M = np.zeros(t.shape + (4, 4))
    M[..., 0:2, 0:2] = self1
    M[..., 0:2, 2:4] = cross1
    M[..., 2:4, 2:4] = self2
    M[..., 2:4, 0:2] = cross2
    return M


# noise operator basis: F1, F1^dag, F2, F2^dag, f1, f1^dag, f2, f2^dag
_ADJOINT = np.array([1, 0, 3, 2, 5, 4, 7, 6])


def noise_correlations(gain: GainCoefficients, cfg: SystemConfig) -> np.ndarray:
    """Q[a, b] with <w_a(t) w_b(t')> = Q[a, b] delta(t - t')."""
    x = gain.xi
    k1, k2 = cfg.cavity1.kappa, cfg.cavity2.kappa
    N1, N2 = cfg.cavity1.N_thermal, cfg.cavity2.N_thermal
    n1, n2 = cfg.mirror1.occupation, cfg.mirror2.occupation
    Q = np.zeros((8, 8), dtype=complex)
    Q[1, 0] = 2.0 * (x[0].real + k1 * N1)
    Q[0, 1] = 2.0 * (x[1].real + k1 * (N1 + 1.0))
    Q[3, 2] = 2.0 * (x[3].real + k2 * N2)
    Q[2, 3] = 2.0 * (x[2].real + k2 * (N2 + 1.0))
    cross = np.conj(x[5]) + x[7]
    Q[2, 0] = Q[0, 2] = cross
    Q[1, 3] = Q[3, 1] = np.conj(cross)
    Q[5, 4], Q[4, 5] = n1, n1 + 1.0
    Q[7, 6], Q[6, 7] = n2, n2 + 1.0
    return Q


def noise_map(cp: MirrorCoupling, t) -> np.ndarray:
    """T(t) with n = T w; shape t.shape + (4, 8)."""
    t = np.asarray(t, dtype=float)
    k1, x1, k2, x2 = cp.noise_gains
    p1 = np.exp(-2j * cp.delta1 * t)
    p2 = np.exp(-2j * cp.delta2 * t)
    zero = np.zeros(t.shape, dtype=complex)
    one = np.ones(t.shape, dtype=complex)
    F1 = np.stack([k1 * p1, -k1 * one, -x1 * one, x1 * p1,
                   np.sqrt(cp.gamma_m[0]) * one, zero, zero, zero], -1)
    F2 = np.stack([x2 * one, -x2 * p2, k2 * p2, -k2 * one,
                   zero, zero, np.sqrt(cp.gamma_m[1]) * one, zero], -1)
    rows = []
    for F in (F1, F2):
        Fd = np.conj(F)[..., _ADJOINT]
        rows.append((F + Fd) / SQRT2)
        rows.append((F - Fd) / (1j * SQRT2))
    return np.stack(rows, -2)


def noise_matrix(cp: MirrorCoupling, gain: GainCoefficients, cfg: SystemConfig, t) -> np.ndarray:
    """Full complex noise correlation C(t) = T Q T^T (Hermitian)."""
    T = noise_map(cp, t)
    Q = noise_correlations(gain, cfg)
    return T @ Q @ np.swapaxes(T, -1, -2)


def build_diffusion(cp: MirrorCoupling, gain: GainCoefficients, cfg: SystemConfig, t,
                    psd_rtol: float = 1e-12) -> np.ndarray:
    """Symmetrized real diffusion matrix D(t) = Re C(t)."""
    C = noise_matrix(cp, gain, cfg, t)
    D = np.real(C + np.swapaxes(C, -1, -2)) / 2.0
    ev = np.linalg.eigvalsh(D)
    scale = np.max(np.abs(ev))
    if np.any(ev < -psd_rtol * max(scale, 1e-300)):
        raise NonPhysicalNoiseError(f"diffusion matrix not positive semidefinite "
                                    f"(min eigenvalue {ev.min():.3g})")
    return D


def thermal_initial_state(n1: float, n2: float) -> np.ndarray:
    if n1 < 0 or n2 < 0:
        raise ValueError("thermal occupations must be >= 0")
    R = np.zeros((4, 4), dtype=complex)
    for k, n in ((0, n1), (2, n2)):
        R[k, k] = R[k + 1, k + 1] = n + 0.5
        R[k, k + 1] = 0.5j
        R[k + 1, k] = -0.5j
    return R


# ---------------------------------------------------------------------------
# propagation


@dataclass
class CovarianceTrajectory:
    times: np.ndarray
    R: np.ndarray
    G: np.ndarray
    means: np.ndarray
    dt: float
    step_error: float | None = None
    tol: float | None = None

    @property
    def V(self) -> np.ndarray:
        return self.R.real

    @property
    def converged(self) -> bool | None:
        if self.step_error is None or self.tol is None:
            return None
        return self.step_error <= self.tol


def _as_function(X) -> Callable:
    if callable(X):
        return X
    X = np.asarray(X)
    return lambda t: np.broadcast_to(X, np.shape(t) + X.shape)


def _rk4(Mf, Df, R0, t0, n, dt, record_every):
    """Fixed-step RK4 for (R, G); coefficient arrays are built in one pass."""
    grid = t0 + dt * np.arange(2 * n + 1) / 2.0
    Ms = np.asarray(Mf(grid), dtype=float if np.isrealobj(Mf(grid[:1])) else complex)
    Ds = np.asarray(Df(grid))
    R = np.array(R0, dtype=complex)
    G = np.eye(R.shape[0])
    times, Rs, Gs = [t0], [R.copy()], [G.copy()]

    def f(M, D, R, G):
        # R is Hermitian, not symmetric: R M^T != (M R)^T
        return M @ R + R @ M.T + D, M @ G

    for k in range(n):
        M0, Mh, M1 = Ms[2 * k], Ms[2 * k + 1], Ms[2 * k + 2]
        D0, Dh, D1 = Ds[2 * k], Ds[2 * k + 1], Ds[2 * k + 2]
        k1r, k1g = f(M0, D0, R, G)
        k2r, k2g = f(Mh, Dh, R + 0.5 * dt * k1r, G + 0.5 * dt * k1g)
        k3r, k3g = f(Mh, Dh, R + 0.5 * dt * k2r, G + 0.5 * dt * k2g)
        k4r, k4g = f(M1, D1, R + dt * k3r, G + dt * k3g)
        R = R + dt / 6.0 * (k1r + 2 * k2r + 2 * k3r + k4r)
        G = G + dt / 6.0 * (k1g + 2 * k2g + 2 * k3g + k4g)
        if (k + 1) % record_every == 0 or k + 1 == n:
            times.append(grid[2 * k + 2])
            Rs.append(R.copy())
            Gs.append(G.copy())
    return np.array(times), np.array(Rs), np.array(Gs)


def propagate(M, D, R0, t_end: float, dt: float, *, t0: float = 0.0, mean0=None,
              record_every: int = 1, tol: float | None = None) -> CovarianceTrajectory:
    """Integrate dR/dt = M R + R M^T + D and dG/dt = M G with fixed-step RK4.

    ``M`` and ``D`` are arrays or vectorized callables of time.  ``D`` may be the
    complex noise matrix C (its antisymmetric imaginary part keeps the
    commutators of R) or the real symmetrized diffusion.  When ``tol`` is given
    the run is repeated at dt/2 and the change of the final R is reported in
    ``step_error``.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    span = t_end - t0
    n = max(1, int(math.ceil(span / dt - 1e-9)))
    h = span / n
    Mf, Df = _as_function(M), _as_function(D)
    times, Rs, Gs = _rk4(Mf, Df, R0, t0, n, h, record_every)
    mean0 = np.zeros(Rs.shape[-1]) if mean0 is None else np.asarray(mean0)
    means = Gs @ mean0
    step_error = None
    if tol is not None:
        _, Rh, _ = _rk4(Mf, Df, R0, t0, 2 * n, h / 2.0, 2 * n)
        step_error = float(np.max(np.abs(Rh[-1] - Rs[-1])) / max(np.max(np.abs(Rs[-1])), 1e-300))
    return CovarianceTrajectory(times, Rs, Gs, means, h, step_error, tol)


def default_step(cfg: SystemConfig, cp: MirrorCoupling | None = None) -> float:
    """min(2 pi/omega_m, 1/kappa)/200, also resolving the fastest mirror rate."""
    base = min(2.0 * math.pi / m.omega_m for m in cfg.mirrors)
    base = min(base, min(1.0 / c.kappa for c in cfg.cavities))
    dt = base / 200.0
    fastest = max(m.gamma_m for m in cfg.mirrors)
    if cp is not None:
        fastest = max(fastest, 4.0 * abs(cp.alpha1), 4.0 * abs(cp.alpha2))
    if fastest > 0.0:
        dt = min(dt, 0.05 / fastest)
    return dt


@dataclass
class DynamicsRun:
    coupling: MirrorCoupling
    steady: SteadyStateBranch
    trajectory: CovarianceTrajectory


def simulate(cfg: SystemConfig, t_end: float, dt: float | None = None, *,
             record_every: int = 1, tol: float | None = None,
             delta: tuple[float, float] | None = None) -> DynamicsRun:
    """End-to-end: mean fields, mirror coupling, noise, covariance propagation."""
    gain, steady = operating_point(cfg, delta)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AdiabaticityWarning)
        cp = mirror_coupling(gain, steady, cfg, delta)
    Q = noise_correlations(gain, cfg)

    def C(t):
        T = noise_map(cp, t)
        return T @ Q @ np.swapaxes(T, -1, -2)

    build_diffusion(cp, gain, cfg, 0.0)  # PSD sanity check
    R0 = thermal_initial_state(cfg.mirror1.occupation, cfg.mirror2.occupation)
    if dt is None:
        dt = default_step(cfg, cp)
    traj = propagate(lambda t: build_drift(cp, t), C, R0, t_end, dt,
                     record_every=record_every, tol=tol)
    return DynamicsRun(cp, steady, traj)


def gain_for(cfg: SystemConfig) -> GainCoefficients:
    return gain_coefficients(cfg.atomic, cfg.cavity1.kappa, cfg.cavity2.kappa)
