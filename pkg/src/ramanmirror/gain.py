"""Laser coefficients from the adiabatically eliminated four-level atom.

The atomic populations and coherences reach steady state on the fast atomic
timescale; their closed forms feed the eight complex master-equation rates
xi_1..xi_8 (second order in the atom-field couplings, all orders in the drives).
The population trace ``rho`` is set to 1 so the coefficients come out as rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .config import AtomicConfig

SINGULAR_RTOL = 1e-12


class DegenerateNormalizerError(ArithmeticError):
    pass


class SingularDenominatorError(ArithmeticError):
    pass


@dataclass(frozen=True)
class PopulationSolution:
    Z_aa: float
    Z_bb: float
    Z_cc: float
    Z_dd: float
    Z_ab: complex
    Z_cd: complex
    d: float
    d_prime: float
    chi: float
    chi_prime: float

    def steady_state(self, r_a: float, rho: float = 1.0) -> dict[str, complex]:
        """Zeroth-order steady populations/coherences, r_a rho Z / d."""
        s, sp = r_a * rho / self.d, r_a * rho / self.d_prime
        return {"aa": s * self.Z_aa, "bb": s * self.Z_bb, "ab": s * self.Z_ab,
                "cc": sp * self.Z_cc, "dd": sp * self.Z_dd, "cd": sp * self.Z_cd}


@dataclass(frozen=True)
class AtomicDenominators:
    A: complex
    B: complex
    D: complex


@dataclass(frozen=True)
class GainCoefficients:
    """The eight rates xi_1..xi_8 plus the cavity combinations built from them.

    ``kappa1``/``kappa2`` are optional; the effective-rate properties need them.
    """

    xi1: complex
    xi2: complex
    xi3: complex
    xi4: complex
    xi5: complex
    xi6: complex
    xi7: complex
    xi8: complex
    kappa1: float | None = None
    kappa2: float | None = None

    @property
    def xi(self) -> np.ndarray:
        return np.array([self.xi1, self.xi2, self.xi3, self.xi4,
                         self.xi5, self.xi6, self.xi7, self.xi8], dtype=complex)

    @property
    def xi11(self) -> complex:
        return self.xi1.conjugate() - self.xi2.conjugate()

    @property
    def xi12(self) -> complex:
        return self.xi5.conjugate() - self.xi6.conjugate()

    @property
    def xi21(self) -> complex:
        return self.xi7 - self.xi8

    @property
    def xi22(self) -> complex:
        return self.xi3 - self.xi4

    # the mean-field "eta" combinations coincide with xi11 and xi22
    eta1 = xi11
    eta2 = xi22

    def _kappas(self) -> tuple[float, float]:
        if self.kappa1 is None or self.kappa2 is None:
            raise ValueError("cavity decay rates were not supplied to compute_xi")
        return self.kappa1, self.kappa2

    @property
    def kappa_eff1(self) -> complex:
        return self._kappas()[0] - 2.0 * self.xi11

    @property
    def kappa_eff2(self) -> complex:
        return self._kappas()[1] + 2.0 * self.xi22

    @property
    def kappa_combined(self) -> complex:
        return self.kappa_eff1 * self.kappa_eff2 + 4.0 * self.xi12 * self.xi21

    def scaled(self, factor: float) -> "GainCoefficients":
        return GainCoefficients(*(factor * x for x in self.xi), self.kappa1, self.kappa2)

    def as_dict(self) -> dict[str, complex]:
        out = {f"xi{i + 1}": complex(x) for i, x in enumerate(self.xi)}
        out.update(xi11=self.xi11, xi12=self.xi12, xi21=self.xi21, xi22=self.xi22,
                   eta1=self.eta1, eta2=self.eta2)
        if self.kappa1 is not None and self.kappa2 is not None:
            out.update(kappa_eff1=self.kappa_eff1, kappa_eff2=self.kappa_eff2,
                       kappa_combined=self.kappa_combined)
        return out


def initial_coherence(eta: float) -> float:
    """Injected a-c coherence, (1/2) sqrt(1 - eta^2); vanishes at eta = +-1."""
    return 0.5 * math.sqrt(max(0.0, 1.0 - eta * eta))


def solve_populations(atomic: AtomicConfig) -> PopulationSolution:
    at = atomic
    lower, upper = (1.0 - at.eta) / 2.0, (1.0 + at.eta) / 2.0
    two_photon = at.Delta_c - at.Delta_2 - at.Delta_1
    chi = at.gamma_ab**2 + at.Delta_c**2
    chi_p = at.gamma_cd**2 + two_photon**2
    d = 2.0 * at.Omega**2 * at.gamma_ab * (at.gamma_a + at.gamma_b) + chi * at.gamma_b * at.gamma_a
    d_p = (2.0 * at.Omega_p**2 * at.gamma_cd * (at.gamma_c + at.gamma_d)
           + at.gamma_c * at.gamma_d * chi_p)
    if d == 0.0 or d_p == 0.0:
        raise DegenerateNormalizerError(f"population normalizer vanished (d={d}, d'={d_p})")

    Z_aa = (2.0 * at.Omega**2 * at.gamma_ab + at.gamma_b * chi) * lower
    Z_bb = at.Omega**2 * at.gamma_ab * (1.0 - at.eta)
    Z_cc = (2.0 * at.Omega_p**2 * at.gamma_cd + at.gamma_d * chi_p) * upper
    Z_dd = at.Omega_p**2 * at.gamma_cd * (1.0 + at.eta)
    # gamma + i*Delta may vanish only when the corresponding chi does too
    Z_ab = (1j * at.Omega * at.gamma_b * chi / complex(at.gamma_ab, at.Delta_c) * lower
            if chi else 0j)
    Z_cd = (1j * at.Omega_p * at.gamma_d * chi_p / complex(at.gamma_cd, two_photon) * upper
            if chi_p else 0j)
    return PopulationSolution(Z_aa, Z_bb, Z_cc, Z_dd, Z_ab, Z_cd, d, d_p, chi, chi_p)


def compute_denominators(atomic: AtomicConfig) -> AtomicDenominators:
    at = atomic
    w_bc = complex(at.gamma_bc, -(at.Delta_c - at.Delta_2))
    w_ad = complex(at.gamma_ad, at.Delta_c - at.Delta_1)
    if w_bc == 0 or w_ad == 0:
        raise ZeroDivisionError("gamma_bc - i(Delta_c - Delta_2) or "
                                "gamma_ad + i(Delta_c - Delta_1) is exactly zero")
    W2, Wp2 = at.Omega**2, at.Omega_p**2
    A = -complex(at.gamma_ac, at.Delta_2) - W2 / w_bc - Wp2 / w_ad
    B = at.Omega * at.Omega_p / w_bc + at.Omega * at.Omega_p / w_ad
    D = -complex(at.gamma_bd, -at.Delta_1) - W2 / w_ad - Wp2 / w_bc
    return AtomicDenominators(A, B, D)


def compute_xi(pop: PopulationSolution, den: AtomicDenominators, g1: float, g2: float,
               r_a: float, kappa1: float | None = None,
               kappa2: float | None = None) -> GainCoefficients:
    A, B, D = den.A, den.B, den.D
    det = B * B - A * D
    if abs(det) < SINGULAR_RTOL * max(abs(B) ** 2, abs(A * D)) or det == 0:
        raise SingularDenominatorError(f"B^2 - AD = {det} is numerically zero")
    lo = r_a / pop.d       # multiplies Z_aa, Z_bb
    up = r_a / pop.d_prime  # multiplies Z_cc, Z_dd
    a11, a22, cross = g1 * g1 * A / det, g2 * g2 * D / det, g1 * g2 * B / det
    return GainCoefficients(
        xi1=a11 * up * pop.Z_dd,
        xi2=a11 * lo * pop.Z_bb,
        xi3=a22 * up * pop.Z_cc,
        xi4=a22 * lo * pop.Z_aa,
        xi5=cross * lo * pop.Z_aa,
        xi6=cross * up * pop.Z_cc,
        xi7=cross * lo * pop.Z_bb,
        xi8=cross * up * pop.Z_dd,
        kappa1=kappa1,
        kappa2=kappa2,
    )


def gain_coefficients(atomic: AtomicConfig, kappa1: float | None = None,
                      kappa2: float | None = None) -> GainCoefficients:
    """Convenience: populations, denominators and xi's in one call."""
    return compute_xi(solve_populations(atomic), compute_denominators(atomic),
                      atomic.g1, atomic.g2, atomic.r_a, kappa1, kappa2)


# ---------------------------------------------------------------------------
# numerical cross-check of the closed forms


@dataclass(frozen=True)
class PopulationCheck:
    residual: float
    tol: float
    t_final: float
    ode: dict[str, complex]
    closed: dict[str, complex]

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol


class NonConvergenceError(RuntimeError):
    pass


# state layout: rho_aa, rho_bb, rho_cc, rho_dd, rho_ad, rho_bc, rho_ab, rho_cd
_KEYS = ("aa", "bb", "cc", "dd", "ad", "bc", "ab", "cd")


def _zeroth_order_system(at: AtomicConfig, rho: float = 1.0):
    """Right-hand side y' = L y + s of the zeroth-order atomic equations.

    The field-dependent coherences rho_ac, rho_bd are first order in g and are
    dropped; rho_ba = conj(rho_ab) etc. are eliminated by splitting into real and
    imaginary parts, so the real system has 16 components.
    """
    src = np.zeros(8, dtype=complex)
    src[0] = at.r_a * rho * (1.0 - at.eta) / 2.0
    src[2] = at.r_a * rho * (1.0 + at.eta) / 2.0
    W, Wp = at.Omega, at.Omega_p

    def rhs(y):
        aa, bb, cc, dd, ad, bc, ab, cd = y
        return np.array([
            -1j * W * (np.conj(ab) - ab) - at.gamma_a * aa,
            -1j * W * (ab - np.conj(ab)) - at.gamma_b * bb,
            -1j * Wp * (np.conj(cd) - cd) - at.gamma_c * cc,
            -1j * Wp * (cd - np.conj(cd)) - at.gamma_d * dd,
            -(at.gamma_ad + 1j * (at.Delta_c - at.Delta_1)) * ad,
            -(at.gamma_bc - 1j * (at.Delta_c - at.Delta_2)) * bc,
            -(at.gamma_ab + 1j * at.Delta_c) * ab - 1j * W * (bb - aa),
            -(at.gamma_cd + 1j * (at.Delta_c - at.Delta_1 - at.Delta_2)) * cd
            - 1j * Wp * (dd - cc),
        ]) + src

    return rhs


def check_populations_against_ode(atomic: AtomicConfig, tol: float = 1e-8,
                                  max_decay_times: float = 5000.0) -> PopulationCheck:
    """Integrate the zeroth-order atomic equations to steady state and compare.

    The equations are linear with constant coefficients, so they are stepped
    with the exact one-step propagator exp(L h) (an exponential integrator) from
    an empty atom, using h = 5 / (slowest decay rate), until two successive
    states agree far below ``tol``.
    """
    at = atomic
    rates = [getattr(at, n) for n in ("gamma_a", "gamma_b", "gamma_c", "gamma_d",
                                       "gamma_ab", "gamma_cd", "gamma_ad", "gamma_bc")]
    if min(rates) <= 0.0:
        raise ValueError("all decay rates must be > 0 for a steady state to exist")
    rhs_c = _zeroth_order_system(at)

    def rhs(y):
        return rhs_c(y.view(complex)).view(float)

    n = 16
    src = rhs(np.zeros(n))
    aug = np.zeros((n + 1, n + 1))
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        aug[:n, k] = rhs(e) - src
    aug[:n, n] = src
    h = 5.0 / min(rates)
    step = expm(aug * h)
    prop, inject = step[:n, :n], step[:n, n]

    closed = solve_populations(at).steady_state(at.r_a)
    y = np.zeros(n)
    t = 0.0
    while True:
        y_new = prop @ y + inject
        t += h
        change = np.max(np.abs(y_new - y))
        y = y_new
        if change <= 1e-3 * tol * max(np.max(np.abs(y)), 1e-300):
            break
        if t * min(rates) > max_decay_times:
            raise NonConvergenceError("zeroth-order populations did not settle")

    ode = dict(zip(_KEYS, y.view(complex)))
    magnitude = max(abs(v) for v in closed.values())
    floor = 1e-6 * magnitude if magnitude > 0 else 1.0
    residual = max(abs(ode[k] - closed[k]) / max(abs(closed[k]), floor) for k in closed)
    # the drive-free coherences must have decayed away
    residual = max(residual, abs(ode["ad"]) / floor, abs(ode["bc"]) / floor)
    return PopulationCheck(float(residual), tol, t, ode, closed)
