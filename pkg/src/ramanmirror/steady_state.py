"""Steady intracavity fields: Kerr-type S curves and the coherence-coupled system.

Sign conventions follow the package-wide one: ``delta0 = nu - omega_L`` and a
positive detuning is red.  Mode ``j`` sees the effective complex damping
``kappa_j/2 + (-1)^j eta_j`` and the static radiation-pressure pull ``beta_j I_j``.

Within the rotating-wave approximation each mode obeys the real cubic

    I [(D - beta I)^2 + c^2] = |eps|^2,    D = delta0 + Im k,  c = Re k,

with ``k = kappa/2 + (-1)^j eta``.  Beyond it, the two-photon coherence couples the
modes through xi_12 = xi5* - xi6* and xi_21 = xi7 - xi8, and the mean fields solve

    alpha1 a1 - xi12 conj(a2) = eps1,    alpha2 a2 + xi21 conj(a1) = eps2,
    alpha1 = i(delta01 - beta1 I1) + kappa1/2 - eta1,
    alpha2 = i(delta02 - beta2 I2) + kappa2/2 + eta2,

self-consistently with I_j = |a_j|^2.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .config import SystemConfig, derive_params, drive_amplitude
from .constants import HBAR
from .gain import GainCoefficients, gain_coefficients

RESIDUAL_TOL = 1e-10
DEDUP_RTOL = 1e-6


class Stability(str, Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class SteadyStateBranch:
    """One self-consistent steady state.

    In a single-mode (RWA) solve the fields of the mode not being solved are NaN.
    ``residual`` is the larger relative residual of the defining equations.
    """

    I1: float
    I2: float
    a1_mean: complex
    a2_mean: complex
    mirror_shift: tuple[float, float]
    branch_id: int = 0
    stable: Stability = Stability.UNKNOWN
    residual: float = 0.0

    @property
    def intensities(self) -> tuple[float, float]:
        return (self.I1, self.I2)


class BranchSet(list):
    """List of branches carrying solver diagnostics."""

    def __init__(self, branches: Iterable[SteadyStateBranch] = (),
                 diagnostics: Sequence[str] = ()):
        super().__init__(branches)
        self.diagnostics = list(diagnostics)


@dataclass(frozen=True)
class CavityModel:
    """Everything the mean-field equations need, precomputed from a config."""

    kappa: tuple[float, float]
    beta: tuple[float, float]
    G: tuple[float, float]
    nu: tuple[float, float]
    gain: GainCoefficients

    @classmethod
    def from_config(cls, cfg: SystemConfig) -> "CavityModel":
        dp = derive_params(cfg)
        kappa = (cfg.cavity1.kappa, cfg.cavity2.kappa)
        return cls(kappa=kappa, beta=dp.beta, G=dp.G,
                   nu=(cfg.cavity1.nu, cfg.cavity2.nu),
                   gain=gain_coefficients(cfg.atomic, *kappa))

    def damping(self, mode: int) -> complex:
        """kappa_j/2 + (-1)^j eta_j."""
        if mode == 1:
            return self.kappa[0] / 2.0 - self.gain.eta1
        if mode == 2:
            return self.kappa[1] / 2.0 + self.gain.eta2
        raise ValueError(f"mode index must be 1 or 2, got {mode}")

    def alpha(self, mode: int, delta0: float, intensity: float) -> complex:
        b = self.beta[mode - 1]
        return 1j * (delta0 - b * intensity) + self.damping(mode)

    def epsilon(self, mode: int, power: float, delta0: float) -> float:
        """Drive amplitude for pump power ``power`` at detuning ``delta0``."""
        return drive_amplitude(self.kappa[mode - 1], power, self.nu[mode - 1] - delta0)

    def mirror_shift(self, mode: int, intensity: float) -> float:
        """<b + b^dag> = -beta I / G."""
        G = self.G[mode - 1]
        return -self.beta[mode - 1] * intensity / G if G else 0.0


def _as_model(model) -> CavityModel:
    return model if isinstance(model, CavityModel) else CavityModel.from_config(model)


# ---------------------------------------------------------------------------
# rotating-wave approximation: one real cubic per mode


def rwa_cubic(model, mode_index: int, delta0: float, epsilon: float) -> np.ndarray:
    """Coefficients (highest power first) of the intensity cubic."""
    model = _as_model(model)
    k = model.damping(mode_index)
    b = model.beta[mode_index - 1]
    D, c = delta0 + k.imag, k.real
    return np.array([b * b, -2.0 * b * D, D * D + c * c, -epsilon * epsilon])


def rwa_residual(model, mode_index: int, delta0: float, epsilon: float,
                 intensity: float) -> float:
    """Relative residual of I |alpha(I)|^2 = |eps|^2."""
    model = _as_model(model)
    lhs = intensity * abs(model.alpha(mode_index, delta0, intensity)) ** 2
    target = epsilon * epsilon
    if target == 0.0:
        return abs(lhs)
    return abs(lhs - target) / target


def _cubic_roots(b: float, D: float, c: float, eps2: float) -> list[tuple[float, float]]:
    """Nonnegative roots of I[(D - bI)^2 + c^2] = eps2 with the cubic slope at each.

    Works in u = b I / L with L = max(|D|, |c|), where the cubic has O(1)
    coefficients; roots are bracketed between the critical points and refined
    with brentq, then Newton-polished in the original variable.
    """
    if eps2 == 0.0:
        return [(0.0, D * D + c * c)]
    if b == 0.0:
        return [(eps2 / (D * D + c * c), D * D + c * c)]
    L = max(abs(D), abs(c))
    d, cc, q = D / L, c / L, b * eps2 / L**3

    def f(u):
        return u * ((d - u) ** 2 + cc * cc) - q

    disc = d * d - 3.0 * cc * cc
    crit = []
    if disc > 0.0:
        s = math.sqrt(disc)
        crit = [u for u in ((2.0 * d - s) / 3.0, (2.0 * d + s) / 3.0) if u > 0.0]
    hi = max(1.0, 2.0 * abs(d), q ** (1.0 / 3.0))
    while f(hi) <= 0.0:
        hi *= 2.0
    edges = [0.0] + crit + [hi]
    roots = []
    for a, z in zip(edges[:-1], edges[1:]):
        fa, fz = f(a), f(z)
        if fa == 0.0:
            roots.append(a)
        elif fa * fz < 0.0:
            roots.append(brentq(f, a, z, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500))
        elif fz == 0.0 and z == edges[-1]:
            roots.append(z)
    out = []
    for u in roots:
        x = u * L / b
        for _ in range(8):
            p = x * ((D - b * x) ** 2 + c * c) - eps2
            dp = (D - b * x) ** 2 + c * c - 2.0 * b * x * (D - b * x)
            if dp == 0.0:
                break
            step = p / dp
            x_new = x - step
            if x_new < 0.0:
                break
            x = x_new
            if abs(step) <= 1e-16 * abs(x):
                break
        dp = (D - b * x) ** 2 + c * c - 2.0 * b * x * (D - b * x)
        if not out or abs(x - out[-1][0]) > 1e-9 * max(x, out[-1][0]):
            out.append((x, dp))
    return out


def classify_stability(branches: Sequence[SteadyStateBranch],
                       slopes: Sequence[float] | None = None,
                       slope_tol: float = 1e-9) -> list[SteadyStateBranch]:
    """Flag branches stable/unstable/unknown without reordering them.

    With ``slopes`` (d|eps|^2/dI at each root, relative scale) the sign decides:
    positive is stable, negative unstable, near-zero (a turning point) unknown.
    Without slopes the cubic pattern is used: a single root is stable, three
    roots are stable/unstable/stable, anything else is unknown.
    """
    n = len(branches)
    if slopes is not None:
        flags = [Stability.STABLE if s > slope_tol else
                 Stability.UNSTABLE if s < -slope_tol else Stability.UNKNOWN for s in slopes]
    elif n == 1:
        flags = [Stability.STABLE]
    elif n == 3:
        flags = [Stability.STABLE, Stability.UNSTABLE, Stability.STABLE]
    else:
        flags = [Stability.UNKNOWN] * n
    return [_replace_flag(b, f) for b, f in zip(branches, flags)]


def _replace_flag(branch: SteadyStateBranch, flag: Stability) -> SteadyStateBranch:
    return SteadyStateBranch(branch.I1, branch.I2, branch.a1_mean, branch.a2_mean,
                             branch.mirror_shift, branch.branch_id, flag, branch.residual)


def rwa_branches(model, mode_index: int, delta0: float, epsilon: float) -> BranchSet:
    """All nonnegative steady intensities of one mode, ascending."""
    model = _as_model(model)
    k = model.damping(mode_index)
    b = model.beta[mode_index - 1]
    D, c = delta0 + k.imag, k.real
    eps2 = epsilon * epsilon
    roots = _cubic_roots(b, D, c, eps2)
    diagnostics = []
    if not roots:
        diagnostics.append("no nonnegative root")
    nan = complex(math.nan, math.nan)
    branches, slopes = [], []
    scale = D * D + c * c
    for i, (x, dp) in enumerate(roots):
        a = epsilon / model.alpha(mode_index, delta0, x)
        res = rwa_residual(model, mode_index, delta0, epsilon, x)
        shift = model.mirror_shift(mode_index, x)
        if mode_index == 1:
            br = SteadyStateBranch(x, math.nan, a, nan, (shift, math.nan), i, residual=res)
        else:
            br = SteadyStateBranch(math.nan, x, nan, a, (math.nan, shift), i, residual=res)
        branches.append(br)
        slopes.append(dp / scale if scale else dp)
    return BranchSet(classify_stability(branches, slopes), diagnostics)


def rwa_fold_points(model, mode_index: int, delta0: float) -> list[tuple[float, float]]:
    """Turning points (I, |eps|^2) of the S curve; empty when monostable."""
    model = _as_model(model)
    k = model.damping(mode_index)
    b = model.beta[mode_index - 1]
    D, c = delta0 + k.imag, k.real
    disc = D * D - 3.0 * c * c
    if b == 0.0 or disc <= 0.0:
        return []
    s = math.sqrt(disc)
    out = []
    for x in ((2.0 * D + s) / (3.0 * b), (2.0 * D - s) / (3.0 * b)):
        if x > 0.0:
            out.append((x, x * ((D - b * x) ** 2 + c * c)))
    return sorted(out, key=lambda p: p[1])


# ---------------------------------------------------------------------------
# beyond the rotating-wave approximation


@dataclass
class _CoupledSystem:
    model: CavityModel
    delta01: float
    delta02: float
    eps1: float
    eps2: float
    _a1c: complex = field(init=False)
    _a2c: complex = field(init=False)

    def __post_init__(self):
        m = self.model
        self._a1c = 1j * self.delta01 + m.damping(1)
        self._a2c = 1j * self.delta02 + m.damping(2)
        self.x12 = m.gain.xi12
        self.x21 = m.gain.xi21
        self.b1, self.b2 = m.beta

    def fields(self, I1: float, I2: float):
        al1 = self._a1c - 1j * self.b1 * I1
        al2c = (self._a2c - 1j * self.b2 * I2).conjugate()
        den = al1 * al2c + self.x12 * self.x21.conjugate()
        a1 = (self.eps1 * al2c + self.x12 * self.eps2) / den
        a2 = (self.eps2 * al1.conjugate() - self.x21 * self.eps1) / den.conjugate()
        return a1, a2, al1, al2c, den

    def residual_and_jacobian(self, I1: float, I2: float):
        a1, a2, al1, al2c, den = self.fields(I1, I2)
        # derivatives of den, numerators w.r.t. I1 and I2
        dden = (-1j * self.b1 * al2c, 1j * self.b2 * al1)
        dn1 = (0.0, 1j * self.b2 * self.eps1)
        dn2 = (1j * self.b1 * self.eps2, 0.0)
        n1 = a1 * den
        n2c = (a2 * den.conjugate()).conjugate()  # conj(numerator of a2)
        J = np.empty((2, 2))
        for k in range(2):
            da1 = (dn1[k] * den - n1 * dden[k]) / den**2
            # a2 = conj(n2c / den) => da2 = conj(d(n2c/den))
            d_n2c = np.conj(dn2[k])
            da2 = np.conj((d_n2c * den - n2c * dden[k]) / den**2)
            J[0, k] = (1.0 if k == 0 else 0.0) - 2.0 * (a1.conjugate() * da1).real
            J[1, k] = (1.0 if k == 1 else 0.0) - 2.0 * (a2.conjugate() * da2).real
        F = np.array([I1 - abs(a1) ** 2, I2 - abs(a2) ** 2])
        return F, J, a1, a2

    def relative_residual(self, I1: float, I2: float) -> float:
        a1, a2, *_ = self.fields(I1, I2)
        out = 0.0
        for I, a in ((I1, a1), (I2, a2)):
            p = abs(a) ** 2
            if p == 0.0:
                out = max(out, 0.0 if I == 0.0 else math.inf)
            else:
                out = max(out, abs(I / p - 1.0))
        return out

    def newton(self, I0: tuple[float, float], max_iter: int = 100):
        x = np.maximum(np.asarray(I0, dtype=float), 0.0)
        F, J, *_ = self.residual_and_jacobian(*x)
        for _ in range(max_iter):
            scale = np.maximum(np.abs(x), 1.0)
            norm = np.max(np.abs(F) / scale)
            if norm <= 1e-14:
                return x
            try:
                step = np.linalg.solve(J, F)
            except np.linalg.LinAlgError:
                return None
            lam = 1.0
            while lam > 1e-6:
                trial = np.maximum(x - lam * step, 0.0)
                Ft, Jt, *_ = self.residual_and_jacobian(*trial)
                if np.max(np.abs(Ft) / np.maximum(np.abs(trial), 1.0)) < norm:
                    break
                lam *= 0.5
            else:
                return x if self.relative_residual(*x) <= RESIDUAL_TOL else None
            if np.all(np.abs(trial - x) <= 1e-15 * np.maximum(np.abs(x), 1e-300)):
                x, F, J = trial, Ft, Jt
                break
            x, F, J = trial, Ft, Jt
        return x

    def damped_fixed_point(self, I0: tuple[float, float], damping: float = 0.5,
                           tol: float = 1e-10, max_iter: int = 1000):
        I = np.asarray(I0, dtype=float)
        for _ in range(max_iter):
            a1, a2, *_ = self.fields(*I)
            target = np.array([abs(a1) ** 2, abs(a2) ** 2])
            new = (1.0 - damping) * I + damping * target
            if np.all(np.abs(new - I) <= tol * np.maximum(np.abs(new), 1e-300)):
                return new
            I = new
        return None

    def mean_field_jacobian(self, a1: complex, a2: complex) -> np.ndarray:
        """Real 4x4 Jacobian of the mean-field flow at (a1, a2)."""

        def flow(v):
            z1, z2 = complex(v[0], v[1]), complex(v[2], v[3])
            al1 = self._a1c - 1j * self.b1 * abs(z1) ** 2
            al2 = self._a2c - 1j * self.b2 * abs(z2) ** 2
            d1 = -al1 * z1 + self.x12 * z2.conjugate() + self.eps1
            d2 = -al2 * z2 - self.x21 * z1.conjugate() + self.eps2
            return np.array([d1.real, d1.imag, d2.real, d2.imag])

        v0 = np.array([a1.real, a1.imag, a2.real, a2.imag])
        J = np.empty((4, 4))
        for k in range(4):
            h = 1e-6 * max(abs(v0[k]), np.max(np.abs(v0)), 1e-12)
            e = np.zeros(4)
            e[k] = h
            J[:, k] = (flow(v0 + e) - flow(v0 - e)) / (2.0 * h)
        return J

    def stability(self, a1: complex, a2: complex) -> Stability:
        ev = np.linalg.eigvals(self.mean_field_jacobian(a1, a2))
        scale = max(np.max(np.abs(ev)), 1e-300)
        top = np.max(ev.real)
        if top < -1e-6 * scale:
            return Stability.STABLE
        if top > 1e-6 * scale:
            return Stability.UNSTABLE
        return Stability.UNKNOWN


def _dedup(points: list[tuple[float, float]], rtol: float = DEDUP_RTOL):
    kept: list[tuple[float, float]] = []
    for p in points:
        for q in kept:
            if all(abs(a - b) <= rtol * max(abs(a), abs(b), 1e-300) for a, b in zip(p, q)):
                break
        else:
            kept.append(p)
    return kept


def brwa_mean_fields(model, delta0: float, epsilon: float, mu: float,
                     seed_guess: Iterable[tuple[float, float]] = (),
                     delta02: float | None = None) -> BranchSet:
    """Self-consistent coupled steady states, sorted by I1.

    ``delta02`` defaults to ``-delta0``.  Seeds: the products of each mode's
    uncoupled S-curve roots, the grid {0, I_lin, 10 I_lin}^2 and any caller
    supplied guesses; each is refined by damped Newton with an analytic Jacobian.
    """
    if mu < 0.0:
        raise ValueError("mu must be >= 0")
    model = _as_model(model)
    d2 = -delta0 if delta02 is None else delta02
    sysm = _CoupledSystem(model, delta0, d2, epsilon, mu * epsilon)

    r1 = [x for x, _ in _rwa_roots(model, 1, delta0, epsilon)]
    r2 = [x for x, _ in _rwa_roots(model, 2, d2, mu * epsilon)]
    seeds = [(a, b) for a in r1 for b in r2]
    seeds.extend(tuple(s) for s in seed_guess)
    lin = (_linear_intensity(model, 1, delta0, epsilon),
           _linear_intensity(model, 2, d2, mu * epsilon))
    grid = [(a, b) for a in (0.0, lin[0], 10 * lin[0]) for b in (0.0, lin[1], 10 * lin[1])]

    found = _solve_from_seeds(sysm, seeds)
    if not found:
        found = _solve_from_seeds(sysm, grid)
    return _package(sysm, found)


def _solve_from_seeds(sysm: _CoupledSystem, seeds):
    found = []
    for s in seeds:
        x = sysm.newton(s)
        if x is None:
            continue
        if sysm.relative_residual(*x) <= RESIDUAL_TOL:
            found.append((float(x[0]), float(x[1])))
    return _dedup(found)


def _package(sysm: _CoupledSystem, found) -> BranchSet:
    model = sysm.model
    diagnostics = [] if found else ["no seed converged"]
    found = sorted(found)
    out = []
    for i, (I1, I2) in enumerate(found):
        a1, a2, *_ = sysm.fields(I1, I2)
        out.append(SteadyStateBranch(
            I1, I2, a1, a2, (model.mirror_shift(1, I1), model.mirror_shift(2, I2)), i,
            sysm.stability(a1, a2), sysm.relative_residual(I1, I2)))
    return BranchSet(out, diagnostics)


def _rwa_roots(model: CavityModel, mode: int, delta0: float, epsilon: float):
    k = model.damping(mode)
    return _cubic_roots(model.beta[mode - 1], delta0 + k.imag, k.real, epsilon * epsilon)


def _linear_intensity(model: CavityModel, mode: int, delta0: float, epsilon: float) -> float:
    k = model.damping(mode)
    return epsilon * epsilon / ((delta0 + k.imag) ** 2 + k.real**2)


def brwa_residual(model, delta0: float, epsilon: float, mu: float, I1: float, I2: float,
                  delta02: float | None = None) -> float:
    """Larger relative residual of the two coupled intensity equations."""
    model = _as_model(model)
    d2 = -delta0 if delta02 is None else delta02
    return _CoupledSystem(model, delta0, d2, epsilon, mu * epsilon).relative_residual(I1, I2)


def mean_fields_fixed_point(model, delta01: float, delta02: float, eps1: float, eps2: float,
                            tol: float = 1e-10, max_iter: int = 1000,
                            damping: float = 0.5) -> SteadyStateBranch:
    """Damped fixed-point iteration for a monostable operating point.

    Seeded from the uncoupled (RWA) lowest roots; used to set the mean fields
    about which the mirror fluctuations are linearized.
    """
    model = _as_model(model)
    sysm = _CoupledSystem(model, delta01, delta02, eps1, eps2)
    seed = (_rwa_roots(model, 1, delta01, eps1)[0][0], _rwa_roots(model, 2, delta02, eps2)[0][0])
    I = sysm.damped_fixed_point(seed, damping, tol, max_iter)
    if I is None:
        raise RuntimeError("self-consistent mean fields did not converge")
    # polish so the residual is at round-off level
    polished = sysm.newton(tuple(I))
    if polished is not None and sysm.relative_residual(*polished) <= sysm.relative_residual(*I):
        I = polished
    (branch,) = _package(sysm, [(float(I[0]), float(I[1]))])
    return branch


# ---------------------------------------------------------------------------
# phase diagrams


@dataclass
class PhaseDiagram:
    """Root counts over a (detuning, power) grid; arrays are [delta0, P]."""

    delta0: np.ndarray
    power: np.ndarray
    count: np.ndarray
    I_min: np.ndarray
    I_max: np.ndarray
    model: str
    diagnostics: list[str] = field(default_factory=list)


def _row(model: CavityModel, kind: str, delta0: float, powers, mu: float, mode_index: int):
    n = len(powers)
    count = np.zeros(n, dtype=int)
    lo = np.full(n, np.nan)
    hi = np.full(n, np.nan)
    diag = []
    previous: list[tuple[float, float]] = []
    for k, P in enumerate(powers):
        eps = model.epsilon(mode_index if kind == "rwa" else 1, P, delta0)
        if kind == "rwa":
            res = rwa_branches(model, mode_index, delta0, eps)
            values = [b.I1 if mode_index == 1 else b.I2 for b in res]
        else:
            res = brwa_mean_fields(model, delta0, eps, mu, seed_guess=previous)
            previous = [b.intensities for b in res]
            values = [b.I1 for b in res]
        for msg in res.diagnostics:
            diag.append(f"delta0={delta0!r} P={P!r}: {msg}")
        count[k] = len(res)
        if values:
            lo[k], hi[k] = min(values), max(values)
    return count, lo, hi, diag


def phase_diagram(model, delta0_grid, P_grid, kind: str = "rwa", mu: float = 0.1,
                  mode_index: int = 1, jobs: int = 1) -> PhaseDiagram:
    """Count steady states on every (delta0, P) cell.

    Rows (fixed detuning) are independent and may run on ``jobs`` threads;
    within a row the previous cell's solutions seed the next.  Results land in
    preassigned slots, so the output does not depend on scheduling.
    """
    kind = kind.lower()
    if kind not in ("rwa", "brwa"):
        raise ValueError(f"model must be 'rwa' or 'brwa', got {kind!r}")
    model = _as_model(model)
    d0 = np.asarray(delta0_grid, dtype=float)
    P = np.asarray(P_grid, dtype=float)
    if d0.size == 0 or P.size == 0:
        raise ValueError("grids must be nonempty")
    for g in (d0, P):
        if g.size > 1 and not (np.all(np.diff(g) > 0) or np.all(np.diff(g) < 0)):
            raise ValueError("grids must be strictly monotone")

    shape = (d0.size, P.size)
    count = np.zeros(shape, dtype=int)
    I_min = np.full(shape, np.nan)
    I_max = np.full(shape, np.nan)
    diagnostics: list[list[str]] = [[] for _ in range(d0.size)]

    def work(i):
        c, lo, hi, dg = _row(model, kind, float(d0[i]), P, mu, mode_index)
        count[i], I_min[i], I_max[i] = c, lo, hi
        diagnostics[i] = dg

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            list(pool.map(work, range(d0.size)))
    else:
        for i in range(d0.size):
            work(i)
    return PhaseDiagram(d0, P, count, I_min, I_max, kind,
                        [m for row in diagnostics for m in row])


def power_for_epsilon(model, mode_index: int, epsilon: float, delta0: float) -> float:
    """Inverse of :meth:`CavityModel.epsilon`."""
    model = _as_model(model)
    return epsilon**2 * HBAR * (model.nu[mode_index - 1] - delta0) / model.kappa[mode_index - 1]
