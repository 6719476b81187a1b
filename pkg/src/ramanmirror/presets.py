"""Parameter sets for the figure-reproduction runs.

Shared values: m = 145 ng, L = 112 / 88.6 um, lambda = 810 / 1024 nm,
r_a = 1.6 MHz, gamma_m = 2 pi x 60 MHz, omega_m = 2 pi x 3 MHz, all atomic
decay and dephasing rates 3.4 MHz, kappa = 2 pi x 215 kHz, Delta = 0.
"""

from __future__ import annotations

import math
from dataclasses import replace

from .config import AtomicConfig, CavityModeConfig, MirrorConfig, SystemConfig

TWO_PI = 2.0 * math.pi
GAMMA = 3.4e6
MASS = 145e-12
OMEGA_M = TWO_PI * 3e6
GAMMA_M = TWO_PI * 60e6
KAPPA = TWO_PI * 215e3
R_A = 1.6e6


def paper_config(*, g: float = TWO_PI * 3e6, Omega: float = 10.0, Omega_p: float = 0.018,
                 eta: float = 1.0, power: float = 1e-3, mu: float | None = None,
                 detuning: float = TWO_PI * 3e6, n: float = 5.0, N: float = 1.0,
                 gamma_m: float = GAMMA_M) -> SystemConfig:
    """Omega and Omega_p in units of the atomic rate; detuning of cavity 2 is -detuning.

    With ``mu`` given, cavity 2 is driven at the power that makes eps2 = mu * eps1.
    """
    atomic = AtomicConfig.symmetric(GAMMA, g1=g, g2=g, Omega=Omega * GAMMA,
                                    Omega_p=Omega_p * GAMMA, r_a=R_A, eta=eta)
    c1 = CavityModeConfig.from_wavelength(810e-9, length=112e-6, kappa=KAPPA, power=power,
                                          detuning=detuning, N_thermal=N)
    c2 = CavityModeConfig.from_wavelength(1024e-9, length=88.6e-6, kappa=KAPPA, power=power,
                                          detuning=-detuning, N_thermal=N)
    if mu is not None:
        # eps^2 = kappa P / (hbar omega_L)
        p2 = mu**2 * power * c2.omega_L / c1.omega_L
        c2 = replace(c2, power=p2)
    m = MirrorConfig(mass=MASS, omega_m=OMEGA_M, gamma_m=gamma_m, n_thermal=n)
    return SystemConfig(atomic, c1, c2, m, m)


# figure-level settings; powers in W, detunings in rad/s
FIG2 = dict(g=TWO_PI * 3e6, Omega=10.0, eta=1.0,
            delta0=(0.0, TWO_PI * 3e6, 100), power=(0.0, 12e-3, 100),
            sections=(TWO_PI * 3e6, TWO_PI * 2e6, 0.0), section_power=(1e-7, 12e-3, 400, "log"))
FIG3 = dict(g=TWO_PI * 3e6, Omega=10.0, eta=1.0, mu=0.1,
            sections=(TWO_PI * 6e6, TWO_PI * 3e6, TWO_PI * 1e6, TWO_PI * 0.25e6),
            section_power=(1e-7, 0.1, 400, "log"))
_DYN = dict(g=TWO_PI * 4e6, Omega_p=0.018, eta=1.0, periods=10.0, samples=400)
FIG4 = dict(_DYN, Omega=(15.0, 20.0, 30.0), n=50.0, N=1.0, power=0.02e-9)
FIG5 = dict(_DYN, Omega=5.0, n=5.0, N=1.0, power=(0.5e-9, 0.05e-6, 0.5e-3))
FIG6 = dict(_DYN, Omega=5.0, n=(5.0, 10.0, 50.0, 100.0), N=1.0, power=0.02e-9)
FIG7 = dict(_DYN, Omega=5.0, n=0.0, N=(5.0, 50.0, 100.0), power=0.02e-9, eta=-1.0)

PRESETS = {"fig2": FIG2, "fig3": FIG3, "fig4": FIG4, "fig5": FIG5, "fig6": FIG6, "fig7": FIG7}


def dynamics_family(name: str) -> tuple[str, list[tuple[float, SystemConfig]]]:
    """(swept-parameter name, [(value, config)]) for the entanglement figures."""
    p = PRESETS[name]
    swept = next(k for k in ("Omega", "power", "n", "N") if isinstance(p[k], tuple))
    out = []
    for v in p[swept]:
        kw = {k: p[k] for k in ("g", "Omega", "Omega_p", "eta", "n", "N")}
        kw["power"] = p["power"]
        kw[swept] = v
        out.append((v, paper_config(**kw)))
    return swept, out
