"""Arbitrary-precision evaluation of the population / xi closed forms.

Written directly from the formulas, sharing no code with the package, so it can
serve as an independent reference.  Inputs are plain floats (rad/s).
"""

import mpmath as mp

mp.mp.dps = 50


def xi_reference(*, g1, g2, Omega, Omega_p, gamma_a, gamma_b, gamma_c, gamma_d,
                 gamma_ab, gamma_ac, gamma_ad, gamma_bc, gamma_bd, gamma_cd,
                 Delta_1=0.0, Delta_2=0.0, Delta_c=0.0, r_a, eta):
    f = mp.mpf
    W, Wp = f(Omega), f(Omega_p)
    Dc, D1, D2 = f(Delta_c), f(Delta_1), f(Delta_2)
    eta = f(eta)
    chi = f(gamma_ab) ** 2 + Dc ** 2
    chip = f(gamma_cd) ** 2 + (Dc - D2 - D1) ** 2
    d = 2 * W ** 2 * f(gamma_ab) * (f(gamma_a) + f(gamma_b)) + chi * f(gamma_b) * f(gamma_a)
    dp = 2 * Wp ** 2 * f(gamma_cd) * (f(gamma_c) + f(gamma_d)) + f(gamma_c) * f(gamma_d) * chip
    Zaa = (2 * W ** 2 * f(gamma_ab) + f(gamma_b) * chi) * (1 - eta) / 2
    Zbb = W ** 2 * f(gamma_ab) * (1 - eta)
    Zcc = (2 * Wp ** 2 * f(gamma_cd) + f(gamma_d) * chip) * (1 + eta) / 2
    Zdd = Wp ** 2 * f(gamma_cd) * (1 + eta)

    wbc = mp.mpc(gamma_bc, -(Dc - D2))
    wad = mp.mpc(gamma_ad, Dc - D1)
    A = -mp.mpc(gamma_ac, D2) - W ** 2 / wbc - Wp ** 2 / wad
    B = W * Wp / wbc + W * Wp / wad
    D = -mp.mpc(gamma_bd, -D1) - W ** 2 / wad - Wp ** 2 / wbc
    den = B ** 2 - A * D
    ra = f(r_a)
    G1, G2 = f(g1), f(g2)
    xi = [
        G1 ** 2 * A / den * ra / dp * Zdd,
        G1 ** 2 * A / den * ra / d * Zbb,
        G2 ** 2 * D / den * ra / dp * Zcc,
        G2 ** 2 * D / den * ra / d * Zaa,
        G1 * G2 * B / den * ra / d * Zaa,
        G1 * G2 * B / den * ra / dp * Zcc,
        G1 * G2 * B / den * ra / d * Zbb,
        G1 * G2 * B / den * ra / dp * Zdd,
    ]
    return {"xi": xi, "A": A, "B": B, "D": D, "d": d, "d_prime": dp,
            "Z": {"aa": Zaa, "bb": Zbb, "cc": Zcc, "dd": Zdd}}


if __name__ == "__main__":
    # Fig. 2 set: gamma = 3.4 MHz everywhere, g = 2 pi 3 MHz, Omega = 10 gamma,
    # Omega_p = 0.018 gamma, r_a = 1.6 MHz, eta = 1
    gamma = 3.4e6
    two_pi = 2 * mp.pi
    rates = {k: gamma for k in ("gamma_a", "gamma_b", "gamma_c", "gamma_d", "gamma_ab",
                                "gamma_ac", "gamma_ad", "gamma_bc", "gamma_bd", "gamma_cd")}
    g = float(two_pi * 3e6)
    ref = xi_reference(g1=g, g2=g, Omega=10 * gamma, Omega_p=0.018 * gamma, r_a=1.6e6, eta=1.0,
                       **rates)
    for k, x in enumerate(ref["xi"], 1):
        print(f"xi{k} = complex({mp.nstr(x.real, 17)}, {mp.nstr(x.imag, 17)})")
    for k in ("A", "B", "D"):
        print(k, mp.nstr(ref[k], 17))
