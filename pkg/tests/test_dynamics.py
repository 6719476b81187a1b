import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import simpson, solve_ivp
from scipy.linalg import expm

from ramanmirror.dynamics import (AdiabaticityWarning, MirrorCoupling, NonPhysicalNoiseError,
                                  build_diffusion, build_drift, default_step, mirror_coupling,
                                  noise_correlations, operating_point, propagate, quadrature_lift,
                                  quadrature_unlift, simulate, thermal_initial_state)
from ramanmirror.presets import paper_config
from conftest import TWO_PI

# sympy expansion of the complex pair at alpha = (1.3, 0.7), delta = (-2, -3),
# gamma_m = (0.4, 0.6), t = 0.37 (tests/oracles/dynamics_sym.py)
DRIFT_GENERIC = np.array([
    [-0.2, 0.0, 1.4987389770446198, 3.0189671949868857],
    [0.0, -0.2, -1.6413932286248036, -3.3063211054024415],
    [-1.7803267490628532, -1.625597720377554, -0.3, 0.0],
    [0.8838271231056635, 0.8070132953317183, 0.0, -0.3],
])

# Fig. 4 set (Omega = 15 gamma, g = 2 pi 4 MHz, n = 50, N = 1, P = 0.02 nW),
# evaluated by the symbolic substitution oracle at the package's mean fields
FIG4_I = (0.3096707415496341, 0.390744443162426)
FIG4_G = (4078.505455992846, 4078.2177510368642)
FIG4_ALPHA = (0.0074531591536461704, 4.826519546896328e-06)
FIG4_NOISE_GAINS = (0.003361427905533239, 2.9236378739275255e-06, 0.00240036761956429,
                    2.12658592294774e-09)
FIG4_D0 = np.array([
    [19038051480.75415, 0, 0, 0],
    [0, 19038051663.932518, 0, -0.09466728052494489],
    [0, 0, 19038051480.75415, 0],
    [0, -0.09466728052494489, 0, 19038051583.06575],
])
FIG4_D_T_NO_BATH = np.array([  # t = 1e-8 s, gamma_m = 0
    [6.431714446254482, -33.716227868563664, -0.003090516189807358, 0.016201053227372583],
    [-33.716227868563664, 176.7466561496549, 0.016201053227372586, -0.0849288952252732],
    [-0.003090516189807358, 0.016201053227372586, 3.5923401123658465, -18.8317063548185],
    [0.016201053227372583, -0.0849288952252732, -18.8317063548185, 98.71926185757422],
])


def toy_coupling(alpha1=0.3, alpha2=-0.2, delta=(-1.0, -1.5), gamma=(1.0, 0.8)):
    return MirrorCoupling(alpha1=alpha1, alpha2=alpha2, kappa_p1=1.0, kappa_p2=1.0,
                          kappa_combined=1.0, delta1=delta[0], delta2=delta[1], gamma_m=gamma,
                          G=(0.0, 0.0), amplitude=(0.0, 0.0), xi12=0j, xi21=0j)


@pytest.fixture(scope="module")
def fig4(fig4_cfg):
    gain, steady = operating_point(fig4_cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AdiabaticityWarning)
        cp = mirror_coupling(gain, steady, fig4_cfg)
    return fig4_cfg, gain, steady, cp


# ---------------------------------------------------------------------------
# quadrature lift


def test_lift_pure_damping():
    s, c = quadrature_lift(-0.35, 0, 0)
    np.testing.assert_array_equal(s, -0.35 * np.eye(2))
    np.testing.assert_array_equal(c, np.zeros((2, 2)))


def test_lift_pure_creation_coupling():
    # db/dt = i g b'^dag: dq/dt = -g p', dp/dt = g q'
    g = 0.7
    _, c = quadrature_lift(0, 0, 1j * g)
    np.testing.assert_allclose(c, [[0.0, g], [g, 0.0]], atol=0)
    _, c = quadrature_lift(0, 1j * g, 0)
    np.testing.assert_allclose(c, [[0.0, -g], [g, 0.0]], atol=0)


def test_lift_matches_direct_expansion():
    rng = np.random.default_rng(0)
    for _ in range(20):
        c0, c1, c2 = rng.normal(size=3) + 1j * rng.normal(size=3)
        q, p, q2, p2 = rng.normal(size=4)
        b, b2 = (q + 1j * p) / np.sqrt(2), (q2 + 1j * p2) / np.sqrt(2)
        db = c0 * b + c1 * b2 + c2 * np.conj(b2)
        s, c = quadrature_lift(c0, c1, c2)
        dqp = s @ [q, p] + c @ [q2, p2]
        np.testing.assert_allclose(dqp, [np.sqrt(2) * db.real, np.sqrt(2) * db.imag], atol=1e-13)


@given(st.complex_numbers(max_magnitude=1e6, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=1e6, allow_nan=False, allow_infinity=False))
def test_lift_round_trip(c1, c2):
    _, cross = quadrature_lift(0, c1, c2)
    r1, r2 = quadrature_unlift(cross)
    assert abs(r1 - c1) <= 1e-9 * (1 + abs(c1)) and abs(r2 - c2) <= 1e-9 * (1 + abs(c2))


# ---------------------------------------------------------------------------
# drift


def test_drift_uncoupled_is_diagonal():
    M = build_drift(toy_coupling(0.0, 0.0, gamma=(0.4, 0.6)), 1.234)
    np.testing.assert_array_equal(M, np.diag([-0.2, -0.2, -0.3, -0.3]))


def test_drift_coupling_vanishes_at_origin():
    M = build_drift(toy_coupling(), 0.0)
    np.testing.assert_array_equal(M[:2, 2:], 0.0)
    np.testing.assert_array_equal(M[2:, :2], 0.0)


def test_drift_generic_time_against_symbolic_expansion():
    M = build_drift(toy_coupling(1.3, 0.7, (-2.0, -3.0), (0.4, 0.6)), 0.37)
    np.testing.assert_allclose(M, DRIFT_GENERIC, rtol=1e-13, atol=1e-15)


def test_drift_vectorized_matches_scalar():
    cp = toy_coupling()
    t = np.linspace(0.0, 5.0, 11)
    M = build_drift(cp, t)
    assert M.shape == (11, 4, 4)
    for k, tk in enumerate(t):
        np.testing.assert_array_equal(M[k], build_drift(cp, tk))


# ---------------------------------------------------------------------------
# operating point, coupling, diffusion


def test_fig4_coupling_against_oracle(fig4):
    _, _, steady, cp = fig4
    assert steady.I1 == pytest.approx(FIG4_I[0], rel=1e-12)
    assert steady.I2 == pytest.approx(FIG4_I[1], rel=1e-12)
    np.testing.assert_allclose(cp.G, FIG4_G, rtol=1e-13)
    np.testing.assert_allclose([cp.alpha1, cp.alpha2], FIG4_ALPHA, rtol=1e-12)
    np.testing.assert_allclose(cp.noise_gains, FIG4_NOISE_GAINS, rtol=1e-12)


def test_fig4_diffusion_at_origin(fig4):
    cfg, gain, _, cp = fig4
    D = build_diffusion(cp, gain, cfg, 0.0)
    np.testing.assert_allclose(D, FIG4_D0, rtol=1e-12, atol=1e-12 * np.max(FIG4_D0))
    # the small cross term is resolved separately
    assert D[1, 3] == pytest.approx(FIG4_D0[1, 3], rel=1e-6)


def test_fig4_diffusion_generic_time_without_bath(fig4):
    cfg, gain, _, cp = fig4
    D = build_diffusion(replace(cp, gamma_m=(0.0, 0.0)), gain, cfg, 1e-8)
    np.testing.assert_allclose(D, FIG4_D_T_NO_BATH, rtol=1e-10, atol=1e-12)


def test_diffusion_mechanical_bath_only(fig4):
    cfg, gain, _, cp = fig4
    cp0 = replace(cp, G=(0.0, 0.0), gamma_m=(2.0, 3.0))
    D = build_diffusion(cp0, gain, cfg.with_mirrors(n_thermal=4.0), 0.3)
    np.testing.assert_allclose(D, np.diag([9.0, 9.0, 13.5, 13.5]), rtol=1e-14)


def test_diffusion_vacuum_cavity_noise(fig4):
    cfg, gain, _, cp = fig4
    zero = replace(gain, xi1=0j, xi2=0j, xi3=0j, xi4=0j, xi5=0j, xi6=0j, xi7=0j, xi8=0j)
    Q = noise_correlations(zero, cfg.with_cavities(N_thermal=0.0))
    k1, k2 = cfg.cavity1.kappa, cfg.cavity2.kappa
    assert Q[0, 1] == 2 * k1 and Q[1, 0] == 0
    assert Q[2, 3] == 2 * k2 and Q[3, 2] == 0
    assert Q[0, 2] == 0 and Q[1, 3] == 0


def test_diffusion_psd_violation(fig4):
    cfg, gain, _, cp = fig4
    bad = replace(gain, xi2=complex(-1e9, 0))
    with pytest.raises(NonPhysicalNoiseError):
        build_diffusion(replace(cp, gamma_m=(0.0, 0.0)), bad, cfg, 0.0)


def test_coupling_zero_cases(fig4_cfg):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AdiabaticityWarning)
        cfg = paper_config(g=TWO_PI * 4e6, Omega=15, Omega_p=0.0, n=50, power=0.02e-9)
        cp = mirror_coupling(*operating_point(cfg), cfg)
        assert cp.alpha1 == 0 and cp.alpha2 == 0
        cfg = replace(fig4_cfg, cavity2=replace(fig4_cfg.cavity2, power=0.0))
        gain, steady = operating_point(cfg)
        cp = mirror_coupling(gain, replace(steady, a2_mean=0j), cfg)
        assert cp.alpha1 == 0 and cp.alpha2 == 0


def test_coupling_warnings(fig4):
    cfg, gain, steady, _ = fig4
    with pytest.warns(AdiabaticityWarning, match="questionable"):
        mirror_coupling(gain, steady, cfg)
    good = cfg.with_mirrors(gamma_m=TWO_PI * 60.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        mirror_coupling(gain, steady, good)
    with pytest.warns(AdiabaticityWarning, match="eliminated"):
        mirror_coupling(gain, steady, good, delta=(-1.0, -1.0))


def test_coupling_singular_kappa(fig4):
    cfg, gain, steady, _ = fig4
    with pytest.raises(ZeroDivisionError):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AdiabaticityWarning)
            mirror_coupling(replace(gain, kappa1=0.0, kappa2=0.0, xi1=0j, xi2=0j, xi3=0j,
                                    xi4=0j, xi5=0j, xi6=0j), steady, cfg)


# ---------------------------------------------------------------------------
# initial state


def test_thermal_initial_state():
    R = thermal_initial_state(0.0, 0.0)
    np.testing.assert_array_equal(R.real, 0.5 * np.eye(4))
    R = thermal_initial_state(50.0, 50.0)
    np.testing.assert_array_equal(np.diag(R.real), [50.5] * 4)
    for n in (0.0, 3.0, 1e4):
        im = thermal_initial_state(n, 2 * n).imag
        assert im[0, 1] == 0.5 and im[1, 0] == -0.5 and im[2, 3] == 0.5 and im[3, 2] == -0.5
    with pytest.raises(ValueError):
        thermal_initial_state(-1.0, 0.0)


# ---------------------------------------------------------------------------
# propagation


def test_no_dynamics_keeps_state():
    R0 = thermal_initial_state(2.0, 7.0)
    tr = propagate(np.zeros((4, 4)), np.zeros((4, 4)), R0, 3.0, 0.1)
    for R in tr.R:
        np.testing.assert_array_equal(R, R0)


def test_ornstein_uhlenbeck_closed_form():
    g, n = 0.8, 3.0
    R0 = thermal_initial_state(0.0, 10.0)
    tr = propagate(-g / 2 * np.eye(4), g * (n + .5) * np.eye(4), R0, 5.0, 1e-3, record_every=500)
    for t, R in zip(tr.times, tr.R):
        want = np.exp(-g * t) * R0.real + (1 - np.exp(-g * t)) * (n + .5) * np.eye(4)
        np.testing.assert_allclose(R.real, want, rtol=1e-10, atol=1e-10)


def van_loan(M, D, R0, t):
    """R(t) for constant M, D via one block exponential."""
    n = M.shape[0]
    big = np.zeros((2 * n, 2 * n))
    big[:n, :n], big[:n, n:], big[n:, n:] = -M, D, M.T
    F = expm(big * t)
    E = F[n:, n:].T
    return E @ R0 @ E.T + E @ F[:n, n:]


@pytest.mark.parametrize("t_freeze", [0.0, 3.1e-7])
def test_frozen_coefficients_against_matrix_exponential(fig4, t_freeze):
    cfg, gain, _, cp = fig4
    # boost the coupling so the off-diagonal blocks matter
    cpb = replace(cp, alpha1=3e7, alpha2=-2e7)
    M = build_drift(cpb, t_freeze)
    D = build_diffusion(cp, gain, cfg, t_freeze)
    R0 = thermal_initial_state(50.0, 50.0).real
    t_end = 2e-8
    tr = propagate(M, D, R0, t_end, 2e-11)
    want = van_loan(M, D, R0, t_end)
    np.testing.assert_allclose(tr.R[-1].real, want, rtol=1e-8, atol=1e-8 * np.max(np.abs(want)))


def test_generic_toy_against_matrix_exponential():
    cp = toy_coupling()
    M = build_drift(cp, 0.9)
    D = np.diag([1.5, 1.5, 0.6, 0.6])
    R0 = thermal_initial_state(1.0, 0.0).real
    tr = propagate(M, D, R0, 4.0, 1e-3)
    np.testing.assert_allclose(tr.R[-1].real, van_loan(M, D, R0, 4.0), rtol=1e-8, atol=1e-10)


def test_integral_form_equivalence():
    cp = toy_coupling()
    Mf = lambda t: build_drift(cp, t)  # noqa: E731
    Df = lambda t: np.broadcast_to(np.diag([1.0, 1.0, 0.8, 0.8]), np.shape(t) + (4, 4)) \
        * (1.5 + np.cos(np.asarray(t)))[..., None, None]  # noqa: E731
    R0 = thermal_initial_state(2.0, 1.0).real
    tr = propagate(Mf, Df, R0, 3.0, 1e-3)
    Ginv = np.linalg.inv(tr.G)
    integrand = Ginv @ Df(tr.times) @ np.swapaxes(Ginv, -1, -2)
    Z = simpson(integrand, x=tr.times, axis=0)
    G = tr.G[-1]
    want = G @ R0 @ G.T + G @ Z @ G.T
    np.testing.assert_allclose(tr.R[-1].real, want, rtol=1e-8, atol=1e-10)


def test_propagator_columns():
    cp = toy_coupling()
    tr = propagate(lambda t: build_drift(cp, t), np.zeros((4, 4)), np.eye(4), 2.5, 1e-3)
    for k in range(4):
        sol = solve_ivp(lambda t, x: build_drift(cp, t) @ x, (0.0, 2.5), np.eye(4)[:, k],
                        rtol=1e-12, atol=1e-14, method="DOP853")
        np.testing.assert_allclose(tr.G[-1][:, k], sol.y[:, -1], rtol=1e-9, atol=1e-11)


def test_means_follow_propagator():
    cp = toy_coupling()
    mean0 = np.array([1.0, -2.0, 0.5, 0.0])
    tr = propagate(lambda t: build_drift(cp, t), np.zeros((4, 4)), np.eye(4), 1.0, 1e-3,
                   mean0=mean0, record_every=100)
    np.testing.assert_allclose(tr.means, tr.G @ mean0, rtol=1e-14)


def test_symplectic_case_preserves_commutators():
    cp = toy_coupling(0.0, 0.0, gamma=(0.0, 0.0))
    R0 = thermal_initial_state(3.0, 1.0)
    tr = propagate(lambda t: build_drift(cp, t), np.diag([2.0, 2.0, 1.0, 1.0]), R0, 2.0, 1e-2)
    for R in tr.R:
        np.testing.assert_array_equal(R.imag, R0.imag)


def test_thermal_bath_preserves_commutators(fig4_cfg):
    run = simulate(fig4_cfg, 3e-8)
    R0 = thermal_initial_state(50.0, 50.0)
    for R in run.trajectory.R:
        np.testing.assert_allclose(R.imag, R0.imag, atol=1e-9)
        np.testing.assert_allclose(R.real, R.real.T, rtol=1e-14)


def test_step_halving_report():
    cp = toy_coupling()
    tr = propagate(lambda t: build_drift(cp, t), np.eye(4), np.eye(4), 2.0, 1e-2, tol=1e-8)
    assert tr.step_error is not None and tr.step_error <= 1e-8 and tr.converged
    tr = propagate(lambda t: build_drift(cp, t), np.eye(4), np.eye(4), 2.0, 0.5, tol=1e-12)
    assert tr.converged is False
    with pytest.raises(ValueError):
        propagate(np.zeros((4, 4)), np.zeros((4, 4)), np.eye(4), 1.0, 0.0)


def test_default_step(fig4_cfg):
    dt = default_step(fig4_cfg)
    om = fig4_cfg.mirror1.omega_m
    assert dt <= 2 * np.pi / om / 200 and dt <= 1 / fig4_cfg.cavity1.kappa / 200
    assert dt <= 0.05 / fig4_cfg.mirror1.gamma_m


def test_euler_maruyama_ensemble():
    """Ensemble of stochastic paths reproduces V(t_end) within 3 standard errors."""
    cp = toy_coupling(0.6, -0.4, (-1.0, -1.5), (1.0, 1.0))
    D = np.array([[1.5, 0.2, 0.1, 0.0], [0.2, 1.5, 0.0, 0.1],
                  [0.1, 0.0, 2.5, 0.0], [0.0, 0.1, 0.0, 2.5]])
    V0 = thermal_initial_state(1.0, 0.5).real
    t_end, dt, paths = 2.0, 2e-3, 10_000
    tr = propagate(lambda t: build_drift(cp, t), D, V0, t_end, dt)
    V = tr.R[-1].real

    rng = np.random.default_rng(20240611)
    x = rng.multivariate_normal(np.zeros(4), V0, size=paths)
    L = np.linalg.cholesky(D)
    n = int(round(t_end / dt))
    for k in range(n):
        M = build_drift(cp, k * dt)
        x = x + dt * x @ M.T + np.sqrt(dt) * rng.standard_normal((paths, 4)) @ L.T
    prods = x[:, :, None] * x[:, None, :]
    est = prods.mean(0)
    se = prods.std(0, ddof=1) / np.sqrt(paths)
    z = np.abs(est - V) / se
    assert np.all(z[np.triu_indices(4)] < 3.0), z
