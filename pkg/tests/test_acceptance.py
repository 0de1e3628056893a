"""Acceptance suite: twelve end-to-end checks, one test each.

Every test records a pass/fail line that is printed in the terminal summary.
"""
import time

import numpy as np
import pytest
from scipy import optimize

from conftest import record_criterion
from inloop.cavity import (
    CavityLoop,
    effective_params,
    effective_susceptibility,
    is_stable,
    outofloop_psd,
    photocurrent_psd_cavity,
    steady_correlations,
)
from inloop.laser import (
    DetectorParams,
    LaserLoop,
    extrema_frequencies,
    inloop_quadrature_psd,
    interference_zero_filter_value,
    laser_stability,
    photocurrent_psd,
)
from inloop.numerics import QuadratureSpec, integrate_line
from inloop.optomech import (
    BaselineSpectra,
    OmLoop,
    antisquash_optimum,
    baseline_spectra,
    brute_force_squeeze,
    force_psd,
    om_is_stable,
    optimized_squeeze_reduction,
    oracle_spectra,
    oscillation_fit,
    phonon_steady,
    photocurrent_psd_om,
    position_psd,
    pulse_effective_params,
    pulse_response,
    squeeze_optimal_quadrature,
    squeeze_spectrum,
    suppress_antistokes,
)
from inloop.spectral import CavityParams, FlatFilter, MechanicalParams, chi_c


def _check(number, passed, detail):
    record_criterion(number, passed, detail)
    assert passed, f"criterion {number}: {detail}"


def _random_cavity_loop(rng, gain_scale=0.4):
    cav = CavityParams(
        rng.uniform(0.1, 2.0), rng.uniform(0.0, 2.0), rng.uniform(0.0, 0.5), rng.uniform(-5.0, 5.0)
    )
    flt = FlatFilter(rng.uniform(-gain_scale, gain_scale), rng.uniform(0.0, 3.0), rng.uniform(-np.pi, np.pi))
    det = DetectorParams(rng.uniform(0.05, 1.0), rng.uniform(-np.pi, np.pi))
    port = "transmission" if rng.random() < 0.5 else "reflection"
    if port == "reflection" and abs(2 * cav.kappa1 - cav.kappa) < 1e-6 and abs(cav.detuning) < 1e-6:
        port = "transmission"
    if port == "transmission" and cav.kappa2 == 0:
        port = "reflection"
    return CavityLoop(cav, LaserLoop(flt, det), port)


def test_criterion_01_shot_noise_normalization():
    t0 = time.perf_counter()
    w = np.linspace(-20.0, 20.0, 4001)
    worst = 0.0
    for theta in (0.0, 0.7, 2.0):
        laser = LaserLoop(FlatFilter(0.0, 1.3, 0.2), DetectorParams(0.6, theta))
        worst = max(worst, np.max(np.abs(photocurrent_psd(w, laser) - 1.0)))
        for port in ("transmission", "reflection"):
            cl = CavityLoop(CavityParams(0.7, 0.5, 0.1, 1.5), laser, port)
            worst = max(worst, np.max(np.abs(photocurrent_psd_cavity(w, cl) - 1.0)))
            om = OmLoop(cl, MechanicalParams(1.0, 1e-3, 10.0, G=0.0))
            s0 = np.ones_like(w)
            worst = max(worst, np.max(np.abs(photocurrent_psd_om(w, om, s0) - 1.0)))
    # the oracle agrees at zero gain and zero coupling
    cl = CavityLoop(CavityParams(0.7, 0.5, 0.1, 1.5),
                    LaserLoop(FlatFilter(0.0, 1.3), DetectorParams(0.6, 0.4)), "transmission")
    orc = oracle_spectra(np.linspace(-5, 5, 41), OmLoop(cl, MechanicalParams(1.0, 1e-3, 10.0, G=0.0)))
    worst = max(worst, np.max(np.abs(orc["photocurrent"] - 1.0)))
    elapsed = time.perf_counter() - t0
    _check(1, worst <= 1e-12 and elapsed < 1.0, f"max |S_i - 1| = {worst:.2e}, {elapsed:.2f} s")


def test_criterion_02_squashing_floor():
    tau = 1.0
    loop = LaserLoop(FlatFilter(0.5 - 1e-6, tau), DetectorParams(1.0, 0.0))
    w = np.linspace(0.0, 10 * np.pi / tau, 20001)  # contains odd multiples of pi
    s = photocurrent_psd(w, loop)
    err = abs(s.min() - 0.25)
    _check(2, err <= 1e-4 and laser_stability(loop).stable, f"min S_i = {s.min():.8f}")


def test_criterion_03_extrema_placement():
    tau, phase = 1.7, 0.4
    loop = LaserLoop(FlatFilter(0.3, tau, phase), DetectorParams(0.9, 0.5))
    step = 1e-4
    w = np.arange(step, 12 * np.pi / tau, step)
    s = photocurrent_psd(w, loop)
    interior = np.arange(1, w.size - 1)
    is_max = (s[interior] > s[interior - 1]) & (s[interior] >= s[interior + 1])
    is_min = (s[interior] < s[interior - 1]) & (s[interior] <= s[interior + 1])
    found = {"max": w[interior[is_max]], "min": w[interior[is_min]]}
    worst = 0.0
    checked = 0
    for wn, kind in extrema_frequencies(loop, 10):
        if wn <= 0:
            continue
        d = np.min(np.abs(found[kind] - wn))
        worst = max(worst, d)
        checked += 1
    _check(3, checked == 10 and worst <= step, f"{checked} extrema, worst offset {worst:.2e} (step {step:g})")


def test_criterion_04_interference_zero():
    theta_fb = 1.4
    phi = theta_fb - np.pi / 3
    g_star = interference_zero_filter_value(phi, theta_fb, 1.0)
    gbar = 1.0 / (2.0 * np.sin(np.pi / 3))
    tau, w0 = 1.0, 1.0
    offset = np.angle(g_star) - w0 * tau
    loop = LaserLoop(FlatFilter(gbar, tau, offset), DetectorParams(1.0, theta_fb))
    value = float(inloop_quadrature_psd(np.array([w0]), phi, loop)[0])
    stable = laser_stability(loop).stable
    ok = abs(abs(g_star) - gbar) < 1e-12 and value <= 1e-10 and stable
    _check(4, ok, f"S(phi) at the zero = {value:.2e}, stable = {stable}")


def test_criterion_05_out_of_loop_bound():
    rng = np.random.default_rng(5)
    w = np.linspace(-10.0, 10.0, 201)
    worst = np.inf
    draws = 0
    while draws < 10_000:
        cl = _random_cavity_loop(rng)
        if not is_stable(cl, grid=512):
            continue
        s = outofloop_psd(w, rng.uniform(-np.pi, np.pi), cl)
        worst = min(worst, float(s.min()))
        draws += 1
    _check(5, worst >= 1.0 - 1e-12, f"{draws} stable draws, min S_out,un = {worst:.15f}")


def test_criterion_06_classical_state_bound():
    rng = np.random.default_rng(6)
    spec = QuadratureSpec()
    worst = np.inf
    draws = 0
    while draws < 1000:
        cl = _random_cavity_loop(rng, gain_scale=0.3)
        if not is_stable(cl, grid=512):
            continue
        c = steady_correlations(cl, spec, check_stability=False)
        worst = min(worst, c.n_st - abs(c.m_st) + 10 * c.error)
        draws += 1
    cav = CavityParams(0.3, 0.5, 0.2, 2.0)
    val, _ = integrate_line(lambda w: 2 * cav.kappa * np.abs(chi_c(w, cav)) ** 2 / (2 * np.pi),
                            QuadratureSpec(abs_tol=1e-12, rel_tol=1e-12), scale=cav.kappa,
                            breakpoints=[cav.detuning])
    ok = worst >= 0.0 and abs(val - 1.0) <= 1e-8
    _check(6, ok, f"{draws} draws, min (n - |m| + tol) = {worst:.3e}, normalisation error {abs(val - 1):.1e}")


def test_criterion_07_effective_linewidth():
    kappa, delta, tau = 1.0, 10.0, 0.1
    worst = 0.0
    for gain, theta in ((0.15, 0.0), (-0.2, 0.0), (0.2, 0.8), (0.1, 2.5)):
        cav = CavityParams.symmetric(kappa, delta)
        cl = CavityLoop(cav, LaserLoop(FlatFilter(gain, tau), DetectorParams(1.0, theta)), "transmission")
        eff = effective_params(cl)
        w = np.linspace(delta - 8 * eff.kappa_eff, delta + 8 * eff.kappa_eff, 1601)
        y = np.abs(effective_susceptibility(w, cl)) ** 2

        def lorentz(x, a, k, d):
            return a / (k**2 + (x - d) ** 2)

        (a, k, d), _ = optimize.curve_fit(lorentz, w, y, p0=[1.0, eff.kappa_eff, eff.delta_eff])
        worst = max(worst, abs(abs(k) / eff.kappa_eff - 1), abs(d / eff.delta_eff - 1))
    _check(7, worst <= 0.05, f"worst relative deviation {worst:.3%}")


def _random_om(rng):
    while True:
        cl = _random_cavity_loop(rng, gain_scale=0.25)
        mech = MechanicalParams(rng.uniform(0.5, 2.0), rng.uniform(1e-3, 5e-2),
                                rng.uniform(0.0, 20.0), G=rng.uniform(0.0, 0.15))
        om = OmLoop(cl, mech)
        if om_is_stable(om, grid=512):
            return om


def test_criterion_08_oracle_equivalence():
    rng = np.random.default_rng(8)
    t0 = time.perf_counter()
    worst = {"S_i": 0.0, "S_q": 0.0, "S_out_un": 0.0}
    for _ in range(100):
        om = _random_om(rng)
        w = np.sort(rng.uniform(-4.0, 4.0, 9))
        theta_un = rng.uniform(-np.pi, np.pi)
        ref = oracle_spectra(w, om, theta_un=theta_un)
        s_i = photocurrent_psd_om(w, om, ref["out_fb0"])
        s_q = position_psd(w, om, thermal="exact")
        base = BaselineSpectra(ref["out_un0"], ref["out_fb0"], ref["cross0"])
        s_out = squeeze_spectrum(w, theta_un, om, "none", base=base).psd
        worst["S_i"] = max(worst["S_i"], np.max(np.abs(s_i / ref["photocurrent"] - 1)))
        worst["S_q"] = max(worst["S_q"], np.max(np.abs(s_q / ref["position"] - 1)))
        worst["S_out_un"] = max(worst["S_out_un"], np.max(np.abs(s_out / ref["out_un"] - 1)))
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-8 and elapsed < 60
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    _check(8, ok, f"100 draws, max relative error: {detail}; {elapsed:.1f} s")


def _suppression_loop(eta, tau):
    cav = CavityParams(1.0, 0.0, 0.0, 1.0)
    cl = CavityLoop(cav, LaserLoop(FlatFilter(0.1, tau), DetectorParams(eta, 0.0)), "reflection")
    return OmLoop(cl, MechanicalParams(1.0, 1e-4, 131.0, G=0.1))


def test_criterion_09_cooling_suppression():
    s1 = suppress_antistokes(_suppression_loop(1.0, 0.1))
    s5 = suppress_antistokes(_suppression_loop(1.0, 5.0))
    ratio = max(s1.rates.A_plus / s1.rates.A_minus, s5.rates.A_plus / s5.rates.A_minus)
    w = np.array([-1.0, 1.0])
    f1, f5 = force_psd(w, s1.om), force_psd(w, s5.om)
    # A+ is zero to rounding, so the drift is measured on the scale of A-
    drift = float(np.max(np.abs(f5 - f1)) / np.max(f1))
    _check(9, ratio <= 1e-12 and drift <= 1e-6,
           f"A+/A- = {ratio:.1e}, S_F(+-w_m) drift between delays {drift:.1e}")


def test_criterion_10_cooling_numbers():
    cav = CavityParams(1.0, 0.0, 0.0, 1.0)
    cl = CavityLoop(cav, LaserLoop(FlatFilter(0.0, 0.1), DetectorParams(1.0, 0.0)), "reflection")
    om = OmLoop(cl, MechanicalParams(1.0, 1e-4, 131.0, G=0.2))
    n_m = phonon_steady(om, "suppression_optimal")
    _, n_min = antisquash_optimum(100.0, 1.0, 1.0, 1.0)
    rng = np.random.default_rng(10)
    n_sc = rng.uniform(1e-3, 1e3, 1000)
    kappa = rng.uniform(0.01, 10.0, 1000)
    eta = rng.uniform(0.01, 1.0, 1000)
    kfb = kappa * rng.uniform(0.01, 1.0, 1000)
    beats = np.all(antisquash_optimum(n_sc, kappa, eta, kfb)[1] < n_sc)
    ok = abs(n_m - 0.078) <= 1e-3 and abs(n_min - 200 / (1 + np.sqrt(401))) <= 1e-12 and beats
    _check(10, ok, f"n_m = {n_m:.6f}, anti-squash minimum {n_min:.6f}, beats n_sc on 1000 draws: {beats}")


def test_criterion_11_coherent_oscillations():
    wm, G, kappa, tau, keff = 1.0, 0.02, 0.02, 0.2, 0.004
    cav = CavityParams.symmetric(kappa, wm)
    gain = (kappa - keff) / (2 * np.sqrt(cav.kappa1 * cav.kappa2))
    cl0 = CavityLoop(cav, LaserLoop(FlatFilter(gain, tau), DetectorParams(1.0, 0.0)), "transmission")
    cl = cl0.with_theta(wm * tau - cl0.phi_out("transmission"))
    om = OmLoop(cl, MechanicalParams(wm, 1e-6, 0.0, G=G))
    k_eff = pulse_effective_params(om)[0]
    t0 = time.perf_counter()
    trace = pulse_response(om, 1.0, 800.0, "full_dde")
    freq, rate = oscillation_fit(trace)
    elapsed = time.perf_counter() - t0
    df, dr = abs(freq / G - 1), abs(rate / (k_eff / 2) - 1)
    ok = wm >= 50 * G and kappa * tau <= 0.05 and df <= 0.02 and dr <= 0.05 and elapsed < 10
    _check(11, ok, f"frequency off by {df:.2%}, rate off by {dr:.2%}, {elapsed:.1f} s")


def test_criterion_12_squeezing_optimum():
    cav = CavityParams.symmetric(1.0, 0.0)
    cl = CavityLoop(cav, LaserLoop(FlatFilter(0.1, 0.1), DetectorParams(1.0, 0.0)), "transmission")
    om = OmLoop(cl, MechanicalParams(1.0, 1e-4, 131.0, G=0.5))
    w = np.linspace(0.02, 3.0, 150)
    res = squeeze_optimal_quadrature(w, om)
    below_base = float(np.max(res.psd - res.baseline_psd))
    above_single = float(np.min(res.psd - res.single_sided_psd))
    rel_fb = res.theta_un - cl.phi_out("reflection") + cl.phi_out("transmission")
    base = baseline_spectra(w, res.theta_un, om, theta_fb=rel_fb)
    worst_bf = 0.0
    for i in (3, 40, 77, 120, 149):
        b = BaselineSpectra(base.s_un[i], base.s_fb[i], base.s_cross[i])
        _, fx = brute_force_squeeze(b, 1.0)
        worst_bf = max(worst_bf, abs(fx - res.psd[i]))
    s_sing = 1.0 - 1e-9
    ideal = float(optimized_squeeze_reduction(0.5 * s_sing, 1.0, 0.5, 0.5))
    ok = worst_bf <= 1e-6 and below_base <= 1e-12 and above_single >= -1e-12 and abs(ideal) <= 1e-6
    _check(12, ok, f"brute force {worst_bf:.1e}, max(opt - base) {below_base:.1e}, "
                   f"min(opt - single) {above_single:.1e}, ideal {ideal:.1e}")
