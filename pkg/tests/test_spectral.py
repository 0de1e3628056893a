import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inloop.errors import DegenerateConfigurationError
from inloop.spectral import (
    CallableFilter,
    CavityParams,
    ComplexSpectrum,
    FlatFilter,
    MechanicalParams,
    cavity_phases,
    chi_c,
    chi_m,
    zeta_c,
    zeta_m,
    zeta_m_approx,
)

rates = st.floats(0.05, 5.0)
detunings = st.floats(-5.0, 5.0)
freqs = st.floats(-20.0, 20.0)
phases = st.floats(-np.pi, np.pi)


def test_chi_c_value():
    cav = CavityParams(0.5, 0.5, 0.0, 2.0)
    assert chi_c(0.5, cav) == pytest.approx(1 / (1 + 1.5j), rel=1e-15)


def test_cavity_params_validation():
    with pytest.raises(ValueError):
        CavityParams(-1.0, 1.0)
    with pytest.raises(ValueError):
        CavityParams(0.0, 0.0, 0.0)
    sym = CavityParams.symmetric(2.0, 1.0, kappa_loss=0.4)
    assert sym.kappa1 == sym.kappa2 == pytest.approx(0.8)
    assert sym.kappa == pytest.approx(2.0)


def test_mechanical_params_validation():
    with pytest.raises(ValueError):
        MechanicalParams(0.0, 1e-3)
    with pytest.raises(ValueError):
        MechanicalParams(1.0, 0.0)
    with pytest.raises(ValueError):
        MechanicalParams(1.0, 1e-3, n_th=-1.0)
    with pytest.warns(RuntimeWarning):
        MechanicalParams(1.0, 0.1)
    assert MechanicalParams(1.0, 1e-3, 10.0).thermal_psd == pytest.approx(0.021)


def test_cavity_phases_values_and_degenerate_case():
    cav = CavityParams(1.0, 0.0, 0.0, 1.0)
    phi_c, phi_r = cavity_phases(cav)
    assert phi_c == pytest.approx(-np.pi / 4)
    assert phi_r == pytest.approx(-np.pi / 4)
    with pytest.raises(DegenerateConfigurationError):
        cavity_phases(CavityParams(0.5, 0.5, 0.0, 0.0))


@given(rates, rates, detunings, freqs, phases)
def test_zeta_c_conjugate_symmetry(k1, k2, delta, w, theta):
    cav = CavityParams(k1, k2, 0.0, delta)
    assert zeta_c(-w, theta, cav) == pytest.approx(np.conj(zeta_c(w, theta, cav)), rel=1e-12, abs=1e-14)


@given(rates, detunings, freqs, phases)
def test_zeta_c_pi_periodicity_flips_sign(kappa, delta, w, theta):
    cav = CavityParams(kappa, 0.0, 0.0, delta)
    assert zeta_c(w, theta + np.pi, cav) == pytest.approx(-zeta_c(w, theta, cav), rel=1e-12, abs=1e-14)


def test_zeta_c_amplitude_quadrature_on_resonance():
    # zero detuning: the quadrature response is the bare cavity line
    cav = CavityParams(0.7, 0.3)
    w = np.linspace(-4, 4, 9)
    assert np.allclose(zeta_c(w, 0.0, cav), chi_c(w, cav), rtol=1e-14)


@given(st.floats(0.2, 5.0), st.floats(1e-6, 1e-3), freqs)
def test_zeta_m_matches_high_q_form(wm, gamma, w):
    mech = MechanicalParams(wm, gamma)
    exact = zeta_m(w, mech)
    approx = zeta_m_approx(w, mech)
    # they differ only by gamma^2 / 4 in the denominator
    den = abs(wm**2 - w**2 - 1j * w * gamma)
    assert abs(exact - approx) <= abs(approx) * 0.3 * gamma**2 / den + 1e-15


def test_chi_m_peak():
    mech = MechanicalParams(2.0, 1e-3)
    assert abs(chi_m(2.0, mech)) == pytest.approx(2e3)


def test_flat_filter():
    f = FlatFilter(0.4, 1.5, 0.3)
    w = np.array([-2.0, 0.0, 2.0])
    g = f(w)
    assert np.allclose(np.abs(g), 0.4)
    assert g[1] == pytest.approx(0.4)
    assert g[0] == pytest.approx(np.conj(g[2]))
    assert f.derivative(w)[2] == pytest.approx(1.5j * g[2])
    assert f.with_gain(1.0).gain == 1.0
    with pytest.raises(ValueError):
        FlatFilter(0.1, -1.0)


def test_callable_filter_and_default_derivative():
    f = CallableFilter(lambda w: 1.0 / (1.0 - 1j * w), gain=2.0)
    w = np.array([0.3, 1.2])
    assert np.allclose(f(w), 2.0 / (1.0 - 1j * w))
    assert np.allclose(f.derivative(w), 2.0j / (1.0 - 1j * w) ** 2, rtol=1e-6)
    assert f.with_gain(1.0)(np.array([0.0]))[0] == pytest.approx(1.0)


def test_complex_spectrum_validation():
    s = ComplexSpectrum(np.array([0.0, 1.0]), np.array([1.0, 2.0]), "psd")
    assert len(s) == 2
    with pytest.raises(ValueError):
        ComplexSpectrum(np.array([1.0, 0.0]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        ComplexSpectrum(np.array([0.0, 1.0]), np.array([1.0, -2.0]), "psd")
    with pytest.raises(ValueError):
        ComplexSpectrum(np.array([0.0, 1.0]), np.array([1.0]))
    with pytest.raises(ValueError):
        ComplexSpectrum(np.array([0.0, 1.0]), np.array([1.0, 1.0]), "other")


def test_chi_c_examples():
    kappa = 0.8
    cav = CavityParams(kappa, 0.0, 0.0, 1.3)
    assert chi_c(1.3, cav) == pytest.approx(1 / kappa)
    cav = CavityParams(kappa, 0.0, 0.0, kappa)
    assert chi_c(0.0, cav) == pytest.approx((1 - 1j) / (2 * kappa))
    w = np.linspace(-5, 5, 10001)
    assert w[np.argmax(np.abs(chi_c(w, cav)) ** 2)] == pytest.approx(kappa, abs=1e-3)


def test_cavity_phase_examples():
    assert cavity_phases(CavityParams(0.3, 0.2, 0.0, 0.0))[0] == 0.0
    assert cavity_phases(CavityParams(1.0, 0.0, 0.0, 0.0))[1] == 0.0


@given(rates, freqs)
def test_zeta_c_resonant_amplitude_form(kappa, w):
    cav = CavityParams(kappa, 0.0)
    assert zeta_c(w, 0.0, cav) == pytest.approx(1 / (kappa - 1j * w), rel=1e-12)


@given(rates, detunings, freqs)
def test_zeta_c_phase_quadrature_form(kappa, delta, w):
    cav = CavityParams(kappa, 0.0, 0.0, delta)
    expected = 0.5j * (chi_c(w, cav) - np.conj(chi_c(-w, cav)))
    assert zeta_c(w, -np.pi / 2, cav) == pytest.approx(expected, rel=1e-12, abs=1e-14 / kappa)


def test_zeta_m_examples():
    mech = MechanicalParams(2.0, 1e-4 * 2.0)
    assert zeta_m(0.0, mech) == pytest.approx(0.5, rel=1e-8)
    gap = abs(zeta_m(2.0, mech) / zeta_m_approx(2.0, mech) - 1)
    assert gap < 1e-3


@given(st.floats(0.2, 5.0), st.floats(1e-6, 1e-3), freqs)
def test_zeta_m_conjugate_symmetry(wm, gamma, w):
    mech = MechanicalParams(wm, gamma)
    assert zeta_m(-w, mech) == pytest.approx(np.conj(zeta_m(w, mech)), rel=1e-12)
