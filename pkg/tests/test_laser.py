import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from inloop.errors import DegenerateConfigurationError
from inloop.laser import (
    DetectorParams,
    LaserLoop,
    extrema_frequencies,
    inloop_quadrature_psd,
    interference_zero_filter_value,
    laser_stability,
    photocurrent_psd,
    photocurrent_psd_flat,
    squash_factor,
)
from inloop.spectral import CallableFilter, FlatFilter


def _loop(gain, delay=1.0, phase=0.0, eta=1.0, theta=0.0):
    return LaserLoop(FlatFilter(gain, delay, phase), DetectorParams(eta, theta))


def test_detector_validation():
    with pytest.raises(ValueError):
        DetectorParams(1.5)
    with pytest.raises(ValueError):
        DetectorParams(0.5, 0.0, eta_d=0.9, noise_ratio=0.2)
    det = DetectorParams.from_detector(0.9, 0.5, 0.1)
    assert det.eta == pytest.approx(0.6)


def test_squash_factor_dc_value():
    loop = _loop(0.3, eta=1.0)
    assert squash_factor(np.array([0.0]), loop)[0] == pytest.approx(1 / 0.4)


def test_zero_gain_is_shot_noise():
    w = np.linspace(-30, 30, 601)
    assert np.all(photocurrent_psd(w, _loop(0.0, theta=0.4)) == 1.0)


@given(st.floats(-0.49, 0.49), st.floats(0.0, 5.0), st.floats(-np.pi, np.pi),
       st.floats(0.01, 1.0), st.floats(-np.pi, np.pi))
def test_flat_closed_form_matches_general_form(gain, delay, phase, eta, theta):
    loop = _loop(gain, delay, phase, eta, theta)
    w = np.linspace(-10, 10, 41)
    assert np.allclose(photocurrent_psd_flat(w, loop), photocurrent_psd(w, loop), rtol=1e-10)


@given(st.floats(-0.499, 0.499), st.floats(0.1, 5.0), st.floats(-np.pi, np.pi))
def test_squashing_bounded_below_by_quarter(gain, delay, theta):
    loop = _loop(gain, delay, 0.0, 1.0, theta)
    w = np.linspace(0, 20, 401)
    assert photocurrent_psd(w, loop).min() >= 0.25 - 1e-12


def test_extrema_kinds_and_order():
    ext = extrema_frequencies(_loop(0.2, delay=2.0), 3)
    ws = [w for w, _ in ext]
    assert ws == sorted(ws)
    pos = [(w, k) for w, k in ext if w >= 0]
    assert pos[0] == (0.0, "max")
    assert pos[1][1] == "min" and pos[1][0] == pytest.approx(np.pi / 2)
    # negative feedback sign swaps the kinds
    assert extrema_frequencies(_loop(-0.2, delay=2.0), 0) == [(0.0, "min")]
    assert extrema_frequencies(_loop(0.2, theta=np.pi / 2), 0) == [(0.0, "flat")]
    with pytest.raises(DegenerateConfigurationError):
        extrema_frequencies(_loop(0.2, delay=0.0), 2)
    with pytest.raises(TypeError):
        extrema_frequencies(LaserLoop(CallableFilter(lambda w: w), DetectorParams(1.0)), 2)


def test_inloop_quadrature_at_detected_phase_is_photocurrent_for_unit_efficiency():
    loop = _loop(0.3, 1.0, 0.2, 1.0, 0.0)
    w = np.linspace(-5, 5, 51)
    assert np.allclose(inloop_quadrature_psd(w, 0.0, loop), photocurrent_psd(w, loop), rtol=1e-12)


def test_inloop_quadrature_orthogonal_phase_is_shot_noise():
    loop = _loop(0.3, 1.0, 0.2, 0.7, 0.0)
    w = np.linspace(-5, 5, 51)
    assert np.allclose(inloop_quadrature_psd(w, np.pi / 2, loop), 1.0)


def test_interference_zero_value():
    g = interference_zero_filter_value(0.4, 1.4)
    assert abs(g) == pytest.approx(1 / (2 * np.sin(1.0)))
    with pytest.raises(DegenerateConfigurationError):
        interference_zero_filter_value(1.0, 1.0)


def test_stability_bound():
    assert laser_stability(_loop(0.49)).stable
    assert not laser_stability(_loop(0.51)).stable
    rep = laser_stability(_loop(0.3, eta=0.25))
    assert rep.margin == pytest.approx(0.7)
    assert laser_stability(_loop(5.0, eta=0.0)).margin == np.inf


@given(st.floats(-3.0, 3.0), st.floats(-20.0, 20.0))
def test_orthogonal_detection_does_not_squash(gain, w):
    loop = _loop(gain, theta=np.pi / 2)
    assert squash_factor(np.array([w]), loop)[0] == pytest.approx(1.0, abs=1e-12)


def test_odd_extremum_squash_value():
    loop = _loop(0.5, delay=1.0)
    assert squash_factor(np.array([np.pi]), loop)[0] == pytest.approx(0.5)


def test_extrema_at_multiples_of_pi():
    ext = extrema_frequencies(_loop(0.2, delay=1.0), 4)
    pos = [w for w, _ in ext if w >= 0]
    assert np.allclose(pos, np.pi * np.arange(5))
    kinds = [k for w, k in ext if w >= 0]
    assert kinds == ["max", "min", "max", "min", "max"]


@given(st.floats(0.0, 2 * np.pi))
def test_inloop_quadrature_phase_periodicity(phi):
    loop = _loop(0.3, 1.0, 0.2, 0.8, 0.4)
    w = np.linspace(-5, 5, 21)
    assert np.allclose(inloop_quadrature_psd(w, phi + 2 * np.pi, loop), inloop_quadrature_psd(w, phi, loop),
                       rtol=1e-10)


def test_stability_examples():
    assert laser_stability(_loop(0.0, eta=0.64)).margin == pytest.approx(1 / 1.6)
    assert not laser_stability(_loop(0.5)).stable
    assert laser_stability(_loop(0.999, eta=0.25)).stable
    assert not laser_stability(_loop(1.0, eta=0.25)).stable
