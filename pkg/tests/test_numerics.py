import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from inloop.errors import QuadratureError, StepSizeError
from inloop.numerics import (
    DDESpec,
    OptimizerSpec,
    QuadratureSpec,
    find_roots_bracketed,
    integrate_dde,
    integrate_line,
    minimize,
)
from inloop.spectral import CavityParams, FlatFilter, chi_c


def test_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(abs_tol=0.0)
    with pytest.raises(ValueError):
        QuadratureSpec(compactification="other")
    with pytest.raises(ValueError):
        QuadratureSpec(compactification="truncate_at")
    with pytest.raises(ValueError):
        DDESpec(step=0.0, horizon=1.0)
    with pytest.raises(StepSizeError):
        DDESpec(step=0.2, horizon=1.0, delay=1.0)
    DDESpec(step=0.1, horizon=1.0, delay=1.0)
    with pytest.raises(ValueError):
        OptimizerSpec(grid_points=4)
    with pytest.raises(ValueError):
        OptimizerSpec(refinement="newton")


@given(st.floats(0.05, 5.0), st.floats(0.0, 3.0), st.floats(-10.0, 10.0))
@settings(max_examples=30, deadline=None)
def test_cavity_line_normalisation(k1, k2, delta):
    cav = CavityParams(k1, k2, 0.0, delta)
    val, err = integrate_line(lambda w: 2 * cav.kappa * np.abs(chi_c(w, cav)) ** 2 / (2 * np.pi),
                              QuadratureSpec(abs_tol=1e-12, rel_tol=1e-12), scale=cav.kappa, breakpoints=[delta])
    assert val == pytest.approx(1.0, abs=1e-8)


def test_lorentzian_area_and_odd_function():
    val, _ = integrate_line(lambda w: 3.0 / (w**2 + 4.0), QuadratureSpec(abs_tol=1e-13, rel_tol=1e-13), scale=2.0)
    assert val == pytest.approx(1.5 * np.pi, abs=1e-10)
    spec = QuadratureSpec(abs_tol=1e-10)
    val, _ = integrate_line(lambda w: w / (w**2 + 1.0) ** 2, spec, center=0.0, scale=1.0)
    assert abs(val) <= 1e-10


def test_vector_integrand_and_truncation():
    f = lambda w: np.stack([np.exp(-w**2), w**2 * np.exp(-w**2)])
    val, _ = integrate_line(f, QuadratureSpec(compactification="truncate_at", truncate_at=12.0))
    assert val == pytest.approx([np.sqrt(np.pi), np.sqrt(np.pi) / 2], rel=1e-10)
    with pytest.raises(ValueError):
        integrate_line(f, scale=-1.0)


def test_quadrature_budget_error_carries_estimate():
    f = lambda w: np.abs(np.sin(50 * w)) / (1 + w**2)
    with pytest.raises(QuadratureError) as info:
        integrate_line(f, QuadratureSpec(abs_tol=1e-14, rel_tol=1e-14, max_subdivisions=40))
    assert info.value.achieved > 0 and info.value.value is not None


def test_roots_of_sine():
    roots = find_roots_bracketed(np.sin, 0.0, 10.0, grid=1001)
    assert np.allclose(roots, [0.0, np.pi, 2 * np.pi, 3 * np.pi], atol=1e-10)
    assert find_roots_bracketed(lambda x: 1.0 + x**2, -3.0, 3.0).size == 0


def test_flat_filter_gain_crossings_without_cavity():
    # Im of a flat filter vanishes at w_n = (n pi - phase) / delay
    f = FlatFilter(0.7, 1.3, 0.4)
    roots = find_roots_bracketed(lambda w: np.imag(f(w)), 1e-9, 20.0, grid=4001)
    n = np.arange(1, 9)
    assert np.allclose(roots, (n * np.pi - 0.4) / 1.3, atol=1e-9)


def test_dde_without_delay_is_exponential():
    spec = DDESpec(step=0.01, horizon=5.0)
    t, y, _ = integrate_dde(lambda t, y, lag: -0.7 * y, [1.0], spec)
    assert np.max(np.abs(y[:, 0] - np.exp(-0.7 * t))) < 1e-8


@pytest.mark.parametrize("tau", [0.05, 0.2])
def test_linear_delay_equation_matches_characteristic_root(tau):
    # x' = -x(t - tau) has the exact solution exp(lam t) for history exp(lam s)
    lam = float(np.real(special.lambertw(-tau) / tau))
    spec = DDESpec(step=tau / 20, horizon=4.0, delay=tau)
    t, y, _ = integrate_dde(lambda t, y, lag: -lag(t - tau), [1.0], spec,
                            history=lambda s: np.array([np.exp(lam * s)], dtype=complex))
    assert np.max(np.abs(y[:, 0] - np.exp(lam * t))) < 1e-4


def test_dde_zero_data_stays_zero_and_impulses_kick():
    spec = DDESpec(step=0.01, horizon=1.0, delay=0.5)
    _, y, _ = integrate_dde(lambda t, y, lag: -y - lag(t - 0.5), [0.0], spec)
    assert np.all(y == 0)
    t, y, _ = integrate_dde(lambda t, y, lag: -y, [0.0], spec, impulses={10: np.array([1.0])})
    assert np.all(y[:10] == 0)
    assert y[-1, 0] == pytest.approx(np.exp(-(1.0 - 0.1)), rel=1e-8)


def test_minimize_quadratic_and_constant():
    f = lambda x: (x[0] - 0.3) ** 2 + 2 * (x[1] + 1.2) ** 2 + 0.5 * (x[0] - 0.3) * (x[1] + 1.2)
    for refinement in ("golden_section", "coordinate_descent"):
        x, fx = minimize(f, [(-2, 2), (-3, 3)], OptimizerSpec(refinement=refinement, iters=200, tol=1e-15))
        assert x == pytest.approx([0.3, -1.2], abs=1e-5)
        assert fx == pytest.approx(0.0, abs=1e-10)
    x, fx = minimize(lambda x: 4.0, [(0, 1)], OptimizerSpec())
    assert fx == 4.0 and 0 <= x[0] <= 1


def test_minimize_never_worse_than_grid():
    f = lambda x: np.sin(5 * x[0]) + 0.1 * x[0] ** 2
    spec = OptimizerSpec(grid_points=9)
    grid = np.linspace(-3, 3, 9)
    _, fx = minimize(f, [(-3, 3)], spec)
    assert fx <= min(f([g]) for g in grid)
