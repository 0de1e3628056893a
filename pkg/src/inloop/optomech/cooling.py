"""Sideband cooling with an in-loop cavity: scattering rates and occupations."""
from __future__ import annotations

import enum
import warnings
from typing import NamedTuple

import numpy as np

from ..cavity import (
    FeedbackPort,
    effective_params,
    effective_rates,
    h_fb,
    lambda_cfb,
    loop_gain_and_stability,
    mu_fb,
    is_stable,
)
from ..errors import EffectiveModelError, HeatingError, InstabilityError
from ..spectral import FlatFilter, chi_c, zeta_c
from .model import OmLoop

__all__ = [
    "ScatteringRates",
    "SuppressionResult",
    "CoolingMode",
    "feedback_coefficient",
    "force_psd",
    "scattering_rates",
    "bare_rates",
    "optimal_theta_bar",
    "suppress_antistokes",
    "sideband_occupation",
    "phonon_steady",
    "antisquash_occupation",
    "antisquash_optimum",
    "adiabatic_mech_params",
]


class ScatteringRates(NamedTuple):
    """Stokes (``A_plus``) and anti-Stokes (``A_minus``) rates."""

    A_plus: float
    A_minus: float
    Gamma: float
    n_o: float


def _rates(a_plus, a_minus):
    gamma = a_minus - a_plus
    n_o = a_plus / gamma if gamma > 0 else float("nan")
    return ScatteringRates(float(a_plus), float(a_minus), float(gamma), float(n_o))


def feedback_coefficient(omega, om_or_cl):
    """``mu lambda_c zeta_c^(phi_c) / kappa``, the feedback part of the force noise."""
    cl = getattr(om_or_cl, "cl", om_or_cl)
    cav = cl.cav
    return (mu_fb(omega, cl) * lambda_cfb(omega, cl)
            * zeta_c(omega, cl.phi_c, cav) / cav.kappa)


def force_psd(omega, om_or_cl):
    """Spectrum ``S_F(w)`` of the cavity amplitude quadrature at zero coupling.

    ``S_F(w) = 2 kappa [|chi_c(w) + Lambda(-w) e^{i theta_rel}|^2
    + (kappa / (eta kappa_fb) - 1) |Lambda(w)|^2]``.  The second term is
    written as ``4 kappa1 |h lambda_c zeta_c^(phi_c)|^2 / kappa - |Lambda|^2``
    so that ``eta -> 0`` is regular.
    """
    cl = getattr(om_or_cl, "cl", om_or_cl)
    cav = cl.cav
    omega = np.asarray(omega, dtype=float)
    kappa = cav.kappa
    th = cl.theta_bar - cl.phi_c
    lam_m = feedback_coefficient(-omega, cl)
    lam_p = feedback_coefficient(omega, cl)
    coherent = np.abs(chi_c(omega, cav) + lam_m * np.exp(1j * th)) ** 2
    dressed = h_fb(omega, cl) * lambda_cfb(omega, cl) * zeta_c(omega, cl.phi_c, cav)
    extra = 4.0 * cav.kappa1 * np.abs(dressed) ** 2 / kappa - np.abs(lam_p) ** 2
    return 2.0 * kappa * (coherent + extra)


def _warn_strong_coupling(om):
    if not isinstance(om.cl.filter, FlatFilter):
        return
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        k_eff = effective_params(om.cl).kappa_eff
    if k_eff <= abs(om.G):
        warnings.warn(
            "effective linewidth <= G: rate equations outside the weak-coupling regime",
            RuntimeWarning,
            stacklevel=3,
        )


def scattering_rates(om: OmLoop) -> ScatteringRates:
    """Closed-form ``A_+ = G^2 S_F(-w_m)`` and ``A_- = G^2 S_F(w_m)``."""
    _warn_strong_coupling(om)
    wm = om.mech.omega_m
    s = force_psd(np.array([-wm, wm]), om.cl)
    return _rates(om.G**2 * s[0], om.G**2 * s[1])


def bare_rates(om: OmLoop) -> ScatteringRates:
    """Rates of standard sideband cooling, ``2 G^2 kappa |chi_c(-/+ w_m)|^2``."""
    cav, wm = om.cav, om.mech.omega_m
    a_plus = 2 * om.G**2 * cav.kappa * abs(chi_c(-wm, cav)) ** 2
    a_minus = 2 * om.G**2 * cav.kappa * abs(chi_c(wm, cav)) ** 2
    return _rates(a_plus, a_minus)


def optimal_theta_bar(om: OmLoop):
    """The two detected phases (mod 2 pi) that maximise ``A_-`` under suppression."""
    cav, wm = om.cav, om.mech.omega_m
    kappa, delta = cav.kappa, cav.detuning
    phi_c = om.cl.phi_c
    r1 = (kappa - 1j * (delta - wm)) / np.hypot(kappa, delta - wm)
    r2 = (kappa - 1j * (delta + wm)) / np.hypot(kappa, delta + wm)
    rhs = -np.exp(2j * phi_c) * r1 * r2
    t0 = 0.5 * np.angle(rhs)
    return float(t0), float(t0 + np.pi)


class SuppressionResult(NamedTuple):
    """Feedback settings that cancel the coherent Stokes term, and the rates."""

    om: OmLoop
    theta_fb: float
    gain: float
    phase_offset: float
    rates: ScatteringRates
    predicted: ScatteringRates
    window: tuple


def _filter_for_suppression(om, theta_bar):
    cl, cav, wm = om.cl, om.cav, om.mech.omega_m
    kappa = cav.kappa
    phi_c = cl.phi_c
    target = -chi_c(-wm, cav) * np.exp(-1j * (theta_bar - phi_c))
    z_phi = zeta_c(wm, phi_c, cav)
    z_tb = zeta_c(wm, theta_bar, cav)
    mu = target * kappa / (z_phi + 2.0 * target * kappa * z_tb)
    h = mu / (2.0 * np.sqrt(cl.kappa_fb * cav.kappa1 * cl.eta))
    if cl.port is FeedbackPort.REFLECTION:
        g = h / (1.0 - 2.0 * np.sqrt(cl.eta) * np.cos(theta_bar) * h)
    else:
        g = h
    return complex(g)


def suppress_antistokes(om: OmLoop, theta_fb=None) -> SuppressionResult:
    """Configure a flat filter so that the coherent Stokes scattering cancels.

    The detected phase defaults to the value that then maximises ``A_-``
    (both roots mod ``pi`` are tried and the first stable one is kept).
    Gain and phase offset follow from the modulus and argument of the
    filter value required at ``w_m``; the delay is kept.

    Raises
    ------
    InstabilityError
        If no candidate lies inside the stability window; the error carries
        the window and the required gain.
    """
    cl = om.cl
    flt = cl.filter
    if not isinstance(flt, FlatFilter):
        raise TypeError("anti-Stokes suppression is set up for a FlatFilter")
    if cl.eta <= 0 or cl.kappa_fb <= 0:
        raise ValueError("suppression needs a detected output (eta > 0, kappa_fb > 0)")
    wm = om.mech.omega_m
    phi_out = cl.phi_out(cl.port)
    if theta_fb is None:
        candidates = [tb - phi_out for tb in optimal_theta_bar(om)]
    else:
        candidates = [theta_fb]
    failure = None
    for th in candidates:
        th = float(np.angle(np.exp(1j * th)))
        probe = cl.with_theta(th)
        g = _filter_for_suppression(om, probe.theta_bar)
        gain = abs(g)
        phase = float(np.angle(np.exp(1j * (np.angle(g) - wm * flt.delay))))
        new_cl = probe.with_filter(FlatFilter(gain, flt.delay, phase))
        unit = new_cl.with_gain(1.0)
        window = loop_gain_and_stability(unit).window
        if is_stable(new_cl):
            new_om = om.with_cl(new_cl)
            return SuppressionResult(
                new_om, th, gain, phase, scattering_rates(new_om),
                _predicted_suppressed(new_om), window,
            )
        if failure is None:
            failure = (window, gain)
    raise InstabilityError(
        f"required gain {failure[1]:.6g} lies outside the stability window {failure[0]}",
        window=failure[0], required=failure[1],
    )


def _predicted_suppressed(om):
    bare = bare_rates(om)
    cl = om.cl
    factor = om.cav.kappa / (cl.eta * cl.kappa_fb) - 1.0
    a_plus = factor * bare.A_plus
    a_minus = (np.sqrt(bare.A_minus) + np.sqrt(bare.A_plus)) ** 2 + a_plus
    return _rates(a_plus, a_minus)


def sideband_occupation(om: OmLoop):
    """Standard sideband-cooling occupation ``(g n_th + A+) / (g + A- - A+)``."""
    r = bare_rates(om)
    gam = om.mech.gamma
    den = gam + r.Gamma
    if den <= 0:
        raise HeatingError("net damping is not positive")
    return float((gam * om.mech.n_th + r.A_plus) / den)


class CoolingMode(str, enum.Enum):
    GENERIC = "generic"
    SUPPRESSION_OPTIMAL = "suppression_optimal"
    ANTISQUASH = "antisquash"


def antisquash_occupation(kappa_eff, n_sc, kappa, eta, kappa_fb):
    """Occupation with a narrowed effective line: ``n_sc k/kappa + (kappa-k)^2/(4 eta kappa_fb k)``."""
    kappa_eff = np.asarray(kappa_eff, dtype=float)
    return n_sc * kappa_eff / kappa + (kappa - kappa_eff) ** 2 / (4 * eta * kappa_fb * kappa_eff)


def antisquash_optimum(n_sc, kappa, eta, kappa_fb):
    """Minimising effective linewidth and the minimum occupation ``2 n_sc / (1 + s)``."""
    s = np.sqrt(1.0 + 4.0 * eta * kappa_fb * n_sc / kappa)
    return kappa / s, 2.0 * n_sc / (1.0 + s)


def phonon_steady(om: OmLoop, mode="generic"):
    """Steady-state phonon number.

    ``generic``
        ``(gamma n_th + Gamma n_o) / (gamma + Gamma)`` with the rates of the
        configured loop.
    ``suppression_optimal``
        The optimum reached with anti-Stokes suppression and the best phase,
        ``(gamma n_th + (kappa/(eta kappa_fb) - 1) A+0) / (gamma + (sqrt A-0 + sqrt A+0)^2)``.
    ``antisquash``
        Minimum over the effective linewidth in the thermal-noise-limited
        regime, with ``n_sc = gamma n_th kappa / (2 G^2)``.
    """
    mode = CoolingMode(mode)
    mech = om.mech
    gam, nth = mech.gamma, mech.n_th
    if mode is CoolingMode.GENERIC:
        r = scattering_rates(om)
        if r.Gamma <= 0:
            raise HeatingError(f"optical damping {r.Gamma:.6g} is not positive")
        return float((gam * nth + r.A_plus) / (gam + r.Gamma))
    if mode is CoolingMode.SUPPRESSION_OPTIMAL:
        p = _predicted_suppressed(om)
        return float((gam * nth + p.A_plus) / (gam + p.Gamma))
    cl = om.cl
    if om.G == 0:
        raise HeatingError("no optical damping at zero coupling")
    n_sc = gam * nth * om.cav.kappa / (2.0 * om.G**2)
    return float(antisquash_optimum(n_sc, om.cav.kappa, cl.eta, cl.kappa_fb)[1])


def adiabatic_mech_params(om: OmLoop):
    """Optical damping and frequency shift from the effective-cavity drift matrix.

    ``Gamma = 2 G^2 Re[(1,1) (M(w_m) - i w_m)^-1 (1,-1)^T]`` and
    ``delta = G^2 Im[...]``, where ``d/dt (a, a^dag) = -M (a, a^dag) + noise``
    so the feedback enters ``M`` off the diagonal as
    ``-mu exp(+/- i (theta_bar - 2 phi_c))``.
    """
    cl, wm, G = om.cl, om.mech.omega_m, om.G
    w = np.array([wm, -wm])
    k, d = effective_rates(w, cl)
    mu = complex(mu_fb(np.array([wm]), cl)[0])
    mu_c = complex(np.conj(mu_fb(np.array([-wm]), cl)[0]))
    ph = np.exp(1j * (cl.theta_bar - 2.0 * cl.phi_c))
    M = np.array([
        [k[0] + 1j * d[0], -mu * ph],
        [-mu_c / ph, k[1] - 1j * d[1]],
    ]) - 1j * wm * np.eye(2)
    if abs(np.linalg.det(M)) < 1e-300 or np.linalg.cond(M) > 1e14:
        raise EffectiveModelError("drift matrix is singular")
    v = np.array([1.0, 1.0]) @ np.linalg.solve(M, np.array([1.0, -1.0]))
    return float(2 * G**2 * v.real), float(G**2 * v.imag)
