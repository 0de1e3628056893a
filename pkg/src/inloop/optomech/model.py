"""Feedback-controlled cavity with a mechanical mode: closed-form responses."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from ..cavity import (
    CavityLoop,
    FeedbackPort,
    _real_axis_crossings,
    _scan_limit,
    lambda_cfb,
    mu_fb,
)
from ..errors import InstabilityError, MultistabilityError
from ..numerics import find_roots_bracketed
from ..spectral import CavityParams, MechanicalParams, chi_c, chi_m, zeta_c, zeta_m

__all__ = [
    "OmLoop",
    "linearize_drive",
    "om_responses",
    "zeta_om_quadrature",
    "position_psd",
    "position_psd_approx",
    "thermal_force_psd",
    "photocurrent_psd_om",
    "om_loop_gain",
    "om_is_stable",
    "require_om_stable",
]


@dataclass(frozen=True)
class OmLoop:
    """In-loop cavity plus the mechanical mode it couples to."""

    cl: CavityLoop
    mech: MechanicalParams

    @property
    def G(self):
        return self.mech.G

    @property
    def cav(self):
        return self.cl.cav

    @property
    def theta_rel(self):
        """Detected phase relative to the cavity field, ``theta_bar - phi_c``."""
        return self.cl.theta_bar - self.cl.phi_c

    def with_cl(self, cl):
        return replace(self, cl=cl)

    def with_coupling(self, G):
        return replace(self, mech=replace(self.mech, G=G))


def linearize_drive(g0, alpha_in, cav: CavityParams, omega_m, max_iter=1000, tol=1e-12):
    """Self-consistent intracavity amplitude, coupling and shifted detuning.

    ``cav.detuning`` is the bare detuning ``omega_c - omega_L``.  The
    radiation-pressure shift ``sqrt(2) g0 q`` with ``q = sqrt(2) g0
    alpha_c^2 / omega_m`` and ``alpha_c = sqrt(2 kappa1) |chi_c(0)| alpha_in``
    is iterated to a fixed point with damped (relaxed) updates.

    Returns
    -------
    alpha_c, G, detuning : float

    Raises
    ------
    MultistabilityError
        When no fixed point is reached; the error lists the real roots of
        the cubic steady-state equation (the candidate branches).
    """
    if g0 == 0:
        a = np.sqrt(2 * cav.kappa1) * abs(chi_c(0.0, cav)) * alpha_in
        return float(a), 0.0, cav.detuning
    d0, kappa = cav.detuning, cav.kappa
    c = 2.0 * g0**2 / omega_m * 2.0 * cav.kappa1 * alpha_in**2

    def shifted(d):
        return d0 - c / (kappa**2 + d**2)

    d = d0
    relax = 1.0
    for it in range(max_iter):
        new = shifted(d)
        if abs(new - d) <= tol * max(1.0, abs(d0), kappa):
            d = new
            break
        d = (1 - relax) * d + relax * new
        if it > 20:
            relax = 0.5
    else:
        # (d - d0)(kappa^2 + d^2) + c = 0
        roots = np.roots([1.0, -d0, kappa**2, c - d0 * kappa**2])
        branches = tuple(float(r.real) for r in roots if abs(r.imag) < 1e-9)
        raise MultistabilityError("no stable fixed point of the detuning shift", branches=branches)
    alpha_c = np.sqrt(2 * cav.kappa1) * alpha_in / np.sqrt(kappa**2 + d**2)
    return float(alpha_c), float(g0 * alpha_c), float(d)


def om_responses(omega, om: OmLoop):
    """Closed-form response functions of the feedback optomechanical loop.

    Returns a dict with ``zeta_m_G`` (mechanics dressed by the coupling),
    ``zeta_om`` (detected-quadrature cavity response dressed by the
    mechanics), ``zeta_c_fb`` (cavity position-force response including the
    feedback), ``zeta_m_fb_G`` (mechanics dressed by coupling and feedback)
    and ``lambda_om_fb`` (squashing factor with the mechanics).
    """
    omega = np.asarray(omega, dtype=float)
    cl, cav, G = om.cl, om.cav, om.G
    tb = cl.theta_bar
    th = om.theta_rel
    phi_c = cl.phi_c
    zm = zeta_m(omega, om.mech)
    cross = chi_c(omega, cav) * np.conj(chi_c(-omega, cav))
    zeta_m_G = 1.0 / (1.0 / zm - 4.0 * G**2 * zeta_c(omega, -np.pi / 2, cav))
    zeta_om = zeta_om_quadrature(omega, tb, om)
    mu = mu_fb(omega, cl)
    lam_c = lambda_cfb(omega, cl)
    zeta_c_fb = lam_c * (
        zeta_c(omega, -np.pi / 2, cav) + 2.0 * mu * cross * np.cos(phi_c) * np.sin(th)
    )
    zeta_m_fb_G = 1.0 / (1.0 / zm - 4.0 * G**2 * zeta_c_fb)
    lam_om = 1.0 / (1.0 - 2.0 * mu * zeta_om)
    return {
        "zeta_m_G": zeta_m_G,
        "zeta_om": zeta_om,
        "zeta_c_fb": zeta_c_fb,
        "zeta_m_fb_G": zeta_m_fb_G,
        "lambda_om_fb": lam_om,
    }


def zeta_om_quadrature(omega, theta_bar, om: OmLoop):
    """Cavity quadrature response at phase ``theta_bar`` dressed by the mechanics.

    ``zeta_m^G [zeta_c^(theta_bar) / zeta_m + 4 G^2 cos(phi_c) sin(theta_bar - phi_c)
    chi_c(w) chi_c(-w)^*]``; reduces to ``zeta_c^(theta_bar)`` at ``G = 0``.
    """
    omega = np.asarray(omega, dtype=float)
    cav, G = om.cav, om.G
    phi_c = om.cl.phi_c
    zm = zeta_m(omega, om.mech)
    cross = chi_c(omega, cav) * np.conj(chi_c(-omega, cav))
    zeta_m_G = 1.0 / (1.0 / zm - 4.0 * G**2 * zeta_c(omega, -np.pi / 2, cav))
    return zeta_m_G * (
        zeta_c(omega, theta_bar, cav) / zm
        + 4.0 * G**2 * np.cos(phi_c) * np.sin(theta_bar - phi_c) * cross
    )


def thermal_force_psd(omega, mech: MechanicalParams, thermal="flat"):
    """Symmetrised thermal force spectrum.

    ``"flat"`` gives ``gamma (2 n_th + 1)``; ``"exact"`` keeps the frequency
    dependence ``gamma (2 n_th + 1) (|chi_m(w)|^2 + |chi_m(-w)|^2) / (4 |zeta_m|^2)``
    which reduces to the flat value near ``+/- omega_m`` when ``gamma << omega_m``.
    """
    omega = np.asarray(omega, dtype=float)
    if thermal == "flat":
        return np.full(omega.shape, mech.thermal_psd)
    if thermal != "exact":
        raise ValueError("thermal must be 'flat' or 'exact'")
    num = np.abs(chi_m(omega, mech)) ** 2 + np.abs(chi_m(-omega, mech)) ** 2
    return mech.thermal_psd * num / (4.0 * np.abs(zeta_m(omega, mech)) ** 2)


def _rp_terms(omega, om):
    cl, cav, G = om.cl, om.cav, om.G
    kappa = cav.kappa
    tb, th, phi_c = cl.theta_bar, om.theta_rel, cl.phi_c
    mu = mu_fb(omega, cl)
    lam = lambda_cfb(omega, cl)
    chi_p, chi_m_ = chi_c(omega, cav), chi_c(-omega, cav)
    chi_eff_p = chi_p * lam
    chi_eff_m = chi_m_ * lambda_cfb(-omega, cl)
    s0 = 2 * G**2 * kappa * (np.abs(chi_eff_p) ** 2 + np.abs(chi_eff_m) ** 2)
    kfb_eta = cl.kappa_fb * cl.eta
    z_phi = zeta_c(omega, phi_c, cav)
    z_mth = zeta_c(omega, -th, cav)
    if kfb_eta > 0:
        s1a = 4 * G**2 * np.abs(mu) ** 2 / kfb_eta * np.abs(lam * z_phi) ** 2
    else:
        s1a = np.zeros_like(s0)
    s1b = -4 * G**2 * np.abs(lam) ** 2 * 2 * np.real(mu * z_phi * np.conj(z_mth))
    cross = chi_p * np.conj(chi_m_)
    sin_t = np.sin(th)
    s2 = (
        16 * kappa * G**2 * np.abs(mu * lam * cross) ** 2 * sin_t**2
        + 16 * kappa * G**2 * np.abs(lam) ** 2
        * np.real(mu * cross * np.conj(zeta_c(omega, phi_c - np.pi / 2, cav))) * sin_t
        - 16 * G**2 * np.abs(mu * lam) ** 2
        * np.real(cross * np.conj(z_phi)) * np.sin(tb) * sin_t
    )
    return s0, s1a + s1b, s2


def position_psd(omega, om: OmLoop, thermal="flat", terms=False):
    """Symmetrised mechanical position spectrum.

    ``|zeta_m_fb_G|^2 [S_th + S_rp0 + S_rpI + S_rpII]``: thermal force plus
    radiation pressure split into the dressed-susceptibility term and two
    feedback-noise terms.  With ``terms=True`` a dict of the pieces is
    returned as well.
    """
    omega = np.asarray(omega, dtype=float)
    resp = om_responses(omega, om)
    s_th = thermal_force_psd(omega, om.mech, thermal)
    s0, s1, s2 = _rp_terms(omega, om)
    total = np.abs(resp["zeta_m_fb_G"]) ** 2 * (s_th + s0 + s1 + s2)
    if terms:
        return total, {"thermal": s_th, "rp0": s0, "rpI": s1, "rpII": s2}
    return total


def position_psd_approx(omega, om: OmLoop, thermal="flat"):
    """Position spectrum with the radiation pressure collapsed into one constant.

    ``|zeta_m_fb_G|^2 [S_th + 2 G^2 Z (|chi_eff(w)|^2 + |chi_eff(-w)|^2)]`` with
    ``Z = kappa + Z_I(Delta) + Z_II(Delta)``; valid for a single feedback
    resonance inside a cavity line well separated from zero frequency.
    """
    omega = np.asarray(omega, dtype=float)
    cl, cav, G = om.cl, om.cav, om.G
    kappa, delta = cav.kappa, cav.detuning
    tb, th, phi_c = cl.theta_bar, om.theta_rel, cl.phi_c
    mu_d = complex(mu_fb(np.array([delta]), cl)[0])
    kfb_eta = cl.kappa_fb * cl.eta
    z1 = (abs(mu_d) ** 2 / (2 * kfb_eta) if kfb_eta > 0 else 0.0) - np.real(mu_d * np.exp(-1j * tb))
    den = kappa - 2j * delta
    z2 = (
        8 * kappa * abs(mu_d) ** 2 * np.sin(th) ** 2 / (kappa**2 + 4 * delta**2)
        + 4 * kappa * np.sin(th) * np.real(-1j * mu_d * np.exp(1j * phi_c) / den)
        - 4 * abs(mu_d) ** 2 * np.sin(tb) * np.sin(th) * np.real(np.exp(1j * phi_c) / den)
    )
    Z = kappa + z1 + z2
    chi_eff_p = chi_c(omega, cav) * lambda_cfb(omega, cl)
    chi_eff_m = chi_c(-omega, cav) * lambda_cfb(-omega, cl)
    resp = om_responses(omega, om)
    s_th = thermal_force_psd(omega, om.mech, thermal)
    rp = 2 * G**2 * Z * (np.abs(chi_eff_p) ** 2 + np.abs(chi_eff_m) ** 2)
    return np.abs(resp["zeta_m_fb_G"]) ** 2 * (s_th + rp)


def photocurrent_psd_om(omega, om: OmLoop, s_out_fb0):
    """Feedback photocurrent with the mechanics, given the open-loop output spectrum.

    ``|h/g|^2 |lambda_om|^2 (1 + eta (S0_out_fb - 1))``; ``s_out_fb0`` is the
    detected-quadrature spectrum without feedback (e.g. from the oracle).
    """
    omega = np.asarray(omega, dtype=float)
    cl = om.cl
    lam = om_responses(omega, om)["lambda_om_fb"]
    if cl.port is FeedbackPort.REFLECTION:
        b = 2.0 * np.sqrt(cl.eta) * np.cos(cl.theta_bar)
        ratio = np.abs(1.0 / (1.0 + b * cl.filter(omega))) ** 2
    else:
        ratio = 1.0
    return ratio * np.abs(lam) ** 2 * (1.0 + cl.eta * (np.asarray(s_out_fb0) - 1.0))


def om_loop_gain(omega, om: OmLoop):
    """Open-loop gain ``2 sqrt(eta) g(w) zeta_fb,om(w)`` including the mechanics.

    ``S_i`` is proportional to ``|1 - L|^-2``; at ``G = 0`` this is the
    cavity loop gain.
    """
    omega = np.asarray(omega, dtype=float)
    cl, cav = om.cl, om.cav
    z = 2.0 * np.sqrt(cl.kappa_fb * cav.kappa1) * zeta_om_quadrature(omega, cl.theta_bar, om)
    if cl.port is FeedbackPort.REFLECTION:
        z = z - np.cos(cl.theta_bar)
    return 2.0 * np.sqrt(cl.eta) * cl.filter(omega) * z


def om_is_stable(om: OmLoop, grid=2048):
    """Stability verdict for the loop with the mechanics.

    Same real-axis-crossing test as for the bare cavity loop; the scan
    covers the cavity line, the delay and a refined window around the
    mechanical resonance.
    """
    cl, mech = om.cl, om.mech

    def L(w):
        return om_loop_gain(w, om)

    lim = max(_scan_limit(cl), 2.0 * mech.omega_m + 20.0 * om.cav.kappa)
    crossings = [_real_axis_crossings(L, lim, grid)]
    half = max(50.0 * mech.gamma, 4.0 * abs(om.G), 1e-3 * mech.omega_m)
    lo = max(mech.omega_m - half, lim * 1e-9)
    crossings.append(find_roots_bracketed(lambda w: np.imag(L(w)), lo, mech.omega_m + half, grid=4 * grid))
    crossings = np.concatenate(crossings)
    if crossings.size == 0:
        return True
    return bool(np.all(np.real(L(crossings)) < 1.0))


def require_om_stable(om: OmLoop):
    if not om_is_stable(om):
        raise InstabilityError("optomechanical feedback loop is unstable")
