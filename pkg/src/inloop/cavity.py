"""Empty optical cavity inside the feedback loop.

The drive and the feedback act on the first mirror.  The loop is closed on
either the transmitted (second mirror) or the reflected (first mirror)
output; phases of detected quadratures are referenced to the first-mirror
input through ``theta_bar = theta_fb + phi_out``.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy import special

from .errors import (
    EffectiveModelError,
    InstabilityError,
    SingularConfigurationError,
)
from .laser import DetectorParams, LaserLoop
from .numerics import QuadratureSpec, find_roots_bracketed, integrate_line
from .spectral import CavityParams, FlatFilter, cavity_phases, chi_c, zeta_c

__all__ = [
    "FeedbackPort",
    "CavityLoop",
    "EffectiveCavity",
    "CorrelationMatrix",
    "LoopGainReport",
    "zeta_fb",
    "zeta_un",
    "h_fb",
    "mu_fb",
    "mu_fb_derivative",
    "lambda_cfb",
    "photocurrent_psd_cavity",
    "loop_gain",
    "loop_gain_and_stability",
    "is_stable",
    "outofloop_psd",
    "steady_correlations",
    "effective_susceptibility",
    "probe_response",
    "effective_params",
    "effective_rates",
    "effective_noise_stats",
    "effective_model_occupation",
]


class FeedbackPort(str, enum.Enum):
    TRANSMISSION = "transmission"
    REFLECTION = "reflection"


@dataclass(frozen=True)
class CavityLoop:
    """Cavity, detector/filter and the output port that closes the loop."""

    cav: CavityParams
    loop: LaserLoop
    port: FeedbackPort = FeedbackPort.TRANSMISSION

    def __post_init__(self):
        object.__setattr__(self, "port", FeedbackPort(self.port))

    @property
    def eta(self):
        return self.loop.eta

    @property
    def filter(self):
        return self.loop.filter

    @property
    def phi_c(self):
        return cavity_phases_safe(self.cav)[0]

    def phi_out(self, port):
        """Phase between the first-mirror input and the output at ``port``.

        For the unused reflected output of an impedance-matched cavity on
        resonance the extra reflection phase is undefined; it then only sets
        the reference of ``theta_un`` and is taken as zero.
        """
        port = FeedbackPort(port)
        if port is FeedbackPort.TRANSMISSION:
            return self.phi_c
        if port is not self.port:
            phi_c, phi_cp = cavity_phases_safe(self.cav)
            return phi_c + (0.0 if np.isnan(phi_cp) else phi_cp)
        phi_c, phi_cp = cavity_phases(self.cav)
        return phi_c + phi_cp

    @property
    def unused_port(self):
        if self.port is FeedbackPort.TRANSMISSION:
            return FeedbackPort.REFLECTION
        return FeedbackPort.TRANSMISSION

    @property
    def kappa_fb(self):
        return self.cav.kappa2 if self.port is FeedbackPort.TRANSMISSION else self.cav.kappa1

    @property
    def kappa_un(self):
        return self.cav.kappa1 if self.port is FeedbackPort.TRANSMISSION else self.cav.kappa2

    @property
    def theta_bar(self):
        return self.loop.theta_fb + self.phi_out(self.port)

    def with_filter(self, flt):
        return replace(self, loop=LaserLoop(flt, self.loop.detector))

    def with_gain(self, gain):
        return self.with_filter(self.loop.filter.with_gain(gain))

    def with_theta(self, theta_fb):
        det = DetectorParams(self.loop.detector.eta, theta_fb)
        return replace(self, loop=LaserLoop(self.loop.filter, det))


def cavity_phases_safe(cav):
    """``(phi_c, phi_c')`` with ``phi_c'`` set to NaN when it is undefined."""
    phi_c = float(np.angle(cav.kappa - 1j * cav.detuning))
    try:
        return phi_c, cavity_phases(cav)[1]
    except ValueError:
        return phi_c, float("nan")


class EffectiveCavity(NamedTuple):
    """Single-pole description of the in-loop cavity near ``omega = Delta``.

    ``kappa_eff``/``delta_eff`` come from the complex pole ``nu``;
    ``kappa_eff_simple``/``delta_eff_simple`` are the short-delay forms.
    """

    kappa_eff: float
    delta_eff: float
    u: complex
    nu: complex
    kappa_eff_simple: float
    delta_eff_simple: float


class CorrelationMatrix(NamedTuple):
    """Stationary ``<a a>`` / ``<a^dag a>`` moments of the cavity field."""

    n_st: float
    m_st: complex
    error: float

    def matrix(self):
        return np.array([[self.m_st, self.n_st + 1.0], [self.n_st, np.conj(self.m_st)]])


class LoopGainReport(NamedTuple):
    omega: np.ndarray
    gain_unit: np.ndarray
    crossings: np.ndarray
    g_upper: float
    g_lower: float
    window: tuple


def _port_response(omega, cl, port, theta_bar):
    kappa_port = cl.cav.kappa2 if port is FeedbackPort.TRANSMISSION else cl.cav.kappa1
    z = 2.0 * np.sqrt(kappa_port * cl.cav.kappa1) * zeta_c(omega, theta_bar, cl.cav)
    if port is FeedbackPort.REFLECTION:
        z = z - np.cos(theta_bar)
    return z


def zeta_fb(omega, cl: CavityLoop):
    """Transfer from first-mirror input amplitude to the detected quadrature."""
    return _port_response(omega, cl, cl.port, cl.theta_bar)


def zeta_un(omega, theta_un, cl: CavityLoop):
    """Transfer from first-mirror input amplitude to the unused output at ``theta_un``."""
    port = cl.unused_port
    return _port_response(omega, cl, port, theta_un + cl.phi_out(port))


def _reflection_coefficient(cl):
    return 2.0 * np.sqrt(cl.eta) * np.cos(cl.theta_bar)


def h_fb(omega, cl: CavityLoop):
    """Feedback filter dressed by the directly reflected light (reflection only)."""
    g = cl.filter(omega)
    if cl.port is FeedbackPort.TRANSMISSION:
        return np.asarray(g, dtype=complex)
    den = 1.0 + _reflection_coefficient(cl) * g
    if np.any(np.abs(den) < 1e-12):
        raise SingularConfigurationError(
            "1 + 2 sqrt(eta) g cos(theta_bar) vanishes: reflection loop is singular"
        )
    return g / den


def mu_fb(omega, cl: CavityLoop):
    return 2.0 * np.sqrt(cl.kappa_fb * cl.cav.kappa1 * cl.eta) * h_fb(omega, cl)


def mu_fb_derivative(omega, cl: CavityLoop):
    """d mu / d omega; exact for a flat filter, finite differences otherwise."""
    g = cl.filter(omega)
    dg = cl.filter.derivative(omega)
    if cl.port is FeedbackPort.REFLECTION:
        dh = dg / (1.0 + _reflection_coefficient(cl) * g) ** 2
    else:
        dh = dg
    return 2.0 * np.sqrt(cl.kappa_fb * cl.cav.kappa1 * cl.eta) * dh


def lambda_cfb(omega, cl: CavityLoop):
    """Cavity squashing factor ``1 / (1 - 2 mu zeta_c(theta_bar))``."""
    return 1.0 / (1.0 - 2.0 * mu_fb(omega, cl) * zeta_c(omega, cl.theta_bar, cl.cav))


def photocurrent_psd_cavity(omega, cl: CavityLoop):
    """In-loop photocurrent spectrum ``|h/g|^2 |lambda_c|^2``."""
    if cl.port is FeedbackPort.TRANSMISSION:
        ratio = 1.0
    else:
        g = cl.filter(omega)
        ratio = np.abs(1.0 / (1.0 + _reflection_coefficient(cl) * g)) ** 2
    return ratio * np.abs(lambda_cfb(omega, cl)) ** 2


def loop_gain(omega, cl: CavityLoop):
    """Total open-loop gain ``2 sqrt(eta) g(w) zeta_fb(w)``; ``S_i = |1 - G|^-2``."""
    return 2.0 * np.sqrt(cl.eta) * cl.filter(omega) * zeta_fb(omega, cl)


def _scan_limit(cl, omega_max=None):
    if omega_max is not None:
        return float(omega_max)
    kappa, delta = cl.cav.kappa, abs(cl.cav.detuning)
    lim = max(20.0 * kappa, delta + 20.0 * kappa)
    tau = getattr(cl.filter, "delay", 0.0)
    if tau and tau > 0:
        lim = max(lim, 4.0 * np.pi / tau)
    return lim


def _real_axis_crossings(func, omega_max, grid):
    """Frequencies in ``[0, omega_max]`` where ``Im func == 0``.

    ``omega = 0`` is tested on its own because the sign-dependent filter
    phase may jump there.
    """
    crossings = []
    if abs(np.imag(func(np.array([0.0]))[0])) <= 1e-14 * max(1.0, abs(func(np.array([0.0]))[0])):
        crossings.append(0.0)
    lo = omega_max * 1e-9
    roots = find_roots_bracketed(lambda w: np.imag(func(w)), lo, omega_max, grid=grid)
    crossings.extend(roots.tolist())
    return np.asarray(crossings)


def loop_gain_and_stability(cl: CavityLoop, omega_max=None, grid=2048):
    """Unit-gain loop response and the window of flat-filter gains that is stable.

    The loop gain is linear in the filter gain in both ports, so it is
    evaluated once at unit gain.  At every real-axis crossing ``omega_i``
    the closed loop stays stable as long as ``gain * Re G_1(omega_i) < 1``;
    with ``G_> = max Re G_1`` and ``G_< = min Re G_1`` this gives the window
    ``(1/G_<, 1/G_>)`` (an open side when the extremum has the other sign).
    """
    flt = cl.filter
    if not isinstance(flt, FlatFilter):
        raise TypeError("the stability window needs a FlatFilter")
    unit = cl.with_filter(FlatFilter(1.0, flt.delay, flt.phase_offset))
    lim = _scan_limit(cl, omega_max)

    def g1(w):
        return loop_gain(w, unit)

    crossings = _real_axis_crossings(g1, lim, grid)
    if crossings.size == 0:
        raise ValueError("no real-axis crossing of the loop gain in range; widen omega_max")
    re = np.real(g1(crossings))
    g_upper, g_lower = float(re.max()), float(re.min())
    hi = 1.0 / g_upper if g_upper > 0 else np.inf
    lo = 1.0 / g_lower if g_lower < 0 else -np.inf
    omega = np.linspace(-lim, lim, 2 * grid + 1)
    return LoopGainReport(omega, g1(omega), crossings, g_upper, g_lower, (lo, hi))


def is_stable(cl: CavityLoop, omega_max=None, grid=2048):
    """Stability verdict at the configured gain (any filter)."""
    lim = _scan_limit(cl, omega_max)
    if isinstance(cl.filter, FlatFilter) and cl.port is FeedbackPort.REFLECTION:
        # far from the cavity the loop behaves like the bare laser loop
        if abs(_reflection_coefficient(cl) * cl.filter.gain) >= 1.0:
            return False
    crossings = _real_axis_crossings(lambda w: loop_gain(w, cl), lim, grid)
    if crossings.size == 0:
        return True
    return bool(np.all(np.real(loop_gain(crossings, cl)) < 1.0))


def require_stable(cl: CavityLoop):
    if not is_stable(cl):
        window = None
        if isinstance(cl.filter, FlatFilter):
            window = loop_gain_and_stability(cl).window
        raise InstabilityError("feedback loop is unstable", window=window)


def outofloop_psd(omega, theta_un, cl: CavityLoop):
    """Spectrum of the unused output quadrature at ``theta_un`` (>= 1)."""
    amp = 2.0 * zeta_un(omega, theta_un, cl) * h_fb(omega, cl) * lambda_cfb(omega, cl)
    return 1.0 + np.abs(amp) ** 2


def _s_sine(b, s):
    """``int_0^inf sin(b w) / (w^2 + s^2) dw`` for ``b >= 0``."""
    x = b * s
    if x == 0:
        return 0.0
    if x < 40.0:
        return (np.exp(-x) * special.expi(x) + np.exp(x) * special.exp1(x)) / (2.0 * s)
    # asymptotic series sum_j (2j)! / x^(2j+1), truncated well before its smallest term
    total, term = 0.0, 1.0 / x
    for j in range(1, 16):
        total += term
        term *= (2 * j - 1) * (2 * j) / x**2
    return total / s


def _flat_h2_lorentz_integral(cl, s):
    """``int |h(w)|^2 / (w^2 + s^2) dw`` for a flat filter, via its Fourier series."""
    f = cl.filter
    gbar = f.gain
    a = _reflection_coefficient(cl) * gbar if cl.port is FeedbackPort.REFLECTION else 0.0
    if abs(a) >= 1.0:
        raise InstabilityError("direct reflection gain >= 1: loop unstable at high frequency")
    base = np.pi / (2.0 * s)
    total = base
    if a != 0.0:
        kmax = int(min(200000, math.ceil(math.log(1e-18) / math.log(abs(a))) + 1))
        k = np.arange(1, kmax + 1)
        coeff = (-a) ** k
        tau = f.delay
        cos_part = np.cos(k * f.phase_offset) * base * np.exp(-k * tau * s)
        sin_part = np.array([_s_sine(kk * tau, s) for kk in k]) if f.phase_offset else 0.0
        total += 2.0 * np.sum(coeff * (cos_part - np.sin(k * f.phase_offset) * sin_part))
    return 2.0 * gbar**2 / (1.0 - a**2) * total


def _tail_model(cl, s):
    """Lorentzian tail model ``|h|^2 / (w^2 + s^2)`` and its exact integral.

    Returns a zero model for filters other than :class:`FlatFilter`.
    """
    if not isinstance(cl.filter, FlatFilter):
        return (lambda w: np.zeros_like(w)), 0.0

    def model(w):
        return np.abs(h_fb(w, cl)) ** 2 / (w**2 + s**2)

    return model, _flat_h2_lorentz_integral(cl, s)


def steady_correlations(cl: CavityLoop, quad: QuadratureSpec = QuadratureSpec(), check_stability=True):
    """Stationary moments ``n_st = <a^dag a>`` and ``m_st = <a a>``.

    Both integrals share one adaptive grid.  The ``n_st`` integrand is
    symmetrised in frequency so that ``n_st >= |m_st|`` holds node by node.
    For flat filters a Lorentzian model of the slowly decaying, possibly
    oscillating tail is subtracted and integrated in closed form.
    """
    if check_stability:
        require_stable(cl)
    cav = cl.cav
    k1 = cav.kappa1
    pref = 2.0 * k1 / (2.0 * np.pi)
    phase = np.exp(-2j * cl.phi_c)
    s = cav.kappa + abs(cav.detuning)
    model, model_integral = _tail_model(cl, s)

    def integrand(w):
        hl2 = np.abs(h_fb(w, cl) * lambda_cfb(w, cl)) ** 2
        cp, cm = chi_c(w, cav), chi_c(-w, cav)
        tail = model(w)
        n_i = hl2 * 0.5 * (np.abs(cp) ** 2 + np.abs(cm) ** 2) - tail
        m_i = hl2 * cp * cm - tail
        return pref * np.stack([n_i.astype(complex), phase * m_i])

    bps = sorted({0.0, cav.detuning, -cav.detuning})
    (n_val, m_val), err = integrate_line(integrand, quad, center=0.0, scale=s, breakpoints=bps)
    n_val = n_val + pref * model_integral
    m_val = m_val + phase * pref * model_integral
    return CorrelationMatrix(float(np.real(n_val)), complex(m_val), float(err))


def effective_susceptibility(omega, cl: CavityLoop):
    """``chi_c(w) lambda_c(w)``."""
    return chi_c(omega, cl.cav) * lambda_cfb(omega, cl)


def probe_response(nu, cl: CavityLoop, alpha_s=1.0):
    """Photocurrent power at the seed frequency ``nu`` (transmission loop).

    ``4 kappa1 kappa2 eta alpha_s^2 |lambda_c(nu) chi_c(nu)|^2``; vacuum noise
    is neglected.
    """
    if cl.port is not FeedbackPort.TRANSMISSION:
        raise ValueError("the seed response is defined for a transmission loop")
    c = cl.cav
    return 4.0 * c.kappa1 * c.kappa2 * cl.eta * alpha_s**2 * np.abs(effective_susceptibility(nu, cl)) ** 2


def effective_params(cl: CavityLoop) -> EffectiveCavity:
    """Pole of ``chi_eff`` closest to the cavity resonance, and its short-delay form."""
    cav = cl.cav
    kappa, delta = cav.kappa, cav.detuning
    tau = getattr(cl.filter, "delay", 0.0) or 0.0
    if kappa * tau > 0.1:
        warnings.warn(
            "kappa * delay > 0.1: several feedback resonances may fall inside the cavity line",
            RuntimeWarning,
            stacklevel=2,
        )
    tb = cl.theta_bar
    mu = complex(mu_fb(np.array([delta]), cl)[0])
    dmu = complex(mu_fb_derivative(np.array([delta]), cl)[0])
    bracket = np.exp(-1j * tb) + kappa * np.exp(1j * tb) / (kappa - 2j * delta)
    u = 1.0 + 2j * delta * np.exp(1j * tb) / (kappa - 2j * delta) ** 2 * mu - 1j * bracket * dmu
    nu = delta - 1j / u * (kappa - bracket * mu)
    simple = np.exp(-1j * tb) * mu
    return EffectiveCavity(
        float(-nu.imag), float(nu.real), complex(u), complex(nu),
        float(kappa - simple.real), float(delta - simple.imag),
    )


def effective_rates(omega, cl: CavityLoop):
    """Frequency-dependent ``(kappa_eff(w), Delta_eff(w))``."""
    x = np.exp(-1j * cl.theta_bar) * mu_fb(omega, cl)
    return cl.cav.kappa - np.real(x), cl.cav.detuning - np.imag(x)


def effective_noise_stats(omega, cl: CavityLoop):
    """Occupation ``n_in(w)`` and pairing ``m_in(w)`` of the effective input noise.

    Raises
    ------
    EffectiveModelError
        If the effective decay rate is not positive at ``omega`` or ``-omega``.
    """
    omega = np.asarray(omega, dtype=float)
    mu = mu_fb(omega, cl)
    kp, _ = effective_rates(omega, cl)
    km, _ = effective_rates(-omega, cl)
    if np.any(kp <= 0) or np.any(km <= 0):
        raise EffectiveModelError("effective decay rate is not positive: effective model breaks down")
    kfb_eta = cl.kappa_fb * cl.eta
    if kfb_eta == 0:
        zero = np.zeros_like(omega)
        return zero, zero.astype(complex)
    n_in = np.abs(mu) ** 2 / (4.0 * kp * kfb_eta)
    m_in = (np.abs(mu) ** 2 / (2.0 * kfb_eta) - np.conj(mu) * np.exp(1j * cl.theta_bar)) / (
        2.0 * np.sqrt(kp * km)
    )
    return n_in, m_in


def effective_model_occupation(cl: CavityLoop, quad: QuadratureSpec = QuadratureSpec(rel_tol=1e-9)):
    """Cavity occupation rebuilt from the effective single-mode model.

    Uses ``a = exp(-i phi_c) chi_eff f`` with the total noise ``f`` expressed
    through the effective input-noise moments; agreement with
    :func:`steady_correlations` checks the effective model end to end.
    """
    cav = cl.cav
    tb = cl.theta_bar

    def parts(w):
        kap, _ = effective_rates(w, cl)
        kam, _ = effective_rates(-w, cl)
        c = np.conj(chi_c(-w, cav)) * mu_fb(w, cl) * np.exp(1j * tb)
        A = (1.0 - c) * np.sqrt(2.0 * kap)
        B = c * np.sqrt(2.0 * kam)
        return A, B

    def integrand(w):
        # S_{a^dag a}(w) = |chi_eff(-w)|^2 <f^dag(w) f(-w)>
        A, B = parts(-w)
        n_p, m_p = effective_noise_stats(w, cl)
        n_m, _ = effective_noise_stats(-w, cl)
        ff = (np.abs(A) ** 2 * n_m + np.conj(A) * B * np.conj(m_p)
              + np.conj(B) * A * m_p + np.abs(B) ** 2 * (n_p + 1.0))
        s_aa = np.real(np.abs(effective_susceptibility(-w, cl)) ** 2 * ff)
        return (s_aa - 2.0 * cav.kappa1 * model(w)) / (2.0 * np.pi)

    s = cav.kappa + abs(cav.detuning)
    model, model_integral = _tail_model(cl, s)
    val, _ = integrate_line(integrand, quad, center=0.0, scale=s,
                            breakpoints=sorted({0.0, cav.detuning, -cav.detuning}))
    return float(val) + 2.0 * cav.kappa1 * model_integral / (2.0 * np.pi)
