"""Response to a short light pulse: feedback-enabled optomechanical oscillations.

A pulse ``sqrt(2 pi) alpha_p delta(t)`` enters the driven mirror at ``t = 0``.
Right after it the cavity amplitude is ``2 sqrt(pi kappa1) alpha_p
exp(-i phi_c)``, which is used as the initial condition.  Slowly varying
amplitudes are defined by ``alpha = alpha_bar exp(-i w_m t)`` and
``beta = beta_bar exp(-i w_m t)``.
"""
from __future__ import annotations

import enum
import math
from typing import NamedTuple

import numpy as np
from scipy import linalg, optimize

from ..cavity import FeedbackPort
from ..numerics import DDESpec, integrate_dde
from ..spectral import FlatFilter
from .model import OmLoop

__all__ = [
    "PulseMode",
    "PulseTrace",
    "pulse_effective_params",
    "pulse_response",
    "oscillation_fit",
]


class PulseMode(str, enum.Enum):
    FULL_DDE = "full_dde"
    EFFECTIVE = "effective"
    CLOSED_FORM = "closed_form"


class PulseTrace(NamedTuple):
    """Slowly varying cavity and mechanical amplitudes after the pulse.

    ``times[0] = 0`` holds the limit ``t -> 0+``; both amplitudes vanish
    before the pulse.
    """

    times: np.ndarray
    alpha_bar: np.ndarray
    beta_bar: np.ndarray
    alpha_p: complex
    effective: bool
    mode: str


def _flat(om):
    f = om.cl.filter
    if not isinstance(f, FlatFilter):
        raise TypeError("the pulse response needs a FlatFilter")
    return f


def _mu_bar(om):
    cl = om.cl
    return 2.0 * np.sqrt(cl.kappa_fb * cl.cav.kappa1 * cl.eta) * _flat(om).gain


def pulse_effective_params(om: OmLoop):
    """``(kappa_eff, delta_eff)`` of the rotating-frame cavity amplitude.

    ``kappa + i delta - mu_bar exp(i (w_m tau + phi - theta_bar))`` with
    ``delta = Delta - w_m``; the filter phase offset enters alongside the
    delay phase at ``+w_m``.
    """
    f = _flat(om)
    x = _mu_bar(om) * np.exp(1j * (om.mech.omega_m * f.delay + f.phase_offset - om.cl.theta_bar))
    delta = om.cav.detuning - om.mech.omega_m
    return float(om.cav.kappa - x.real), float(delta - x.imag)


def _kick(om, alpha_p):
    return 2.0 * np.sqrt(np.pi * om.cav.kappa1) * alpha_p * np.exp(-1j * om.cl.phi_c)


def _step_for(om, step):
    f = _flat(om)
    h = 1.0 / (50.0 * om.mech.omega_m)
    if step is not None:
        h = min(h, step)
    if f.delay > 0:
        # put the delay on the grid so that delayed impulses land on nodes
        m = max(10, math.ceil(f.delay / h - 1e-9))
        h = f.delay / m
    return h


def _full_dde(om, alpha_p, horizon, step):
    cl, cav, mech = om.cl, om.cav, om.mech
    f = _flat(om)
    tau, gbar, phi = f.delay, f.gain, f.phase_offset
    if gbar != 0 and tau <= 0:
        raise ValueError("the delayed equations need a positive delay when the gain is non-zero")
    h = _step_for(om, step)
    if step is not None and h > step * (1 + 1e-12):
        raise ValueError("internal step exceeds request")
    spec = DDESpec(step=h, horizon=horizon, delay=tau)
    kappa, delta, G = cav.kappa, cav.detuning, mech.G
    half, wm = 0.5 * mech.gamma, mech.omega_m
    k1 = cav.kappa1
    inj = np.sqrt(2.0 * k1) * np.exp(-1j * cl.phi_c)
    det = np.sqrt(2.0 * cl.eta * cl.kappa_fb) * np.exp(-1j * (cl.theta_bar - cl.phi_c))
    refl = cl.port is FeedbackPort.REFLECTION
    b = 2.0 * np.sqrt(cl.eta) * np.cos(cl.theta_bar) if refl else 0.0
    rot = gbar * np.exp(1j * phi)

    # z is the positive-frequency part of the photocurrent, i = z + z*
    def feedback(lag, t):
        if gbar == 0:
            return 0.0
        z = lag(t - tau)[0]
        return rot * z + np.conj(rot * z)

    def output(t, y, lag):
        z = det * y[0]
        if refl and gbar != 0:
            z = z - b * rot * lag(t - tau)[0]
        return np.array([z])

    def rhs(t, y, lag):
        a, be = y
        da = -(kappa + 1j * delta) * a + 1j * G * (be + np.conj(be)) + inj * feedback(lag, t)
        db = -(half + 1j * wm) * be + 1j * G * (a + np.conj(a))
        return np.array([da, db])

    y0 = np.array([_kick(om, alpha_p), 0.0], dtype=complex)
    impulses = None
    if refl and gbar != 0:
        # the directly reflected pulse re-enters through the loop every delay
        m = int(round(tau / h))
        d = -np.sqrt(cl.eta) * np.exp(-1j * cl.theta_bar) * np.sqrt(2.0 * np.pi) * alpha_p
        impulses = {}
        k = 1
        while k * m <= int(round(horizon / h)) and abs(d) > 1e-300:
            kick = inj * (rot * d + np.conj(rot * d))
            impulses[k * m] = np.array([kick, 0.0])
            d = -b * rot * d
            k += 1
    t, y, _ = integrate_dde(rhs, y0, spec, history=lambda s: np.zeros(1, dtype=complex),
                            output=output, impulses=impulses)
    demod = np.exp(1j * wm * t)
    return t, y[:, 0] * demod, y[:, 1] * demod


def _effective(om, alpha_p, horizon, step):
    k_eff, d_eff = pulse_effective_params(om)
    G, half = om.G, 0.5 * om.mech.gamma
    h = _step_for(om, step) if step is None else step
    n = int(round(horizon / h))
    A = np.array([[-(k_eff + 1j * d_eff), 1j * G], [1j * G, -half]])
    P = linalg.expm(A * h)
    x = np.array([_kick(om, alpha_p), 0.0], dtype=complex)
    out = np.empty((n + 1, 2), dtype=complex)
    out[0] = x
    for k in range(n):
        x = P @ x
        out[k + 1] = x
    return np.arange(n + 1) * h, out[:, 0], out[:, 1]


def _closed_form(om, alpha_p, horizon, step):
    k_eff, _ = pulse_effective_params(om)
    h = _step_for(om, step) if step is None else step
    t = np.arange(int(round(horizon / h)) + 1) * h
    amp = _kick(om, alpha_p) * np.exp(-0.5 * k_eff * t)
    return t, amp * np.cos(om.G * t), 1j * amp * np.sin(om.G * t)


def pulse_response(om: OmLoop, alpha_p, horizon, mode="full_dde", step=None) -> PulseTrace:
    """Amplitudes after a short pulse.

    Parameters
    ----------
    om : OmLoop
        Needs a :class:`FlatFilter`.
    alpha_p : complex
        Pulse amplitude.
    horizon : float
        Final time.
    mode : {"full_dde", "effective", "closed_form"}
        ``full_dde`` integrates the laboratory-frame delayed equations
        (counter-rotating terms kept) and demodulates; ``effective`` solves
        the rotating-wave model with ``kappa_eff``, ``delta_eff``;
        ``closed_form`` evaluates ``cos(G t)``/``sin(G t)`` under the
        ``exp(-kappa_eff t / 2)`` envelope.
    step : float, optional
        Upper bound on the time step.  The default is
        ``min(delay / 10, 1 / (50 w_m))``, adjusted so the delay is an
        integer number of steps.

    Notes
    -----
    With a non-zero filter phase offset the delayed term applies
    ``exp(+i phase)`` to the positive-frequency part of the photocurrent,
    which is exact for narrowband envelopes around ``w_m``.
    """
    mode = PulseMode(mode)
    f = _flat(om)
    if step is not None and f.delay > 0 and step > f.delay / 10:
        DDESpec(step=step, horizon=horizon, delay=f.delay)  # raises StepSizeError
    if mode is PulseMode.FULL_DDE:
        t, a, b = _full_dde(om, alpha_p, horizon, step)
    elif mode is PulseMode.EFFECTIVE:
        t, a, b = _effective(om, alpha_p, horizon, step)
    else:
        t, a, b = _closed_form(om, alpha_p, horizon, step)
    return PulseTrace(t, a, b, complex(alpha_p), mode is not PulseMode.FULL_DDE, mode.value)


def oscillation_fit(trace: PulseTrace):
    """Oscillation frequency and envelope decay rate of the mechanical amplitude.

    The projection ``p(t) = Re[beta_bar / (i exp(i arg alpha_bar(0)))]`` is
    fitted to ``c sin(W t + psi) exp(-r t)`` by least squares, which averages
    out fast counter-rotating ripple.  Returns ``(W, r)``.
    """
    t = trace.times
    ref = trace.alpha_bar[0]
    if ref == 0:
        raise ValueError("trace has no initial cavity amplitude")
    p = np.real(trace.beta_bar / (1j * ref / abs(ref)))
    # start values: spectral peak for W, ratio of half-range maxima for r
    n = t.size
    spec = np.abs(np.fft.rfft(p, 16 * n))
    freqs = 2 * np.pi * np.fft.rfftfreq(16 * n, t[1] - t[0])
    w0 = freqs[1 + np.argmax(spec[1:])]
    half = n // 2
    m1, m2 = np.max(np.abs(p[:half])), np.max(np.abs(p[half:]))
    r0 = max(np.log(m1 / m2) / (t[half] - t[0]), 0.0) if m2 > 0 else 0.0

    def model(x, c, w, psi, r):
        return c * np.sin(w * x + psi) * np.exp(-r * x)

    popt, _ = optimize.curve_fit(model, t, p, p0=[m1, w0, 0.0, r0], maxfev=20000)
    return float(abs(popt[1])), float(popt[3])
