"""Ponderomotive squeezing of the unused output with feedback on the other one.

With feedback the unused-output quadrature is the no-feedback quadrature
plus ``K exp(i phi_K) / sqrt(eta)`` times the no-feedback photocurrent, so
its spectrum is a quadratic form in ``K exp(i phi_K)`` whose coefficients
are the no-feedback output spectra and their cross spectrum.  Those come
from :class:`~inloop.optomech.oracle.LinearResponseOracle`.
"""
from __future__ import annotations

import enum
from typing import NamedTuple

import numpy as np

from ..cavity import FeedbackPort, h_fb
from ..spectral import FlatFilter
from .model import OmLoop, om_is_stable, om_responses, zeta_om_quadrature
from .oracle import LinearResponseOracle

__all__ = [
    "SqueezeMode",
    "SqueezeResult",
    "BaselineSpectra",
    "zeta_om_un",
    "feedback_kernel",
    "baseline_spectra",
    "squeeze_psd",
    "squeeze_spectrum",
    "single_sided_psd",
    "optimized_squeeze_reduction",
    "filter_for_kernel",
    "output_relations_check",
    "optimal_quadrature",
    "squeeze_optimal_quadrature",
    "brute_force_squeeze",
    "FixedSqueezeLoop",
    "optimize_fixed_loop",
]


class SqueezeMode(str, enum.Enum):
    NONE = "none"
    PHASE_ONLY = "phase_only"
    PHASE_AND_GAIN = "phase_and_gain"


class SqueezeResult(NamedTuple):
    """Unused-output spectrum with feedback and its two reference spectra.

    ``baseline_psd`` is the same output without feedback and
    ``single_sided_psd`` the spectrum of a single-sided cavity with the same
    total decay rate, same intracavity quadrature and no feedback.
    """

    theta_un: float
    K: np.ndarray
    phi_K: np.ndarray
    psd: np.ndarray
    baseline_psd: np.ndarray
    single_sided_psd: np.ndarray


class BaselineSpectra(NamedTuple):
    """No-feedback spectra: unused output, detected output and their cross spectrum."""

    s_un: np.ndarray
    s_fb: np.ndarray
    s_cross: np.ndarray


def zeta_om_un(omega, theta_un, om: OmLoop):
    """Transfer from a driven-mirror amplitude modulation to the unused output quadrature."""
    cl, cav = om.cl, om.cav
    port = cl.unused_port
    tb = theta_un + cl.phi_out(port)
    k_port = cav.kappa2 if port is FeedbackPort.TRANSMISSION else cav.kappa1
    z = 2.0 * np.sqrt(k_port * cav.kappa1) * zeta_om_quadrature(omega, tb, om)
    if port is FeedbackPort.REFLECTION:
        z = z - np.cos(tb)
    return z


def feedback_kernel(omega, theta_un, om: OmLoop):
    """``K exp(i phi_K) = 2 sqrt(eta) zeta_om,un h lambda_om`` for the configured loop."""
    omega = np.asarray(omega, dtype=float)
    lam = om_responses(omega, om)["lambda_om_fb"]
    return 2.0 * np.sqrt(om.cl.eta) * zeta_om_un(omega, theta_un, om) * h_fb(omega, om.cl) * lam


def baseline_spectra(omega, theta_un, om: OmLoop, theta_fb=None) -> BaselineSpectra:
    """No-feedback spectra at the detection phase and ``theta_un``.

    ``theta_fb`` defaults to the configured detection phase; both phases may
    be arrays matching ``omega``.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    cl = om.cl
    orc = LinearResponseOracle(om, feedback=False)
    theta_fb = cl.loop.theta_fb if theta_fb is None else theta_fb

    def out(port, theta):
        return lambda w: orc.output_quadrature(w, port, theta)

    fb = out(cl.port, theta_fb)
    un = out(cl.unused_port, theta_un)
    return BaselineSpectra(
        orc.psd(omega, un),
        orc.psd(omega, fb),
        orc.cross_spectrum(omega, fb, un),
    )


def _noise_floor(eta):
    return np.inf if eta <= 0 else (1.0 - eta) / eta


def squeeze_psd(kernel, base: BaselineSpectra, eta):
    """Unused-output spectrum for a given ``K exp(i phi_K)``."""
    kernel = np.asarray(kernel, dtype=complex)
    if eta <= 0:
        return np.array(base.s_un, dtype=float)
    k2 = np.abs(kernel) ** 2
    return np.real(base.s_un + k2 * (base.s_fb + _noise_floor(eta))
                   + 2.0 * np.real(kernel * base.s_cross))


def single_sided_psd(s_un, cav, kappa_un):
    """``1 + (kappa / kappa_un) (S_un - 1)``: the same quadrature with one output port."""
    return 1.0 + cav.kappa / kappa_un * (np.asarray(s_un) - 1.0)


def optimized_squeeze_reduction(s, eta, kappa_fb, kappa_un):
    """Optimized spectrum ``1 - s / (1 - eta (kappa_fb / kappa_un) s)`` when both
    outputs probe the same intracavity quadrature.

    ``s = 1 - S_un`` is the no-feedback squeezing depth of the unused port;
    for a lossless cavity ``s = (kappa_un / kappa) s_sing``.
    """
    s = np.asarray(s, dtype=float)
    return 1.0 - s / (1.0 - eta * kappa_fb / kappa_un * s)


def squeeze_spectrum(omega, theta_un, om: OmLoop, optimize="none", base=None) -> SqueezeResult:
    """Spectrum of the unused output quadrature at ``theta_un`` with feedback.

    Parameters
    ----------
    omega : array_like
    theta_un : float
        Quadrature phase of the unused output.
    om : OmLoop
    optimize : {"none", "phase_only", "phase_and_gain"}
        ``none`` uses the configured filter.  ``phase_only`` keeps the
        configured ``K`` and picks ``phi_K`` so that
        ``Re[exp(i phi_K) S_cross] = -|S_cross|``.  ``phase_and_gain`` also
        sets ``K = |S_cross| / (S_fb + (1 - eta)/eta)`` at every frequency,
        giving ``S_un - |S_cross|^2 / (S_fb + (1 - eta)/eta)``.
    base : BaselineSpectra, optional
        Precomputed no-feedback spectra.
    """
    mode = SqueezeMode(optimize)
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    cl = om.cl
    eta = cl.eta
    if base is None:
        base = baseline_spectra(omega, theta_un, om)
    opt_phase = np.pi - np.angle(base.s_cross)
    if mode is SqueezeMode.NONE:
        kernel = feedback_kernel(omega, theta_un, om)
    elif mode is SqueezeMode.PHASE_ONLY:
        kernel = np.abs(feedback_kernel(omega, theta_un, om)) * np.exp(1j * opt_phase)
    else:
        if eta <= 0:
            kernel = np.zeros_like(omega, dtype=complex)
        else:
            k = np.abs(base.s_cross) / (base.s_fb + _noise_floor(eta))
            kernel = k * np.exp(1j * opt_phase)
    if mode is SqueezeMode.PHASE_AND_GAIN and eta > 0:
        psd = np.real(base.s_un) - np.abs(base.s_cross) ** 2 / (base.s_fb + _noise_floor(eta))
    else:
        psd = squeeze_psd(kernel, base, eta)
    sing = single_sided_psd(base.s_un, om.cav, cl.kappa_un)
    return SqueezeResult(float(theta_un), np.abs(kernel), np.angle(kernel), psd,
                         np.asarray(base.s_un), sing)


def filter_for_kernel(omega0, kernel, theta_un, om: OmLoop) -> OmLoop:
    """Flat-filter loop realising ``K exp(i phi_K) = kernel`` at ``omega0``.

    Inverts ``kernel = 2 sqrt(eta) zeta_un h / (1 - 4 sqrt(kappa_fb kappa1 eta) h zeta_om)``
    for ``h``, converts to the filter value and keeps the delay.
    """
    cl, cav = om.cl, om.cav
    flt = cl.filter
    if not isinstance(flt, FlatFilter):
        raise TypeError("filter_for_kernel needs a FlatFilter")
    w = np.array([float(omega0)])
    z_un = zeta_om_un(w, theta_un, om)[0]
    z_om = om_responses(w, om)["zeta_om"][0]
    eta = cl.eta
    h = kernel / (2.0 * np.sqrt(eta) * z_un
                  + 4.0 * np.sqrt(cl.kappa_fb * cav.kappa1 * eta) * kernel * z_om)
    if cl.port is FeedbackPort.REFLECTION:
        g = h / (1.0 - 2.0 * np.sqrt(eta) * np.cos(cl.theta_bar) * h)
    else:
        g = h
    sign = 1.0 if omega0 >= 0 else -1.0
    phase = sign * (np.angle(g) - omega0 * flt.delay)
    phase = float(np.angle(np.exp(1j * phase)))
    if omega0 < 0:
        g = np.conj(g)
    return om.with_cl(cl.with_filter(FlatFilter(float(abs(g)), flt.delay, phase)))


def output_relations_check(omega, theta, theta_prime, om: OmLoop):
    """Residuals of the relations between the two outputs without feedback.

    ``theta`` and ``theta_prime`` are measured relative to the cavity field
    (``theta_bar - phi_c``), so both ports probe the same intracavity
    quadratures.  Returns ``(spectrum_residual, cross_residual)``:

    * ``S_fb(theta) - 1 - (kappa_fb / kappa_un) (S_un(theta) - 1)``
    * ``S_fb,un(theta, theta') - sqrt(kappa_fb / kappa_un)
      [S_un(theta, theta') - exp(-i (theta - theta'))]``
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    cl = om.cl
    orc = LinearResponseOracle(om, feedback=False)
    fb, un = cl.port, cl.unused_port

    def quad(port, rel):
        th = rel + cl.phi_c - cl.phi_out(port)
        return lambda w: orc.output_quadrature(w, port, th)

    ratio = cl.kappa_fb / cl.kappa_un
    s_fb = orc.psd(omega, quad(fb, theta))
    s_un = orc.psd(omega, quad(un, theta))
    r1 = s_fb - 1.0 - ratio * (s_un - 1.0)
    s_cross = orc.cross_spectrum(omega, quad(fb, theta), quad(un, theta_prime))
    s_un2 = orc.cross_spectrum(omega, quad(un, theta), quad(un, theta_prime))
    r2 = s_cross - np.sqrt(ratio) * (s_un2 - np.exp(-1j * (theta - theta_prime)))
    return r1, r2


def _rel_to_port(cl, port, rel):
    return rel + cl.phi_c - cl.phi_out(port)


def optimal_quadrature(omega, om: OmLoop):
    """Most squeezed unused-output quadrature without feedback, per frequency.

    A quadrature spectrum is ``N + Re[M exp(-2 i theta)]`` in its phase, so
    three phases fix it.  Returns ``(theta_rel, s_min)`` with ``theta_rel``
    measured relative to the cavity field.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    cl = om.cl
    orc = LinearResponseOracle(om, feedback=False)
    port = cl.unused_port

    def spec(rel):
        th = _rel_to_port(cl, port, rel)
        return orc.psd(omega, lambda w: orc.output_quadrature(w, port, th))

    s0, s45, s90 = spec(0.0), spec(np.pi / 4), spec(np.pi / 2)
    n = 0.5 * (s0 + s90)
    m = 0.5 * (s0 - s90) + 1j * (s45 - n)
    theta = 0.5 * (np.angle(m) + np.pi)
    return theta, n - np.abs(m)


def squeeze_optimal_quadrature(omega, om: OmLoop) -> SqueezeResult:
    """Optimized squeezing with both outputs on the most squeezed quadrature.

    Per frequency the intracavity quadrature minimising the no-feedback
    unused spectrum is selected for both the unused and the detected
    output, and ``K``, ``phi_K`` take their optimal values.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    cl = om.cl
    rel, _ = optimal_quadrature(omega, om)
    th_un = _rel_to_port(cl, cl.unused_port, rel)
    th_fb = _rel_to_port(cl, cl.port, rel)
    base = baseline_spectra(omega, th_un, om, theta_fb=th_fb)
    res = squeeze_spectrum(omega, 0.0, om, "phase_and_gain", base=base)
    return res._replace(theta_un=th_un)


def brute_force_squeeze(base: BaselineSpectra, eta, k_max=None, spec=None):
    """Numerical minimum of the unused spectrum over ``(K, phi_K)`` at one frequency.

    ``base`` holds scalars.  Used to check the closed-form optimum.
    """
    from ..numerics import OptimizerSpec, minimize

    if spec is None:
        spec = OptimizerSpec(grid_points=32, refinement="golden_section", iters=200, tol=1e-14)
    single = BaselineSpectra(*(np.atleast_1d(np.asarray(x)) for x in base))
    if k_max is None:
        # the quadratic form in K is positive beyond 2 |cross| / (S_fb + floor)
        scale = float(np.abs(single.s_cross[0]) / (single.s_fb[0] + _noise_floor(eta)))
        k_max = 4.0 * scale if scale > 0 else 1.0

    def f(x):
        return float(squeeze_psd(x[0] * np.exp(1j * x[1]), single, eta)[0])

    x, fx = minimize(f, [(0.0, k_max), (-np.pi, np.pi)], spec)
    return x, fx


class FixedSqueezeLoop(NamedTuple):
    """Loop with fixed settings tuned for squeezing at ``omega0``."""

    om: OmLoop
    theta_un: float
    omega0: float
    psd0: float
    constrained: bool


def optimize_fixed_loop(omega0, om: OmLoop, spec=None) -> FixedSqueezeLoop:
    """Flat-filter settings minimising the unused spectrum at ``omega0``.

    Both outputs probe the most squeezed quadrature at ``omega0``.  The
    filter realising the optimal kernel is used when the loop is stable;
    otherwise gain and phase offset are searched on a box, with unstable
    settings excluded (``constrained=True``).
    """
    from ..errors import InstabilityError
    from ..numerics import OptimizerSpec, minimize

    cl = om.cl
    rel = float(optimal_quadrature([omega0], om)[0][0])
    th_un = _rel_to_port(cl, cl.unused_port, rel)
    th_fb = float(np.angle(np.exp(1j * _rel_to_port(cl, cl.port, rel))))
    probe = om.with_cl(cl.with_theta(th_fb))
    res = squeeze_optimal_quadrature([omega0], om)
    kernel = res.K[0] * np.exp(1j * res.phi_K[0])
    best = filter_for_kernel(omega0, kernel, th_un, probe)
    if om_is_stable(best):
        psd = float(squeeze_spectrum([omega0], th_un, best).psd[0])
        return FixedSqueezeLoop(best, th_un, float(omega0), psd, False)

    flt = best.cl.filter
    w0 = np.array([float(omega0)])
    base = baseline_spectra(w0, th_un, probe)

    def loop(x):
        return probe.with_cl(probe.cl.with_filter(FlatFilter(x[0], flt.delay, x[1])))

    def cost(x):
        trial = loop(x)
        if not om_is_stable(trial):
            return np.inf
        return float(squeeze_spectrum(w0, th_un, trial, base=base).psd[0])

    if spec is None:
        spec = OptimizerSpec(grid_points=10, refinement="golden_section", iters=8, tol=1e-6)
    x, fx = minimize(cost, [(0.0, 1.5 * flt.gain), (-np.pi, np.pi)], spec)
    if not np.isfinite(fx):
        raise InstabilityError("no stable flat-filter setting found for the fixed optimisation")
    return FixedSqueezeLoop(loop(x), th_un, float(omega0), fx, True)
