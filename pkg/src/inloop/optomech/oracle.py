"""Independent linear-response engine for the feedback optomechanical loop.

At every frequency the Langevin equations for ``a, a^dag, b, b^dag`` and the
photocurrent ``i`` are assembled as a 5x5 linear system driven by nine input
noise operators

    [a1, a1^dag, a2, a2^dag, a_loss, a_loss^dag, X_v, b_in, b_in^dag]

and solved directly.  Every observable is a linear functional of these
inputs, and cross spectra follow from the noise correlation matrix.  No
closed-form transfer function is used, which makes the engine a check on
all of them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..cavity import FeedbackPort
from ..errors import InstabilityError
from .model import OmLoop

__all__ = ["Observable", "LinearResponseOracle", "oracle_spectra"]

_A, _AD, _B, _BD, _I = range(5)
_N_NOISE = 9


@dataclass(frozen=True)
class Observable:
    """Linear functional ``cx . x + cn . noise`` with frequency-dependent rows.

    ``cx`` has shape ``(n_freq, 5)`` and ``cn`` shape ``(n_freq, 9)``.
    """

    cx: np.ndarray
    cn: np.ndarray


class LinearResponseOracle:
    """Per-frequency solver for an :class:`OmLoop`.

    Parameters
    ----------
    om : OmLoop
    feedback : bool
        ``False`` opens the loop (zero filter) while keeping the detector.
    """

    def __init__(self, om: OmLoop, feedback=True):
        self.om = om
        self.feedback = feedback
        cav = om.cav
        self.phi_c = om.cl.phi_c
        n = om.mech.n_th
        N = np.zeros((_N_NOISE, _N_NOISE))
        for j in (0, 2, 4):
            N[j, j + 1] = 1.0  # <a(w) a^dag(w')> = delta
        N[6, 6] = 1.0
        N[7, 8] = n + 1.0
        N[8, 7] = n
        self.N = N
        self.rates = (cav.kappa1, cav.kappa2, cav.kappa_loss)

    # assembly ---------------------------------------------------------
    def _filter(self, omega):
        if not self.feedback:
            return np.zeros_like(omega, dtype=complex), np.zeros_like(omega, dtype=complex)
        f = self.om.cl.filter
        return np.asarray(f(omega), dtype=complex), np.conj(np.asarray(f(-omega), dtype=complex))

    def _port_phase(self, port):
        return self.om.cl.phi_out(port)

    def _output_quadrature(self, omega, port, theta, g, gm):
        """Rows for the output quadrature ``X_out^(theta)`` at ``port``."""
        port = FeedbackPort(port)
        nf = omega.size
        k1, k2, _ = self.rates
        j, kj = (0, k1) if port is FeedbackPort.REFLECTION else (2, k2)
        tb = theta + self._port_phase(port)
        e_m, e_p = np.exp(-1j * tb), np.exp(1j * tb)
        cx = np.zeros((nf, 5), dtype=complex)
        cn = np.zeros((nf, _N_NOISE), dtype=complex)
        cx[:, _A] = e_m * np.sqrt(2 * kj) * np.exp(1j * self.phi_c)
        cx[:, _AD] = e_p * np.sqrt(2 * kj) * np.exp(-1j * self.phi_c)
        cn[:, j] = -e_m
        cn[:, j + 1] = -e_p
        if port is FeedbackPort.REFLECTION:
            cx[:, _I] = -(e_m * g + e_p * gm)
        return Observable(cx, cn)

    def _system(self, omega):
        om = self.om
        cav, mech = om.cav, om.mech
        G = om.G
        nf = omega.size
        k1, k2, kl = self.rates
        kappa, delta = cav.kappa, cav.detuning
        em, ep = np.exp(-1j * self.phi_c), np.exp(1j * self.phi_c)
        g, gm = self._filter(omega)
        M = np.zeros((nf, 5, 5), dtype=complex)
        B = np.zeros((nf, 5, _N_NOISE), dtype=complex)
        # cavity field
        M[:, 0, _A] = -(kappa + 1j * (delta - omega))
        M[:, 0, _B] = 1j * G
        M[:, 0, _BD] = 1j * G
        M[:, 0, _I] = em * np.sqrt(2 * k1) * g
        B[:, 0, 0] = -em * np.sqrt(2 * k1)
        B[:, 0, 2] = -em * np.sqrt(2 * k2)
        B[:, 0, 4] = -em * np.sqrt(2 * kl)
        M[:, 1, _AD] = -(kappa - 1j * (delta + omega))
        M[:, 1, _B] = -1j * G
        M[:, 1, _BD] = -1j * G
        M[:, 1, _I] = ep * np.sqrt(2 * k1) * gm
        B[:, 1, 1] = -ep * np.sqrt(2 * k1)
        B[:, 1, 3] = -ep * np.sqrt(2 * k2)
        B[:, 1, 5] = -ep * np.sqrt(2 * kl)
        # mechanics
        half = 0.5 * mech.gamma
        M[:, 2, _B] = -(half + 1j * (mech.omega_m - omega))
        M[:, 2, _A] = 1j * G
        M[:, 2, _AD] = 1j * G
        B[:, 2, 7] = -np.sqrt(mech.gamma)
        M[:, 3, _BD] = -(half - 1j * (mech.omega_m + omega))
        M[:, 3, _A] = -1j * G
        M[:, 3, _AD] = -1j * G
        B[:, 3, 8] = -np.sqrt(mech.gamma)
        # photocurrent: i - sqrt(eta) X_out,fb = sqrt(1 - eta) X_v
        eta = om.cl.eta
        out = self._output_quadrature(omega, om.cl.port, om.cl.loop.theta_fb, g, gm)
        M[:, 4, :] = -np.sqrt(eta) * out.cx
        M[:, 4, _I] += 1.0
        B[:, 4, :] = np.sqrt(eta) * out.cn
        B[:, 4, 6] += np.sqrt(1.0 - eta)
        return M, B

    def transfer(self, omega):
        """Matrix ``T`` with ``x = T . noise`` (shape ``(n_freq, 5, 9)``)."""
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        M, B = self._system(omega)
        cond = np.linalg.cond(M)
        if np.any(~np.isfinite(cond)) or np.any(cond > 1e14):
            raise InstabilityError("linear-response system is singular at some frequency")
        return np.linalg.solve(M, B)

    # observables --------------------------------------------------------
    def state(self, omega, name):
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        cx = np.zeros((omega.size, 5), dtype=complex)
        idx = {"a": [_A], "a_dag": [_AD], "b": [_B], "b_dag": [_BD], "i": [_I]}
        if name == "q":
            cx[:, _B] = cx[:, _BD] = 1.0 / np.sqrt(2.0)
        elif name == "F":
            cx[:, _A] = cx[:, _AD] = 1.0
        else:
            cx[:, idx[name]] = 1.0
        return Observable(cx, np.zeros((omega.size, _N_NOISE), dtype=complex))

    def cavity_quadrature(self, omega, phi):
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        cx = np.zeros((omega.size, 5), dtype=complex)
        cx[:, _A] = np.exp(-1j * phi)
        cx[:, _AD] = np.exp(1j * phi)
        return Observable(cx, np.zeros((omega.size, _N_NOISE), dtype=complex))

    def output_quadrature(self, omega, port, theta):
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        g, gm = self._filter(omega)
        return self._output_quadrature(omega, port, theta, g, gm)

    def noise_row(self, omega, obs: Observable):
        """Coefficients of ``obs`` on the input noises, shape ``(n_freq, 9)``."""
        T = self.transfer(omega)
        return np.einsum("fx,fxn->fn", obs.cx, T) + obs.cn

    def cross_spectrum(self, omega, make1, make2=None, symmetrize=False):
        """``S_12(w)`` defined by ``<O1(w) O2(w')> = S_12(w) delta(w + w')``.

        ``make1``/``make2`` are callables ``omega -> Observable`` so that
        the rows can be built at both ``w`` and ``-w``.
        """
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        make2 = make1 if make2 is None else make2
        r1p = self.noise_row(omega, make1(omega))
        r2m = self.noise_row(-omega, make2(-omega))
        s = np.einsum("fi,ij,fj->f", r1p, self.N, r2m)
        if symmetrize:
            r1m = self.noise_row(-omega, make1(-omega))
            r2p = self.noise_row(omega, make2(omega))
            s = 0.5 * (s + np.einsum("fi,ij,fj->f", r1m, self.N, r2p))
        return s

    def psd(self, omega, make, symmetrize=False):
        return np.real(self.cross_spectrum(omega, make, None, symmetrize))


def oracle_spectra(omega, om: OmLoop, theta_un=None):
    """All spectra of interest from the oracle.

    Returns a dict with ``photocurrent``, ``position`` (symmetrised),
    ``out_fb`` and ``out_un`` (output quadratures with feedback), ``out_fb0``,
    ``out_un0`` and ``cross0`` (open-loop output spectra at the detected and
    unused ports) and ``force`` (the cavity amplitude-quadrature spectrum at
    ``G = 0`` that sets the scattering rates).
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    cl = om.cl
    theta_fb = cl.loop.theta_fb
    theta_un = theta_fb if theta_un is None else theta_un
    closed = LinearResponseOracle(om)
    opened = LinearResponseOracle(om, feedback=False)
    fb_port, un_port = cl.port, cl.unused_port

    def out(orc, port, theta):
        return lambda w: orc.output_quadrature(w, port, theta)

    res = {
        "photocurrent": closed.psd(omega, lambda w: closed.state(w, "i")),
        "position": closed.psd(omega, lambda w: closed.state(w, "q"), symmetrize=True),
        "out_fb": closed.psd(omega, out(closed, fb_port, theta_fb)),
        "out_un": closed.psd(omega, out(closed, un_port, theta_un)),
        "out_fb0": opened.psd(omega, out(opened, fb_port, theta_fb)),
        "out_un0": opened.psd(omega, out(opened, un_port, theta_un)),
        "cross0": opened.cross_spectrum(omega, out(opened, fb_port, theta_fb), out(opened, un_port, theta_un)),
    }
    decoupled = LinearResponseOracle(om.with_coupling(0.0))
    res["force"] = decoupled.psd(omega, lambda w: decoupled.state(w, "F"))
    return res
