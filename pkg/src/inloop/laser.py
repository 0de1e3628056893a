"""Feedback on a free laser beam: squashing, photocurrent and in-loop spectra.

A quadrature of the beam at phase ``theta_fb`` is detected with efficiency
``eta`` and the photocurrent, filtered by ``g(w)``, modulates the amplitude
of the beam.  Spectra are in shot-noise units (coherent light gives 1).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateConfigurationError
from .spectral import FilterFunction, FlatFilter

__all__ = [
    "DetectorParams",
    "LaserLoop",
    "StabilityReport",
    "squash_factor",
    "photocurrent_psd",
    "photocurrent_psd_flat",
    "extrema_frequencies",
    "inloop_quadrature_psd",
    "interference_zero_filter_value",
    "laser_stability",
]


@dataclass(frozen=True)
class DetectorParams:
    """Homodyne detector.

    Parameters
    ----------
    eta : float
        Overall efficiency in [0, 1].
    theta_fb : float
        Phase of the detected quadrature.
    eta_d, noise_ratio : float, optional
        Bare quantum efficiency and electronic-to-shot noise ratio; when both
        are given they must satisfy ``eta = eta_d / (1 + noise_ratio)``.
    """

    eta: float
    theta_fb: float = 0.0
    eta_d: float | None = None
    noise_ratio: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if self.eta_d is not None and self.noise_ratio is not None:
            if self.noise_ratio < 0:
                raise ValueError("noise_ratio must be non-negative")
            expected = self.eta_d / (1.0 + self.noise_ratio)
            if abs(expected - self.eta) > 1e-12:
                raise ValueError(
                    f"eta={self.eta} inconsistent with eta_d/(1+noise_ratio)={expected}"
                )

    @classmethod
    def from_detector(cls, eta_d, noise_ratio, theta_fb=0.0):
        return cls(eta_d / (1.0 + noise_ratio), theta_fb, eta_d, noise_ratio)


@dataclass(frozen=True)
class LaserLoop:
    filter: FilterFunction
    detector: DetectorParams

    @property
    def eta(self):
        return self.detector.eta

    @property
    def theta_fb(self):
        return self.detector.theta_fb


class StabilityReport(NamedTuple):
    stable: bool
    margin: float


def squash_factor(omega, loop: LaserLoop):
    """Closed-loop factor ``1 / (1 - 2 sqrt(eta) g(w) cos(theta_fb))``."""
    g = loop.filter(omega)
    return 1.0 / (1.0 - 2.0 * np.sqrt(loop.eta) * g * np.cos(loop.theta_fb))


def photocurrent_psd(omega, loop: LaserLoop):
    """In-loop photocurrent spectrum ``|lambda(w)|^2``."""
    return np.abs(squash_factor(omega, loop)) ** 2


def _flat(loop):
    if not isinstance(loop.filter, FlatFilter):
        raise TypeError("this operation needs a FlatFilter")
    return loop.filter


def photocurrent_psd_flat(omega, loop: LaserLoop):
    """Expanded real form of the photocurrent spectrum for a flat filter."""
    f = _flat(loop)
    omega = np.asarray(omega, dtype=float)
    c = np.sqrt(loop.eta) * f.gain * np.cos(loop.theta_fb)
    phase = omega * f.delay + f.phase_offset * np.sign(omega)
    return 1.0 / (1.0 - 4.0 * c * np.cos(phase) + 4.0 * c**2)


def extrema_frequencies(loop: LaserLoop, n_max: int):
    """Frequencies of the photocurrent maxima and minima for a flat filter.

    Returns ``(omega, kind)`` pairs, with ``kind`` one of ``"max"``,
    ``"min"`` (or ``"flat"`` when ``gain * cos(theta_fb) == 0``), for
    ``omega = +/- (n pi - phase_offset) / delay`` and ``n = 0..n_max``.
    Only the non-negative branch ``n pi >= phase_offset`` is kept on each
    side, since the sign-dependent phase flips with the frequency.
    """
    f = _flat(loop)
    if f.delay <= 0:
        raise DegenerateConfigurationError("zero delay: the spectrum has no discrete extrema")
    s = f.gain * np.cos(loop.theta_fb)
    out = []
    for n in range(n_max + 1):
        w = (n * np.pi - f.phase_offset) / f.delay
        if w < 0:
            continue
        if abs(s) <= 1e-14 * abs(f.gain):
            kind = "flat"
        else:
            kind = "max" if (n % 2 == 0) == (s > 0) else "min"
        out.append((w, kind))
        if w > 0:
            out.append((-w, kind))
    out.sort(key=lambda item: item[0])
    return out


def inloop_quadrature_psd(omega, phi, loop: LaserLoop):
    """Spectrum of the in-loop field quadrature at phase ``phi``."""
    g = loop.filter(omega)
    lam = squash_factor(omega, loop)
    eta = loop.eta
    first = np.abs(1.0 + 2.0 * np.sqrt(eta) * np.cos(phi) * g * lam
                   * np.exp(1j * (phi - loop.theta_fb))) ** 2
    second = 4.0 * (1.0 - eta) * np.cos(phi) ** 2 * np.abs(g) ** 2 * np.abs(lam) ** 2
    return first + second


def interference_zero_filter_value(phi, theta_fb, eta=1.0):
    """Filter value ``g`` that cancels the coherent part of the quadrature at ``phi``.

    Solves ``2 sqrt(eta) cos(phi) g lambda exp(i (phi - theta_fb)) = -1``
    which gives ``g = i exp(-i phi) / (2 sqrt(eta) sin(phi - theta_fb))``.
    At ``eta == 1`` the in-loop spectrum vanishes wherever the filter takes
    this value.
    """
    s = np.sin(phi - theta_fb)
    if abs(s) < 1e-15 or eta <= 0:
        raise DegenerateConfigurationError("no interference zero when phi == theta_fb (mod pi)")
    return 1j * np.exp(-1j * phi) / (2.0 * np.sqrt(eta) * s)


def laser_stability(loop: LaserLoop) -> StabilityReport:
    """Closed-form stability test for a flat filter.

    Stable iff ``|gain cos(theta_fb)| < 1 / (2 sqrt(eta))``; the margin is the
    distance to that bound (positive when stable).
    """
    f = _flat(loop)
    if loop.eta == 0:
        return StabilityReport(True, np.inf)
    bound = 1.0 / (2.0 * np.sqrt(loop.eta))
    margin = bound - abs(f.gain * np.cos(loop.theta_fb))
    return StabilityReport(bool(margin > 0), float(margin))
