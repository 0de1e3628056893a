"""Frequency-domain building blocks shared by every loop model.

Conventions
-----------
Fourier transforms use ``x(w) = (2 pi)^-1/2 \\int dt exp(i w t) x(t)`` so that a
time derivative becomes ``-i w``.  All rates are amplitude decay rates in
rad/s and all phases are in radians.  Every response function is vectorised
over ``omega``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DegenerateConfigurationError

__all__ = [
    "CavityParams",
    "MechanicalParams",
    "FilterFunction",
    "FlatFilter",
    "CallableFilter",
    "ComplexSpectrum",
    "chi_c",
    "cavity_phases",
    "zeta_c",
    "chi_m",
    "zeta_m",
    "zeta_m_approx",
]


@dataclass(frozen=True)
class CavityParams:
    """Fabry-Perot mode with two mirrors and an internal loss channel.

    Parameters
    ----------
    kappa1, kappa2 : float
        Decay rates through the driven (first) and the second mirror.
    kappa_loss : float
        Additional internal loss rate.
    detuning : float
        Cavity detuning from the drive, ``omega_c - omega_L``.
    """

    kappa1: float
    kappa2: float
    kappa_loss: float = 0.0
    detuning: float = 0.0

    def __post_init__(self):
        for name in ("kappa1", "kappa2", "kappa_loss"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.kappa <= 0:
            raise ValueError("total decay rate kappa must be positive")

    @property
    def kappa(self) -> float:
        return self.kappa1 + self.kappa2 + self.kappa_loss

    @classmethod
    def symmetric(cls, kappa, detuning=0.0, kappa_loss=0.0):
        half = 0.5 * (kappa - kappa_loss)
        return cls(half, half, kappa_loss, detuning)


@dataclass(frozen=True)
class MechanicalParams:
    """Mechanical mode and its linearised coupling to the cavity.

    ``G`` is the linearised coupling ``g0 * alpha_c``; ``g0`` is only needed
    when the drive is linearised explicitly (see
    :func:`inloop.optomech.linearize_drive`).
    """

    omega_m: float
    gamma: float
    n_th: float = 0.0
    G: float = 0.0
    g0: float | None = None

    def __post_init__(self):
        if self.omega_m <= 0:
            raise ValueError("omega_m must be positive")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.n_th < 0:
            raise ValueError("n_th must be non-negative")
        if self.gamma >= 0.01 * self.omega_m:
            warnings.warn(
                "gamma >= 0.01 omega_m: the high-Q approximations are questionable",
                RuntimeWarning,
                stacklevel=3,
            )

    @property
    def thermal_psd(self) -> float:
        """Flat thermal force spectrum ``gamma (2 n_th + 1)``."""
        return self.gamma * (2.0 * self.n_th + 1.0)


class FilterFunction:
    """Frequency response of the feedback electronics.

    Subclasses implement :meth:`__call__`.  ``causal`` and
    ``conjugate_symmetric`` are descriptive flags; the latter means
    ``g(-w) == conj(g(w))`` which holds for filters acting on the amplitude
    quadrature only.
    """

    causal = True
    conjugate_symmetric = True

    def __call__(self, omega):
        raise NotImplementedError

    def derivative(self, omega, step=None):
        """dg/domega by central differences (overridden where known)."""
        omega = np.asarray(omega, dtype=float)
        h = step if step is not None else 1e-6 * np.maximum(1.0, np.abs(omega))
        return (self(omega + h) - self(omega - h)) / (2 * h)

    def with_gain(self, gain):
        """Return a copy with the overall gain replaced (if meaningful)."""
        raise NotImplementedError(f"{type(self).__name__} has no scalar gain")


@dataclass(frozen=True)
class FlatFilter(FilterFunction):
    """Constant-gain filter with a pure delay and a phase offset.

    ``g(w) = gain * exp(i w delay) * exp(i phase_offset sign(w))``, with the
    phase term set to 1 at ``w == 0`` so that conjugate symmetry holds
    everywhere.
    """

    gain: float = 0.0
    delay: float = 0.0
    phase_offset: float = 0.0
    causal = True
    conjugate_symmetric = True

    def __post_init__(self):
        if self.delay < 0:
            raise ValueError("delay must be non-negative")

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        phase = omega * self.delay + self.phase_offset * np.sign(omega)
        return self.gain * np.exp(1j * phase)

    def derivative(self, omega, step=None):
        # exact away from the DC point, where the sign term jumps
        return 1j * self.delay * self(omega)

    def with_gain(self, gain):
        return FlatFilter(gain, self.delay, self.phase_offset)


@dataclass(frozen=True)
class CallableFilter(FilterFunction):
    """Wrap an arbitrary vectorised callable ``omega -> complex``."""

    func: Callable = field(compare=False)
    causal: bool = True
    conjugate_symmetric: bool = True
    gain: float = 1.0

    def __call__(self, omega):
        return self.gain * np.asarray(self.func(np.asarray(omega, dtype=float)), dtype=complex)

    def with_gain(self, gain):
        return CallableFilter(self.func, self.causal, self.conjugate_symmetric, gain)


@dataclass(frozen=True)
class ComplexSpectrum:
    """Values sampled on a strictly increasing frequency grid.

    ``kind`` is ``"response"`` for complex transfer functions and ``"psd"``
    for real, non-negative power spectral densities.
    """

    frequencies: np.ndarray
    values: np.ndarray
    kind: str = "response"

    def __post_init__(self):
        w = np.asarray(self.frequencies, dtype=float)
        v = np.asarray(self.values)
        if w.ndim != 1 or v.shape[0] != w.shape[0]:
            raise ValueError("frequencies and values must have matching length")
        if np.any(np.diff(w) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if self.kind == "psd":
            v = np.real(v).astype(float)
            if np.any(v < 0):
                raise ValueError("a PSD must be non-negative")
        elif self.kind != "response":
            raise ValueError(f"unknown spectrum kind {self.kind!r}")
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.frequencies)


def chi_c(omega, cav: CavityParams):
    """Cavity susceptibility ``1 / (kappa + i (Delta - omega))``."""
    omega = np.asarray(omega, dtype=float)
    return 1.0 / (cav.kappa + 1j * (cav.detuning - omega))


def cavity_phases(cav: CavityParams):
    """Input-to-cavity phase ``phi_c`` and extra reflection phase ``phi_c'``.

    Raises
    ------
    DegenerateConfigurationError
        When ``2 kappa1 == kappa`` at zero detuning (the reflected mean field
        vanishes and its phase is undefined).
    """
    kappa, delta = cav.kappa, cav.detuning
    phi_c = np.angle(kappa - 1j * delta)
    re = 2 * cav.kappa1 - kappa
    if abs(re) <= 1e-15 * kappa and abs(delta) <= 1e-15 * kappa:
        raise DegenerateConfigurationError(
            "reflection phase undefined: impedance-matched cavity on resonance"
        )
    return float(phi_c), float(np.angle(re - 1j * delta))


def zeta_c(omega, theta, cav: CavityParams):
    """Cavity transfer function for the quadrature at phase ``theta``.

    ``(exp(-i theta) chi_c(w) + exp(i theta) conj(chi_c(-w))) / 2``
    """
    omega = np.asarray(omega, dtype=float)
    return 0.5 * (
        np.exp(-1j * theta) * chi_c(omega, cav)
        + np.exp(1j * theta) * np.conj(chi_c(-omega, cav))
    )


def chi_m(omega, mech: MechanicalParams):
    """Mechanical susceptibility ``1 / (gamma/2 + i (omega_m - omega))``."""
    omega = np.asarray(omega, dtype=float)
    return 1.0 / (0.5 * mech.gamma + 1j * (mech.omega_m - omega))


def zeta_m(omega, mech: MechanicalParams):
    """Position response ``i (chi_m(w) - conj(chi_m(-w))) / 2``."""
    omega = np.asarray(omega, dtype=float)
    return 0.5j * (chi_m(omega, mech) - np.conj(chi_m(-omega, mech)))


def zeta_m_approx(omega, mech: MechanicalParams):
    """High-Q form ``omega_m / (omega_m^2 - omega^2 - i omega gamma)``."""
    omega = np.asarray(omega, dtype=float)
    wm = mech.omega_m
    return wm / (wm**2 - omega**2 - 1j * omega * mech.gamma)
