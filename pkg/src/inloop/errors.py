"""Exception types raised by the simulator."""


class InLoopError(Exception):
    """Base class for all errors raised by :mod:`inloop`."""


class DegenerateConfigurationError(InLoopError, ValueError):
    """A derived quantity is undefined for the given parameters.

    Raised for instance when the reflection phase of a cavity is requested
    with ``2*kappa1 == kappa`` and zero detuning.
    """


class SingularConfigurationError(InLoopError, ValueError):
    """A closed-form expression hits a (numerically) vanishing denominator."""


class InstabilityError(InLoopError):
    """The feedback loop or the optomechanical system is unstable.

    Attributes
    ----------
    window : tuple of float or None
        Stable gain interval ``(g_min, g_max)`` when it is known.
    """

    def __init__(self, message, window=None, required=None):
        super().__init__(message)
        self.window = window
        self.required = required


class EffectiveModelError(InLoopError):
    """The effective single-pole cavity model breaks down (e.g. kappa_eff <= 0)."""


class HeatingError(InLoopError):
    """The net optical damping is not positive, so no steady state exists."""


class MultistabilityError(InLoopError):
    """The self-consistent detuning equation has no unique attracting solution."""

    def __init__(self, message, branches=()):
        super().__init__(message)
        self.branches = tuple(branches)


class QuadratureError(InLoopError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, value=None, achieved=None):
        super().__init__(message)
        self.value = value
        self.achieved = achieved


class StepSizeError(InLoopError, ValueError):
    """The requested DDE step is too coarse for the feedback delay."""
