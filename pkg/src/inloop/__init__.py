"""Feedback-controlled light: in-loop spectra, cavities and optomechanics."""
from . import cavity, errors, laser, numerics, optomech, spectral
from .cavity import CavityLoop, FeedbackPort
from .errors import *  # noqa: F401,F403
from .laser import DetectorParams, LaserLoop
from .optomech import OmLoop
from .spectral import CavityParams, CallableFilter, FlatFilter, MechanicalParams

__version__ = "0.1.0"
