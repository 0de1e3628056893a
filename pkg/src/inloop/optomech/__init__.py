"""Feedback-controlled cavity coupled to a mechanical oscillator."""
from .cooling import *  # noqa: F401,F403
from .cooling import __all__ as _cooling_all
from .model import *  # noqa: F401,F403
from .model import __all__ as _model_all
from .oracle import *  # noqa: F401,F403
from .oracle import __all__ as _oracle_all
from .pulse import *  # noqa: F401,F403
from .pulse import __all__ as _pulse_all
from .squeeze import *  # noqa: F401,F403
from .squeeze import __all__ as _squeeze_all

__all__ = _model_all + _oracle_all + _cooling_all + _pulse_all + _squeeze_all
