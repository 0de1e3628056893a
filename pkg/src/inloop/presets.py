"""Named scenario presets that reproduce the figures at desk scale.

Presets ``fig2`` ... ``fig8`` use dimensionless units (the delay or the
mechanical frequency set the scale); ``fig9`` ... ``fig13`` use physical
units with ``omega_m = 2 pi x 10 MHz``.  Every preset names the command it
is meant for.
"""
from __future__ import annotations

import copy

__all__ = ["PRESETS", "preset"]

_WM = "10 MHz"
# delay 0.1 / omega_m for omega_m = 2 pi 10 MHz
_TAU_FIG10 = "1.5915494309189535 ns"

_LASER = {
    "cavity": {"kappa": 1.0, "symmetric": True},
    "detector": {"eta": 1.0, "theta_fb": 0.0},
    "filter": {"gain": 0.0, "delay": 1.0, "phase_offset": 0.0},
    "grid": {"start": 0.0, "stop": 20.0, "points": 2001},
}

_CAVITY = {
    "cavity": {"kappa": 1.0, "detuning": 10.0, "symmetric": True},
    "detector": {"eta": 1.0, "theta_fb": 0.0},
    "filter": {"gain": 0.0, "delay": 1.0, "phase_offset": 0.0},
    "port": "transmission",
    "grid": {"start": 0.0, "stop": 25.0, "points": 2501},
}

_SINGLE_SIDED = {
    "cavity": {"kappa1": 1.0, "kappa2": 0.0, "detuning": 1.0},
    "mechanics": {"omega_m": 1.0, "gamma": 1e-4, "n_th": 131.0, "G": 0.2},
    "detector": {"eta": 1.0, "theta_fb": 0.0},
    "filter": {"gain": 0.0, "delay": 0.1, "phase_offset": 0.0},
    "port": "reflection",
}

_SQUEEZE = {
    "cavity": {"kappa": _WM, "detuning": 0.0, "symmetric": True},
    "mechanics": {"omega_m": _WM, "gamma": "1 kHz", "n_th": 131.0, "G": "5 MHz"},
    "detector": {"eta": 1.0, "theta_fb": 0.0},
    "filter": {"gain": 0.0, "delay": _TAU_FIG10, "phase_offset": 0.0},
    "port": "transmission",
}


def _with(base, **kw):
    out = copy.deepcopy(base)
    out.update(kw)
    return out


PRESETS = {
    "fig2": ("spectrum", _with(_LASER, options={"gains": {"stable_fraction": 0.999, "count": 11}})),
    "fig3": ("spectrum", _with(_LASER, options={
        "gains": {"stable_fraction": 0.999, "count": 11},
        "phis": [0.0, -1.0471975511965976],
    })),
    "fig4": ("cavity", _with(_CAVITY, options={"gains": {"stable_fraction": 0.95, "count": 9}})),
    "fig5": ("cavity", _with(_CAVITY, filter={"gain": 1.0, "delay": 1.0, "phase_offset": 0.0},
                             options={"check_stability": False})),
    "fig6": ("cavity", _with(_CAVITY, options={"gains": {"stable_fraction": 0.95, "count": 9}})),
    "fig7": ("cavity", _with(_CAVITY, cavity={"kappa": 1.0, "detuning": 10.0, "symmetric": True},
                             filter={"gain": 0.0, "delay": 0.01, "phase_offset": 0.0},
                             options={"output": "gain_sweep",
                                      "gains": [-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0]})),
    "fig8": ("cooling", _with(_SINGLE_SIDED, grid={"start": -3.0, "stop": 3.0, "points": 1201},
                              options={"output": "force_spectrum", "mode": "suppression"})),
    "fig9": ("cooling", {
        "cavity": {"kappa1": _WM, "kappa2": 0.0, "detuning": _WM},
        "mechanics": {"omega_m": _WM, "gamma": "1 kHz", "n_th": 131.0, "G": "2 MHz"},
        "detector": {"eta": 1.0, "theta_fb": 0.0},
        "filter": {"gain": 0.0, "delay": _TAU_FIG10, "phase_offset": 0.0},
        "port": "reflection",
        "options": {
            "mode": "suppression",
            "sweep": {
                "detuning": {"start": "1 MHz", "stop": "30 MHz", "points": 15},
                "kappa": {"start": "1 MHz", "stop": "30 MHz", "points": 15},
            },
        },
    }),
    "fig10": ("squeeze", _with(_SQUEEZE, grid={"start": "0.2 MHz", "stop": "30 MHz", "points": 150},
                               options={"sweep": "omega", "omega0": "8 MHz"})),
    "fig11": ("squeeze", _with(_SQUEEZE, options={
        "sweep": "eta", "omega0": "8 MHz", "values": {"start": 0.05, "stop": 1.0, "points": 40}, "reference": 0.7})),
    "fig12": ("squeeze", _with(_SQUEEZE, options={
        "sweep": "G", "omega0": "8 MHz", "values": {"start": "0.5 MHz", "stop": "8 MHz", "points": 40}})),
    "fig13": ("squeeze", _with(_SQUEEZE, options={
        "sweep": "kappa1", "omega0": "8 MHz", "values": {"start": "0.5 MHz", "stop": "9.5 MHz", "points": 40}})),
}


def preset(name):
    """``(command, config mapping)`` for a named preset (a fresh copy)."""
    try:
        cmd, cfg = PRESETS[name]
    except KeyError as exc:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from exc
    return cmd, copy.deepcopy(cfg)
