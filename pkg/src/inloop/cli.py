"""``inloop`` command line: spectra and tables for configured scenarios.

Usage::

    inloop <command> [--config FILE] [--preset figN] [--out FILE] [--format csv|json]

Commands and their ``options``:

``spectrum``
    Laser loop without cavity.  ``gains`` (list, or ``{stable_fraction, count}``
    spanning the stable range) and ``phis`` (in-loop quadrature phases).
``cavity``
    Cavity loop.  ``output: spectra`` (default) gives ``S_i``, the unused
    output ``S_out`` at ``theta_un`` (default ``theta_fb``), loop gain and
    ``chi_eff``; ``output: gain_sweep`` tabulates the effective cavity and
    ``(n_st, m_st)`` against the gain.  ``check_stability`` (default true).
``cooling``
    Mechanics required.  ``mode``: ``generic``, ``suppression``,
    ``antisquash`` or ``sideband``; ``output: rates`` (default) or
    ``force_spectrum``; ``sweep: {kappa: grid, detuning: grid}`` or
    ``gains: [...]`` for tables.
``pulse``
    ``alpha_p`` (default 1), ``horizon`` (time), ``modes`` (subset of
    ``full_dde``, ``effective``, ``closed_form``), ``step``.
``squeeze``
    ``sweep``: ``omega`` (uses ``grid``), ``eta``, ``G`` or ``kappa1`` with
    ``values: {start, stop, points}``; ``omega0`` sets the frequency at
    which the fixed (solid) settings are optimized, ``reference`` the swept
    parameter value used for them.

Exit codes: 0 success, 2 instability, 3 parameter error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
import warnings

import numpy as np

from . import __version__
from .cavity import (
    effective_params,
    effective_susceptibility,
    loop_gain,
    loop_gain_and_stability,
    outofloop_psd,
    photocurrent_psd_cavity,
    require_stable,
    steady_correlations,
)
from .config import ConfigError, OutputTable, ScenarioConfig, load_config, merge_config, parse_rate, parse_time
from .errors import (
    DegenerateConfigurationError,
    EffectiveModelError,
    HeatingError,
    InLoopError,
    InstabilityError,
    MultistabilityError,
    QuadratureError,
    SingularConfigurationError,
)
from .laser import inloop_quadrature_psd, laser_stability, photocurrent_psd
from .optomech import (
    OmLoop,
    force_psd,
    optimize_fixed_loop,
    oscillation_fit,
    phonon_steady,
    pulse_effective_params,
    pulse_response,
    require_om_stable,
    scattering_rates,
    sideband_occupation,
    squeeze_optimal_quadrature,
    squeeze_spectrum,
    suppress_antistokes,
    bare_rates,
)
from .optomech.cooling import _predicted_suppressed
from .presets import PRESETS, preset
from .spectral import CavityParams, chi_c

__all__ = ["main", "run", "COMMANDS", "EXIT_OK", "EXIT_INSTABILITY", "EXIT_PARAMETER", "EXIT_NUMERICAL"]

EXIT_OK = 0
EXIT_INSTABILITY = 2
EXIT_PARAMETER = 3
EXIT_NUMERICAL = 4

_SHOT = "shot noise"
_RATE = "rad/s"


def _grid_values(spec, parse=parse_rate, what="values"):
    if not isinstance(spec, dict):
        raise ConfigError(f"{what} must be a mapping with start, stop, points")
    try:
        return np.linspace(parse(spec["start"], what), parse(spec["stop"], what), int(spec["points"]))
    except KeyError as exc:
        raise ConfigError(f"{what} needs {exc.args[0]}") from exc


def _gain_list(spec, default, window):
    """Explicit gains, or ``count`` gains spanning ``stable_fraction`` of ``window``."""
    if spec is None:
        return [default]
    if isinstance(spec, (list, tuple)):
        return [float(g) for g in spec]
    if isinstance(spec, dict):
        frac = float(spec.get("stable_fraction", 0.95))
        count = int(spec.get("count", 9))
        lo, hi = window
        lo = 0.0 if not np.isfinite(lo) else frac * lo
        hi = 0.0 if not np.isfinite(hi) else frac * hi
        return np.linspace(lo, hi, count).tolist()
    raise ConfigError("gains must be a list or {stable_fraction, count}")


def _label(x):
    return f"{x:.6g}"


# commands -----------------------------------------------------------------
def cmd_spectrum(cfg: ScenarioConfig) -> OutputTable:
    """Laser-loop photocurrent and in-loop quadrature spectra."""
    w = cfg.require_grid()
    loop = cfg.laser_loop
    eta, th = loop.eta, loop.theta_fb
    c = 2.0 * np.sqrt(eta) * abs(np.cos(th))
    bound = np.inf if c == 0 else 1.0 / c
    gains = _gain_list(cfg.options.get("gains"), loop.filter.gain, (-bound, bound))
    phis = [float(p) for p in cfg.options.get("phis", [])]
    cols = [("omega", _RATE, w)]
    for g in gains:
        lp = dataclasses.replace(loop, filter=loop.filter.with_gain(g))
        rep = laser_stability(lp)
        if not rep.stable:
            raise InstabilityError(f"gain {g:g} outside the stable range", window=(-bound, bound))
        cols.append((f"S_i[g={_label(g)}]", _SHOT, photocurrent_psd(w, lp)))
        for phi in phis:
            cols.append((f"S_X[phi={_label(phi)},g={_label(g)}]", _SHOT, inloop_quadrature_psd(w, phi, lp)))
    return OutputTable.from_columns(cols, {"stability_window": [-bound, bound], "gains": gains})


def cmd_cavity(cfg: ScenarioConfig) -> OutputTable:
    """Cavity loop: spectra, loop gain, effective susceptibility or a gain table."""
    cl = cfg.cavity_loop
    opts = cfg.options
    rep = loop_gain_and_stability(cl)
    window = list(rep.window)
    print(f"stability window: {window[0]:.10g} {window[1]:.10g}", file=sys.stderr)
    gains = _gain_list(opts.get("gains"), cl.filter.gain, rep.window)
    check = bool(opts.get("check_stability", True))
    meta = {"stability_window": window, "G_upper": rep.g_upper, "G_lower": rep.g_lower, "gains": gains}
    output = opts.get("output", "spectra")
    if output == "gain_sweep":
        rows = []
        for g in gains:
            c = cl.with_gain(g)
            if check:
                require_stable(c)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                eff = effective_params(c)
            corr = steady_correlations(c, check_stability=False)
            rows.append([g, eff.kappa_eff, eff.delta_eff, eff.kappa_eff_simple, eff.delta_eff_simple,
                         corr.n_st, abs(corr.m_st), corr.n_st - abs(corr.m_st)])
        rows = np.array(rows)
        names = ["gain", "kappa_eff", "delta_eff", "kappa_eff_simple", "delta_eff_simple",
                 "n_st", "abs_m_st", "n_minus_abs_m"]
        units = ["", _RATE, _RATE, _RATE, _RATE, "quanta", "quanta", "quanta"]
        return OutputTable(names, units, rows, meta)
    if output != "spectra":
        raise ConfigError(f"unknown cavity output {output!r}")
    w = cfg.require_grid()
    theta_un = float(opts.get("theta_un", cl.loop.theta_fb))
    cols = [("omega", _RATE, w)]
    s_out_min = np.inf
    for g in gains:
        c = cl.with_gain(g)
        if check:
            require_stable(c)
        s_out = outofloop_psd(w, theta_un, c)
        s_out_min = min(s_out_min, float(np.min(s_out)))
        cols.append((f"S_i[g={_label(g)}]", _SHOT, photocurrent_psd_cavity(w, c)))
        cols.append((f"S_out[g={_label(g)}]", _SHOT, s_out))
    L = loop_gain(w, cl)
    chi = effective_susceptibility(w, cl)
    cols += [
        ("Re_G", "", L.real), ("Im_G", "", L.imag), ("abs_G", "", np.abs(L)),
        ("Re_chi_eff", "1/" + _RATE, chi.real), ("Im_chi_eff", "1/" + _RATE, chi.imag),
        ("Re_chi_c", "1/" + _RATE, chi_c(w, cl.cav).real), ("Im_chi_c", "1/" + _RATE, chi_c(w, cl.cav).imag),
    ]
    ok = bool(s_out_min >= 1.0 - 1e-12)
    meta["out_of_loop_min"] = s_out_min
    meta["out_of_loop_self_check"] = ok
    if not ok:
        warnings.warn(f"out-of-loop spectrum below shot noise ({s_out_min:.15g})", RuntimeWarning, stacklevel=2)
    return OutputTable.from_columns(cols, meta)


def _om(cfg: ScenarioConfig) -> OmLoop:
    if cfg.mechanics is None:
        raise ConfigError("this command needs a 'mechanics' section")
    return OmLoop(cfg.cavity_loop, cfg.mechanics)


def _scaled_cavity(cav: CavityParams, kappa=None, detuning=None):
    """Same mirror ratios with a new total decay rate and/or detuning."""
    s = 1.0 if kappa is None else kappa / cav.kappa
    d = cav.detuning if detuning is None else detuning
    return CavityParams(cav.kappa1 * s, cav.kappa2 * s, cav.kappa_loss * s, d)


def _cooling_point(om: OmLoop, mode):
    """One row: gain, theta_fb, phase_offset, A+, A-, Gamma, n_o, n_m, n_sc, stable."""
    cl = om.cl
    n_sc = sideband_occupation(om)
    if mode == "suppression":
        n_m = phonon_steady(om, "suppression_optimal")
        try:
            res = suppress_antistokes(om)
            r, stable = res.rates, 1.0
            gain, th, ph = res.gain, res.theta_fb, res.phase_offset
        except InstabilityError:
            r, stable = _predicted_suppressed(om), 0.0
            gain = th = ph = np.nan
        return [gain, th, ph, r.A_plus, r.A_minus, r.Gamma, r.n_o, n_m, n_sc, stable]
    if mode == "antisquash":
        r = bare_rates(om)
        n_m = phonon_steady(om, "antisquash")
        return [cl.filter.gain, cl.loop.theta_fb, cl.filter.phase_offset,
                r.A_plus, r.A_minus, r.Gamma, r.n_o, n_m, n_sc, 1.0]
    if mode == "sideband":
        r = bare_rates(om)
        return [0.0, cl.loop.theta_fb, 0.0, r.A_plus, r.A_minus, r.Gamma, r.n_o, n_sc, n_sc, 1.0]
    if mode != "generic":
        raise ConfigError(f"unknown cooling mode {mode!r}")
    require_stable(cl)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        r = scattering_rates(om)
    n_m = phonon_steady(om, "generic")
    return [cl.filter.gain, cl.loop.theta_fb, cl.filter.phase_offset,
            r.A_plus, r.A_minus, r.Gamma, r.n_o, n_m, n_sc, 1.0]


def cmd_cooling(cfg: ScenarioConfig) -> OutputTable:
    """Scattering rates and phonon numbers, or the force-noise spectrum."""
    om = _om(cfg)
    opts = cfg.options
    mode = opts.get("mode", "generic")
    output = opts.get("output", "rates")
    if output == "force_spectrum":
        w = cfg.require_grid()
        meta = {"mode": mode}
        if mode == "suppression":
            res = suppress_antistokes(om)
            om = res.om
            meta.update(gain=res.gain, theta_fb=res.theta_fb, phase_offset=res.phase_offset,
                        window=list(res.window))
        elif mode != "generic":
            raise ConfigError("force_spectrum supports mode generic or suppression")
        bare = om.with_cl(om.cl.with_gain(0.0))
        r = scattering_rates(om)
        meta.update(A_plus=r.A_plus, A_minus=r.A_minus)
        return OutputTable.from_columns([
            ("omega", _RATE, w),
            ("S_F", "1/" + _RATE, force_psd(w, om.cl)),
            ("S_F_no_feedback", "1/" + _RATE, force_psd(w, bare.cl)),
        ], meta)
    if output != "rates":
        raise ConfigError(f"unknown cooling output {output!r}")
    names = ["kappa", "detuning", "gain", "theta_fb", "phase_offset", "A_plus", "A_minus",
             "Gamma", "n_o", "n_m", "n_m_sideband", "stable"]
    units = [_RATE, _RATE, "", "rad", "rad", _RATE, _RATE, _RATE, "quanta", "quanta", "quanta", ""]
    points = []
    sweep = opts.get("sweep")
    if sweep is not None:
        if not isinstance(sweep, dict) or not set(sweep) <= {"kappa", "detuning"}:
            raise ConfigError("cooling sweep takes 'kappa' and/or 'detuning' grids")
        kappas = _grid_values(sweep["kappa"], what="sweep.kappa") if "kappa" in sweep else [om.cav.kappa]
        detunings = (_grid_values(sweep["detuning"], what="sweep.detuning")
                     if "detuning" in sweep else [om.cav.detuning])
        for k in kappas:
            for d in detunings:
                cav = _scaled_cavity(om.cav, k, d)
                points.append(om.with_cl(dataclasses.replace(om.cl, cav=cav)))
    elif "gains" in opts:
        points = [om.with_cl(om.cl.with_gain(float(g))) for g in opts["gains"]]
    else:
        points = [om]
    rows, failed = [], 0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        for p in points:
            head = [p.cav.kappa, p.cav.detuning]
            if len(points) == 1:
                rows.append(head + _cooling_point(p, mode))
                continue
            try:
                rows.append(head + _cooling_point(p, mode))
            except InLoopError:
                failed += 1
                rows.append(head + [np.nan] * 10)
    meta = {"mode": mode, "failed_points": failed, "warnings": sorted({str(w.message) for w in caught})}
    return OutputTable(names, units, np.array(rows), meta)


def cmd_pulse(cfg: ScenarioConfig) -> OutputTable:
    """Slowly varying cavity and mechanical amplitudes after a short pulse."""
    om = _om(cfg)
    opts = cfg.options
    alpha_p = complex(opts.get("alpha_p", 1.0))
    if "horizon" not in opts:
        raise ConfigError("pulse needs options.horizon")
    horizon = parse_time(opts["horizon"], "horizon")
    step = parse_time(opts["step"], "step") if "step" in opts else None
    modes = opts.get("modes", ["full_dde", "effective", "closed_form"])
    cols, meta, t0 = [], {}, None
    k_eff, d_eff = pulse_effective_params(om)
    meta.update(kappa_eff=k_eff, delta_eff=d_eff)
    for m in modes:
        tr = pulse_response(om, alpha_p, horizon, m, step)
        if t0 is None:
            t0 = tr.times
            cols.append(("t", "s", t0))
        elif tr.times.size != t0.size or not np.allclose(tr.times, t0):
            raise RuntimeError("time grids of the pulse modes differ")
        cols.append((f"abs_alpha_{m}", "", np.abs(tr.alpha_bar)))
        cols.append((f"abs_beta_{m}", "", np.abs(tr.beta_bar)))
        if np.any(tr.beta_bar != 0):
            try:
                W, r = oscillation_fit(tr)
                meta[f"fit_{m}"] = {"frequency": W, "envelope_rate": r}
            except RuntimeError:
                meta[f"fit_{m}"] = None
    return OutputTable.from_columns(cols, meta)


def _with_param(om: OmLoop, name, value):
    cl, cav = om.cl, om.cav
    if name == "eta":
        det = dataclasses.replace(cl.loop.detector, eta=float(value))
        return om.with_cl(dataclasses.replace(cl, loop=dataclasses.replace(cl.loop, detector=det)))
    if name == "G":
        return om.with_coupling(float(value))
    if name == "kappa1":
        k2 = cav.kappa - cav.kappa_loss - value
        if value <= 0 or k2 <= 0:
            raise ConfigError("kappa1 must lie strictly between 0 and kappa - kappa_loss")
        return om.with_cl(dataclasses.replace(cl, cav=CavityParams(value, k2, cav.kappa_loss, cav.detuning)))
    raise ConfigError(f"unknown squeeze sweep {name!r}")


def cmd_squeeze(cfg: ScenarioConfig) -> OutputTable:
    """Unused-output spectrum with fixed (solid) and per-point (dashed) optimization."""
    om = _om(cfg)
    opts = cfg.options
    sweep = opts.get("sweep", "omega")
    wm = om.mech.omega_m
    if sweep == "omega":
        xs = cfg.require_grid()
        if "omega0" in opts:
            omega0 = parse_rate(opts["omega0"], "omega0")
        else:
            dashed = squeeze_optimal_quadrature(xs, om)
            omega0 = float(xs[int(np.argmin(dashed.psd))])
        ref_om = om
    else:
        xs = _grid_values(opts.get("values"), parse=(lambda v, w: float(v)) if sweep == "eta" else parse_rate,
                          what="values")
        omega0 = parse_rate(opts.get("omega0", wm), "omega0")
        ref_om = _with_param(om, sweep, parse_rate(opts["reference"], "reference")) if "reference" in opts else om
    fx = optimize_fixed_loop(omega0, ref_om)
    fixed, th_un = fx.om, fx.theta_un

    def fixed_at(x):
        return fixed if sweep == "omega" else _with_param(fixed, sweep, x)

    def opt_at(x):
        return om if sweep == "omega" else _with_param(om, sweep, x)

    if sweep == "omega":
        sol = squeeze_spectrum(xs, th_un, fixed, "none")
        das = squeeze_optimal_quadrature(xs, om)
        cols = [sol.psd, sol.baseline_psd, sol.single_sided_psd, das.psd, das.baseline_psd, das.single_sided_psd]
    else:
        cols = [[] for _ in range(6)]
        for x in xs:
            f = fixed_at(x)
            try:
                require_om_stable(f)
                s = squeeze_spectrum([omega0], th_un, f, "none")
                vals = [s.psd[0], s.baseline_psd[0], s.single_sided_psd[0]]
            except InstabilityError:
                vals = [np.nan] * 3
            d = squeeze_optimal_quadrature([omega0], opt_at(x))
            vals += [d.psd[0], d.baseline_psd[0], d.single_sided_psd[0]]
            for c, v in zip(cols, vals):
                c.append(v)
    xunit = {"omega": _RATE, "eta": "", "G": _RATE, "kappa1": _RATE}[sweep]
    names = ["S_fixed", "S_fixed_no_feedback", "S_fixed_single_sided",
             "S_opt", "S_opt_no_feedback", "S_opt_single_sided"]
    data = [(sweep, xunit, xs)] + [(n, _SHOT, c) for n, c in zip(names, cols)]
    flt = fixed.cl.filter
    meta = {
        "omega0": omega0, "theta_un": th_un, "theta_fb": fixed.cl.loop.theta_fb,
        "gain": flt.gain, "phase_offset": flt.phase_offset, "S_at_omega0": fx.psd0,
        "stability_constrained": fx.constrained,
    }
    return OutputTable.from_columns(data, meta)


COMMANDS = {
    "spectrum": cmd_spectrum,
    "cavity": cmd_cavity,
    "cooling": cmd_cooling,
    "pulse": cmd_pulse,
    "squeeze": cmd_squeeze,
}


def run(command, config: dict) -> OutputTable:
    """Validate ``config`` and run ``command``; metadata gains hash and version."""
    cfg = ScenarioConfig.from_dict(config)
    table = COMMANDS[command](cfg)
    table.metadata = {"command": command, "config_hash": cfg.hash(), "version": __version__, **table.metadata}
    return table


def _exit_code(exc):
    if isinstance(exc, (InstabilityError, HeatingError)):
        return EXIT_INSTABILITY
    if isinstance(exc, (QuadratureError, EffectiveModelError, np.linalg.LinAlgError, FloatingPointError)):
        return EXIT_NUMERICAL
    if isinstance(exc, (ConfigError, DegenerateConfigurationError, SingularConfigurationError,
                        MultistabilityError, ValueError, TypeError, KeyError, OSError)):
        return EXIT_PARAMETER
    return EXIT_NUMERICAL


def _parser():
    p = argparse.ArgumentParser(prog="inloop", description="Feedback-controlled light: spectra and tables.")
    p.add_argument("--version", action="version", version=f"inloop {__version__}")
    p.add_argument("command", choices=sorted(COMMANDS) + ["presets"])
    p.add_argument("--config", help="YAML/JSON scenario file (merged over the preset, if any)")
    p.add_argument("--preset", choices=sorted(PRESETS, key=lambda s: int(s[3:])), help="figure preset")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "presets":
        for name, (cmd, _) in PRESETS.items():
            print(f"{name}\t{cmd}")
        return EXIT_OK
    try:
        config = {}
        if args.preset:
            cmd, config = preset(args.preset)
            if cmd != args.command:
                raise ConfigError(f"preset {args.preset} is for the '{cmd}' command")
        if args.config:
            config = merge_config(config, load_config(args.config))
        if not config:
            raise ConfigError("give --config and/or --preset")
        table = run(args.command, config)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes
        code = _exit_code(exc)
        msg = f"inloop: error: {exc}"
        window = getattr(exc, "window", None)
        if window is not None:
            msg += f"\nstability window: {window[0]:.10g} {window[1]:.10g}"
        print(msg, file=sys.stderr)
        return code
    text = table.to_json() if args.format == "json" else table.to_csv()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
