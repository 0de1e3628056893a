"""Scenario configuration files and tabular output for the command line.

Schema (version 1)
------------------
A YAML (or JSON) mapping with the keys below; unknown keys are rejected.

``version``
    Schema version, must be 1.
``cavity``
    ``kappa1``, ``kappa2``, ``kappa_loss`` (default 0), ``detuning``
    (default 0); alternatively ``kappa`` together with ``symmetric: true``.
``mechanics`` (optional)
    ``omega_m``, ``gamma``, ``n_th`` (default 0), ``G`` (default 0).
``detector``
    ``eta`` (default 1), ``theta_fb`` (default 0, radians).
``filter``
    Flat filter ``gain`` (default 0), ``delay`` (default 0),
    ``phase_offset`` (default 0, radians).
``port``
    ``transmission`` (default) or ``reflection``.
``grid``
    ``start``, ``stop``, ``points``: the angular-frequency (or time) grid.
``options``
    Command-specific settings, see :mod:`inloop.cli`.

Units: angles are radians.  Rates and frequencies are plain numbers in
rad/s (or any consistent unit) or strings with a unit suffix ``Hz``,
``kHz``, ``MHz`` or ``GHz``, converted with ``omega = 2 pi f``.  Times are
plain numbers or strings with ``s``, ``ms``, ``us`` or ``ns``.
"""
from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import math
import re
from dataclasses import dataclass, field

import numpy as np
import yaml

from .cavity import CavityLoop, FeedbackPort
from .laser import DetectorParams, LaserLoop
from .spectral import CavityParams, FlatFilter, MechanicalParams

__all__ = [
    "SCHEMA_VERSION",
    "ConfigError",
    "ScenarioConfig",
    "OutputTable",
    "parse_rate",
    "parse_time",
    "load_config",
    "merge_config",
]

SCHEMA_VERSION = 1

_RATE_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
_TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9}
_QUANTITY = re.compile(r"^\s*([-+0-9.eE]+)\s*([A-Za-z]+)?\s*$")

_SECTIONS = {
    "version": None,
    "cavity": {"kappa1", "kappa2", "kappa_loss", "detuning", "kappa", "symmetric"},
    "mechanics": {"omega_m", "gamma", "n_th", "G"},
    "detector": {"eta", "theta_fb"},
    "filter": {"gain", "delay", "phase_offset"},
    "port": None,
    "grid": {"start", "stop", "points"},
    "options": None,
}


class ConfigError(ValueError):
    """Invalid configuration file or value."""


def _quantity(value, units, what):
    if isinstance(value, bool):
        raise ConfigError(f"{what}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{what}: expected a number or a string with a unit, got {value!r}")
    m = _QUANTITY.match(value)
    if not m:
        raise ConfigError(f"{what}: cannot parse {value!r}")
    try:
        number = float(m.group(1))
    except ValueError as exc:
        raise ConfigError(f"{what}: cannot parse {value!r}") from exc
    unit = m.group(2)
    if unit is None:
        return number
    scale = units.get(unit.lower())
    if scale is None:
        raise ConfigError(f"{what}: unknown unit {unit!r}; allowed {sorted(units)}")
    return number * scale


def parse_rate(value, what="rate"):
    """Number, or string with a Hz-type suffix converted to rad/s (factor 2 pi)."""
    number = _quantity(value, _RATE_UNITS, what)
    if isinstance(value, str) and _QUANTITY.match(value).group(2):
        number *= 2.0 * math.pi
    return number


def parse_time(value, what="time"):
    return _quantity(value, _TIME_UNITS, what)


def merge_config(base, override):
    """Recursive dict merge; ``override`` wins."""
    out = copy.deepcopy(base)
    for key, val in (override or {}).items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = merge_config(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario.  ``raw`` keeps the parsed mapping for hashing."""

    cavity: CavityParams
    detector: DetectorParams
    filter: FlatFilter
    port: FeedbackPort
    mechanics: MechanicalParams | None
    grid: np.ndarray | None
    options: dict
    raw: dict = field(repr=False)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a mapping")
        for key, allowed in _SECTIONS.items():
            if key in data and allowed is not None and not isinstance(data[key], dict):
                raise ConfigError(f"section {key!r} must be a mapping")
        unknown = set(data) - set(_SECTIONS)
        if unknown:
            raise ConfigError(f"unknown keys: {sorted(unknown)}")
        for key, allowed in _SECTIONS.items():
            if allowed is None or key not in data:
                continue
            bad = set(data[key]) - allowed
            if bad:
                raise ConfigError(f"unknown keys in {key!r}: {sorted(bad)}")
        version = data.get("version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema version {version!r} (expected {SCHEMA_VERSION})")
        try:
            cav = _cavity(data.get("cavity"))
            det = DetectorParams(float(data.get("detector", {}).get("eta", 1.0)),
                                 float(data.get("detector", {}).get("theta_fb", 0.0)))
            f = data.get("filter", {})
            flt = FlatFilter(float(f.get("gain", 0.0)), parse_time(f.get("delay", 0.0), "filter.delay"),
                             float(f.get("phase_offset", 0.0)))
            port = FeedbackPort(data.get("port", "transmission"))
            mech = _mechanics(data.get("mechanics"))
            grid = _grid(data.get("grid"))
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        options = data.get("options", {}) or {}
        if not isinstance(options, dict):
            raise ConfigError("section 'options' must be a mapping")
        return cls(cav, det, flt, port, mech, grid, dict(options), copy.deepcopy(data))

    @property
    def cavity_loop(self) -> CavityLoop:
        return CavityLoop(self.cavity, LaserLoop(self.filter, self.detector), self.port)

    @property
    def laser_loop(self) -> LaserLoop:
        return LaserLoop(self.filter, self.detector)

    def require_grid(self):
        if self.grid is None:
            raise ConfigError("this command needs a 'grid' section")
        return self.grid

    def hash(self):
        text = json.dumps(self.raw, sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _cavity(d):
    if d is None:
        raise ConfigError("missing 'cavity' section")
    detuning = parse_rate(d.get("detuning", 0.0), "cavity.detuning")
    loss = parse_rate(d.get("kappa_loss", 0.0), "cavity.kappa_loss")
    if d.get("symmetric", False):
        if "kappa" not in d or "kappa1" in d or "kappa2" in d:
            raise ConfigError("a symmetric cavity takes 'kappa' (and no kappa1/kappa2)")
        return CavityParams.symmetric(parse_rate(d["kappa"], "cavity.kappa"), detuning, loss)
    if "kappa" in d:
        raise ConfigError("'kappa' needs 'symmetric: true'; otherwise give kappa1 and kappa2")
    try:
        k1 = parse_rate(d["kappa1"], "cavity.kappa1")
        k2 = parse_rate(d["kappa2"], "cavity.kappa2")
    except KeyError as exc:
        raise ConfigError(f"cavity needs {exc.args[0]}") from exc
    return CavityParams(k1, k2, loss, detuning)


def _mechanics(d):
    if d is None:
        return None
    try:
        return MechanicalParams(
            parse_rate(d["omega_m"], "mechanics.omega_m"),
            parse_rate(d["gamma"], "mechanics.gamma"),
            float(d.get("n_th", 0.0)),
            parse_rate(d.get("G", 0.0), "mechanics.G"),
        )
    except KeyError as exc:
        raise ConfigError(f"mechanics needs {exc.args[0]}") from exc


def _grid(d):
    if d is None:
        return None
    try:
        start = parse_rate(d["start"], "grid.start")
        stop = parse_rate(d["stop"], "grid.stop")
        points = int(d["points"])
    except KeyError as exc:
        raise ConfigError(f"grid needs {exc.args[0]}") from exc
    if points < 1:
        raise ConfigError("grid.points must be positive")
    return np.linspace(start, stop, points)


def load_config(path):
    """Parse a YAML or JSON file into a mapping (not yet validated)."""
    with open(path, encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return {} if data is None else data


@dataclass
class OutputTable:
    """Named columns with units, rows of reals and run metadata."""

    columns: list
    units: list
    rows: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        if len(self.columns) != len(self.units):
            raise ValueError("columns and units differ in length")
        if self.rows.size and self.rows.shape[1] != len(self.columns):
            raise ValueError(f"rows have {self.rows.shape[1]} entries, expected {len(self.columns)}")

    @classmethod
    def from_columns(cls, data, metadata=None):
        """Build from ``[(name, unit, values), ...]`` of equal length."""
        names = [d[0] for d in data]
        units = [d[1] for d in data]
        cols = [np.asarray(d[2], dtype=float).ravel() for d in data]
        if len({c.size for c in cols}) > 1:
            raise ValueError("columns have different lengths")
        return cls(names, units, np.column_stack(cols), dict(metadata or {}))

    def column(self, name):
        return self.rows[:, self.columns.index(name)]

    def to_csv(self):
        buf = io.StringIO()
        for key, val in _finite(self.metadata).items():
            buf.write(f"# {key}: {json.dumps(val, default=_json_default, allow_nan=False)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"{c} [{u}]" if u else c for c, u in zip(self.columns, self.units)])
        for row in self.rows:
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    def to_json(self):
        doc = {
            "columns": self.columns,
            "units": self.units,
            "rows": [[_json_float(x) for x in row] for row in self.rows],
            "metadata": _finite(self.metadata),
        }
        return json.dumps(doc, indent=1, default=_json_default, allow_nan=False)

    @classmethod
    def from_csv(cls, text):
        meta, lines = {}, []
        for line in text.splitlines():
            if line.startswith("# "):
                key, _, val = line[2:].partition(": ")
                meta[key] = json.loads(val)
            elif line:
                lines.append(line)
        reader = csv.reader(lines)
        header = next(reader)
        names, units = [], []
        for h in header:
            m = re.match(r"^(.*) \[(.*)\]$", h)
            names.append(m.group(1) if m else h)
            units.append(m.group(2) if m else "")
        rows = [[float(x) for x in r] for r in reader]
        return cls(names, units, np.array(rows, dtype=float).reshape(-1, len(names)), meta)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        rows = [[float("nan") if x is None else x for x in r] for r in doc["rows"]]
        return cls(doc["columns"], doc["units"],
                   np.array(rows, dtype=float).reshape(-1, len(doc["columns"])), doc["metadata"])


def _json_float(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _finite(obj):
    """Metadata with non-finite floats replaced by None (strict JSON)."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _finite(obj.tolist())
    if isinstance(obj, complex):
        return [_finite(obj.real), _finite(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        return _json_float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not serialisable: {type(obj).__name__}")
