"""Numerical machinery: quadrature, root bracketing, delayed ODEs, tuning.

The quadrature is a vectorised adaptive Gauss-Kronrod (7/15) rule: all
nodes of all active subintervals are evaluated in one call, which keeps the
many spectral integrals cheap.  Infinite ranges are compactified with
``omega = center + scale * tan(pi u / 2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .errors import QuadratureError, StepSizeError

__all__ = [
    "QuadratureSpec",
    "DDESpec",
    "OptimizerSpec",
    "integrate_line",
    "find_roots_bracketed",
    "integrate_dde",
    "minimize",
]

# Gauss-Kronrod 7/15 nodes and weights (QUADPACK qk15)
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])  # 15 nodes, ascending
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(15)
_GW[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and budget for :func:`integrate_line`."""

    abs_tol: float = 1e-9
    rel_tol: float = 1e-10
    max_subdivisions: int = 100000
    compactification: str = "tangent_map"
    truncate_at: float | None = None

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.compactification not in ("tangent_map", "truncate_at"):
            raise ValueError(f"unknown compactification {self.compactification!r}")
        if self.compactification == "truncate_at" and not self.truncate_at:
            raise ValueError("truncate_at compactification needs a cut-off")


@dataclass(frozen=True)
class DDESpec:
    """Fixed-step settings for :func:`integrate_dde`."""

    step: float
    horizon: float
    delay: float = 0.0
    interpolation: str = "cubic"

    def __post_init__(self):
        if self.step <= 0 or self.horizon <= 0:
            raise ValueError("step and horizon must be positive")
        if self.delay < 0:
            raise ValueError("delay must be non-negative")
        if self.delay > 0 and self.step > self.delay / 10 * (1 + 1e-12):
            raise StepSizeError(
                f"step {self.step:g} exceeds delay/10 = {self.delay / 10:g}"
            )
        if self.interpolation != "cubic":
            raise ValueError("only cubic interpolation is supported")


@dataclass(frozen=True)
class OptimizerSpec:
    """Grid search followed by coordinate-wise line searches."""

    grid_points: int = 16
    refinement: str = "coordinate_descent"
    iters: int = 60
    tol: float = 1e-12

    def __post_init__(self):
        if self.grid_points < 8:
            raise ValueError("grid_points must be at least 8")
        if self.refinement not in ("golden_section", "coordinate_descent"):
            raise ValueError(f"unknown refinement {self.refinement!r}")


def _gk15(f, a, b):
    """Kronrod and Gauss estimates on each interval ``[a_i, b_i]``."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = (mid[:, None] + half[:, None] * _NODES[None, :]).ravel()
    fx = np.asarray(f(x))
    fx = fx.reshape(fx.shape[:-1] + (a.size, 15))
    k = (fx * _KW).sum(axis=-1) * half
    g = (fx * _GW).sum(axis=-1) * half
    return k, g


def _adaptive(f, edges, abs_tol, rel_tol, budget):
    a = np.asarray(edges[:-1], dtype=float)
    b = np.asarray(edges[1:], dtype=float)
    k, g = _gk15(f, a, b)
    while True:
        err_i = np.abs(k - g)
        if err_i.ndim > 1:
            err_i = err_i.max(axis=0)
        total = k.sum(axis=-1)
        err = float(err_i.sum())
        target = max(abs_tol, rel_tol * float(np.max(np.abs(total))))
        if err <= target:
            return total, err
        span = b - a
        flag = err_i > target * span / span.sum()
        if a.size + flag.sum() > budget:
            raise QuadratureError(
                f"subdivision budget ({budget}) exhausted; achieved error {err:.3g}",
                value=total,
                achieved=err,
            )
        mid = 0.5 * (a[flag] + b[flag])
        na = np.concatenate([a[flag], mid])
        nb = np.concatenate([mid, b[flag]])
        nk, ng = _gk15(f, na, nb)
        keep = ~flag
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        k = np.concatenate([k[..., keep], nk], axis=-1)
        g = np.concatenate([g[..., keep], ng], axis=-1)


def integrate_line(
    f: Callable,
    spec: QuadratureSpec = QuadratureSpec(),
    center: float = 0.0,
    scale: float = 1.0,
    breakpoints: Sequence[float] = (),
    initial_panels: int = 16,
):
    """Integrate ``f`` over the whole real line.

    ``f`` must accept a 1-D array of frequencies and return an array whose
    last axis matches it (several integrands can share one call, e.g. shape
    ``(2, n)``).  ``center`` and ``scale`` set the tangent map and should
    roughly match the location and width of the integrand's features;
    ``breakpoints`` are frequencies where the integrand is sharp.

    Returns
    -------
    value : float, complex or ndarray
    achieved_error : float
        Sum of the per-panel Gauss/Kronrod differences.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    if spec.compactification == "truncate_at":
        lim = float(spec.truncate_at)
        edges = np.linspace(-lim, lim, initial_panels + 1)
        inner = [p for p in breakpoints if -lim < p < lim]
        edges = np.unique(np.concatenate([edges, inner]))
        return _adaptive(f, edges, spec.abs_tol, spec.rel_tol, spec.max_subdivisions)

    half_pi = 0.5 * np.pi

    def mapped(u):
        w = center + scale * np.tan(half_pi * u)
        jac = scale * half_pi / np.cos(half_pi * u) ** 2
        return np.asarray(f(w)) * jac

    edges = np.linspace(-1.0, 1.0, initial_panels + 1)
    inner = [np.arctan((p - center) / scale) / half_pi for p in breakpoints]
    edges = np.unique(np.concatenate([edges, np.clip(inner, -1, 1)]))
    return _adaptive(mapped, edges, spec.abs_tol, spec.rel_tol, spec.max_subdivisions)


def find_roots_bracketed(f: Callable, lo: float, hi: float, grid: int = 2048, rtol: float = 1e-10):
    """All roots of a continuous real ``f`` on ``[lo, hi]`` seen at grid resolution.

    Sign changes between neighbouring grid points are refined with Brent's
    method; exact zeros on the grid are kept as they are.  Roots are sorted
    and de-duplicated.
    """
    x = np.linspace(lo, hi, grid)
    y = np.asarray(f(x), dtype=float)
    scale = max(abs(lo), abs(hi), hi - lo)
    roots = list(x[y == 0.0])
    s = np.sign(y)
    idx = np.nonzero(s[:-1] * s[1:] < 0)[0]

    def scalar(t):
        return float(np.asarray(f(np.array([t])), dtype=float)[0])

    for i in idx:
        a, b = x[i], x[i + 1]
        xtol = rtol * max(abs(a), abs(b), 1e-300) if a * b > 0 else rtol * scale
        roots.append(optimize.brentq(scalar, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps))
    roots = np.sort(np.asarray(roots, dtype=float))
    if roots.size > 1:
        tol = 2 * rtol * np.maximum(np.abs(roots[1:]), scale * 1e-6)
        roots = roots[np.concatenate([[True], np.diff(roots) > tol])]
    return roots


def integrate_dde(rhs: Callable, y0, spec: DDESpec, history=None, output=None, impulses=None):
    """Classical RK4 for ``y' = rhs(t, y, lag)`` with one delayed signal.

    ``output(t, y, lag)`` defines the signal that is stored on the grid and
    returned by ``lag(s)`` for past times ``s`` (default: the state itself).
    For ``s < 0`` ``lag`` returns ``history(s)`` (default: zero).  The
    signal is reconstructed between grid points with four-point Lagrange
    (cubic) interpolation.  Because ``step <= delay / 10`` every lookup at a
    stage time falls strictly inside the stored past.  ``impulses`` maps a
    grid index ``k`` to a jump added to the state at ``t_k`` (delta forcing).

    Returns
    -------
    t : ndarray, shape (n+1,)
    y : ndarray, shape (n+1, dim)
    signal : ndarray, shape (n+1, ...)
    """
    h = spec.step
    n = int(round(spec.horizon / h))
    y = np.atleast_1d(np.asarray(y0, dtype=complex)).copy()
    ts = np.arange(n + 1) * h
    ys = np.empty((n + 1,) + y.shape, dtype=complex)
    if output is None:
        def output(t, state, lag):
            return state

    zero = None
    sig = []

    def lag(s):
        if s < 0:
            if history is None:
                return zero
            return history(s)
        known = len(sig)
        j = int(s // h)
        j0 = min(max(j - 1, 0), known - 4)
        if j0 < 0:
            # not enough points yet; linear interpolation on what exists
            j = min(j, known - 2)
            w = s / h - j
            return (1 - w) * sig[j] + w * sig[j + 1] if known > 1 else sig[0]
        x = s / h - j0
        # Lagrange basis on nodes 0, 1, 2, 3
        l0 = -(x - 1) * (x - 2) * (x - 3) / 6
        l1 = x * (x - 2) * (x - 3) / 2
        l2 = -x * (x - 1) * (x - 3) / 2
        l3 = x * (x - 1) * (x - 2) / 6
        return l0 * sig[j0] + l1 * sig[j0 + 1] + l2 * sig[j0 + 2] + l3 * sig[j0 + 3]

    first = output(0.0, y, lag)
    zero = np.zeros_like(np.asarray(first, dtype=complex))
    sig.append(np.asarray(first, dtype=complex))
    ys[0] = y
    for k in range(n):
        t = ts[k]
        k1 = rhs(t, y, lag)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1, lag)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2, lag)
        k4 = rhs(t + h, y + h * k3, lag)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if impulses and (k + 1) in impulses:
            y = y + impulses[k + 1]
        ys[k + 1] = y
        sig.append(np.asarray(output(ts[k + 1], y, lag), dtype=complex))
    return ts, ys, np.asarray(sig)


def _golden(fun, a, b, tol, maxiter=200):
    invphi = (math.sqrt(5) - 1) / 2
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(maxiter):
        if abs(b - a) <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return (c, fc) if fc < fd else (d, fd)


def minimize(f: Callable, bounds: Sequence[tuple], spec: OptimizerSpec = OptimizerSpec()):
    """Deterministic box-constrained minimisation of a scalar function.

    A regular grid with ``spec.grid_points`` nodes per dimension seeds the
    search; the best node is then refined by cyclic line searches (golden
    section or Brent) in a bracket of one grid cell that widens when the
    optimum sits on its edge.  The returned value never exceeds the grid
    minimum.
    """
    bounds = [(float(lo), float(hi)) for lo, hi in bounds]
    dim = len(bounds)
    axes = [np.linspace(lo, hi, spec.grid_points) for lo, hi in bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    vals = np.array([f(p) for p in pts], dtype=float)
    best = int(np.argmin(vals))
    x = pts[best].copy()
    fx = float(vals[best])
    cell = np.array([(hi - lo) / (spec.grid_points - 1) for lo, hi in bounds])
    width = cell.copy()

    for _ in range(spec.iters):
        f_start = fx
        for i in range(dim):
            lo = max(bounds[i][0], x[i] - width[i])
            hi = min(bounds[i][1], x[i] + width[i])
            if hi <= lo:
                continue

            def line(t, i=i):
                z = x.copy()
                z[i] = t
                return float(f(z))

            if spec.refinement == "golden_section":
                t, ft = _golden(line, lo, hi, tol=1e-12 * max(1.0, abs(hi)))
            else:
                res = optimize.minimize_scalar(
                    line, bounds=(lo, hi), method="bounded",
                    options={"xatol": 1e-12 * max(1.0, abs(x[i]))},
                )
                t, ft = float(res.x), float(res.fun)
            if ft < fx:
                at_edge = min(t - lo, hi - t) < 1e-3 * (hi - lo)
                x[i], fx = t, ft
                width[i] = width[i] * 2 if at_edge else max(width[i] * 0.5, 1e-9 * cell[i])
            else:
                width[i] = max(width[i] * 0.5, 1e-9 * cell[i])
        if f_start - fx <= spec.tol * max(1.0, abs(fx)) and np.all(width <= 1e-6 * cell):
            break
    return x, fx
