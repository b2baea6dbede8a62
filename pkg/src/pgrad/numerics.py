"""Numerical kernels: quadrature, ODE stepping, root finding, log-log fits.

Quadrature is a hand-written adaptive Gauss-Kronrod (7/15) scheme so that the
error contract, the endpoint substitution and the determinism guarantees are
explicit.  ODE stepping and bracketing root finding delegate to scipy.
"""

from __future__ import annotations

import heapq
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.optimize

from .errors import (InsufficientSamples, NoBracket, NonConvergence, NonFinite,
                     SignChange, StepUnderflow)

_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
# 15 nodes on [-1, 1] ordered left to right, with matching weights.
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS_W = np.zeros(15)
_GAUSS_W[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG, _WG[-2::-1]])

_ROUNDOFF = 50.0 * np.finfo(float).eps


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances for :func:`integrate`.

    ``endpoint_exponent_hint`` h declares f(s) ~ |s - e|^h at the endpoint e
    named by ``hint_at`` ("a" or "b").
    """

    abs_tol: float = 1e-14
    rel_tol: float = 1e-12
    max_subdivisions: int = 2000
    endpoint_exponent_hint: float | None = None
    hint_at: str = "a"

    def __post_init__(self) -> None:
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be at least 1")
        if self.endpoint_exponent_hint is not None and self.endpoint_exponent_hint <= -1:
            raise ValueError("endpoint exponent hint must exceed -1")
        if self.hint_at not in ("a", "b"):
            raise ValueError("hint_at must be 'a' or 'b'")


@dataclass(frozen=True)
class OdeSpec:
    abs_tol: float = 1e-13
    rel_tol: float = 1e-12
    min_step: float = 1e-14
    max_step: float = math.inf
    blowup: float = 1e12

    def __post_init__(self) -> None:
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("ODE tolerances must be positive")
        if not 0 < self.min_step <= self.max_step:
            raise ValueError("need 0 < min_step <= max_step")


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float
    window: tuple[float, float]
    n_samples: int = 0


@dataclass(frozen=True)
class RootResult:
    root: float
    residual: float
    width: float


@dataclass
class Trajectory:
    """Accepted steps of an ODE solve plus dense output."""

    t: np.ndarray
    y: np.ndarray
    dense: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    n_steps: int = 0

    def __call__(self, t) -> np.ndarray:
        return self.dense(t)


def _gk15(f: Callable, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Kronrod value, error estimate and integral of |f| on each [lo_i, hi_i]."""
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    x = center[:, None] + half[:, None] * _NODES[None, :]
    fx = np.asarray(f(x), dtype=float)
    if fx.shape != x.shape:
        fx = np.broadcast_to(fx, x.shape)
    if not np.all(np.isfinite(fx)):
        raise NonFinite("integrand is not finite at an interior node")
    kronrod = half * (fx @ _KRONROD_W)
    gauss = half * (fx @ _GAUSS_W)
    scale = np.abs(half) * (np.abs(fx) @ _KRONROD_W)
    err = np.maximum(np.abs(kronrod - gauss), _ROUNDOFF * scale)
    return kronrod, err, scale


def _transform(f: Callable, a: float, b: float, spec: QuadratureSpec):
    """Map the integral to a finite interval with a smooth integrand."""
    if math.isinf(b):
        # Finite piece [a, pivot] plus a tail mapped by s = pivot * exp(t/(1-t)),
        # which turns algebraic decay into super-exponential decay at t = 1.
        pivot = max(a, 0.0) + 1.0
        head_spec = spec if spec.hint_at == "a" else QuadratureSpec(
            spec.abs_tol, spec.rel_tol, spec.max_subdivisions)
        head = _transform(f, a, pivot, head_spec)

        def mapped_tail(t):
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                x = t / (1.0 - t)
                s = pivot * np.exp(x)
                val = f(s) * s / (1.0 - t) ** 2
            return np.where(np.isfinite(s) & (t < 1.0), val, 0.0)

        return [head, (mapped_tail, 0.0, 1.0)]
    h = spec.endpoint_exponent_hint
    if h is None:
        return f, a, b
    power = 1.0 / (1.0 + h)
    width = b - a

    if spec.hint_at == "a":
        def mapped_a(t):
            return f(a + width * t**power) * width * power * t ** (power - 1.0)
        return mapped_a, 0.0, 1.0

    def mapped_b(t):
        return f(b - width * t**power) * width * power * t ** (power - 1.0)
    return mapped_b, 0.0, 1.0


def _adaptive(f: Callable, a: float, b: float, spec: QuadratureSpec) -> tuple[float, float]:
    val, err, scale = _gk15(f, np.array([a]), np.array([b]))
    total, total_err = float(val[0]), float(err[0])
    # Integral of |f|: cancellation below 2 * roundoff of it cannot be resolved.
    magnitude = float(scale[0])
    heap = [(-total_err, 0, a, b, total, total_err)]
    counter = 1
    while total_err > max(spec.abs_tol, spec.rel_tol * abs(total), 2 * _ROUNDOFF * magnitude):
        if counter >= spec.max_subdivisions:
            raise NonConvergence(
                f"quadrature on [{a}, {b}] exhausted {spec.max_subdivisions} subdivisions "
                f"(error estimate {total_err:.3e})")
        _, _, lo, hi, v, e = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        vals, errs, _ = _gk15(f, np.array([lo, mid]), np.array([mid, hi]))
        total += float(vals.sum()) - v
        total_err += float(errs.sum()) - e
        for left, right, vi, ei in ((lo, mid, vals[0], errs[0]), (mid, hi, vals[1], errs[1])):
            heapq.heappush(heap, (-float(ei), counter, left, right, float(vi), float(ei)))
            counter += 1
    # Re-sum from the leaves so the result does not carry update drift.
    total = math.fsum(item[4] for item in heap)
    return total, total_err


def integrate(f: Callable, a: float, b: float, spec: QuadratureSpec | None = None) -> float:
    """Integrate f over [a, b] to max(abs_tol, rel_tol * |I|).

    f must accept numpy arrays.  ``b`` may be ``inf``.
    """
    spec = spec or QuadratureSpec()
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    mapped = _transform(f, a, b, spec)
    if isinstance(mapped, list):
        return math.fsum(_adaptive(g, lo, hi, spec)[0] for g, lo, hi in mapped)
    g, lo, hi = mapped
    return _adaptive(g, lo, hi, spec)[0]


def segment_integrals(f: Callable, nodes: Sequence[float], spec: QuadratureSpec | None = None) -> np.ndarray:
    """Integrals of f over each [nodes[i], nodes[i+1]].

    One vectorized Gauss-Kronrod pass covers all segments; segments whose error
    estimate misses the tolerance are redone adaptively.
    """
    spec = spec or QuadratureSpec()
    x = np.asarray(nodes, dtype=float)
    if x.ndim != 1 or x.size < 2 or np.any(np.diff(x) <= 0):
        raise ValueError("nodes must be strictly increasing with at least two entries")
    vals, errs, _ = _gk15(f, x[:-1], x[1:])
    bad = errs > np.maximum(spec.abs_tol, spec.rel_tol * np.abs(vals))
    for i in np.flatnonzero(bad):
        vals[i] = integrate(f, x[i], x[i + 1], spec)
    return vals


def solve_ivp(f: Callable, r0: float, y0: Sequence[float], r1: float,
              spec: OdeSpec | None = None, t_eval: Sequence[float] | None = None) -> Trajectory:
    """Adaptive explicit Runge-Kutta (DOP853) from r0 to r1.

    Raises StepUnderflow when the step falls below ``spec.min_step`` or the
    state exceeds ``spec.blowup``; the exception carries the partial trajectory.
    """
    spec = spec or OdeSpec()
    if r0 == r1:
        raise ValueError("r0 and r1 must differ")
    y0 = np.asarray(y0, dtype=float)

    def blowup(t, y):
        return spec.blowup - np.max(np.abs(y))
    blowup.terminal = True

    max_step = spec.max_step if math.isfinite(spec.max_step) else np.inf
    sol = scipy.integrate.solve_ivp(
        f, (r0, r1), y0, method="DOP853", rtol=spec.rel_tol, atol=spec.abs_tol,
        dense_output=True, events=blowup, max_step=max_step)
    traj = Trajectory(t=sol.t, y=sol.y, dense=sol.sol, n_steps=len(sol.t) - 1)
    steps = np.abs(np.diff(sol.t))
    underflow = sol.status == -1 or (steps.size > 1 and np.min(steps[:-1]) < spec.min_step)
    if sol.status == 1 or underflow:
        reason = "state exceeded blow-up threshold" if sol.status == 1 else "step underflow"
        raise StepUnderflow(f"{reason} near t={sol.t[-1]!r}", last_r=float(sol.t[-1]), partial=traj)
    if not np.all(np.isfinite(sol.y)):
        raise NonFinite("ODE state became non-finite")
    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        traj = Trajectory(t=t_eval, y=sol.sol(t_eval), dense=sol.sol, n_steps=traj.n_steps)
    return traj


def find_root(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12) -> RootResult:
    """Bracketing root (Brent) with |f(root)| and the bracket width reported."""
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0:
        return RootResult(lo, 0.0, 0.0)
    if f_hi == 0:
        return RootResult(hi, 0.0, 0.0)
    if np.sign(f_lo) == np.sign(f_hi):
        raise NoBracket(f"no sign change on [{lo}, {hi}]: f={f_lo!r}, {f_hi!r}")
    root = scipy.optimize.brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500)
    return RootResult(float(root), float(abs(f(root))), float(tol))


def linear_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Least-squares line y = slope*x + intercept; returns (slope, intercept, R^2)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_res = float(np.sum((y - slope * x - intercept) ** 2))
    ss_tot = float(np.sum((y - ym) ** 2))
    if ss_tot <= 1e-28 * max(1.0, float(np.sum(y**2))):
        r2 = 1.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return slope, intercept, r2


def loglog_fit(r: Sequence[float], u: Sequence[float], window: tuple[float, float]) -> FitResult:
    """Fit ln|u| = slope * ln r + intercept over samples with r in the window."""
    r = np.asarray(r, dtype=float)
    u = np.asarray(u, dtype=float)
    lo, hi = window
    if not 0 < lo < hi:
        raise ValueError(f"invalid window {window}")
    mask = (r >= lo) & (r <= hi)
    if mask.sum() < 8:
        raise InsufficientSamples(f"{int(mask.sum())} samples in window {window}, need 8")
    uw = u[mask]
    if not (np.all(uw > 0) or np.all(uw < 0)):
        raise SignChange(f"samples change sign or vanish in window {window}")
    slope, intercept, r2 = linear_fit(np.log(r[mask]), np.log(np.abs(uw)))
    return FitResult(slope, intercept, r2, (float(lo), float(hi)), int(mask.sum()))


def geometric_grid(lo: float, hi: float, per_decade: int = 256) -> np.ndarray:
    """Log-spaced grid including both endpoints."""
    if not 0 < lo < hi:
        raise ValueError(f"need 0 < lo < hi, got {lo}, {hi}")
    count = max(2, int(math.ceil(per_decade * math.log10(hi / lo))) + 1)
    grid = np.geomspace(lo, hi, count)
    grid[0], grid[-1] = lo, hi
    return grid
