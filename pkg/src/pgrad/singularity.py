"""Classification of the behavior of a sampled radial solution near r = 0.

The decision procedure tries, in order: bounded data, a limit of u/mu_p
(weak singularity with flux k), a power law r^(-beta) with the explicit
amplitude (strong singularity), and at q = q_c the log-corrected negative
profile.  Limits are extrapolated from a geometric sequence of radii with
iterated Aitken acceleration, which removes power-law remainders without
needing their exponents.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import ConflictingFits, Divergent, InsufficientSamples, RegimeError
from .numerics import FitResult, linear_fit, loglog_fit
from .params import (ProblemParams, beta_q, critical_exponent_qc, flux_normalization,
                     lambda_singular, lambda_tilde)
from .radial_families import SCHEMA_VERSION, RadialProfile, mu_p

DEFAULT_WINDOW = (1e-6, 1e-3)
MIN_WINDOW_SAMPLES = 32
SEQUENCE_PER_DECADE = 16
AITKEN_LEVELS = 3
LOG_POWER_TOL = 0.05
REGULAR_INCREMENT_SLOPE = 0.5


class Verdict(enum.Enum):
    REMOVABLE_OR_REGULAR = "RemovableOrRegular"
    WEAK_SINGULAR = "WeakSingular"
    STRONG_SINGULAR = "StrongSingular"
    CRITICAL_LOG_PROFILE = "CriticalLogProfile"
    UNCLASSIFIED = "Unclassified"


@dataclass
class SingularityClassification:
    verdict: Verdict
    k_hat: float | None = None
    lambda_hat: float | None = None
    fitted_exponent: float | None = None
    diagnostics: list[FitResult] = field(default_factory=list)
    window: tuple[float, float] = DEFAULT_WINDOW
    flux_k: float | None = None
    log_power: float | None = None
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        record = {
            "schema_version": SCHEMA_VERSION,
            "kind": "singularity_classification",
            "verdict": self.verdict.value,
            "k_hat": self.k_hat,
            "flux_k": self.flux_k,
            "lambda_hat": self.lambda_hat,
            "fitted_exponent": self.fitted_exponent,
            "log_power": self.log_power,
            "window": list(self.window),
            "diagnostics": [
                {"slope": d.slope, "intercept": d.intercept, "r_squared": d.r_squared,
                 "window": list(d.window), "n_samples": d.n_samples}
                for d in self.diagnostics],
            "notes": self.notes,
        }
        return json.dumps(record, indent=1)


@dataclass(frozen=True)
class Extrapolation:
    value: float
    error: float
    raw_last: float


def _aitken(seq: np.ndarray) -> np.ndarray:
    d1 = np.diff(seq)
    d2 = np.diff(d1)
    safe = np.where(d2 != 0, d2, 1.0)
    return seq[2:] - np.where(d2 != 0, d1[1:] ** 2 / safe, 0.0)


def extrapolate_limit(seq, levels: int = AITKEN_LEVELS) -> Extrapolation:
    """Limit of a sequence with geometric-type remainders.

    Raises Divergent when successive differences do not shrink.
    """
    s = np.asarray(seq, dtype=float)
    if s.size < 2 * levels + 3:
        raise InsufficientSamples(f"need {2 * levels + 3} terms, got {s.size}")
    d = np.diff(s)
    scale = max(np.max(np.abs(s)), 1e-300)
    if np.all(np.abs(d) <= 1e-13 * scale):
        return Extrapolation(float(s[-1]), float(np.max(np.abs(d))), float(s[-1]))
    nonzero = np.abs(d[:-1]) > 1e-13 * scale
    ratios = np.abs(d[1:][nonzero] / d[:-1][nonzero])
    if ratios.size == 0 or np.median(ratios) >= 1.0:
        raise Divergent("sequence increments do not shrink")
    acc = s
    for _ in range(levels):
        acc = _aitken(acc)
    if not np.all(np.isfinite(acc[-2:])):
        raise Divergent("acceleration produced non-finite values")
    return Extrapolation(float(acc[-1]), float(abs(acc[-1] - acc[-2])), float(s[-1]))


def _interpolant(profile: RadialProfile):
    spline = CubicHermiteSpline(np.log(profile.r), profile.u, profile.r * profile.du)
    return lambda r: spline(np.log(r))


def _radii(lo: float, hi: float, per_decade: int = SEQUENCE_PER_DECADE) -> np.ndarray:
    count = int(round(per_decade * math.log10(hi / lo))) + 1
    return np.geomspace(hi, lo, count)


def _window_mask(profile: RadialProfile, window) -> np.ndarray:
    lo, hi = window
    if not 0 < lo < hi:
        raise ValueError(f"invalid window {window}")
    if lo < profile.r[0] * (1 - 1e-12) or hi > profile.r[-1] * (1 + 1e-12):
        raise InsufficientSamples(f"window {window} leaves the sampled range "
                                  f"[{profile.r[0]}, {profile.r[-1]}]")
    mask = (profile.r >= lo * (1 - 1e-12)) & (profile.r <= hi * (1 + 1e-12))
    if mask.sum() < MIN_WINDOW_SAMPLES:
        raise InsufficientSamples(f"{int(mask.sum())} samples in window, need {MIN_WINDOW_SAMPLES}")
    return mask


def _flux_sequence(u_at, params: ProblemParams, lo: float, hi: float) -> np.ndarray:
    """Increment ratios (u_{j+1} - u_j)/(mu_{j+1} - mu_j) along radii decreasing to lo."""
    r = _radii(lo, hi)
    return np.diff(u_at(r)) / np.diff(mu_p(params, r))


def estimate_flux(profile: RadialProfile, params: ProblemParams,
                  window: tuple[float, float] = DEFAULT_WINDOW) -> Extrapolation:
    """Extrapolated lim u/mu_p (mu_p without prefactor).

    Ratios of increments are used so the additive constant in u drops out;
    by Stolz-Cesaro they share the limit of u/mu_p.
    """
    _window_mask(profile, window)
    return extrapolate_limit(_flux_sequence(_interpolant(profile), params, *window))


def _is_regular(u_at, window, bound: float | None) -> bool:
    lo, hi = window
    r = _radii(lo, hi, 8)
    u = u_at(r)
    limit = 10.0 * abs(u[0]) if bound is None else bound
    if not np.max(np.abs(u)) < limit and not np.all(u == u[0]):
        return False
    inc = np.abs(np.diff(u))
    # increments at the rounding level of u carry no shape information
    resolved = inc > 1e-12 * max(1.0, np.max(np.abs(u)))
    if np.count_nonzero(resolved) < 3:
        return True
    slope, _, _ = linear_fit(np.log(r[1:][resolved]), np.log(inc[resolved]))
    return slope >= REGULAR_INCREMENT_SLOPE


def _weak_fit(u_at, params: ProblemParams, window, tol: float):
    lo, hi = window
    mid = math.sqrt(lo * hi)
    try:
        whole = extrapolate_limit(_flux_sequence(u_at, params, lo, hi))
        outer = extrapolate_limit(_flux_sequence(u_at, params, mid, hi))
        inner = extrapolate_limit(_flux_sequence(u_at, params, lo, mid))
    except (Divergent, InsufficientSamples):
        return None
    raw = _flux_sequence(u_at, params, lo, hi)
    if abs(whole.value) <= tol * np.max(np.abs(raw)):
        return None
    if abs(inner.value - outer.value) > tol * max(abs(inner.value), abs(outer.value)):
        return None
    return whole


def _strong_fit(u_at, params: ProblemParams, window, tol: float, negative: bool):
    if params.p > params.n:
        return None
    try:
        amplitude = lambda_tilde(params) if negative else lambda_singular(params)
    except RegimeError:
        return None
    beta = beta_q(params)
    lo, hi = window
    r = _radii(lo, hi)
    u = u_at(r)
    try:
        fit = loglog_fit(r, u, (lo, hi))
        local = np.diff(np.log(np.abs(u))) / np.diff(np.log(r))
        exponent = extrapolate_limit(local).value
    except (ValueError, Divergent):
        return None
    if abs(exponent + beta) > tol * max(1.0, beta):
        return None
    try:
        lam = extrapolate_limit(r**beta * np.abs(u))
    except (Divergent, InsufficientSamples):
        return None
    if abs(lam.value - amplitude) > tol * amplitude:
        return None
    return lam.value, fit


def critical_log_fit(u_at, params: ProblemParams, lo: float, hi: float):
    """Log-power s of the negative profile at q = q_c.

    Works on increment ratios du/dmu_p along geometric radii, which behave like
    (-ln r)^s with the additive constant of u removed.  Fits
    ln|du/dmu_p| = a + s ln L + c / L with L = -ln r; the 1/L column absorbs the
    first correction.  Returns (s, R^2).
    """
    r = _radii(lo, hi)
    ratios = np.diff(u_at(r)) / np.diff(mu_p(params, r))
    log_l = np.log(-np.log(np.sqrt(r[1:] * r[:-1])))
    y = np.log(np.abs(ratios))
    design = np.column_stack([np.ones_like(log_l), log_l, np.exp(-log_l)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return float(coef[1]), r2


def expected_critical_log_power(params: ProblemParams) -> float:
    """Power of -ln r in du/dmu_p for the negative profile at q = q_c."""
    return -(params.n - 1.0) / (params.p - 1.0)


def classify(profile: RadialProfile, params: ProblemParams,
             window: tuple[float, float] = DEFAULT_WINDOW, tol: float = 1e-2,
             bound_for_regular: float | None = None) -> SingularityClassification:
    """Decide which behavior the sampled profile shows near the origin."""
    if window[1] > 1e-2:
        raise ValueError("window must end at or below 1e-2")
    mask = _window_mask(profile, window)
    u_at = _interpolant(profile)
    uw = profile.u[mask]
    result = SingularityClassification(Verdict.UNCLASSIFIED, window=tuple(window))
    one_signed = bool(np.all(uw > 0) or np.all(uw < 0))
    if one_signed:
        fit = loglog_fit(profile.r, profile.u, window)
        result.fitted_exponent = fit.slope
        result.diagnostics.append(fit)

    if _is_regular(u_at, window, bound_for_regular):
        result.verdict = Verdict.REMOVABLE_OR_REGULAR
        return result
    if not one_signed:
        result.notes.append("profile changes sign in the window")
        return result
    negative = bool(uw[0] < 0)

    weak = strong = None
    if params.p <= params.n:
        weak = _weak_fit(u_at, params, window, tol)
        strong = _strong_fit(u_at, params, window, tol, negative)
    if weak is not None and strong is not None:
        raise ConflictingFits("both the mu_p limit and the r^(-beta) fit succeed in this window")
    if weak is not None:
        result.verdict = Verdict.WEAK_SINGULAR
        result.k_hat = weak.value
        result.flux_k = weak.value / flux_normalization(params)
        return result
    if strong is not None:
        result.verdict = Verdict.STRONG_SINGULAR
        result.lambda_hat = strong[0]
        result.diagnostics.append(strong[1])
        return result

    if params.is_critical and negative and params.p <= params.n:
        power, _ = critical_log_fit(u_at, params, *window)
        result.log_power = power
        expected = expected_critical_log_power(params)
        if abs(power - expected) <= LOG_POWER_TOL * abs(expected):
            result.verdict = Verdict.CRITICAL_LOG_PROFILE
    return result


def verify_constant_sphere_solution(params: ProblemParams, omega: float | None = None) -> float:
    """Residual of the spherical equation for the constant omega (default lambda_tilde).

    The residual is returned relative to max(1, magnitude of its two terms).
    """
    if params.p > params.n or not critical_exponent_qc(params) < params.q < params.p:
        raise RegimeError("the constant spherical solution exists for q_c < q < p, p <= N")
    beta = beta_q(params)
    omega = lambda_tilde(params) if omega is None else omega
    p, n, q = params.p, params.n, params.q
    grad_sq = beta**2 * omega**2
    first = -grad_sq ** (q / 2.0)
    second = -beta * (beta * (p - 1.0) + p - n) * grad_sq ** ((p - 2.0) / 2.0) * omega
    return abs(first + second) / max(1.0, abs(first), abs(second))
