"""Direct solvers for the radial equation, independent of the closed forms.

The second-order equation is integrated as the first-order system

    w' = r^(-(q+1-p)(N-1)/(p-1)) |w|^(q/(p-1)),    u' = sign(w) (|w| r^(1-N))^(1/(p-1))

in the variable t = ln r, where w = r^(N-1) |u'|^(p-2) u' is the radial flux.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGradient, DomainError, NoBracket, RegimeError
from .numerics import OdeSpec, find_root, geometric_grid, solve_ivp
from .params import ProblemParams, critical_exponent_qc
from .radial_families import RadialProfile, bracket

DEGENERATE_GRADIENT = 1e-14


@dataclass(frozen=True)
class WState:
    r: float
    w: float

    def du(self, params: ProblemParams) -> float:
        return math.copysign((abs(self.w) * self.r ** (1 - params.n)) ** (1 / (params.p - 1)), self.w)


def flux_from_du(params: ProblemParams, r, du):
    r = np.asarray(r, dtype=float)
    du = np.asarray(du, dtype=float)
    return r ** (params.n - 1) * np.abs(du) ** (params.p - 2) * du


def du_from_flux(params: ProblemParams, r, w):
    r = np.asarray(r, dtype=float)
    w = np.asarray(w, dtype=float)
    return np.sign(w) * (np.abs(w) * r ** (1.0 - params.n)) ** (1.0 / (params.p - 1.0))


def first_integral(params: ProblemParams, r: float, K: float) -> WState:
    """Flux w(r) of the solution whose first integral equals K.

    Solves -|w|^(-q/(p-1)) w = G(r) for w; G > 0 gives w < 0 and G < 0 gives w > 0.
    """
    G = float(bracket(params, r, K))
    if G == 0.0:
        raise DomainError(f"first-integral bracket vanishes at r={r}: blow-up locus")
    mag = abs(G) ** (-(params.p - 1.0) / params.gap)
    return WState(r=float(r), w=-math.copysign(mag, G))


def _decay_rate(params: ProblemParams) -> float:
    """Exponent a in w' = r^(-a) |w|^m."""
    return params.gap * (params.n - 1.0) / (params.p - 1.0)


def _system(params: ProblemParams):
    n, p = params.n, params.p
    m = params.q / (p - 1.0)
    one_minus_a = 1.0 - _decay_rate(params)

    def rhs(t, y):
        u, w = y
        r = math.exp(t)
        dw = math.exp(one_minus_a * t) * abs(w) ** m
        du = math.copysign((abs(w) * r ** (1.0 - n)) ** (1.0 / (p - 1.0)), w)
        return [r * du, dw]
    return rhs


def integrate_direct(params: ProblemParams, r0: float, u0: float, du0: float, r1: float,
                     spec: OdeSpec | None = None, r_eval=None, per_decade: int = 256) -> RadialProfile:
    """Integrate the (u, w) system from r0 to r1 starting at u(r0)=u0, u'(r0)=du0.

    Returns the profile on ``r_eval`` (default: geometric grid between r0 and r1)
    sorted by increasing r.
    """
    spec = spec or OdeSpec()
    if r0 <= 0 or r1 <= 0 or r0 == r1:
        raise DomainError("need distinct positive r0, r1")
    if abs(du0) < DEGENERATE_GRADIENT:
        raise DegenerateGradient(f"|u'(r0)| = {abs(du0)!r} is below {DEGENERATE_GRADIENT}")
    w0 = float(flux_from_du(params, r0, du0))
    traj = solve_ivp(_system(params), math.log(r0), [u0, w0], math.log(r1), spec)
    w_steps = traj.y[1] if r1 > r0 else traj.y[1][::-1]
    if np.any(np.diff(w_steps) < -1e-12 * np.max(np.abs(w_steps))):
        raise AssertionError("flux decreased along an accepted step")
    lo, hi = min(r0, r1), max(r0, r1)
    r = geometric_grid(lo, hi, per_decade) if r_eval is None else np.sort(np.asarray(r_eval, float))
    if r[0] < lo * (1 - 1e-12) or r[-1] > hi * (1 + 1e-12):
        raise DomainError("evaluation nodes must lie between r0 and r1")
    y = traj(np.log(np.clip(r, lo, hi)))
    du = du_from_flux(params, r, y[1])
    if np.any(np.abs(du) < DEGENERATE_GRADIENT):
        raise DegenerateGradient("|u'| fell below the degeneracy floor; the solution is constant there")
    return RadialProfile(r, y[0], du, None, (lo, hi),
                         metadata={"source": "direct", "n": params.n, "p": params.p, "q": params.q})


def flux_limit(params: ProblemParams, K: float, spec: OdeSpec | None = None) -> float:
    """lim_{r->0} r^((N-1)/(p-1)) |u'(r)| for the solution with constant K at r = 1.

    Only the initial flux at r = 1 uses the first integral; the limit itself
    comes from integrating w' toward the origin until r^(1-a) < e^-40.
    """
    # fluxes up to 1e10 put |w| far above the default blow-up threshold when p > 2
    spec = spec or OdeSpec(blowup=1e300)
    w1 = first_integral(params, 1.0, K).w
    one_minus_a = 1.0 - _decay_rate(params)
    if one_minus_a <= 0:
        raise RegimeError("the flux has a finite limit at 0 only for q < q_c")
    m = params.q / (params.p - 1.0)

    def rhs(t, y):
        return [math.exp(one_minus_a * t) * abs(y[0]) ** m]

    t_end = -40.0 / one_minus_a
    traj = solve_ivp(rhs, 0.0, [w1], t_end, spec)
    return abs(float(traj.y[0, -1])) ** (1.0 / (params.p - 1.0))


def shoot_for_flux(params: ProblemParams, k: float, tol: float = 1e-10,
                   spec: OdeSpec | None = None) -> float:
    """Find K so that the solution vanishing at r = 1 has flux k at the origin.

    Root finding runs on ln K; the bracket covers fluxes in [1e-10, 1e10].
    """
    if not params.q < critical_exponent_qc(params) or params.is_critical or params.p > params.n:
        raise RegimeError("shooting for the flux needs 1 < p <= N and p - 1 < q < q_c")
    if not k > 0:
        raise ValueError("k must be positive")
    span = params.gap * math.log(1e10)
    target = math.log(k)

    def mismatch(log_K):
        return math.log(flux_limit(params, math.exp(log_K), spec)) - target

    try:
        result = find_root(mismatch, -span, span, tol)
    except NoBracket:
        raise NoBracket(f"flux {k} is outside the scanned range [1e-10, 1e10]") from None
    return math.exp(result.root)
