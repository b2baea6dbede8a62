"""Radial problems on the constant-curvature model space of curvature -B^2.

Geodesic spheres have scale factor S(r) = sinh(Br)/B (S(r) = r when B = 0), so
the radial equation becomes

    (|u'|^(p-2) u')' + (N-1) (S'/S) |u'|^(p-2) u' = |u'|^q,

and the flux w = S^(N-1) |u'|^(p-2) u' again obeys a separable law.  With
G = -|w|^(-q/(p-1)) w one gets G' = m S^(-a) where m = (q+1-p)/(p-1) and
a = (N-1)(q+1-p)/(p-1), exactly as in the flat case.

Large radii are handled in logarithms: ln S(r) = Br + ln(1 - e^(-2Br)) - ln(2B),
and tail integrals of S^(-a) are carried with the factor e^(-aBr) split off.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .bounds import (BernsteinConstants, SupersolutionReport, bisect_threshold, default_grid,
                     residual_report)
from .errors import DomainError
from .numerics import OdeSpec, QuadratureSpec, integrate, segment_integrals, solve_ivp
from .params import ProblemParams, critical_exponent_qc
from .radial_families import SCHEMA_VERSION, RadialProfile

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


@dataclass(frozen=True)
class CurvatureBounds:
    """Ricci >= -(N-1) B^2 and, for p > 2, sectional curvature >= -Btilde^2."""

    B: float
    Btilde: float
    p: float

    def __post_init__(self) -> None:
        if self.B < 0 or self.Btilde < 0:
            raise ValueError("curvature scales must be nonnegative")

    @property
    def B_p(self) -> float:
        return self.B + max(self.p - 2.0, 0.0) * self.Btilde


@dataclass(frozen=True)
class ModelSpace:
    n: int
    B: float

    def __post_init__(self) -> None:
        if self.n < 2 or self.B < 0:
            raise ValueError("need n >= 2 and B >= 0")

    def log_scale(self, r):
        """ln S(r)."""
        r = np.asarray(r, dtype=float)
        if self.B == 0:
            return np.log(r)
        y = self.B * r
        return y + np.log(-np.expm1(-2.0 * y)) - math.log(2.0 * self.B)

    def scale(self, r):
        return np.exp(self.log_scale(r))

    def mean_curvature(self, r):
        """Delta r = (N-1) S'/S."""
        r = np.asarray(r, dtype=float)
        if self.B == 0:
            return (self.n - 1.0) / r
        return (self.n - 1.0) * self.B / np.tanh(self.B * r)


def bernstein_residual_manifold(params: ProblemParams, curv: CurvatureBounds, R: float,
                                lam: float, mu: float, consts: BernsteinConstants | None = None,
                                r_grid=None) -> SupersolutionReport:
    """Residual of the curved barrier lam (R^2 - r^2)^(-2/(q+1-p)) + mu.

    Uses the comparison bounds Delta r <= (N-1)(1+Br)/r and a tangential D^2 r
    eigenvalue in [1/r, (1+Btilde r)/r], through the same code path as the flat
    residual.
    """
    consts = consts or BernsteinConstants.default(params)
    r_grid = default_grid(R) if r_grid is None else r_grid
    geometry = {"R": R, "B": curv.B, "Btilde": curv.Btilde}
    return residual_report(params, R, lam, mu, consts, r_grid, curv.B, curv.Btilde, geometry)


def barrier_scale(params: ProblemParams, curv: CurvatureBounds, R: float) -> float:
    """max{(R^4 B^2)^(1/(q+1-p)), ((1 + B_p R) R^2)^(1/(q+1-p))}."""
    inv = 1.0 / params.gap
    return max((R**4 * curv.B**2) ** inv, ((1.0 + curv.B_p * R) * R * R) ** inv)


def barrier_offset(params: ProblemParams, curv: CurvatureBounds) -> float:
    """((N-1) B^2)^(1/(q+1-p))."""
    return ((params.n - 1.0) * curv.B**2) ** (1.0 / params.gap)


@dataclass(frozen=True)
class ManifoldBarrier:
    c: float
    lam: float
    mu: float
    report: SupersolutionReport


def calibrate_manifold_barrier(params: ProblemParams, curv: CurvatureBounds, R: float,
                               consts: BernsteinConstants | None = None,
                               r_grid=None) -> ManifoldBarrier:
    """Least c (bisection, 1e-6 relative) with residual_min >= 0 for lam = c * barrier_scale."""
    consts = consts or BernsteinConstants.default(params)
    grid = default_grid(R) if r_grid is None else r_grid
    scale = barrier_scale(params, curv, R)
    mu = barrier_offset(params, curv)

    def ok(c):
        return bernstein_residual_manifold(params, curv, R, c * scale, mu, consts, grid).ok

    c = bisect_threshold(ok)
    report = bernstein_residual_manifold(params, curv, R, c * scale, mu, consts, grid)
    return ManifoldBarrier(c, c * scale, mu, report)


def gradient_bound_manifold(params: ProblemParams, curv: CurvatureBounds, dist_to_boundary: float,
                            consts: BernsteinConstants | None = None) -> float:
    """Bound on |grad u|^2 at distance d from the boundary.

    Returns c max{B^(2/(q+1-p)), (1 + B_p d)^(1/(q+1-p)) d^(-2/(q+1-p))}; c adds
    the barrier constant calibrated on the ball of radius d to (N-1)^(1/(q+1-p)),
    which covers the offset mu.
    """
    d = dist_to_boundary
    if not d > 0:
        raise ValueError("distance to the boundary must be positive")
    barrier = calibrate_manifold_barrier(params, curv, d, consts)
    inv = 1.0 / params.gap
    c = barrier.c + (params.n - 1.0) ** inv
    return c * max(curv.B ** (2.0 * inv), (1.0 + curv.B_p * d) ** inv * d ** (-2.0 * inv))


def _separable_rates(params: ProblemParams) -> tuple[float, float]:
    """(m, a) in G' = m S^(-a)."""
    m = params.gap / (params.p - 1.0)
    return m, (params.n - 1.0) * m


def _gauss(f, lo, hi):
    """32-point Gauss-Legendre on each [lo_i, hi_i] (arrays), for short smooth pieces."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    half = 0.5 * (hi - lo)
    x = 0.5 * (hi + lo)[..., None] + half[..., None] * _GL_NODES
    return half * (f(x) @ _GL_WEIGHTS)


class _FirstIntegral:
    """sign(G) and ln|G| on the model space, at the grid nodes and between them."""

    def __init__(self, params: ProblemParams, model: ModelSpace, K: float | None, nodes,
                 quad: QuadratureSpec):
        self.params, self.model, self.nodes = params, model, nodes
        self.m, self.a = _separable_rates(params)
        qc = critical_exponent_qc(params)
        self.global_solution = K is None
        if K is None and model.B == 0 and not params.q > qc + 1e-12:
            raise DomainError("flat space has no global solution with vanishing first integral "
                              "at infinity unless q > q_c")
        self.K = 0.0 if K is None else float(K)
        if params.is_critical:
            self.anchor = "one"
        elif params.q < qc:
            self.anchor = "origin"
        else:
            self.anchor = "infinity"
        if self.global_solution:
            self.anchor = "infinity"
        self.scaled = self.anchor == "infinity" and model.B > 0
        self._node_values(quad)

    def density(self, r):
        return np.exp(-self.a * self.model.log_scale(r))

    def scaled_density(self, x, ref):
        """e^(a B ref) S(x)^(-a), finite for x >= ref - O(1/B)."""
        B = self.model.B
        return np.exp(self.a * (B * (ref - x) - np.log(-np.expm1(-2.0 * B * x))
                                + math.log(2.0 * B)))

    def _node_values(self, quad: QuadratureSpec) -> None:
        r = self.nodes
        if self.scaled:
            # J(r) = e^(aBr) * integral of S^(-a) from r to infinity
            B = self.model.B
            last = r[-1]
            j_last = integrate(lambda x: self.scaled_density(x, last), last, math.inf, quad)
            J = np.empty_like(r)
            J[-1] = j_last
            pieces = _gauss(lambda x: self.scaled_density(x, r[:-1][:, None]), r[:-1], r[1:])
            for i in range(r.size - 2, -1, -1):
                J[i] = math.exp(-self.a * B * (r[i + 1] - r[i])) * J[i + 1] + pieces[i]
            self.values = J
            return
        pieces = segment_integrals(self.density, r, quad)
        if self.anchor == "origin":
            hint = QuadratureSpec(quad.abs_tol, quad.rel_tol, quad.max_subdivisions,
                                  endpoint_exponent_hint=-self.a)
            start = integrate(self.density, 0.0, r[0], hint)
        elif self.anchor == "one":
            start = 0.0
            if r[0] < 1.0:
                start = -integrate(self.density, r[0], 1.0, quad)
            elif r[0] > 1.0:
                start = integrate(self.density, 1.0, r[0], quad)
        else:
            start = -integrate(self.density, r[0], math.inf, quad)
        self.values = start + np.concatenate([[0.0], np.cumsum(pieces)])

    def _log_abs_sign(self, integral, log_tail=None):
        if log_tail is not None:
            G_log = math.log(self.m) + log_tail
            return -np.ones_like(G_log), G_log
        G = self.K + self.m * integral
        if np.any(G == 0) or (np.any(G > 0) and np.any(G < 0)):
            raise DomainError("first-integral bracket vanishes on the grid: blow-up")
        return np.sign(G), np.log(np.abs(G))

    def at_nodes(self):
        if self.scaled:
            return self._log_abs_sign(None, -self.a * self.model.B * self.nodes + np.log(self.values))
        return self._log_abs_sign(self.values)

    def at(self, x):
        """Values at points x with x >= nodes[0]; used inside quadrature."""
        x = np.asarray(x, dtype=float)
        if self.scaled:
            # step back from the node at or right of x so that every term is positive
            idx = np.clip(np.searchsorted(self.nodes, x, side="left"), 0, self.nodes.size - 1)
            base = self.nodes[idx]
            B = self.model.B
            inner = _gauss(lambda y: self.scaled_density(y, x[..., None]), x, base)
            J = np.exp(-self.a * B * (base - x)) * self.values[idx] + inner
            return self._log_abs_sign(None, -self.a * B * x + np.log(J))
        idx = np.clip(np.searchsorted(self.nodes, x, side="right") - 1, 0, self.nodes.size - 1)
        base = self.nodes[idx]
        inner = _gauss(self.density, base, x)
        return self._log_abs_sign(self.values[idx] + inner)


def _du_from_log(params: ProblemParams, model: ModelSpace, r, sign, log_abs_G):
    log_mag = (1.0 - params.n) / (params.p - 1.0) * model.log_scale(r) - log_abs_G / params.gap
    return -sign * np.exp(log_mag)


def solve_radial_hyperbolic(params: ProblemParams, model: ModelSpace, K: float | None, r_grid,
                            quad: QuadratureSpec | None = None) -> RadialProfile:
    """Radial solution on the model space with first-integral constant K.

    K is measured from the origin when q < q_c, from r = 1 when q = q_c and from
    infinity when q > q_c, which reproduces the flat constant at B = 0.
    K = None selects the global solution whose first integral vanishes at
    infinity; its gradient tends to ((N-1)B)^(1/(q+1-p)).  u is normalized by
    u = 0 at the last grid node.
    """
    quad = quad or QuadratureSpec()
    r = np.asarray(r_grid, dtype=float)
    if r.ndim != 1 or r.size < 2 or r[0] <= 0 or np.any(np.diff(r) <= 0):
        raise DomainError("grid must be positive and strictly increasing")
    if model.n != params.n:
        raise ValueError("model space and parameters disagree on the dimension")
    first = _FirstIntegral(params, model, K, r, quad)
    sign, log_G = first.at_nodes()
    du = _du_from_log(params, model, r, sign, log_G)

    def du_at(x):
        s, lg = first.at(x)
        return _du_from_log(params, model, x, s, lg)

    pieces = segment_integrals(du_at, r, quad)
    u = np.zeros_like(r)
    u[:-1] = -np.cumsum(pieces[::-1])[::-1]
    meta = {"source": "model_space", "n": params.n, "p": params.p, "q": params.q,
            "B": model.B, "K": "global" if K is None else K}
    return RadialProfile(r, u, du, None, (0.0, math.inf), meta)


def integrate_hyperbolic_direct(params: ProblemParams, model: ModelSpace, r_start: float,
                                du_start: float, r_eval, spec: OdeSpec | None = None) -> np.ndarray:
    """u' on r_eval from the second-order equation, started at (r_start, du_start).

    Integrates psi = |u'|^(p-2) u' with psi' = -(Delta r) psi + |psi|^(q/(p-1)).
    """
    spec = spec or OdeSpec()
    p, q = params.p, params.q
    r_eval = np.asarray(r_eval, dtype=float)
    psi0 = abs(du_start) ** (p - 2.0) * du_start
    exponent = q / (p - 1.0)

    def rhs(t, y):
        return [-float(model.mean_curvature(t)) * y[0] + abs(y[0]) ** exponent]

    end = r_eval[0] if r_eval[0] < r_start else r_eval[-1]
    if abs(r_eval[-1] - r_start) > abs(end - r_start):
        end = r_eval[-1]
    traj = solve_ivp(rhs, r_start, [psi0], end, spec)
    psi = traj(r_eval)[0]
    return np.sign(psi) * np.abs(psi) ** (1.0 / (p - 1.0))


@dataclass
class PHarmonicReport:
    sup_log_gradient: float | None
    kappa: float | None
    sup_gradient: float
    asymptotic_gradient: float
    r: np.ndarray
    log_v: np.ndarray

    def to_json(self) -> str:
        return json.dumps({"schema_version": SCHEMA_VERSION, "kind": "p_harmonic_report",
                           "sup_log_gradient": self.sup_log_gradient, "kappa": self.kappa,
                           "sup_gradient": self.sup_gradient,
                           "asymptotic_gradient": self.asymptotic_gradient}, indent=1)


def p_harmonic_log_gradient(model: ModelSpace, p: float, r_grid,
                            quad: QuadratureSpec | None = None) -> PHarmonicReport:
    """Radial positive p-harmonic v = integral of S^(-(N-1)/(p-1)) from r to infinity.

    With u = (1-p) ln v, u' = (p-1) S^(-e)/v where e = (N-1)/(p-1).  The ratio
    S^(-e)/v = 1 / integral_0^inf (S(r+x)/S(r))^(-e) dx is computed per node.
    sup_log_gradient is sup |u'| / B and kappa is sup |(ln v)'| / B (None at B = 0).
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    quad = quad or QuadratureSpec()
    r = np.asarray(r_grid, dtype=float)
    if r.ndim != 1 or r.size < 1 or np.any(r <= 0):
        raise DomainError("grid must be positive")
    e = (model.n - 1.0) / (p - 1.0)
    if model.B == 0:
        if not e > 1:
            raise DomainError("flat space has a decaying radial p-harmonic function only for p < N")
        ratio_integral = r / (e - 1.0)
    else:
        ls = model.log_scale
        ratio_integral = np.array([
            integrate(lambda x, r0=r0: np.exp(-e * (ls(r0 + x) - ls(r0))), 0.0, math.inf, quad)
            for r0 in r])
    log_grad = 1.0 / ratio_integral
    log_v = np.log(ratio_integral) - e * model.log_scale(r)
    grad = (p - 1.0) * log_grad
    sup_grad = float(np.max(grad))
    if model.B == 0:
        return PHarmonicReport(None, None, sup_grad, float(grad[-1]), r, log_v)
    return PHarmonicReport(sup_grad / model.B, float(np.max(log_grad)) / model.B,
                           sup_grad, float(grad[-1]), r, log_v)
