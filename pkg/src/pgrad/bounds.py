"""Bernstein barrier for z = |grad u|^2 and the estimates that follow from it.

The barrier is w(r) = lam (R^2 - r^2)^(-alpha) + mu with alpha = 2/(q+1-p),
centred at a point a with r = |x - a|.  For an unknown gradient direction the
operator

    A(v) = -Delta v - (p-2) <D^2 v e, e>,      |e| = 1,

is bounded below by taking for <D^2 v e, e> the Hessian eigenvalue that makes
A smallest: the largest one when p > 2 and the smallest one when p < 2.

Residuals are reported multiplied by the positive factor (R^2-r^2)^(alpha+2)/lam.
This keeps them finite up to r = R, where the scaled residual is a polynomial
in R that decides the sign near the boundary of the ball.
"""

from __future__ import annotations

import json
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import DomainError
from .numerics import linear_fit
from .params import ProblemParams, beta_q
from .radial_families import SCHEMA_VERSION, RadialProfile

GRID_CUTOFF = 1e-6
DEFAULT_GRID_POINTS = 2001
BISECTION_REL_TOL = 1e-6


@dataclass(frozen=True)
class BernsteinConstants:
    """Coefficients of z^(q+2-p) and |grad z|^2 / z in the Bernstein inequality."""

    C: float
    D: float
    theta: float
    Theta: float

    def __post_init__(self) -> None:
        if not self.C > 0 or not self.D > 0:
            raise ValueError("C and D must be positive")
        if not 0 < self.theta <= self.Theta:
            raise ValueError("need 0 < theta <= Theta")

    @classmethod
    def default(cls, params: ProblemParams) -> BernsteinConstants:
        """C = 1/(2N) and the D that absorbs every gradient term of the inequality.

        The cross term (q+2-p) z^((q-p)/2) <grad z, grad u> is split by Young's
        inequality with eps = (q+1-p) / (8N(q+2-p)), small enough that the
        z^(q+2-p) coefficient stays above 1/(2N).
        """
        n, p, q = params.n, params.p, params.q
        eps = params.gap / (8.0 * n * (q + 2.0 - p))
        D = (p - 2.0) ** 2 / (2.0 * n) + abs(p - 2.0) / 2.0 + (q + 2.0 - p) / (4.0 * eps)
        return cls(C=1.0 / (2.0 * n), D=D, theta=min(1.0, p - 1.0), Theta=max(1.0, p - 1.0))


@dataclass
class SupersolutionReport:
    lam: float
    mu: float
    residual_min: float
    residual_grid: np.ndarray
    r_grid: np.ndarray
    endpoint_residual: float
    constants: BernsteinConstants
    geometry: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.residual_min >= 0.0

    def to_json(self) -> str:
        record = {
            "schema_version": SCHEMA_VERSION,
            "kind": "supersolution_report",
            "lambda": self.lam,
            "mu": self.mu,
            "residual_min": self.residual_min,
            "endpoint_residual": self.endpoint_residual,
            "constants": {"C": self.constants.C, "D": self.constants.D,
                          "theta": self.constants.theta, "Theta": self.constants.Theta},
            "geometry": self.geometry,
            "r": [float(x) for x in self.r_grid],
            "residual": [float(x) for x in self.residual_grid],
        }
        return json.dumps(record, indent=1)


def barrier_exponent(params: ProblemParams) -> float:
    return 2.0 / params.gap


def default_grid(R: float, points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    return np.linspace(0.0, R * (1.0 - GRID_CUTOFF), points)


def scaled_residual(params: ProblemParams, R: float, lam: float, mu: float,
                    consts: BernsteinConstants, r, B: float = 0.0, Btilde: float = 0.0) -> np.ndarray:
    """(R^2-r^2)^(alpha+2)/lam times the lower bound of L*(w) at radii r in [0, R].

    B and Btilde enter through Delta r <= (N-1)(1+Br)/r and the tangential
    eigenvalue of D^2 r, which lies in [1/r, (1+Btilde r)/r].  With B = Btilde = 0
    and mu = 0 this is exactly the Euclidean residual.
    """
    n, p = params.n, params.p
    if consts.C > 1.0 / (2.0 * n) * (1 + 1e-12):
        raise ValueError(f"C must not exceed 1/(2N) = {1.0 / (2.0 * n)}")
    r = np.asarray(r, dtype=float)
    alpha = barrier_exponent(params)
    s = R * R - r * r
    radial = 2.0 * alpha * (s + 2.0 * (alpha + 1.0) * r * r)
    tangential_lo = 2.0 * alpha * s
    tangential_hi = tangential_lo * (1.0 + Btilde * r)
    laplacian = radial + (n - 1.0) * (1.0 + B * r) * tangential_lo
    if p > 2.0:
        directional = np.maximum(radial, tangential_hi)
    else:
        directional = np.minimum(radial, tangential_lo)
    ratio = mu * s**alpha / lam
    absorption = consts.C * lam**params.gap * (1.0 + ratio) ** (params.gap + 1.0)
    gradient = 4.0 * consts.D * alpha**2 * r * r / (1.0 + ratio)
    curvature = (n - 1.0) * B * B * s * s * (1.0 + ratio)
    return -laplacian - (p - 2.0) * directional + absorption - gradient - curvature


def residual_report(params: ProblemParams, R: float, lam: float, mu: float,
                    consts: BernsteinConstants, r_grid, B: float = 0.0, Btilde: float = 0.0,
                    geometry: dict | None = None) -> SupersolutionReport:
    r = np.asarray(r_grid, dtype=float)
    if R <= 0 or lam <= 0 or mu < 0:
        raise ValueError("need R > 0, lambda > 0, mu >= 0")
    if r.ndim != 1 or r.size == 0 or np.any(r < 0) or np.any(r >= R):
        raise DomainError("residual grid must lie in [0, R)")
    grid_values = scaled_residual(params, R, lam, mu, consts, r, B, Btilde)
    endpoint = float(scaled_residual(params, R, lam, mu, consts, np.array([R]), B, Btilde)[0])
    return SupersolutionReport(lam=lam, mu=mu, residual_min=float(min(grid_values.min(), endpoint)),
                               residual_grid=grid_values, r_grid=r, endpoint_residual=endpoint,
                               constants=consts, geometry=geometry or {"R": R})


def bernstein_residual_euclidean(params: ProblemParams, R: float, lam: float,
                                 consts: BernsteinConstants | None = None,
                                 r_grid=None) -> SupersolutionReport:
    """Residual of the Euclidean barrier lam (R^2 - r^2)^(-2/(q+1-p)) on r_grid."""
    consts = consts or BernsteinConstants.default(params)
    r_grid = default_grid(R) if r_grid is None else r_grid
    return residual_report(params, R, lam, 0.0, consts, r_grid, geometry={"R": R})


def bisect_threshold(ok: Callable[[float], bool], start: float = 1.0,
                     rel_tol: float = BISECTION_REL_TOL) -> float:
    """Least x > 0 with ok(x), assuming ok fails for small x and holds for large x.

    Brackets geometrically from ``start`` and bisects in log space; returns the
    upper end of the final bracket, where ok holds.
    """
    lo = hi = start
    if ok(hi):
        while ok(lo):
            lo /= 2.0
            if lo < 1e-300:
                return lo
    else:
        while not ok(hi):
            hi *= 2.0
            if hi > 1e300:
                raise DomainError("no admissible value below 1e300")
    while hi - lo > rel_tol * hi:
        mid = math.sqrt(lo * hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def calibrate_lambda(params: ProblemParams, R: float = 1.0,
                     consts: BernsteinConstants | None = None, r_grid=None) -> float:
    """Least lam (to 1e-6 relative) whose Euclidean barrier has residual_min >= 0."""
    consts = consts or BernsteinConstants.default(params)
    grid = default_grid(R) if r_grid is None else r_grid
    return bisect_threshold(
        lambda lam: bernstein_residual_euclidean(params, R, lam, consts, grid).ok,
        start=R ** (2.0 / params.gap))


def gradient_constant(params: ProblemParams, consts: BernsteinConstants | None = None) -> float:
    """c with |u'(x)| <= c d(x)^(-1/(q+1-p)), from the unit-ball barrier value at the centre."""
    return math.sqrt(calibrate_lambda(params, 1.0, consts))


@dataclass(frozen=True)
class GradientBoundReport:
    sup_product: float
    argmax_r: float


def distance_to_boundary(r, R: float | None = None, puncture: bool = True):
    r = np.asarray(r, dtype=float)
    if R is None and not puncture:
        raise ValueError("declare a ball radius, the puncture, or both")
    d = np.full_like(r, np.inf)
    if puncture:
        d = np.minimum(d, r)
    if R is not None:
        d = np.minimum(d, R - r)
    return d


def gradient_bound_check(profile: RadialProfile, params: ProblemParams, R: float | None = None,
                         puncture: bool = True) -> GradientBoundReport:
    """sup over the grid of |u'(r)| d(r)^(1/(q+1-p)), d the distance to the declared boundary."""
    d = distance_to_boundary(profile.r, R, puncture)
    inside = d > 0
    if not np.any(inside):
        raise DomainError("no grid point lies strictly inside the domain")
    product = np.abs(profile.du[inside]) * d[inside] ** (1.0 / params.gap)
    i = int(np.argmax(product))
    return GradientBoundReport(float(product[i]), float(profile.r[inside][i]))


def pointwise_bound(params: ProblemParams, x_dist: float, R: float, boundary_max: float,
                    c: float | None = None) -> float:
    """Bound on |u| at distance x_dist from the puncture, given max |u| on |x| = R.

    Integrates the gradient bound c rho^(-1/(q+1-p)) along the radial segment
    from x_dist to R.
    """
    if not 0 < x_dist <= R:
        raise ValueError("need 0 < x_dist <= R")
    c = gradient_constant(params) if c is None else c
    if abs(params.q - params.p) <= 1e-12:
        return c * (math.log(R) - math.log(x_dist)) + boundary_max
    beta = beta_q(params)
    return c * abs(x_dist ** (-beta) - R ** (-beta)) / abs(beta) + boundary_max


def _radial_sampler(source) -> Callable:
    if isinstance(source, RadialProfile):
        spline = CubicHermiteSpline(source.r, source.u, source.du)
        lo, hi = source.r[0], source.r[-1]

        def at(r):
            r = np.asarray(r, dtype=float)
            if np.any(r < lo * (1 - 1e-12)) or np.any(r > hi * (1 + 1e-12)):
                raise DomainError("Harnack ball leaves the sampled range")
            return spline(r)
        return at
    return source


def harnack_ratio(source, center_r: float, R: float, domain: tuple[float, float] = (0.0, math.inf),
                  samples: int = 1001) -> float:
    """max/min of u on the half ball around center_r, from radial values.

    ``source`` is a RadialProfile or a callable u(r).  The closed ball of
    radius R must avoid the puncture r = 0 and the domain boundary.
    """
    lo, hi = domain
    if not R > 0:
        raise ValueError("R must be positive")
    if center_r - R <= max(lo, 0.0) or center_r + R >= hi:
        raise DomainError(f"ball of radius {R} around r={center_r} touches the puncture or boundary")
    u_at = _radial_sampler(source)
    r = np.linspace(center_r - R / 2.0, center_r + R / 2.0, samples)
    u = np.asarray(u_at(r), dtype=float) * np.ones_like(r)
    if not np.all(u > 0):
        raise DomainError("Harnack ratio needs a positive solution on the ball")
    return float(u.max() / u.min())


@dataclass
class LiouvilleReport:
    fitted_exponent: float | None
    expected_exponent: float
    bound_constant: float
    max_bound_ratio: float
    table: list[tuple[float, float, float]]

    @property
    def ok(self) -> bool:
        return self.max_bound_ratio <= 1.0

    def to_json(self) -> str:
        return json.dumps({"schema_version": SCHEMA_VERSION, "kind": "liouville_report",
                           "fitted_exponent": self.fitted_exponent,
                           "expected_exponent": self.expected_exponent,
                           "bound_constant": self.bound_constant,
                           "max_bound_ratio": self.max_bound_ratio,
                           "table": [list(row) for row in self.table]}, indent=1)


def liouville_check(params: ProblemParams, du_func: Callable, r_lo: float = 1.0, r_hi: float = 1e10,
                    per_decade: int = 32, c: float | None = None) -> LiouvilleReport:
    """Decay of |u'| for an entire-space-type radial solution.

    Rows of the table are (R, sup_{r >= R} |u'|, that sup times R^(1/(q+1-p))).
    The gradient bound with d = r is checked on the whole range, and the decay
    exponent is fitted on the two outermost decades.
    """
    c = gradient_constant(params) if c is None else c
    count = int(round(per_decade * math.log10(r_hi / r_lo))) + 1
    r = np.geomspace(r_lo, r_hi, count)
    grad = np.abs(np.asarray(du_func(r), dtype=float)) * np.ones_like(r)
    inv_gap = 1.0 / params.gap
    ratio = float(np.max(grad * r**inv_gap) / c)
    tail_sup = np.maximum.accumulate(grad[::-1])[::-1]
    table = [(float(R), float(tail_sup[i]), float(tail_sup[i] * R**inv_gap))
             for i, R in enumerate(r) if i % per_decade == 0]
    fitted = None
    outer = r >= r_hi / 100.0
    if np.all(grad[outer] > 0):
        fitted, _, _ = linear_fit(np.log(r[outer]), np.log(grad[outer]))
    return LiouvilleReport(fitted, -inv_gap, c, ratio, table)


def barrier_comparison(du_func: Callable, params: ProblemParams, center_r: float, R: float,
                       lam: float | None = None, samples: int = 201) -> float:
    """max of z / w over a planar section of the ball B_R(a), |a| = center_r.

    z = |u'(|x|)|^2 for the radial solution and w is the calibrated barrier.
    Values <= 1 mean the barrier dominates.
    """
    if not 0 < R < center_r:
        raise DomainError("the ball must avoid the puncture")
    lam = calibrate_lambda(params, R) if lam is None else lam
    alpha = barrier_exponent(params)
    t = np.linspace(0.0, R * (1.0 - GRID_CUTOFF), samples)
    angle = np.linspace(0.0, math.pi, samples)
    tt, aa = np.meshgrid(t, angle)
    radius = np.sqrt(center_r**2 + 2.0 * center_r * tt * np.cos(aa) + tt**2)
    z = np.asarray(du_func(radius), dtype=float) ** 2
    w = lam * (R * R - tt * tt) ** (-alpha)
    return float(np.max(z / w))
