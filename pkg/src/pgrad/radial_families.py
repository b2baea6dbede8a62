"""Radial solution families of the equation.

For radial u the equation reads

    (|u'|^(p-2) u')' + (N-1)/r |u'|^(p-2) u' = |u'|^q,

and the flux w = r^(N-1) |u'|^(p-2) u' obeys a separable first-order law.
Its first integral G(r) = -|w|^(-q/(p-1)) w is explicit:

    G(r) = r^c / b + K              (q != q_c, c = (q+1-p) b / (p-1))
    G(r) = ln(r) / (N-1) + K        (q == q_c)

so u' = -sign(G) r^((1-N)/(p-1)) |G|^(-1/(q+1-p)).  Positive solutions that
decrease away from the origin have G > 0; negative ones (u' > 0) have G < 0.
Every family below is this formula with a particular K, integrated once more.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, RegimeError
from .numerics import QuadratureSpec, integrate, segment_integrals
from .params import (ProblemParams, beta_q, coefficient_b, critical_exponent_qc,
                     flux_normalization, lambda_singular, lambda_tilde)

SCHEMA_VERSION = 1
R_SMALL = 1e-2


class FamilyKind(enum.Enum):
    FUNDAMENTAL_MU_P = "FundamentalMuP"
    SINGULAR_POSITIVE_U = "SingularPositiveU"
    SINGULAR_NEGATIVE_V = "SingularNegativeV"
    REGULAR_FLUX_K = "RegularFluxK"
    STRONG_SINGULAR = "StrongSingular"
    GLOBAL_KM = "GlobalKM"
    BLOWUP_EPS = "BlowupEps"
    CRITICAL_NEGATIVE_PROFILE = "CriticalNegativeProfile"


_NEEDS_SUBCRITICAL = {
    FamilyKind.REGULAR_FLUX_K, FamilyKind.STRONG_SINGULAR, FamilyKind.GLOBAL_KM,
    FamilyKind.BLOWUP_EPS, FamilyKind.SINGULAR_POSITIVE_U,
}


@dataclass(frozen=True)
class FamilyDescriptor:
    kind: FamilyKind
    params: ProblemParams
    k: float | None = None
    M: float | None = None
    eps: float | None = None

    def __post_init__(self) -> None:
        kind, prm = self.kind, self.params
        if prm.p > prm.n:
            raise RegimeError("radial families need 1 < p <= N")
        qc = critical_exponent_qc(prm)
        if kind in _NEEDS_SUBCRITICAL and (prm.is_critical or not prm.q < qc):
            raise RegimeError(f"{kind.value} needs p - 1 < q < q_c = {qc}")
        if kind is FamilyKind.SINGULAR_NEGATIVE_V:
            if prm.is_critical or not qc < prm.q < prm.p:
                raise RegimeError(f"SingularNegativeV needs q_c = {qc} < q < p = {prm.p}")
        if kind is FamilyKind.CRITICAL_NEGATIVE_PROFILE and not prm.is_critical:
            raise RegimeError("CriticalNegativeProfile needs q = q_c")
        if kind in (FamilyKind.REGULAR_FLUX_K, FamilyKind.GLOBAL_KM):
            if self.k is None or not self.k > 0:
                raise ValueError(f"{kind.value} needs k > 0")
        if kind is FamilyKind.GLOBAL_KM and (self.M is None or self.M < 0):
            raise ValueError("GlobalKM needs M >= 0")
        if kind is FamilyKind.BLOWUP_EPS and (self.eps is None or not 0 < self.eps < 1):
            raise ValueError("BlowupEps needs 0 < eps < 1")

    def metadata(self) -> dict:
        meta = {"family": self.kind.value, "n": self.params.n, "p": self.params.p,
                "q": self.params.q}
        for name in ("k", "M", "eps"):
            value = getattr(self, name)
            if value is not None:
                meta[name] = value
        return meta


@dataclass
class RadialProfile:
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    family: FamilyDescriptor | None = None
    domain: tuple[float, float] = (0.0, math.inf)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.r = np.asarray(self.r, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.du = np.asarray(self.du, dtype=float)
        if not (self.r.shape == self.u.shape == self.du.shape) or self.r.ndim != 1:
            raise ValueError("r, u, du must be one-dimensional arrays of equal length")
        if self.r.size < 2:
            raise ValueError("a profile needs at least two samples")
        if np.any(self.r <= 0) or np.any(np.diff(self.r) <= 0):
            raise ValueError("r must be positive and strictly increasing")
        lo, hi = self.domain
        if self.r[0] < lo or self.r[-1] > hi:
            raise ValueError(f"grid [{self.r[0]}, {self.r[-1]}] leaves domain {self.domain}")

    def header(self) -> dict:
        meta = dict(self.metadata)
        if self.family is not None:
            meta.update(self.family.metadata())
        return meta

    def to_csv(self) -> str:
        out = io.StringIO()
        header = self.header()
        if header:
            out.write("# " + " ".join(f"{key}={_fmt(val)}" for key, val in header.items()) + "\n")
        out.write("r,u,du\n")
        for r, u, du in zip(self.r, self.u, self.du):
            out.write(f"{_fmt(r)},{_fmt(u)},{_fmt(du)}\n")
        return out.getvalue()

    def to_json(self) -> str:
        record = {"schema_version": SCHEMA_VERSION, "kind": "radial_profile",
                  "metadata": self.header(), "domain": [_jnum(x) for x in self.domain],
                  "r": [float(x) for x in self.r], "u": [float(x) for x in self.u],
                  "du": [float(x) for x in self.du]}
        return json.dumps(record, indent=1)


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _jnum(value: float):
    return value if math.isfinite(value) else str(value)


class ProfileFormatError(ValueError):
    """Malformed profile CSV; ``line`` is 1-based."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def profile_from_csv(text: str) -> RadialProfile:
    """Parse the CSV written by :meth:`RadialProfile.to_csv`."""
    metadata: dict = {}
    rows: list[tuple[float, float, float]] = []
    seen_header = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            for token in stripped[1:].split():
                if "=" not in token:
                    raise ProfileFormatError(f"bad metadata token {token!r}", lineno)
                key, value = token.split("=", 1)
                metadata[key] = value
            continue
        if not seen_header:
            if [c.strip() for c in next(csv.reader([stripped]))] != ["r", "u", "du"]:
                raise ProfileFormatError("expected column header 'r,u,du'", lineno)
            seen_header = True
            continue
        cells = next(csv.reader([stripped]))
        if len(cells) != 3:
            raise ProfileFormatError(f"expected 3 columns, got {len(cells)}", lineno)
        try:
            rows.append(tuple(float(c) for c in cells))
        except ValueError:
            raise ProfileFormatError(f"non-numeric value in {stripped!r}", lineno) from None
    if not seen_header:
        raise ProfileFormatError("missing 'r,u,du' header", max(1, len(text.splitlines())))
    if len(rows) < 2:
        raise ProfileFormatError("need at least two data rows", max(1, len(text.splitlines())))
    data = np.array(rows)
    try:
        return RadialProfile(data[:, 0], data[:, 1], data[:, 2], metadata=metadata)
    except ValueError as exc:
        raise ProfileFormatError(str(exc), 1) from None


def mu_p(params: ProblemParams, r):
    """Radial p-harmonic function singular at 0, normalized without prefactor."""
    if params.p > params.n:
        raise RegimeError("mu_p needs p <= N")
    r = np.asarray(r, dtype=float)
    if params.p == params.n:
        return -np.log(r)
    return r ** ((params.p - params.n) / (params.p - 1.0))


def mu_p_prime(params: ProblemParams, r):
    if params.p > params.n:
        raise RegimeError("mu_p needs p <= N")
    r = np.asarray(r, dtype=float)
    if params.p == params.n:
        return -1.0 / r
    n, p = params.n, params.p
    return (p - n) / (p - 1.0) * r ** ((1.0 - n) / (p - 1.0))


def bracket(params: ProblemParams, r, K: float):
    """First integral G(r) = -|w|^(-q/(p-1)) w for the constant K."""
    r = np.asarray(r, dtype=float)
    if params.is_critical:
        return np.log(r) / (params.n - 1.0) + K
    b = coefficient_b(params)
    c = params.gap * b / (params.p - 1.0)
    return r**c / b + K


def du_from_bracket(params: ProblemParams, r, G, sign: str = "positive"):
    """u' given the first-integral value G; sign selects which side of 0 G lies on."""
    r = np.asarray(r, dtype=float)
    G = np.asarray(G, dtype=float)
    if sign == "positive":
        if np.any(G < 0):
            raise DomainError("first-integral bracket must be positive for the positive family")
        mag = G
    elif sign == "negative":
        if np.any(G > 0):
            raise DomainError("first-integral bracket must be negative for the negative family")
        mag = -G
    else:
        raise ValueError(f"sign must be 'positive' or 'negative', got {sign!r}")
    # G = 0 is the blow-up locus, or an underflow far out; the gradient is then unbounded
    with np.errstate(divide="ignore", invalid="ignore"):
        out = r ** ((1.0 - params.n) / (params.p - 1.0)) * mag ** (-1.0 / params.gap)
    return -out if sign == "positive" else out


def u_prime_exact(params: ProblemParams, r, K: float, sign: str = "positive"):
    """Exact u'(r) for the radial solution with first-integral constant K.

    ``sign="positive"`` needs G(r) > 0 and returns u' < 0; ``"negative"`` needs
    G(r) < 0 and returns u' > 0 (profiles tending to -infinity at 0).
    """
    return du_from_bracket(params, r, bracket(params, r, K), sign)


def family_constant(desc: FamilyDescriptor) -> float:
    """The first-integral constant K generating the family."""
    prm = desc.params
    if desc.kind in (FamilyKind.REGULAR_FLUX_K, FamilyKind.GLOBAL_KM):
        return desc.k ** (prm.p - 1.0 - prm.q)
    if desc.kind is FamilyKind.BLOWUP_EPS:
        b = coefficient_b(prm)
        c = prm.gap * b / (prm.p - 1.0)
        return -desc.eps**c / b
    if desc.kind in (FamilyKind.STRONG_SINGULAR, FamilyKind.SINGULAR_POSITIVE_U,
                     FamilyKind.SINGULAR_NEGATIVE_V):
        return 0.0
    raise RegimeError(f"{desc.kind.value} is not generated by a first-integral constant")


def family_du(desc: FamilyDescriptor):
    """Vectorized analytic u' for the family."""
    prm = desc.params
    if desc.kind is FamilyKind.FUNDAMENTAL_MU_P:
        return lambda r: mu_p_prime(prm, r)
    if desc.kind is FamilyKind.BLOWUP_EPS:
        offset_du = _blowup_offset_du(desc)
        return lambda r: offset_du(np.asarray(r, dtype=float) - desc.eps)
    K = family_constant(desc)
    sign = "negative" if desc.kind is FamilyKind.SINGULAR_NEGATIVE_V else "positive"
    return lambda r: u_prime_exact(prm, r, K, sign)


def _blowup_offset_du(desc: FamilyDescriptor):
    """u' of the blow-up family as a function of the offset x = r - eps.

    Working in the offset keeps r^c - eps^c accurate where r is close to eps.
    """
    prm = desc.params
    b = coefficient_b(prm)
    c = prm.gap * b / (prm.p - 1.0)
    eps = desc.eps

    def du(x):
        x = np.asarray(x, dtype=float)
        G = eps**c * np.expm1(c * np.log1p(x / eps)) / b
        return du_from_bracket(prm, eps + x, G, "positive")
    return du


def _domain(desc: FamilyDescriptor) -> tuple[float, float]:
    if desc.kind in (FamilyKind.REGULAR_FLUX_K, FamilyKind.STRONG_SINGULAR):
        return (0.0, 1.0)
    if desc.kind is FamilyKind.BLOWUP_EPS:
        return (desc.eps, 1.0)
    return (0.0, math.inf)


def evaluate_family(desc: FamilyDescriptor, r_grid, quad: QuadratureSpec | None = None) -> RadialProfile:
    """Sample a family on ``r_grid``: u by quadrature of the exact u', du analytic.

    Ball families are normalized by u(1) = 0 and global ones by u(inf) = M.
    """
    quad = quad or QuadratureSpec()
    r = np.asarray(r_grid, dtype=float)
    if r.ndim != 1 or r.size < 2 or np.any(np.diff(r) <= 0) or r[0] <= 0:
        raise DomainError("grid must be positive and strictly increasing")
    prm = desc.params
    if desc.kind is FamilyKind.CRITICAL_NEGATIVE_PROFILE:
        raise DomainError("CriticalNegativeProfile is asymptotic only; use asymptotic_profile "
                          "or integrate the ODE directly")
    lo, hi = _domain(desc)
    if r[0] <= lo or r[-1] > hi:
        raise DomainError(f"grid [{r[0]}, {r[-1]}] must lie in ({lo}, {hi}]")
    du_func = family_du(desc)
    du = np.asarray(du_func(r), dtype=float)
    if desc.kind is FamilyKind.FUNDAMENTAL_MU_P:
        return RadialProfile(r, mu_p(prm, r), du, desc, (lo, hi))

    u = np.zeros_like(r)
    if math.isfinite(hi):
        # u(r_i) = u(hi) - integral of du over [r_i, hi], with u(hi) = 0
        integrand, nodes = du_func, r
        if desc.kind is FamilyKind.BLOWUP_EPS:
            integrand, nodes = _blowup_offset_du(desc), r - desc.eps
            hi = hi - desc.eps
        if nodes[-1] < hi:
            pieces = segment_integrals(integrand, np.append(nodes, hi), quad)
            u[:] = -np.cumsum(pieces[::-1])[::-1]
        else:
            pieces = segment_integrals(integrand, nodes, quad)
            u[:-1] = -np.cumsum(pieces[::-1])[::-1]
    else:
        pieces = segment_integrals(du_func, r, quad)
        tail_end = integrate(du_func, r[-1], math.inf, quad)
        anchor = desc.M or 0.0
        u[-1] = anchor - tail_end
        u[:-1] = u[-1] - np.cumsum(pieces[::-1])[::-1]
    return RadialProfile(r, u, du, desc, _domain(desc))


def critical_profile_constant(params: ProblemParams) -> float:
    """Leading constant nu of the negative profile at q = q_c.

    u ~ -nu r^((p-N)/(p-1)) (-ln r)^(-(N-1)/(p-1)) for p < N and
    u ~ -nu ln(-ln r) for p = N; the constant K only enters at lower order.
    """
    n, p = params.n, params.p
    if p == n:
        return n - 1.0
    return (p - 1.0) * (n - 1.0) ** ((n - 1.0) / (p - 1.0)) / (n - p)


def asymptotic_profile(desc: FamilyDescriptor, r, nu: float | None = None, r_small: float = R_SMALL):
    """Leading-order behavior of the family as r -> 0."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0) or np.any(r > r_small):
        raise DomainError(f"asymptotic profile is only offered on (0, {r_small}]")
    prm = desc.params
    kind = desc.kind
    if kind is FamilyKind.FUNDAMENTAL_MU_P:
        return mu_p(prm, r)
    if kind in (FamilyKind.REGULAR_FLUX_K, FamilyKind.GLOBAL_KM):
        return desc.k * flux_normalization(prm) * mu_p(prm, r)
    if kind in (FamilyKind.STRONG_SINGULAR, FamilyKind.SINGULAR_POSITIVE_U):
        return lambda_singular(prm) * r ** (-beta_q(prm))
    if kind is FamilyKind.SINGULAR_NEGATIVE_V:
        return -lambda_tilde(prm) * r ** (-beta_q(prm))
    if kind is FamilyKind.CRITICAL_NEGATIVE_PROFILE:
        nu = critical_profile_constant(prm) if nu is None else nu
        log_r = -np.log(r)
        if prm.p == prm.n:
            return -nu * np.log(log_r)
        return -nu * mu_p(prm, r) * log_r ** (-(prm.n - 1.0) / (prm.p - 1.0))
    raise RegimeError(f"{kind.value} has no behavior at the origin (blows up at r = eps)")


def ode_residual(params: ProblemParams, r, du_func, absorption: bool = True, rel_step: float = 1e-3):
    """Scaled residual of the radial equation at the nodes r.

    The flux |u'|^(p-2) u' is differentiated with a fourth-order central
    difference of step rel_step * r; du_func must be exact.  The residual is
    divided by the sum of the magnitudes of the three terms.
    """
    r = np.asarray(r, dtype=float)
    p, n = params.p, params.n

    def flux(x):
        d = np.asarray(du_func(x), dtype=float)
        return np.abs(d) ** (p - 2.0) * d

    h = rel_step * r
    dflux = (-flux(r + 2 * h) + 8 * flux(r + h) - 8 * flux(r - h) + flux(r - 2 * h)) / (12 * h)
    d = np.asarray(du_func(r), dtype=float)
    transport = (n - 1.0) / r * np.abs(d) ** (p - 2.0) * d
    source = np.abs(d) ** params.q if absorption else np.zeros_like(d)
    scale = np.abs(dflux) + np.abs(transport) + np.abs(source)
    scale = np.where(scale > 0, scale, 1.0)
    return (dflux + transport - source) / scale
