"""Problem parameters, critical exponents and explicit constants.

Everything here concerns the equation

    -Delta_p u + |grad u|^q = 0   in a domain of R^N,

with N >= 2, p > 1 and q > p - 1.  The exponent ``q + 1 - p`` appears in
almost every formula and is exposed as :attr:`ProblemParams.gap`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import InvalidParams, NonFinite, RegimeError

CRITICAL_TOL = 1e-12
"""Absolute tolerance used when deciding that q equals a critical value."""


@dataclass(frozen=True)
class ProblemParams:
    n: int
    p: float
    q: float

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 2:
            raise InvalidParams(f"dimension must be an integer >= 2, got {self.n}")
        if not self.p > 1:
            raise InvalidParams(f"p must exceed 1, got {self.p}")
        if not self.q + 1 - self.p > 0:
            raise InvalidParams(f"q must exceed p - 1 = {self.p - 1}, got {self.q}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "q", float(self.q))

    @property
    def gap(self) -> float:
        """q + 1 - p, strictly positive."""
        return self.q + 1.0 - self.p

    @property
    def is_critical(self) -> bool:
        return abs(self.q - critical_exponent_qc(self)) <= CRITICAL_TOL


class RegimeTag(enum.Enum):
    SUBCRITICAL_ABSORPTION = "SubcriticalAbsorption"
    CRITICAL = "Critical"
    SUPERCRITICAL_BELOW_P = "SupercriticalBelowP"
    Q_EQUALS_P = "QEqualsP"
    Q_ABOVE_P = "QAboveP"


@dataclass(frozen=True)
class Regime:
    tag: RegimeTag
    q_c: float
    q_tilde: float
    critical: bool
    above_q_tilde: bool


def critical_exponent_qc(params: ProblemParams) -> float:
    """Removability threshold N(p-1)/(N-1)."""
    return params.n * (params.p - 1.0) / (params.n - 1.0)


def beta_q(params: ProblemParams) -> float:
    """Power of the strong singular profile, (p-q)/(q+1-p)."""
    return (params.p - params.q) / params.gap


def coefficient_b(params: ProblemParams) -> float:
    """(N(p-1) - (N-1)q)/(q+1-p); positive exactly when q < q_c."""
    n, p, q = params.n, params.p, params.q
    return (n * (p - 1.0) - (n - 1.0) * q) / params.gap


def _require_classification_range(params: ProblemParams) -> None:
    if params.p > params.n:
        raise RegimeError(f"requires p <= N, got p={params.p}, N={params.n}")


def _root_over(base: float, gap: float, beta: float) -> float:
    try:
        return base ** (1.0 / gap) / beta
    except OverflowError:
        raise NonFinite(f"amplitude {base}^(1/{gap}) exceeds the float range") from None


def lambda_singular(params: ProblemParams) -> float:
    """Amplitude of the positive singular solution lambda * r^(-beta).

    Defined for 1 < p <= N and p - 1 < q < q_c.
    """
    _require_classification_range(params)
    if params.q >= critical_exponent_qc(params) - CRITICAL_TOL:
        raise RegimeError("lambda_singular needs q < q_c")
    beta = beta_q(params)
    base = beta * (params.p - 1.0) + params.p - params.n
    return _root_over(base, params.gap, beta)


def lambda_tilde(params: ProblemParams) -> float:
    """Amplitude of the negative singular solution -lambda_tilde * r^(-beta).

    Defined for 1 < p <= N and q_c < q < p.
    """
    _require_classification_range(params)
    if params.q <= critical_exponent_qc(params) + CRITICAL_TOL:
        raise RegimeError("lambda_tilde needs q > q_c")
    if params.q >= params.p:
        raise RegimeError("lambda_tilde needs q < p")
    beta = beta_q(params)
    base = params.n - params.p - beta * (params.p - 1.0)
    return _root_over(base, params.gap, beta)


def q_tilde(params: ProblemParams) -> float:
    """p - 1 + p/N."""
    return params.p - 1.0 + params.p / params.n


def q_star(params: ProblemParams) -> float:
    """Conjugate exponent q/(q+1-p)."""
    return params.q / params.gap


def classify_regime(params: ProblemParams) -> Regime:
    """Locate q relative to q_c and p.

    A value within ``CRITICAL_TOL`` of a threshold counts as equal to it.  When
    p = N the thresholds q_c and p coincide; q = N then gets ``Q_EQUALS_P``
    with ``critical`` set.
    """
    q = params.q
    qc = critical_exponent_qc(params)
    qt = q_tilde(params)
    critical = abs(q - qc) <= CRITICAL_TOL
    if abs(q - params.p) <= CRITICAL_TOL:
        tag = RegimeTag.Q_EQUALS_P
    elif critical:
        tag = RegimeTag.CRITICAL
    elif q > params.p:
        tag = RegimeTag.Q_ABOVE_P
    elif q < qc:
        tag = RegimeTag.SUBCRITICAL_ABSORPTION
    else:
        tag = RegimeTag.SUPERCRITICAL_BELOW_P
    return Regime(tag=tag, q_c=qc, q_tilde=qt, critical=critical,
                  above_q_tilde=q >= qt - CRITICAL_TOL)


def flux_normalization(params: ProblemParams) -> float:
    """Factor f with lim u/mu_p = f * k for the flux-k solution.

    mu_p is normalized without prefactor (r^((p-N)/(p-1)) or -ln r); the flux
    k is the limit of r^((N-1)/(p-1)) |u'|.  The two differ by (p-1)/(N-p)
    when p < N and agree when p = N.
    """
    _require_classification_range(params)
    if params.p == params.n:
        return 1.0
    return (params.p - 1.0) / (params.n - params.p)
