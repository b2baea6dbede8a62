import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pgrad.errors import DomainError, RegimeError
from pgrad.numerics import geometric_grid
from pgrad.params import ProblemParams, coefficient_b, flux_normalization, lambda_singular
from pgrad.radial_families import (FamilyDescriptor, FamilyKind, ProfileFormatError, RadialProfile,
                                   asymptotic_profile, critical_profile_constant, evaluate_family,
                                   family_constant, family_du, mu_p, ode_residual,
                                   profile_from_csv, u_prime_exact)

from conftest import rel_err, subcritical_params

Kind = FamilyKind


def mp_du(params, K_const, r):
    """u' from the first integral, at 40 digits."""
    mpmath.mp.dps = 40
    n, p, q = params.n, mpmath.mpf(params.p), mpmath.mpf(params.q)
    gap = q + 1 - p
    b = (n * (p - 1) - (n - 1) * q) / gap
    c = gap * b / (p - 1)
    return -r ** ((1 - n) / (p - 1)) * (r**c / b + K_const) ** (-1 / gap)


def mp_ball_u(params, K_const, r):
    return -float(mpmath.quad(lambda s: mp_du(params, K_const, s), [r, 1]))


def test_exact_u_solution(u_params):
    r = geometric_grid(1e-4, 1.0, 64)
    prof = evaluate_family(FamilyDescriptor(Kind.SINGULAR_POSITIVE_U, u_params), r)
    assert rel_err(prof.u, 0.5 * r**-2) < 1e-12
    assert rel_err(prof.du, -(r**-3)) < 1e-13


def test_exact_v_solution(v_params):
    r = geometric_grid(1e-4, 1.0, 64)
    prof = evaluate_family(FamilyDescriptor(Kind.SINGULAR_NEGATIVE_V, v_params), r)
    assert rel_err(prof.u, -1.0 / r) < 1e-12
    assert rel_err(prof.du, r**-2) < 1e-13


def test_strong_singular_on_the_ball(u_params):
    r = geometric_grid(1e-3, 1.0, 32)
    prof = evaluate_family(FamilyDescriptor(Kind.STRONG_SINGULAR, u_params), r)
    assert rel_err(prof.u[:-1], 0.5 * (r[:-1] ** -2 - 1.0)) < 1e-12
    assert prof.u[-1] == 0.0


@pytest.mark.parametrize("n,p,q,k", [(3, 2, 4 / 3, 1.0), (3, 2, 1.2, 4.0), (4, 3, 2.4, 0.5),
                                     (3, 3, 2.6, 2.0)])
def test_regular_flux_against_high_precision(n, p, q, k):
    params = ProblemParams(n, p, q)
    desc = FamilyDescriptor(Kind.REGULAR_FLUX_K, params, k=k)
    r = np.array([1e-4, 3e-3, 0.05, 0.4, 0.9])
    prof = evaluate_family(desc, r)
    oracle = [mp_ball_u(params, family_constant(desc), x) for x in r]
    assert rel_err(prof.u, oracle) < 1e-11


def test_family_constants(u_params):
    assert family_constant(FamilyDescriptor(Kind.REGULAR_FLUX_K, u_params, k=2.0)) == pytest.approx(2.0 ** (1 - 4 / 3))
    assert family_constant(FamilyDescriptor(Kind.BLOWUP_EPS, u_params, eps=0.5)) == pytest.approx(-0.5 ** (1 / 3))
    assert family_constant(FamilyDescriptor(Kind.STRONG_SINGULAR, u_params)) == 0.0


@pytest.mark.parametrize("kind,kwargs,params", [
    (Kind.REGULAR_FLUX_K, {"k": 2.0}, (3, 2, 4 / 3)),
    (Kind.GLOBAL_KM, {"k": 1.0, "M": 3.0}, (3, 2, 1.2)),
    (Kind.STRONG_SINGULAR, {}, (4, 3, 2.4)),
    (Kind.BLOWUP_EPS, {"eps": 0.2}, (3, 3, 2.5)),
    (Kind.SINGULAR_NEGATIVE_V, {}, (4, 2, 1.5)),
    (Kind.FUNDAMENTAL_MU_P, {}, (3, 2, 1.2)),
])
def test_ode_residuals(kind, kwargs, params):
    prm = ProblemParams(*params)
    desc = FamilyDescriptor(kind, prm, **kwargs)
    r = geometric_grid(0.3, 0.9, 50)
    res = ode_residual(prm, r, family_du(desc), absorption=kind is not Kind.FUNDAMENTAL_MU_P)
    assert np.max(np.abs(res)) < 1e-8


def test_fundamental_solution_is_not_a_solution_with_absorption():
    prm = ProblemParams(3, 2, 1.2)
    desc = FamilyDescriptor(Kind.FUNDAMENTAL_MU_P, prm)
    res = ode_residual(prm, geometric_grid(0.3, 0.9, 10), family_du(desc))
    assert np.min(np.abs(res)) > 0.1


def test_global_family_tends_to_m():
    prm = ProblemParams(3, 2, 1.2)
    desc = FamilyDescriptor(Kind.GLOBAL_KM, prm, k=1.0, M=2.5)
    prof = evaluate_family(desc, geometric_grid(1e-3, 1e6, 16))
    assert prof.u[-1] == pytest.approx(2.5, abs=1e-3)
    assert np.all(np.diff(prof.u) <= 0)
    assert np.all(prof.u > 2.5 - 1e-12)


def test_blowup_family_dominates_the_strong_one(u_params):
    r = geometric_grid(0.11, 1.0, 64)
    blow = evaluate_family(FamilyDescriptor(Kind.BLOWUP_EPS, u_params, eps=0.1), r)
    strong = evaluate_family(FamilyDescriptor(Kind.STRONG_SINGULAR, u_params), r)
    assert np.all(blow.u[:-1] > strong.u[:-1])
    near = evaluate_family(FamilyDescriptor(Kind.BLOWUP_EPS, u_params, eps=0.1),
                           np.array([0.1 + 1e-9, 0.5, 1.0]))
    assert near.u[0] > 1e6


def test_flux_ordering_on_shared_grid(u_params):
    r = geometric_grid(1e-3, 1.0, 32)
    profiles = [evaluate_family(FamilyDescriptor(Kind.REGULAR_FLUX_K, u_params, k=k), r).u
                for k in (0.5, 1.0, 2.0, 4.0)]
    strong = evaluate_family(FamilyDescriptor(Kind.STRONG_SINGULAR, u_params), r).u
    for lower, upper in zip(profiles, profiles[1:] + [strong]):
        assert np.all(lower[:-1] < upper[:-1])


def test_asymptotic_profiles(u_params):
    r = np.array([1e-15])
    desc = FamilyDescriptor(Kind.REGULAR_FLUX_K, u_params, k=2.0)
    prof = evaluate_family(desc, np.array([1e-15, 1.0]))
    assert prof.u[0] / asymptotic_profile(desc, r)[0] == pytest.approx(1.0, abs=1e-3)
    strong = FamilyDescriptor(Kind.STRONG_SINGULAR, u_params)
    assert asymptotic_profile(strong, r)[0] == pytest.approx(0.5e30)
    with pytest.raises(DomainError):
        asymptotic_profile(desc, np.array([0.5]))
    with pytest.raises(RegimeError):
        asymptotic_profile(FamilyDescriptor(Kind.BLOWUP_EPS, u_params, eps=0.1), r)


@pytest.mark.parametrize("n,p", [(3, 2.0), (4, 2.0), (4, 3.0)])
def test_critical_profile_constant_matches_the_exact_gradient(n, p):
    prm = ProblemParams(n, p, n * (p - 1) / (n - 1))
    desc = FamilyDescriptor(Kind.CRITICAL_NEGATIVE_PROFILE, prm)
    for r in (1e-10, 1e-40, 1e-100):
        h = 1e-6 * r
        slope = (asymptotic_profile(desc, np.array([r + h]))[0]
                 - asymptotic_profile(desc, np.array([r - h]))[0]) / (2 * h)
        exact = float(u_prime_exact(prm, r, 0.0, "negative"))
        assert abs(slope / exact - 1.0) < 3.0 / math.log(1 / r)


def test_critical_profile_constant_at_p_equal_n():
    prm = ProblemParams(3, 3.0, 3.0)
    assert critical_profile_constant(prm) == 2.0
    r = 1e-30
    exact = float(u_prime_exact(prm, r, 0.0, "negative"))
    assert exact * r * math.log(1 / r) == pytest.approx(2.0, rel=1e-12)


def test_mu_p_normalization():
    assert mu_p(ProblemParams(3, 2, 1.2), 0.5) == pytest.approx(2.0)
    assert mu_p(ProblemParams(3, 3, 2.5), math.e) == pytest.approx(-1.0)
    assert flux_normalization(ProblemParams(3, 2, 1.2)) == 1.0


def test_descriptor_validation(u_params):
    with pytest.raises(RegimeError):
        FamilyDescriptor(Kind.STRONG_SINGULAR, ProblemParams(3, 2, 1.6))
    with pytest.raises(RegimeError):
        FamilyDescriptor(Kind.SINGULAR_NEGATIVE_V, u_params)
    with pytest.raises(ValueError):
        FamilyDescriptor(Kind.REGULAR_FLUX_K, u_params, k=-1.0)
    with pytest.raises(ValueError):
        FamilyDescriptor(Kind.BLOWUP_EPS, u_params, eps=1.5)
    with pytest.raises(RegimeError):
        FamilyDescriptor(Kind.STRONG_SINGULAR, ProblemParams(2, 3, 2.5))


def test_domain_errors(u_params):
    with pytest.raises(DomainError):
        evaluate_family(FamilyDescriptor(Kind.BLOWUP_EPS, u_params, eps=0.1), np.array([0.1, 0.5]))
    with pytest.raises(DomainError):
        evaluate_family(FamilyDescriptor(Kind.STRONG_SINGULAR, u_params), np.array([0.5, 2.0]))
    with pytest.raises(DomainError):
        evaluate_family(FamilyDescriptor(Kind.CRITICAL_NEGATIVE_PROFILE, ProblemParams(3, 2, 1.5)),
                        np.array([0.1, 0.2]))


def test_csv_round_trip(u_params):
    prof = evaluate_family(FamilyDescriptor(Kind.STRONG_SINGULAR, u_params), geometric_grid(0.01, 1, 8))
    text = prof.to_csv()
    assert text.splitlines()[0] == "# family=StrongSingular n=3 p=2.0 q=1.3333333333333333"
    back = profile_from_csv(text)
    assert np.array_equal(back.r, prof.r) and np.array_equal(back.u, prof.u)
    assert np.array_equal(back.du, prof.du)
    assert back.metadata["family"] == "StrongSingular"


def test_json_schema(u_params):
    import json
    prof = evaluate_family(FamilyDescriptor(Kind.GLOBAL_KM, u_params, k=1.0, M=0.0), np.array([0.5, 1.0]))
    record = json.loads(prof.to_json())
    assert record["schema_version"] == 1
    assert record["domain"] == [0.0, "inf"]
    assert record["metadata"]["k"] == 1.0


@pytest.mark.parametrize("text,line", [
    ("r,u,du\n1,2\n", 2),
    ("# a=1\nr,x,du\n1,2,3\n", 2),
    ("r,u,du\n1,2,3\n2,abc,4\n", 3),
    ("# bad-token\nr,u,du\n", 1),
])
def test_malformed_csv(text, line):
    with pytest.raises(ProfileFormatError) as info:
        profile_from_csv(text)
    assert info.value.line == line


def test_profile_validation():
    with pytest.raises(ValueError):
        RadialProfile([0.2, 0.1], [1, 2], [1, 2])
    with pytest.raises(ValueError):
        RadialProfile([0.1, 0.2], [1, 2], [1])


@settings(max_examples=25, deadline=None)
@given(subcritical_params(), st.floats(0.2, 5.0))
def test_regular_family_between_zero_and_strong(params, k):
    r = geometric_grid(0.05, 1.0, 16)
    reg = evaluate_family(FamilyDescriptor(Kind.REGULAR_FLUX_K, params, k=k), r)
    strong = evaluate_family(FamilyDescriptor(Kind.STRONG_SINGULAR, params), r)
    assert np.all(reg.u[:-1] > 0)
    assert np.all(reg.u[:-1] < strong.u[:-1])
    assert np.all(reg.du < 0)


@settings(max_examples=25, deadline=None)
@given(subcritical_params())
def test_strong_family_matches_amplitude(params):
    r = np.array([1e-3, 0.5])
    desc = FamilyDescriptor(Kind.SINGULAR_POSITIVE_U, params)
    du = family_du(desc)(r)
    beta = (params.p - params.q) / params.gap
    expected = -beta * lambda_singular(params) * r ** (-beta - 1)
    assert rel_err(du, expected) < 1e-10
    assert coefficient_b(params) > 0
