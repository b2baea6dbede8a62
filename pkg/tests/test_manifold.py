import math

import numpy as np
import pytest

from pgrad.bounds import bernstein_residual_euclidean, calibrate_lambda
from pgrad.errors import DomainError
from pgrad.manifold import (CurvatureBounds, ModelSpace, barrier_offset, barrier_scale,
                            bernstein_residual_manifold, calibrate_manifold_barrier,
                            gradient_bound_manifold, integrate_hyperbolic_direct,
                            p_harmonic_log_gradient, solve_radial_hyperbolic)
from pgrad.numerics import geometric_grid
from pgrad.params import ProblemParams
from pgrad.radial_families import FamilyDescriptor, FamilyKind, evaluate_family, family_du

from conftest import rel_err

Kind = FamilyKind


@pytest.mark.parametrize("triple", [(3, 2, 4 / 3), (4, 3, 2.4), (3, 1.5, 0.9)])
def test_flat_barrier_is_the_euclidean_one(triple):
    params = ProblemParams(*triple)
    curv = CurvatureBounds(0.0, 0.0, params.p)
    lam = 2.0 * calibrate_lambda(params)
    flat = bernstein_residual_euclidean(params, 1.0, lam)
    curved = bernstein_residual_manifold(params, curv, 1.0, lam, 0.0)
    assert np.array_equal(flat.residual_grid, curved.residual_grid)
    assert flat.endpoint_residual == curved.endpoint_residual


def test_flat_calibration_matches(u_params):
    barrier = calibrate_manifold_barrier(u_params, CurvatureBounds(0.0, 0.0, 2.0), 1.0)
    assert barrier.mu == 0.0
    assert barrier.lam == pytest.approx(calibrate_lambda(u_params), rel=3e-6)


def test_barrier_sweep():
    for n in (3, 4):
        for p in (1.5, 2.0, 3.0):
            qc = n * (p - 1) / (n - 1)
            for q in (p - 1 + 0.3 * (qc - p + 1), qc, 0.5 * (qc + p)):
                params = ProblemParams(n, p, q)
                for B in (0.0, 1.0, 2.0):
                    for R in (1.0, 4.0):
                        barrier = calibrate_manifold_barrier(params, CurvatureBounds(B, B, p), R)
                        assert barrier.report.residual_min >= 0.0
                        assert barrier.mu == pytest.approx(barrier_offset(params, CurvatureBounds(B, B, p)))


def test_half_offset_with_small_scale_fails(u_params):
    curv = CurvatureBounds(1.0, 1.0, 2.0)
    mu = 0.5 * barrier_offset(u_params, curv)
    assert bernstein_residual_manifold(u_params, curv, 1.0, 1e-3, mu).residual_min < 0.0


def test_barrier_scale_branches(u_params):
    assert barrier_scale(u_params, CurvatureBounds(0.0, 0.0, 2.0), 2.0) == pytest.approx(2.0**6)
    assert barrier_scale(u_params, CurvatureBounds(10.0, 0.0, 2.0), 1.0) == pytest.approx(100.0**3)


def test_manifold_gradient_bound_flat(u_params):
    d = 0.5
    bound = gradient_bound_manifold(u_params, CurvatureBounds(0.0, 0.0, 2.0), d)
    c = calibrate_lambda(u_params) + 2.0**3
    assert bound == pytest.approx(c * d**-6, rel=3e-6)


def test_manifold_gradient_bound_plateau(u_params):
    d = 4096.0
    one = gradient_bound_manifold(u_params, CurvatureBounds(1.0, 1.0, 2.0), d)
    two = gradient_bound_manifold(u_params, CurvatureBounds(2.0, 2.0, 2.0), d)
    assert two / one == pytest.approx(2.0**6, rel=1e-4)
    barrier = calibrate_manifold_barrier(u_params, CurvatureBounds(1.0, 1.0, 2.0), d)
    assert one == pytest.approx(barrier.c + 8.0, rel=1e-12)
    with pytest.raises(ValueError):
        gradient_bound_manifold(u_params, CurvatureBounds(1.0, 1.0, 2.0), 0.0)


def test_model_space_geometry():
    model = ModelSpace(3, 1.0)
    r = np.array([1e-3, 1.0, 50.0, 800.0])
    assert rel_err(model.log_scale(r[:3]), np.log(np.sinh(r[:3]))) < 1e-13
    assert model.log_scale(r)[-1] == pytest.approx(800.0 - math.log(2.0), rel=1e-15)
    assert rel_err(model.mean_curvature(r), 2.0 / np.tanh(r)) < 1e-15
    assert ModelSpace(3, 0.0).log_scale(2.0) == pytest.approx(math.log(2.0))
    with pytest.raises(ValueError):
        ModelSpace(1, 1.0)


@pytest.mark.parametrize("desc", [
    FamilyDescriptor(Kind.REGULAR_FLUX_K, ProblemParams(3, 2, 4 / 3), k=2.0),
    FamilyDescriptor(Kind.SINGULAR_POSITIVE_U, ProblemParams(3, 2, 4 / 3)),
    FamilyDescriptor(Kind.SINGULAR_NEGATIVE_V, ProblemParams(4, 2, 1.5)),
])
def test_flat_model_space_reproduces_families(desc):
    r = geometric_grid(1e-3, 1.0, 16)
    K_const = 0.0 if desc.k is None else desc.k ** (-desc.params.gap)
    prof = solve_radial_hyperbolic(desc.params, ModelSpace(desc.params.n, 0.0), K_const, r)
    assert rel_err(prof.du, family_du(desc)(r)) < 1e-12
    exact_u = evaluate_family(desc, r).u if desc.kind is Kind.REGULAR_FLUX_K else None
    if exact_u is not None:
        assert np.max(np.abs(prof.u - exact_u)) < 1e-12 * np.max(np.abs(exact_u))


def test_small_curvature_approaches_flat(u_params):
    r = geometric_grid(1e-3, 1.0, 16)
    flat = solve_radial_hyperbolic(u_params, ModelSpace(3, 0.0), 0.5, r)
    curved = solve_radial_hyperbolic(u_params, ModelSpace(3, 1e-6), 0.5, r)
    assert rel_err(curved.du, flat.du) < 1e-6


@pytest.mark.parametrize("triple,K_const", [((3, 2, 4 / 3), None), ((3, 2, 4 / 3), 0.5),
                                             ((4, 3, 2.4), None), ((3, 2, 1.8), None)])
def test_quadrature_route_matches_direct_ode(triple, K_const):
    params = ProblemParams(*triple)
    model = ModelSpace(params.n, 1.0)
    r = np.geomspace(0.1, 30.0, 40)
    prof = solve_radial_hyperbolic(params, model, K_const, r)
    if K_const is None:
        # the global gradient tends to a plateau; integrate inward, the stable direction
        direct = integrate_hyperbolic_direct(params, model, r[-1], float(prof.du[-1]), r[::-1])[::-1]
    else:
        # decaying gradients sink below the absolute tolerance; integrate outward
        direct = integrate_hyperbolic_direct(params, model, r[0], float(prof.du[0]), r)
    scale = np.max(np.abs(prof.du))
    resolved = np.abs(prof.du) > 1e-6 * scale
    assert rel_err(direct[resolved], prof.du[resolved]) < 1e-8
    assert np.max(np.abs(direct - prof.du)) < 1e-10 * scale
    w = np.exp((params.n - 1) * model.log_scale(r)) * np.abs(prof.du) ** (params.p - 2) * prof.du
    assert np.all(np.diff(w) >= 0)


@pytest.mark.parametrize("triple", [(3, 2, 4 / 3), (4, 3, 2.4), (3, 2, 1.8)])
def test_global_solution_plateau(triple):
    params = ProblemParams(*triple)
    r = np.geomspace(1.0, 1e3, 64)
    for B in (1.0, 2.0, 4.0):
        prof = solve_radial_hyperbolic(params, ModelSpace(params.n, B), None, r)
        plateau = ((params.n - 1) * B) ** (1 / params.gap)
        assert abs(prof.du[-1]) == pytest.approx(plateau, rel=1e-10)
        assert np.all(np.isfinite(prof.du))


def test_global_solution_scaling(u_params):
    r = np.geomspace(1.0, 100.0, 16)
    one = solve_radial_hyperbolic(u_params, ModelSpace(3, 1.0), None, 2.0 * r)
    two = solve_radial_hyperbolic(u_params, ModelSpace(3, 2.0), None, r)
    assert rel_err(np.abs(two.du), 2.0**3 * np.abs(one.du)) < 1e-10


def test_hyperbolic_grid_validation(u_params):
    with pytest.raises(DomainError):
        solve_radial_hyperbolic(u_params, ModelSpace(3, 1.0), None, np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        solve_radial_hyperbolic(u_params, ModelSpace(4, 1.0), None, np.array([1.0, 2.0]))


def green_oracle(B, r):
    """N = 3, p = 2: v = B (coth(Br) - 1), so |(ln v)'| = B / (sinh^2(Br) (coth(Br) - 1))."""
    return B / (np.sinh(B * r) ** 2 * (2.0 / np.expm1(2.0 * B * r)))


def test_p_harmonic_against_green_function():
    r = np.geomspace(0.05, 15.0, 30)
    report = p_harmonic_log_gradient(ModelSpace(3, 1.0), 2.0, r)
    assert report.asymptotic_gradient == pytest.approx(2.0, rel=1e-2)
    assert report.sup_gradient == pytest.approx(float(np.max(green_oracle(1.0, r))), rel=1e-10)
    log_v = np.log(2.0 / np.expm1(2.0 * r))
    assert rel_err(report.log_v - report.log_v[-1], log_v - log_v[-1]) < 1e-9


def test_p_harmonic_flat():
    r = np.geomspace(1.0, 100.0, 8)
    report = p_harmonic_log_gradient(ModelSpace(3, 0.0), 2.0, r)
    assert report.sup_log_gradient is None
    assert report.sup_gradient == pytest.approx(1.0)
    with pytest.raises(DomainError):
        p_harmonic_log_gradient(ModelSpace(3, 0.0), 3.0, r)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("B", [0.5, 1.0, 2.0])
def test_p_harmonic_harnack(p, B):
    r = np.geomspace(1.0, 40.0 / B, 40)
    report = p_harmonic_log_gradient(ModelSpace(3, B), p, r)
    assert math.isfinite(report.kappa)
    assert report.sup_log_gradient <= 3.0 * (p - 1) * report.kappa
    kappa = report.kappa
    centre = len(r) // 2
    d = np.abs(r - r[centre])
    lo = report.log_v[centre] - kappa * B * d
    hi = report.log_v[centre] + kappa * B * d
    assert np.all(lo <= report.log_v + 1e-12) and np.all(report.log_v <= hi + 1e-12)
