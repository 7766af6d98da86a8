import math

import numpy as np
import pytest

from magflow.examples.cohomology import (ClosedCurve, HomotopyError, cohomology_constant,
                                         cohomology_constant_from_flux, half_plane_primitive,
                                         homology_relation_check, line_integral, magnetic_length,
                                         orbit_curve, perturbed_curves, revolution_primitive,
                                         riemannian_length)
from magflow.geom import Box, DomainError, MagneticIntensity, half_plane, tanh_cylinder
from magflow.hyperbolic import closed_orbit_length_formula


# --- cohomology constant -------------------------------------------------------------

def test_cohomology_constant_zero_field():
    chart = tanh_cylinder()
    c = cohomology_constant(chart, MagneticIntensity.constant(0.0), -2, Box(-2, 2, 0, 2 * math.pi))
    assert c == 0.0


def test_hyperbolic_bookkeeping():
    # constant b on a closed hyperbolic surface: int b Omega = b * (-2 pi chi)
    for chi in (-2, -4):
        for b in (0.3, -0.7):
            assert cohomology_constant_from_flux(b * (-2 * math.pi * chi), chi) == pytest.approx(-b)


def test_cohomology_on_area_region():
    # flux of b = 1 over a region of area 0.5 in the half-plane
    c = cohomology_constant(half_plane(), MagneticIntensity.constant(1.0), -2, Box(0, 1, 1, 2))
    assert c == pytest.approx(0.5 / (2 * math.pi * -2), rel=1e-12)


def test_doubled_burns_constant_vanishes(burns):
    assert burns.cohomology_constant(-2) == 0.0


def test_zero_euler_characteristic():
    with pytest.raises(DomainError):
        cohomology_constant(tanh_cylinder(), MagneticIntensity.constant(1.0), 0)
    with pytest.raises(DomainError):
        cohomology_constant_from_flux(1.0, 0)
    with pytest.raises(DomainError):
        homology_relation_check(1.0, 1.0, 0.0, 0.0, 0)


def test_homology_relation_examples():
    A = 5.0
    assert homology_relation_check(A, A, 0.4, -0.4, -2) == 0.0
    assert homology_relation_check(3.0, 7.5, 0.0, 0.0, -2) == pytest.approx(4.5)
    assert homology_relation_check(4 * math.pi, 4 * math.pi, 0.3, 0.3, -2) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        homology_relation_check(-1.0, 1.0, 0.0, 0.0, -2)


# --- primitives ----------------------------------------------------------------------

def test_half_plane_primitive_fd():
    prim = half_plane_primitive(half_plane(), 0.5)
    assert prim.fd_error(Box(-2, 2, 0.3, 3)) < 1e-6


def test_revolution_primitive_fd(burns):
    chart = burns.plus.chart
    p = burns.profile
    prim = revolution_primitive(chart, burns.plus.intensity,
                                knots=(-p.delta2, -p.delta1, -p.delta, p.delta, p.delta1, p.delta2))
    for box in (Box(-0.9, 0.9, 0.0, 6.0), Box(2.0, 8.0, 0.0, 6.0), Box(-14, -9, 1.0, 2.0)):
        assert prim.fd_error(box, n=15) < 1e-6


def test_revolution_primitive_matches_flux(burns):
    # Stokes on the band |s| <= delta4: int b Omega = 2 pi (B(delta4) - B(-delta4))
    d4 = burns.bump.delta4
    prim = revolution_primitive(burns.plus.chart, burns.plus.intensity,
                                knots=(-1.0, -0.5, -0.05, 0.05, 0.5, 1.0))
    B = prim(np.array([-d4, d4]), np.zeros(2))[1]
    assert 2 * math.pi * (B[1] - B[0]) == pytest.approx(burns.copy_integral(1.0), rel=1e-11)


def test_revolution_primitive_closed_form():
    b = 0.3
    prim = revolution_primitive(tanh_cylinder(), MagneticIntensity.constant(b))
    s = np.array([-2.0, 0.0, 1.5])
    P, Q = prim(s, 0.0 * s)
    assert np.allclose(Q, b * np.sinh(s), atol=1e-13) and np.all(P == 0)
    assert prim(1.0, 0.2)[1] == pytest.approx(b * math.sinh(1.0), abs=1e-13)


def test_wrong_primitive_is_detected():
    from magflow.examples.cohomology import ExactPrimitive
    bad = ExactPrimitive(half_plane(), MagneticIntensity.constant(0.5), lambda x, y: (0.5 / y ** 2, 0 * x))
    assert bad.fd_error(Box(-1, 1, 0.5, 2)) > 1e-2


# --- magnetic length -----------------------------------------------------------------

@pytest.fixture(scope="module")
def setup(orbit_half):
    chart = orbit_half.trajectory.system.chart
    prim = half_plane_primitive(chart, 0.5)
    ref = orbit_curve(orbit_half)
    return chart, prim, ref


def test_reference_length(setup, orbit_half):
    chart, prim, ref = setup
    L = magnetic_length(prim, ref, ref)
    assert L == pytest.approx(riemannian_length(chart, ref), abs=1e-14)
    assert L == pytest.approx(closed_orbit_length_formula(2.0, 0.5), abs=1e-8)


def test_zero_field_gives_riemannian_length(orbit_half, cylinder2):
    chart = half_plane()
    zero = half_plane_primitive(chart, 0.0)
    ref = orbit_curve(orbit_half)
    for c in perturbed_curves(orbit_half, cylinder2, 5, seed=1):
        assert magnetic_length(zero, c, ref) == riemannian_length(chart, c)


def test_minimality_over_perturbations(setup, orbit_half, cylinder2):
    chart, prim, ref = setup
    L_ref = magnetic_length(prim, ref, ref)
    gaps = [magnetic_length(prim, c, ref) - L_ref
            for c in perturbed_curves(orbit_half, cylinder2, 200, seed=0)]
    assert min(gaps) >= -1e-9
    assert max(gaps) > 1e-4


def test_opposite_flux_sign_is_not_minimal(setup, orbit_half, cylinder2):
    # with the flux added instead of subtracted the orbit is no longer a minimiser
    chart, prim, ref = setup
    L_ref = riemannian_length(chart, ref)
    flipped = [riemannian_length(chart, c) + line_integral(prim, c) - line_integral(prim, ref)
               for c in perturbed_curves(orbit_half, cylinder2, 200, seed=0)]
    assert min(flipped) - L_ref < -1e-3


def test_perturbations_stay_within_amplitude(orbit_half, cylinder2):
    x0, y0 = orbit_half.initial.point
    alpha0 = math.atan2(y0, x0)
    for c in perturbed_curves(orbit_half, cylinder2, 20, seed=4, amplitude=0.05):
        X, _ = c.samples()
        assert np.max(np.abs(np.arctan2(X[:, 1], X[:, 0]) - alpha0)) <= 0.05 + 1e-12


def test_curves_close_under_deck(orbit_half, cylinder2):
    for c in perturbed_curves(orbit_half, cylinder2, 3, seed=2):
        a, b = c.position(np.array([0.0])), c.position(np.array([1.0]))
        assert np.allclose(b, cylinder2.factor() * a, rtol=1e-12)


def test_reparameterisation_invariance(setup, orbit_half, cylinder2):
    chart, prim, ref = setup
    sigma = lambda t: t + 0.05 * np.sin(2 * np.pi * t)  # noqa: E731
    dsigma = lambda t: 1 + 0.1 * np.pi * np.cos(2 * np.pi * t)  # noqa: E731
    for c in perturbed_curves(orbit_half, cylinder2, 5, seed=9):
        L = magnetic_length(prim, c, ref)
        L2 = magnetic_length(prim, c.reparameterized(sigma, dsigma), ref)
        assert L2 == pytest.approx(L, abs=1e-9)


def test_winding_mismatch(setup):
    chart, prim, ref = setup
    other = ClosedCurve(ref.position, ref.velocity, winding=2, n_samples=ref.n_samples)
    with pytest.raises(HomotopyError):
        magnetic_length(prim, other, ref)
